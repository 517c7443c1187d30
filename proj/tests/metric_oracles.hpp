#pragma once

// Brute-force references for the evaluation metrics.

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

namespace oracle {

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

// O(n^2): rank = 1 + #smaller + (#equal - 1) / 2.
inline std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        double less = 0, equal = 0;
        for (double w : v) {
            if (w < v[i]) less += 1;
            if (w == v[i]) equal += 1;
        }
        r[i] = 1 + less + (equal - 1) / 2;
    }
    return r;
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    return pearson(ranks(x), ranks(y));
}

inline double root_mse(const std::vector<double>& x, const std::vector<double>& y) {
    double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
    return std::sqrt(s / static_cast<double>(x.size()));
}

// Every positive/negative pair, ties count half.
inline std::optional<double> auc_pairs(const std::vector<double>& pos, const std::vector<double>& neg) {
    if (pos.empty() || neg.empty()) return std::nullopt;
    double wins = 0;
    for (double p : pos)
        for (double q : neg) wins += p > q ? 1.0 : (p == q ? 0.5 : 0.0);
    return wins / static_cast<double>(pos.size() * neg.size());
}

// Area under the empirical ROC curve by the trapezoid rule over all thresholds.
inline std::optional<double> auc_trapezoid(const std::vector<double>& pos, const std::vector<double>& neg) {
    if (pos.empty() || neg.empty()) return std::nullopt;
    std::vector<double> thresholds(pos);
    thresholds.insert(thresholds.end(), neg.begin(), neg.end());
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    double area = 0, prev_tpr = 0, prev_fpr = 0;
    for (double t : thresholds) {
        double tp = 0, fp = 0;
        for (double p : pos) tp += p >= t;
        for (double q : neg) fp += q >= t;
        const double tpr = tp / static_cast<double>(pos.size()), fpr = fp / static_cast<double>(neg.size());
        area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2;
        prev_tpr = tpr;
        prev_fpr = fpr;
    }
    return area;
}

struct Krasula {
    std::optional<double> ds, bw, c0;
};

inline Krasula krasula(const std::vector<double>& pred, const std::vector<double>& mos, double threshold) {
    std::vector<double> diff, sim, bw, wb;
    double correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        for (std::size_t j = i + 1; j < pred.size(); ++j) {
            const double dm = mos[i] - mos[j], dp = pred[i] - pred[j];
            if (std::abs(dm) > threshold) {
                diff.push_back(std::abs(dp));
                const double o = dm > 0 ? dp : -dp;
                bw.push_back(o);
                wb.push_back(-o);
                correct += o > 0;
            } else {
                sim.push_back(std::abs(dp));
            }
        }
    }
    Krasula k{auc_pairs(diff, sim), auc_pairs(bw, wb), std::nullopt};
    if (!bw.empty()) k.c0 = correct / static_cast<double>(bw.size());
    return k;
}

}  // namespace oracle
