#include "ahgcn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace ahgcn::metrics {

namespace {

void require_same_length(std::span<const double> x, std::span<const double> y, std::size_t min,
                         const char* what) {
    if (x.size() != y.size()) {
        throw std::invalid_argument(std::string(what) + ": lengths differ (" + std::to_string(x.size()) +
                                    " vs " + std::to_string(y.size()) + ")");
    }
    if (x.size() < min) {
        throw std::invalid_argument(std::string(what) + ": needs at least " + std::to_string(min) +
                                    " samples");
    }
}

double mean_of(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev_of(std::span<const double> v) {
    const double m = mean_of(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(v.size()));
}

bool is_constant(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

using Point = std::array<double, 5>;
using Objective = std::function<double(const Point&)>;

struct Simplex {
    std::array<Point, 6> vertices;
    std::array<double, 6> values;
};

double diameter(const Simplex& s) {
    double worst = 0.0;
    for (std::size_t i = 1; i < s.vertices.size(); ++i) {
        double d2 = 0.0;
        for (std::size_t k = 0; k < 5; ++k) {
            const double d = s.vertices[i][k] - s.vertices[0][k];
            d2 += d * d;
        }
        worst = std::max(worst, std::sqrt(d2));
    }
    return worst;
}

// Standard Nelder-Mead (reflection 1, expansion 2, contraction 1/2, shrink 1/2).
// Returns the best vertex; `iterations` is decremented by the work done.
Point nelder_mead(const Objective& f, const Point& start, const Point& steps, double tolerance,
                  std::size_t& iterations, double& best_value) {
    auto eval = [&](const Point& p) {
        const double v = f(p);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };
    Simplex s;
    s.vertices[0] = start;
    for (std::size_t k = 0; k < 5; ++k) {
        s.vertices[k + 1] = start;
        s.vertices[k + 1][k] += steps[k];
    }
    for (std::size_t i = 0; i < 6; ++i) s.values[i] = eval(s.vertices[i]);

    std::array<std::size_t, 6> order{};
    auto sort_simplex = [&] {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return s.values[a] < s.values[b]; });
        Simplex sorted;
        for (std::size_t i = 0; i < 6; ++i) {
            sorted.vertices[i] = s.vertices[order[i]];
            sorted.values[i] = s.values[order[i]];
        }
        s = sorted;
    };

    sort_simplex();
    while (iterations > 0 && diameter(s) >= tolerance) {
        --iterations;
        Point centroid{};
        for (std::size_t i = 0; i < 5; ++i) {
            for (std::size_t k = 0; k < 5; ++k) centroid[k] += s.vertices[i][k] / 5.0;
        }
        auto along = [&](double t) {
            Point p;
            for (std::size_t k = 0; k < 5; ++k) p[k] = centroid[k] + t * (s.vertices[5][k] - centroid[k]);
            return p;
        };
        const Point reflected = along(-1.0);
        const double fr = eval(reflected);
        if (fr < s.values[0]) {
            const Point expanded = along(-2.0);
            const double fe = eval(expanded);
            if (fe < fr) {
                s.vertices[5] = expanded;
                s.values[5] = fe;
            } else {
                s.vertices[5] = reflected;
                s.values[5] = fr;
            }
        } else if (fr < s.values[4]) {
            s.vertices[5] = reflected;
            s.values[5] = fr;
        } else {
            const bool outside = fr < s.values[5];
            const Point contracted = along(outside ? -0.5 : 0.5);
            const double fc = eval(contracted);
            if (fc < (outside ? fr : s.values[5])) {
                s.vertices[5] = contracted;
                s.values[5] = fc;
            } else {
                for (std::size_t i = 1; i < 6; ++i) {
                    for (std::size_t k = 0; k < 5; ++k) {
                        s.vertices[i][k] = s.vertices[0][k] + 0.5 * (s.vertices[i][k] - s.vertices[0][k]);
                    }
                    s.values[i] = eval(s.vertices[i]);
                }
            }
        }
        sort_simplex();
    }
    best_value = s.values[0];
    return s.vertices[0];
}

// Restarts from the incumbent until a restart no longer improves it.
Point minimise(const Objective& f, Point start, const Point& scale, const FitOptions& options,
               std::size_t& budget) {
    double best = f(start);
    if (!std::isfinite(best)) best = std::numeric_limits<double>::infinity();
    for (int restart = 0; restart < 50 && budget > 0; ++restart) {
        Point steps;
        for (std::size_t k = 0; k < 5; ++k) {
            const double rel = 0.1 * std::abs(start[k]);
            steps[k] = (rel > 1e-3 * scale[k]) ? rel : 0.1 * scale[k];
            if (restart > 0) steps[k] = std::max(steps[k] * 0.1, 1e-6 * scale[k]);
        }
        double value = 0.0;
        const Point candidate = nelder_mead(f, start, steps, options.diameter_tolerance, budget, value);
        if (!(value < best)) break;
        const double gain = best - value;
        start = candidate;
        best = value;
        if (restart > 0 && gain <= 1e-12 * best) break;
    }
    return start;
}

}  // namespace

double logistic_map(double q, const LogisticParams& p) {
    const auto& b = p.beta;
    return b[0] * (0.5 - 1.0 / (1.0 + std::exp(b[1] * (q - b[2])))) + b[3] * q + b[4];
}

std::vector<double> logistic_map(std::span<const double> q, const LogisticParams& p) {
    std::vector<double> out(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) out[i] = logistic_map(q[i], p);
    return out;
}

LogisticParams fit_logistic(std::span<const double> preds, std::span<const double> mos,
                            const FitOptions& options) {
    require_same_length(preds, mos, 5, "fit_logistic");
    if (is_constant(preds)) throw std::invalid_argument("fit_logistic: predictions are constant");

    const Objective sse = [&](const Point& beta) {
        LogisticParams p{beta};
        double acc = 0.0;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            const double r = logistic_map(preds[i], p) - mos[i];
            acc += r * r;
        }
        return acc;
    };

    const double pred_mean = mean_of(preds);
    const double pred_std = stddev_of(preds);
    const double mos_mean = mean_of(mos);
    const double mos_std = std::max(stddev_of(mos), 1e-12);
    const auto [mos_lo, mos_hi] = std::minmax_element(mos.begin(), mos.end());
    const double mos_range = std::max(*mos_hi - *mos_lo, 1e-12);

    double cov = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) cov += (preds[i] - pred_mean) * (mos[i] - mos_mean);
    cov /= static_cast<double>(preds.size());
    const double slope = cov / (pred_std * pred_std);
    const double intercept = mos_mean - slope * pred_mean;

    const Point scale{mos_range, 1.0 / pred_std, pred_std, mos_std / pred_std, mos_std};
    std::size_t budget = options.max_iterations;
    const Point heuristic{mos_range, 1.0 / pred_std, pred_mean, 0.0, mos_mean};
    const Point affine{0.0, 1.0 / pred_std, pred_mean, slope, intercept};

    std::size_t first_budget = budget / 2;
    const Point a = minimise(sse, heuristic, scale, options, first_budget);
    std::size_t second_budget = budget - budget / 2 + first_budget;
    const Point b = minimise(sse, affine, scale, options, second_budget);
    return LogisticParams{sse(a) <= sse(b) ? a : b};
}

double plcc(std::span<const double> x, std::span<const double> y) {
    require_same_length(x, y, 2, "plcc");
    if (is_constant(x) || is_constant(y)) throw std::invalid_argument("plcc: constant input");
    const double mx = mean_of(x), my = mean_of(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double rmse(std::span<const double> x, std::span<const double> y) {
    require_same_length(x, y, 1, "rmse");
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += (x[i] - y[i]) * (x[i] - y[i]);
    return std::sqrt(acc / static_cast<double>(x.size()));
}

std::vector<double> average_ranks(std::span<const double> values) {
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    for (std::size_t start = 0; start < idx.size();) {
        std::size_t end = start;
        while (end + 1 < idx.size() && values[idx[end + 1]] == values[idx[start]]) ++end;
        const double rank = (static_cast<double>(start) + static_cast<double>(end)) / 2.0 + 1.0;
        for (std::size_t k = start; k <= end; ++k) ranks[idx[k]] = rank;
        start = end + 1;
    }
    return ranks;
}

double srocc(std::span<const double> x, std::span<const double> y) {
    require_same_length(x, y, 2, "srocc");
    if (is_constant(x) || is_constant(y)) throw std::invalid_argument("srocc: constant input");
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    return plcc(rx, ry);
}

std::optional<double> roc_auc(std::span<const double> positives, std::span<const double> negatives) {
    if (positives.empty() || negatives.empty()) return std::nullopt;
    std::vector<double> pooled(positives.begin(), positives.end());
    pooled.insert(pooled.end(), negatives.begin(), negatives.end());
    const auto ranks = average_ranks(pooled);
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < positives.size(); ++i) rank_sum += ranks[i];
    const double np = static_cast<double>(positives.size());
    const double nn = static_cast<double>(negatives.size());
    return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

std::vector<PairLabel> threshold_pair_labels(std::span<const double> mos, double threshold) {
    std::vector<PairLabel> labels;
    for (std::size_t i = 0; i < mos.size(); ++i) {
        for (std::size_t j = i + 1; j < mos.size(); ++j) {
            const double d = mos[i] - mos[j];
            labels.push_back({i, j, std::abs(d) > threshold, d > 0.0});
        }
    }
    return labels;
}

KrasulaResult krasula_analysis(std::span<const double> preds, std::span<const PairLabel> labels) {
    if (preds.size() < 2) throw std::invalid_argument("krasula_analysis: needs at least 2 samples");
    std::vector<double> different, similar, better_minus_worse, worse_minus_better;
    std::size_t correct = 0;
    for (const PairLabel& l : labels) {
        if (l.i >= preds.size() || l.j >= preds.size() || l.i == l.j) {
            throw std::invalid_argument("krasula_analysis: pair label references an invalid sample");
        }
        const double delta = preds[l.i] - preds[l.j];
        if (l.different) {
            different.push_back(std::abs(delta));
            const double oriented = l.i_better ? delta : -delta;
            better_minus_worse.push_back(oriented);
            worse_minus_better.push_back(-oriented);
            if (oriented > 0.0) ++correct;
        } else {
            similar.push_back(std::abs(delta));
        }
    }
    KrasulaResult r;
    r.auc_ds = roc_auc(different, similar);
    r.auc_bw = roc_auc(better_minus_worse, worse_minus_better);
    if (!better_minus_worse.empty()) {
        r.c0 = static_cast<double>(correct) / static_cast<double>(better_minus_worse.size());
    }
    return r;
}

KrasulaResult krasula_analysis(std::span<const double> preds, std::span<const double> mos, double threshold) {
    require_same_length(preds, mos, 2, "krasula_analysis");
    const auto labels = threshold_pair_labels(mos, threshold);
    return krasula_analysis(preds, labels);
}

EvalReport evaluate_predictions(std::span<const std::string> ids, std::span<const double> preds,
                                std::span<const double> mos, double krasula_threshold,
                                const FitOptions& options) {
    require_same_length(preds, mos, 5, "evaluate_predictions");
    if (ids.size() != preds.size()) throw std::invalid_argument("evaluate_predictions: id count differs");
    EvalReport report;
    report.logistic = fit_logistic(preds, mos, options);
    const auto mapped = logistic_map(preds, report.logistic);
    report.plcc = is_constant(mapped) ? 0.0 : plcc(mapped, mos);
    report.srocc = srocc(preds, mos);
    report.rmse = rmse(mapped, mos);
    report.krasula = krasula_analysis(preds, mos, krasula_threshold);
    report.krasula_threshold = krasula_threshold;
    for (std::size_t i = 0; i < preds.size(); ++i) report.samples.push_back({ids[i], mos[i], preds[i], mapped[i]});
    return report;
}

std::string report_json(const EvalReport& report) {
    using nlohmann::json;
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json samples = json::array();
    for (const auto& s : report.samples) {
        samples.push_back({{"id", s.id}, {"mos", s.mos}, {"raw_pred", s.raw_pred}, {"mapped_pred", s.mapped_pred}});
    }
    const auto& b = report.logistic.beta;
    json doc = {
        {"plcc", report.plcc},
        {"srocc", report.srocc},
        {"rmse", report.rmse},
        {"logistic", {{"beta1", b[0]}, {"beta2", b[1]}, {"beta3", b[2]}, {"beta4", b[3]}, {"beta5", b[4]}}},
        {"krasula",
         {{"auc_ds", opt(report.krasula.auc_ds)},
          {"auc_bw", opt(report.krasula.auc_bw)},
          {"c0", opt(report.krasula.c0)},
          {"threshold", report.krasula_threshold}}},
        {"sample_count", report.samples.size()},
        {"samples", samples},
    };
    return doc.dump(2) + "\n";
}

std::string scatter_csv(const EvalReport& report) {
    std::string out = "id,mos,raw_pred,mapped_pred\n";
    char buf[128];
    for (const auto& s : report.samples) {
        std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g\n", s.mos, s.raw_pred, s.mapped_pred);
        out += s.id;
        out += buf;
    }
    return out;
}

}  // namespace ahgcn::metrics
