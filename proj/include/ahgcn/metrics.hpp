#pragma once

// IQA evaluation protocol: five-parameter logistic mapping of raw
// predictions, PLCC / SROCC / RMSE, and the pair-based Krasula analysis.

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ahgcn::metrics {

struct LogisticParams {
    std::array<double, 5> beta{0.0, 1.0, 0.0, 1.0, 0.0};
};

// beta1 * (1/2 - 1/(1 + exp(beta2 * (q - beta3)))) + beta4 * q + beta5
double logistic_map(double q, const LogisticParams& p);
std::vector<double> logistic_map(std::span<const double> q, const LogisticParams& p);

struct FitOptions {
    double diameter_tolerance = 1e-8;
    std::size_t max_iterations = 20000;
};

// Least-squares Nelder-Mead fit. The simplex is started both from the
// standard heuristic and from the best affine fit; the better result wins,
// so the mapped RMSE never exceeds the affine one.
LogisticParams fit_logistic(std::span<const double> preds, std::span<const double> mos,
                            const FitOptions& options = {});

double plcc(std::span<const double> x, std::span<const double> y);
double rmse(std::span<const double> x, std::span<const double> y);
double srocc(std::span<const double> x, std::span<const double> y);

// 1-based ranks, ties get the average of the positions they span.
std::vector<double> average_ranks(std::span<const double> values);

// Mann-Whitney estimate of P(positive > negative), ties counted 0.5.
// Empty classes give no value.
std::optional<double> roc_auc(std::span<const double> positives, std::span<const double> negatives);

// Label for the unordered pair (i, j), i < j.
struct PairLabel {
    std::size_t i = 0;
    std::size_t j = 0;
    bool different = false;
    bool i_better = false;  // meaningful only when different
};

// Pairs are "different" when |mos_i - mos_j| > threshold; direction from the MOS sign.
std::vector<PairLabel> threshold_pair_labels(std::span<const double> mos, double threshold);

struct KrasulaResult {
    std::optional<double> auc_ds;
    std::optional<double> auc_bw;
    std::optional<double> c0;
};

// AUC-DS scores pairs by |delta pred|; AUC-BW compares the better-minus-worse
// prediction difference of each different pair against its negation; C0 is
// the share of different pairs whose prediction difference has the MOS sign.
KrasulaResult krasula_analysis(std::span<const double> preds, std::span<const PairLabel> labels);
KrasulaResult krasula_analysis(std::span<const double> preds, std::span<const double> mos,
                               double threshold);

struct SampleRow {
    std::string id;
    double mos = 0.0;
    double raw_pred = 0.0;
    double mapped_pred = 0.0;
};

struct EvalReport {
    double plcc = 0.0;
    double srocc = 0.0;
    double rmse = 0.0;
    LogisticParams logistic;
    KrasulaResult krasula;
    double krasula_threshold = 0.0;
    std::vector<SampleRow> samples;
};

EvalReport evaluate_predictions(std::span<const std::string> ids, std::span<const double> preds,
                                std::span<const double> mos, double krasula_threshold,
                                const FitOptions& options = {});

// Single JSON document; absent Krasula values are written as null.
std::string report_json(const EvalReport& report);
// Header `id,mos,raw_pred,mapped_pred`, one row per sample.
std::string scatter_csv(const EvalReport& report);

}  // namespace ahgcn::metrics
