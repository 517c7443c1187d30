#pragma once

// Viewport quality predictor: stacked hypergraph convolutions
//   H' = softplus(BN(E_hat H W1 + H W2))
// followed by mean pooling of the final per-viewport scores.
//
// A batch holds B samples of N viewports each; node features are stacked to
// (B*N) x d and every sample carries its own normalized operator. Batch
// statistics are taken jointly over all B*N rows.

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "ahgcn/matrix.hpp"

namespace ahgcn {

enum class Mode { train, eval };

struct PredictorConfig {
    std::vector<std::size_t> layer_dims{1024, 256, 128, 64, 32, 1};
    double dropout_rate = 0.5;

    void validate() const;
    std::size_t layer_count() const noexcept { return layer_dims.size() - 1; }
};

struct HgcnLayerParams {
    Matrix w1;  // d_in x d_out
    Matrix w2;  // d_in x d_out
    Matrix bn_gamma;         // 1 x d_out
    Matrix bn_beta;          // 1 x d_out
    Matrix bn_running_mean;  // 1 x d_out
    Matrix bn_running_var;   // 1 x d_out
    double bn_momentum = 0.1;
    double bn_epsilon = 1e-5;

    std::size_t in_dim() const noexcept { return w1.rows(); }
    std::size_t out_dim() const noexcept { return w1.cols(); }

    static HgcnLayerParams zeros(std::size_t d_in, std::size_t d_out);
};

struct PredictorParams {
    std::vector<HgcnLayerParams> layers;

    // W1/W2 uniform in [-1/sqrt(d_in), 1/sqrt(d_in)]; gamma 1, beta 0,
    // running mean 0, running variance 1.
    static PredictorParams random(const PredictorConfig& config, std::mt19937_64& rng);
    std::vector<std::size_t> layer_dims() const;
};

double softplus(double x) noexcept;
Matrix softplus(const Matrix& x);
// d softplus / dx
double logistic_sigmoid(double x) noexcept;

struct BatchNormRecord {
    Matrix normalized;            // x_hat, rows x d
    std::vector<double> inv_std;  // per feature
};

// Train mode normalizes with the biased batch variance and blends the batch
// mean and unbiased variance into the running statistics; eval mode uses the
// running statistics.
Matrix batchnorm_forward(const Matrix& h, HgcnLayerParams& params, Mode mode,
                         BatchNormRecord* record = nullptr);

struct BatchNormGrads {
    Matrix input;
    Matrix gamma;
    Matrix beta;
};

// Train-mode backward, including the path through the batch statistics.
BatchNormGrads batchnorm_backward(const Matrix& grad_out, const BatchNormRecord& record,
                                  const HgcnLayerParams& params);

struct ForwardOptions {
    Mode mode = Mode::eval;
    double dropout_rate = 0.0;
    std::mt19937_64* rng = nullptr;  // required for train-mode dropout
    bool dropout_last_layer = false;
};

struct LayerTape {
    Matrix input;       // layer input after dropout
    Matrix mask;        // inverted-dropout multipliers; empty when no dropout
    Matrix propagated;  // block-diagonal E_hat applied to `input`
    Matrix pre_activation;
    BatchNormRecord bn;
};

struct ForwardTape {
    Mode mode = Mode::eval;
    std::vector<Matrix> operators;
    std::vector<LayerTape> layers;
};

// One layer. `ops` are the per-sample operators covering the rows of `h`.
// Dropout, when requested, is applied to the layer input.
Matrix hgcn_layer_forward(std::span<const Matrix> ops, const Matrix& h, HgcnLayerParams& params,
                          const ForwardOptions& options, bool apply_dropout, LayerTape* tape = nullptr);

struct PredictorOutput {
    std::vector<double> quality;  // one score per sample
    Matrix viewport_scores;       // (B*N) x 1
};

// All layers then a per-sample mean. Dropout is applied to every layer input
// except the last layer's, unless `dropout_last_layer` is set.
PredictorOutput predict_batch(std::span<const Matrix> ops, const Matrix& x, PredictorParams& params,
                              const ForwardOptions& options, ForwardTape* tape = nullptr);

// Single-sample convenience form.
PredictorOutput predict(const Matrix& op, const Matrix& x, PredictorParams& params,
                        Mode mode = Mode::eval);

struct LayerGrads {
    Matrix w1, w2, bn_gamma, bn_beta;
};

struct PredictorGrads {
    std::vector<LayerGrads> layers;
    Matrix input;  // gradient with respect to X
};

// Reverse pass through pooling, softplus, batch norm, dropout masks and both
// matrix-product branches. Needs a train-mode tape.
PredictorGrads network_backward(const ForwardTape& tape, const PredictorParams& params,
                                std::span<const double> grad_quality);

}  // namespace ahgcn
