#include "ahgcn/hgcn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ahgcn/kernels.hpp"

namespace ahgcn {

void PredictorConfig::validate() const {
    if (layer_dims.size() < 2) throw std::invalid_argument("PredictorConfig: need at least one layer");
    for (std::size_t d : layer_dims) {
        if (d == 0) throw std::invalid_argument("PredictorConfig: layer dimensions must be positive");
    }
    if (layer_dims.back() != 1) {
        throw std::invalid_argument("PredictorConfig: the last layer must output one score per viewport");
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
        throw std::invalid_argument("PredictorConfig: dropout rate must be in [0, 1)");
    }
}

HgcnLayerParams HgcnLayerParams::zeros(std::size_t d_in, std::size_t d_out) {
    HgcnLayerParams p;
    p.w1 = Matrix(d_in, d_out);
    p.w2 = Matrix(d_in, d_out);
    p.bn_gamma = Matrix(1, d_out, 1.0);
    p.bn_beta = Matrix(1, d_out);
    p.bn_running_mean = Matrix(1, d_out);
    p.bn_running_var = Matrix(1, d_out, 1.0);
    return p;
}

PredictorParams PredictorParams::random(const PredictorConfig& config, std::mt19937_64& rng) {
    config.validate();
    PredictorParams p;
    for (std::size_t t = 0; t + 1 < config.layer_dims.size(); ++t) {
        const std::size_t d_in = config.layer_dims[t];
        const std::size_t d_out = config.layer_dims[t + 1];
        HgcnLayerParams layer = HgcnLayerParams::zeros(d_in, d_out);
        const double bound = 1.0 / std::sqrt(static_cast<double>(d_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (double& v : layer.w1.values()) v = dist(rng);
        for (double& v : layer.w2.values()) v = dist(rng);
        p.layers.push_back(std::move(layer));
    }
    return p;
}

std::vector<std::size_t> PredictorParams::layer_dims() const {
    std::vector<std::size_t> dims;
    if (layers.empty()) return dims;
    dims.push_back(layers.front().in_dim());
    for (const auto& layer : layers) dims.push_back(layer.out_dim());
    return dims;
}

double softplus(double x) noexcept { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

Matrix softplus(const Matrix& x) {
    Matrix out = x;
    for (double& v : out.values()) v = softplus(v);
    return out;
}

double logistic_sigmoid(double x) noexcept {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Matrix batchnorm_forward(const Matrix& h, HgcnLayerParams& params, Mode mode, BatchNormRecord* record) {
    const std::size_t rows = h.rows();
    const std::size_t d = h.cols();
    if (d != params.bn_gamma.cols()) {
        throw std::invalid_argument("batchnorm: input has " + std::to_string(d) +
                                    " features, parameters expect " + std::to_string(params.bn_gamma.cols()));
    }
    std::vector<double> mean(d), var(d);
    if (mode == Mode::train) {
        if (rows < 2) throw std::invalid_argument("batchnorm: train mode needs at least 2 rows");
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < d; ++c) mean[c] += h(r, c);
        }
        for (double& m : mean) m /= static_cast<double>(rows);
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < d; ++c) {
                const double dv = h(r, c) - mean[c];
                var[c] += dv * dv;
            }
        }
        for (double& v : var) v /= static_cast<double>(rows);
        const double unbias = static_cast<double>(rows) / static_cast<double>(rows - 1);
        for (std::size_t c = 0; c < d; ++c) {
            params.bn_running_mean[c] =
                (1.0 - params.bn_momentum) * params.bn_running_mean[c] + params.bn_momentum * mean[c];
            params.bn_running_var[c] =
                (1.0 - params.bn_momentum) * params.bn_running_var[c] + params.bn_momentum * var[c] * unbias;
        }
    } else {
        for (std::size_t c = 0; c < d; ++c) {
            mean[c] = params.bn_running_mean[c];
            var[c] = params.bn_running_var[c];
        }
    }

    std::vector<double> inv_std(d);
    for (std::size_t c = 0; c < d; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + params.bn_epsilon);
    Matrix normalized(rows, d), out(rows, d);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < d; ++c) {
            normalized(r, c) = (h(r, c) - mean[c]) * inv_std[c];
            out(r, c) = params.bn_gamma[c] * normalized(r, c) + params.bn_beta[c];
        }
    }
    if (record) {
        record->normalized = std::move(normalized);
        record->inv_std = std::move(inv_std);
    }
    return out;
}

BatchNormGrads batchnorm_backward(const Matrix& grad_out, const BatchNormRecord& record,
                                  const HgcnLayerParams& params) {
    const Matrix& xhat = record.normalized;
    if (!grad_out.same_shape(xhat)) throw std::invalid_argument("batchnorm_backward: shape mismatch");
    const std::size_t rows = xhat.rows();
    const std::size_t d = xhat.cols();
    BatchNormGrads g{Matrix(rows, d), Matrix(1, d), Matrix(1, d)};
    // dx = inv_std / m * (m * dxhat - sum(dxhat) - xhat * sum(dxhat * xhat))
    std::vector<double> sum_dxhat(d), sum_dxhat_xhat(d);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < d; ++c) {
            const double go = grad_out(r, c);
            g.beta[c] += go;
            g.gamma[c] += go * xhat(r, c);
            const double dxhat = go * params.bn_gamma[c];
            sum_dxhat[c] += dxhat;
            sum_dxhat_xhat[c] += dxhat * xhat(r, c);
        }
    }
    const double m = static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < d; ++c) {
            const double dxhat = grad_out(r, c) * params.bn_gamma[c];
            g.input(r, c) =
                record.inv_std[c] / m * (m * dxhat - sum_dxhat[c] - xhat(r, c) * sum_dxhat_xhat[c]);
        }
    }
    return g;
}

Matrix hgcn_layer_forward(std::span<const Matrix> ops, const Matrix& h, HgcnLayerParams& params,
                          const ForwardOptions& options, bool apply_dropout, LayerTape* tape) {
    if (h.cols() != params.in_dim()) {
        throw std::invalid_argument("hgcn layer: input has " + std::to_string(h.cols()) +
                                    " features, layer expects " + std::to_string(params.in_dim()));
    }
    require_shape(params.w2, params.in_dim(), params.out_dim(), "hgcn layer W2");

    Matrix input = h;
    Matrix mask;
    const bool dropout = apply_dropout && options.mode == Mode::train && options.dropout_rate > 0.0;
    if (dropout) {
        if (!options.rng) throw std::invalid_argument("hgcn layer: train-mode dropout needs an RNG");
        const double keep = 1.0 - options.dropout_rate;
        std::bernoulli_distribution draw(keep);
        mask = Matrix(h.rows(), h.cols());
        for (std::size_t i = 0; i < mask.size(); ++i) {
            mask[i] = draw(*options.rng) ? 1.0 / keep : 0.0;
            input[i] *= mask[i];
        }
    }
    Matrix propagated = kernels::block_apply(ops, input);
    Matrix pre = kernels::matmul(propagated, params.w1);
    pre += kernels::matmul(input, params.w2);

    BatchNormRecord bn;
    Matrix z = batchnorm_forward(pre, params, options.mode, tape ? &bn : nullptr);
    Matrix out = softplus(z);
    if (tape) {
        tape->input = std::move(input);
        tape->mask = std::move(mask);
        tape->propagated = std::move(propagated);
        tape->pre_activation = std::move(z);
        tape->bn = std::move(bn);
    }
    return out;
}

PredictorOutput predict_batch(std::span<const Matrix> ops, const Matrix& x, PredictorParams& params,
                              const ForwardOptions& options, ForwardTape* tape) {
    if (params.layers.empty()) throw std::invalid_argument("predict: no layers");
    if (params.layers.back().out_dim() != 1) {
        throw std::invalid_argument("predict: last layer must have output dimension 1");
    }
    if (tape) {
        tape->mode = options.mode;
        tape->operators.assign(ops.begin(), ops.end());
        tape->layers.assign(params.layers.size(), LayerTape{});
    }
    Matrix h = x;
    for (std::size_t t = 0; t < params.layers.size(); ++t) {
        const bool last = t + 1 == params.layers.size();
        h = hgcn_layer_forward(ops, h, params.layers[t], options, !last || options.dropout_last_layer,
                               tape ? &tape->layers[t] : nullptr);
    }
    PredictorOutput out;
    std::size_t row = 0;
    for (const Matrix& op : ops) {
        double sum = 0.0;
        for (std::size_t i = 0; i < op.rows(); ++i) sum += h(row + i, 0);
        out.quality.push_back(sum / static_cast<double>(op.rows()));
        row += op.rows();
    }
    out.viewport_scores = std::move(h);
    return out;
}

PredictorOutput predict(const Matrix& op, const Matrix& x, PredictorParams& params, Mode mode) {
    ForwardOptions options;
    options.mode = mode;
    return predict_batch(std::span<const Matrix>(&op, 1), x, params, options);
}

PredictorGrads network_backward(const ForwardTape& tape, const PredictorParams& params,
                                std::span<const double> grad_quality) {
    if (tape.mode != Mode::train) {
        throw std::invalid_argument("network_backward: tape was recorded in eval mode");
    }
    if (tape.layers.size() != params.layers.size()) {
        throw std::invalid_argument("network_backward: tape and parameters have different layer counts");
    }
    if (grad_quality.size() != tape.operators.size()) {
        throw std::invalid_argument("network_backward: expected " + std::to_string(tape.operators.size()) +
                                    " upstream gradients, got " + std::to_string(grad_quality.size()));
    }
    std::size_t rows = 0;
    for (const Matrix& op : tape.operators) rows += op.rows();

    // Mean pooling spreads each sample's gradient evenly over its viewports.
    Matrix grad(rows, 1);
    std::size_t row = 0;
    for (std::size_t b = 0; b < tape.operators.size(); ++b) {
        const std::size_t n = tape.operators[b].rows();
        for (std::size_t i = 0; i < n; ++i) grad(row + i, 0) = grad_quality[b] / static_cast<double>(n);
        row += n;
    }

    PredictorGrads out;
    out.layers.resize(params.layers.size());
    for (std::size_t t = params.layers.size(); t-- > 0;) {
        const LayerTape& lt = tape.layers[t];
        const HgcnLayerParams& p = params.layers[t];
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= logistic_sigmoid(lt.pre_activation[i]);
        BatchNormGrads bn = batchnorm_backward(grad, lt.bn, p);
        LayerGrads& g = out.layers[t];
        g.bn_gamma = std::move(bn.gamma);
        g.bn_beta = std::move(bn.beta);
        g.w1 = kernels::matmul_tn(lt.propagated, bn.input);
        g.w2 = kernels::matmul_tn(lt.input, bn.input);
        const Matrix grad_propagated = kernels::matmul_nt(bn.input, p.w1);
        Matrix grad_input = kernels::matmul_nt(bn.input, p.w2);
        grad_input += kernels::block_apply(tape.operators, grad_propagated, /*transpose=*/true);
        if (!lt.mask.empty()) {
            for (std::size_t i = 0; i < grad_input.size(); ++i) grad_input[i] *= lt.mask[i];
        }
        grad = std::move(grad_input);
    }
    out.input = std::move(grad);
    return out;
}

}  // namespace ahgcn
