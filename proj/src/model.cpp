#include "ahgcn/model.hpp"

#include <stdexcept>

namespace ahgcn {

ModelParams ModelParams::random(std::span<const std::size_t> channels, const CompactionShape& shape,
                                const PredictorConfig& predictor, std::mt19937_64& rng) {
    if (predictor.layer_dims.empty() || predictor.layer_dims.front() != channels.size() * shape.out_dim) {
        throw std::invalid_argument("ModelParams: predictor input dimension must equal levels * out_dim (" +
                                    std::to_string(channels.size() * shape.out_dim) + ")");
    }
    ModelParams p;
    p.compaction = CompactionParams::random(channels, rng, shape);
    p.predictor = PredictorParams::random(predictor, rng);
    return p;
}

ModelParams ModelParams::zeros_like(const ModelParams& other) {
    ModelParams p = other;
    for (TensorRef& t : named_tensors(p)) t.value->fill(0.0);
    return p;
}

namespace {

template <typename Params, typename Fn>
void for_each_tensor(Params& params, Fn&& fn) {
    for (std::size_t j = 0; j < params.compaction.levels.size(); ++j) {
        auto& l = params.compaction.levels[j];
        const std::string base = "desc.l" + std::to_string(j) + ".";
        fn(base + "reduce_w", l.reduce_weight, true, false);
        fn(base + "reduce_b", l.reduce_bias, true, true);
        fn(base + "fc_w", l.fc_weight, true, false);
        fn(base + "fc_b", l.fc_bias, true, true);
    }
    for (std::size_t t = 0; t < params.predictor.layers.size(); ++t) {
        auto& l = params.predictor.layers[t];
        const std::string base = "hgcn.l" + std::to_string(t) + ".";
        fn(base + "w1", l.w1, true, false);
        fn(base + "w2", l.w2, true, false);
        fn(base + "bn_gamma", l.bn_gamma, true, true);
        fn(base + "bn_beta", l.bn_beta, true, true);
        fn(base + "bn_running_mean", l.bn_running_mean, false, true);
        fn(base + "bn_running_var", l.bn_running_var, false, true);
    }
}

}  // namespace

bool operator==(const ModelParams& a, const ModelParams& b) {
    const auto ta = named_tensors(a);
    const auto tb = named_tensors(b);
    if (ta.size() != tb.size()) return false;
    for (std::size_t i = 0; i < ta.size(); ++i) {
        if (ta[i].name != tb[i].name || !(*ta[i].value == *tb[i].value)) return false;
    }
    return true;
}

std::vector<TensorRef> named_tensors(ModelParams& params) {
    std::vector<TensorRef> out;
    for_each_tensor(params, [&](std::string name, Matrix& m, bool trainable, bool vec) {
        out.push_back({std::move(name), &m, trainable, vec});
    });
    return out;
}

std::vector<ConstTensorRef> named_tensors(const ModelParams& params) {
    std::vector<ConstTensorRef> out;
    for_each_tensor(params, [&](std::string name, const Matrix& m, bool trainable, bool vec) {
        out.push_back({std::move(name), &m, trainable, vec});
    });
    return out;
}

std::vector<TensorRef> trainable_tensors(ModelParams& params) {
    std::vector<TensorRef> out;
    for (TensorRef& t : named_tensors(params)) {
        if (t.trainable) out.push_back(std::move(t));
    }
    return out;
}

HypergraphBuilder::HypergraphBuilder(HypergraphConfig config) : config_(std::move(config)) {
    if (config_.centers.empty()) throw std::invalid_argument("HypergraphBuilder: no viewport centres");
    if (config_.k + 1 > config_.centers.size()) {
        throw std::invalid_argument("HypergraphBuilder: k=" + std::to_string(config_.k) +
                                    " needs more than " + std::to_string(config_.centers.size()) + " viewports");
    }
    location_ = build_location_hyperedges(config_.centers, config_.delta);
}

IncidenceMatrix HypergraphBuilder::build(const Matrix& sample_features) const {
    if (sample_features.rows() != config_.viewports()) {
        throw std::invalid_argument("HypergraphBuilder: sample has " + std::to_string(sample_features.rows()) +
                                    " viewports, centres describe " + std::to_string(config_.viewports()));
    }
    const IncidenceMatrix parts[] = {location_, build_content_hyperedges(sample_features, config_.k)};
    return concat_hypergraphs(parts);
}

PipelineOutput run_pipeline(std::span<const FeaturePyramid* const> viewports, ModelParams& params,
                            const HypergraphBuilder& hypergraphs, const ForwardOptions& options,
                            PipelineTape* tape) {
    const std::size_t n = hypergraphs.config().viewports();
    if (viewports.empty() || viewports.size() % n != 0) {
        throw std::invalid_argument("run_pipeline: " + std::to_string(viewports.size()) +
                                    " viewports is not a whole number of " + std::to_string(n) +
                                    "-viewport samples");
    }
    const std::size_t batch = viewports.size() / n;
    PipelineOutput out;
    out.features = describe(viewports, params.compaction, tape ? &tape->descriptor : nullptr);

    std::vector<Matrix> ops;
    ops.reserve(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        Matrix sample(n, out.features.cols());
        for (std::size_t i = 0; i < n; ++i) {
            const auto src = out.features.row(b * n + i);
            std::copy(src.begin(), src.end(), sample.row(i).begin());
        }
        out.hypergraphs.push_back(hypergraphs.build(sample));
        ops.push_back(normalize(out.hypergraphs.back()).op);
    }
    PredictorOutput pred =
        predict_batch(ops, out.features, params.predictor, options, tape ? &tape->predictor : nullptr);
    out.quality = std::move(pred.quality);
    out.viewport_scores = std::move(pred.viewport_scores);
    return out;
}

ModelParams pipeline_backward(const PipelineTape& tape, const ModelParams& params,
                              std::span<const double> grad_quality) {
    PredictorGrads pg = network_backward(tape.predictor, params.predictor, grad_quality);
    DescriptorGrads dg = descriptor_backward(pg.input, tape.descriptor, params.compaction);

    ModelParams grads = ModelParams::zeros_like(params);
    grads.compaction = std::move(dg.params);
    for (std::size_t t = 0; t < pg.layers.size(); ++t) {
        auto& dst = grads.predictor.layers[t];
        dst.w1 = std::move(pg.layers[t].w1);
        dst.w2 = std::move(pg.layers[t].w2);
        dst.bn_gamma = std::move(pg.layers[t].bn_gamma);
        dst.bn_beta = std::move(pg.layers[t].bn_beta);
    }
    return grads;
}

}  // namespace ahgcn
