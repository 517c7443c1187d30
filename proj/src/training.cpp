#include "ahgcn/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace ahgcn {

namespace {

// Independent streams derived from the one configured seed.
constexpr std::uint64_t kShuffleStream = 0x9E3779B97F4A7C15ull;
constexpr std::uint64_t kDropoutStream = 0xD1B54A32D192ED03ull;

}  // namespace

void TrainConfig::validate() const {
    if (batch_size == 0) throw std::invalid_argument("train: batch_size must be positive");
    if (epochs == 0) throw std::invalid_argument("train: epochs must be positive");
    if (!(lr_predictor > 0.0)) throw std::invalid_argument("train: lr_predictor must be positive");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw std::invalid_argument("train: lr_decay must be in (0, 1]");
    if (lr_decay_every == 0) throw std::invalid_argument("train: lr_decay_every must be positive");
    if (!(delta > 0.0)) throw std::invalid_argument("train: delta must be positive");
    if (centers.empty()) throw std::invalid_argument("train: no viewport centres");
    if (k + 1 > centers.size()) throw std::invalid_argument("train: k must be below the viewport count");
    predictor_config().validate();
}

LossResult mse_loss(std::span<const double> pred, std::span<const double> target) {
    if (pred.empty()) throw std::invalid_argument("mse_loss: empty batch");
    if (pred.size() != target.size()) {
        throw std::invalid_argument("mse_loss: " + std::to_string(pred.size()) + " predictions vs " +
                                    std::to_string(target.size()) + " targets");
    }
    const double b = static_cast<double>(pred.size());
    LossResult r;
    r.grad.resize(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double diff = pred[i] - target[i];
        r.loss += diff * diff / b;
        r.grad[i] = 2.0 * diff / b;
    }
    return r;
}

double lr_at_epoch(const TrainConfig& config, std::size_t epoch) {
    return config.lr_predictor * std::pow(config.lr_decay, static_cast<double>(epoch / config.lr_decay_every));
}

void check_model_compatible(const ModelParams& params, const PyramidSet& pyramids,
                            const std::vector<std::size_t>& layer_dims) {
    if (pyramids.empty()) throw std::invalid_argument("model: sample has no viewports");
    for (const FeaturePyramid& p : pyramids) params.compaction.check_compatible(p);
    if (params.predictor.layer_dims() != layer_dims) {
        std::string have, want;
        for (auto d : params.predictor.layer_dims()) have += std::to_string(d) + " ";
        for (auto d : layer_dims) want += std::to_string(d) + " ";
        throw std::invalid_argument("model: parameter layer dims [ " + have + "] differ from configured [ " + want + "]");
    }
    if (params.compaction.feature_dim() != layer_dims.front()) {
        throw std::invalid_argument("model: descriptor output " + std::to_string(params.compaction.feature_dim()) +
                                    " does not match predictor input " + std::to_string(layer_dims.front()));
    }
}

TrainResult train(const Dataset& dataset, const TrainConfig& config, std::optional<ModelParams> initial,
                  const EpochCallback& on_epoch) {
    config.validate();
    if (dataset.empty()) throw std::invalid_argument("train: empty training set");
    for (const Sample& s : dataset) {
        if (!std::isfinite(s.mos)) throw std::invalid_argument("train: sample '" + s.id + "' has a non-finite MOS");
        s.source->check();
    }
    const auto first = dataset.front().source->load();
    if (first->size() != config.centers.size()) {
        throw std::invalid_argument("train: sample '" + dataset.front().id + "' has " + std::to_string(first->size()) +
                                    " viewports, " + std::to_string(config.centers.size()) + " centres configured");
    }

    TrainResult result;
    if (initial) {
        result.params = std::move(*initial);
    } else {
        std::mt19937_64 init_rng(config.seed);
        std::vector<std::size_t> channels;
        for (const auto& level : first->front().levels) channels.push_back(level.channels);
        result.params = ModelParams::random(channels, config.compaction, config.predictor_config(), init_rng);
    }
    check_model_compatible(result.params, *first, config.layer_dims);
    for (const auto& p : *first) {
        p.validate(result.params.compaction.levels.size(), result.params.compaction.shape.pool_grid);
    }
    result.adam = AdamState::for_params(result.params);

    const HypergraphBuilder hypergraphs(config.hypergraph_config());
    std::mt19937_64 shuffle_rng(config.seed ^ kShuffleStream);
    std::mt19937_64 dropout_rng(config.seed ^ kDropoutStream);
    const std::size_t n = config.centers.size();

    std::vector<std::size_t> order(dataset.size());
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = lr_at_epoch(config, epoch);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double weighted_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            std::vector<std::shared_ptr<const PyramidSet>> held;
            std::vector<const FeaturePyramid*> viewports;
            std::vector<double> targets;
            for (std::size_t i = start; i < end; ++i) {
                const Sample& s = dataset[order[i]];
                held.push_back(s.source->load());
                if (held.back()->size() != n) {
                    throw std::runtime_error("train: sample '" + s.id + "' has " + std::to_string(held.back()->size()) +
                                             " viewports, expected " + std::to_string(n));
                }
                for (const FeaturePyramid& p : *held.back()) viewports.push_back(&p);
                targets.push_back(s.mos);
            }
            ForwardOptions options{Mode::train, config.dropout, &dropout_rng, config.dropout_last_layer};
            PipelineTape tape;
            const PipelineOutput out = run_pipeline(viewports, result.params, hypergraphs, options, &tape);
            const LossResult loss = mse_loss(out.quality, targets);
            const ModelParams grads = pipeline_backward(tape, result.params, loss.grad);
            adam_step(result.params, grads, result.adam, lr);
            weighted_loss += loss.loss * static_cast<double>(end - start);
        }
        result.log.push_back({epoch, lr, weighted_loss / static_cast<double>(dataset.size())});
        if (on_epoch) on_epoch(result.log.back(), result.params, result.adam);
    }
    return result;
}

std::vector<double> evaluate(const Dataset& dataset, ModelParams& params, const HypergraphConfig& hypergraph) {
    if (dataset.empty()) throw std::invalid_argument("evaluate: empty dataset");
    const HypergraphBuilder hypergraphs(hypergraph);
    std::vector<double> preds;
    preds.reserve(dataset.size());
    for (const Sample& s : dataset) {
        const auto pyramids = s.source->load();
        if (pyramids->size() != hypergraph.viewports()) {
            throw std::runtime_error("evaluate: sample '" + s.id + "' has " + std::to_string(pyramids->size()) +
                                     " viewports, expected " + std::to_string(hypergraph.viewports()));
        }
        std::vector<const FeaturePyramid*> viewports;
        for (const FeaturePyramid& p : *pyramids) viewports.push_back(&p);
        const PipelineOutput out = run_pipeline(viewports, params, hypergraphs, ForwardOptions{Mode::eval});
        preds.push_back(out.quality.front());
    }
    return preds;
}

std::string loss_log_csv(std::span<const EpochLog> log) {
    std::string out = "epoch,lr,train_mse\n";
    char buf[96];
    for (const EpochLog& e : log) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", e.epoch, e.lr, e.train_mse);
        out += buf;
    }
    return out;
}

}  // namespace ahgcn
