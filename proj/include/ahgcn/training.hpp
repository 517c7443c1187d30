#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "ahgcn/dataset.hpp"
#include "ahgcn/model.hpp"
#include "ahgcn/optimizer.hpp"

namespace ahgcn {

struct TrainConfig {
    std::size_t batch_size = 16;
    std::size_t epochs = 40;
    double lr_predictor = 1e-3;
    double lr_decay = 0.25;
    std::size_t lr_decay_every = 40;
    double dropout = 0.5;
    bool dropout_last_layer = false;
    std::uint64_t seed = 0;
    std::size_t k = 5;
    double delta = deg_to_rad(45.0);
    std::vector<std::size_t> layer_dims{1024, 256, 128, 64, 32, 1};
    CompactionShape compaction;
    std::vector<SphereCoord> centers = default_viewport_centers();
    // Epochs between intermediate checkpoints written by the CLI; 0 writes only the final one.
    std::size_t checkpoint_every = 0;

    void validate() const;
    PredictorConfig predictor_config() const { return {layer_dims, dropout}; }
    HypergraphConfig hypergraph_config() const { return {centers, delta, k}; }
};

struct LossResult {
    double loss = 0.0;
    std::vector<double> grad;
};

// (1/B) sum (pred - target)^2 and its gradient 2 (pred - target) / B.
LossResult mse_loss(std::span<const double> pred, std::span<const double> target);

// lr_predictor * lr_decay ^ floor(epoch / lr_decay_every)
double lr_at_epoch(const TrainConfig& config, std::size_t epoch);

struct EpochLog {
    std::size_t epoch = 0;
    double lr = 0.0;
    double train_mse = 0.0;  // sample-weighted mean of the epoch's train-mode batch losses
};

struct TrainResult {
    ModelParams params;
    AdamState adam;
    std::vector<EpochLog> log;
};

// Called after every epoch.
using EpochCallback = std::function<void(const EpochLog&, const ModelParams&, const AdamState&)>;

// Seeded shuffling per epoch; per batch: descriptor -> hypergraphs ->
// train-mode predictor -> MSE -> backward -> Adam. `initial` overrides the
// seeded initialisation.
TrainResult train(const Dataset& dataset, const TrainConfig& config,
                  std::optional<ModelParams> initial = std::nullopt, const EpochCallback& on_epoch = {});

// Eval-mode prediction for every sample, in dataset order.
std::vector<double> evaluate(const Dataset& dataset, ModelParams& params, const HypergraphConfig& hypergraph);

// Throws if the parameters cannot consume the given pyramids or centre count.
void check_model_compatible(const ModelParams& params, const PyramidSet& pyramids,
                            const std::vector<std::size_t>& layer_dims);

std::string loss_log_csv(std::span<const EpochLog> log);

}  // namespace ahgcn
