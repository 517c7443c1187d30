#pragma once

// Full model: descriptor -> hypergraph constructor -> HGCN predictor.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ahgcn/descriptor.hpp"
#include "ahgcn/hgcn.hpp"
#include "ahgcn/hypergraph.hpp"

namespace ahgcn {

struct ModelParams {
    CompactionParams compaction;
    PredictorParams predictor;

    static ModelParams random(std::span<const std::size_t> channels, const CompactionShape& shape,
                              const PredictorConfig& predictor, std::mt19937_64& rng);
    // Same shapes, every tensor zero.
    static ModelParams zeros_like(const ModelParams& other);

    friend bool operator==(const ModelParams& a, const ModelParams& b);
};

// Named view of a tensor. Trainable tensors receive gradients and optimizer
// updates; batch-norm running statistics are buffers.
struct TensorRef {
    std::string name;
    Matrix* value = nullptr;
    bool trainable = true;
    bool vector = false;  // stored as rank 1
};

struct ConstTensorRef {
    std::string name;
    const Matrix* value = nullptr;
    bool trainable = true;
    bool vector = false;
};

// Stable ordering: descriptor levels first, then predictor layers.
std::vector<TensorRef> named_tensors(ModelParams& params);
std::vector<ConstTensorRef> named_tensors(const ModelParams& params);
std::vector<TensorRef> trainable_tensors(ModelParams& params);

struct HypergraphConfig {
    std::vector<SphereCoord> centers;  // one per viewport
    double delta = deg_to_rad(45.0);
    std::size_t k = 5;

    std::size_t viewports() const noexcept { return centers.size(); }
};

// Location hyperedges depend only on the fixed centres; content hyperedges
// are rebuilt from the current features on every pass.
class HypergraphBuilder {
public:
    explicit HypergraphBuilder(HypergraphConfig config);

    const HypergraphConfig& config() const noexcept { return config_; }
    const IncidenceMatrix& location() const noexcept { return location_; }

    IncidenceMatrix build(const Matrix& sample_features) const;

private:
    HypergraphConfig config_;
    IncidenceMatrix location_;
};

struct PipelineTape {
    DescriptorTape descriptor;
    ForwardTape predictor;
};

struct PipelineOutput {
    std::vector<double> quality;  // per sample
    Matrix viewport_scores;
    Matrix features;                             // (B*N) x m*d
    std::vector<IncidenceMatrix> hypergraphs;    // per sample
};

// `viewports` holds B*N pyramids, sample-major. Train mode updates the batch
// norm running statistics in `params`.
PipelineOutput run_pipeline(std::span<const FeaturePyramid* const> viewports, ModelParams& params,
                            const HypergraphBuilder& hypergraphs, const ForwardOptions& options,
                            PipelineTape* tape = nullptr);

// Gradients for every trainable tensor (buffers are left zero). The discrete
// kNN selection passes no gradient.
ModelParams pipeline_backward(const PipelineTape& tape, const ModelParams& params,
                              std::span<const double> grad_quality);

}  // namespace ahgcn
