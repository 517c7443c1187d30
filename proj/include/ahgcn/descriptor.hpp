#pragma once

// Multi-level viewport descriptor: every backbone level is compacted by
// reduce (1x1 channel map) -> max-pool to a fixed grid -> flatten -> affine,
// and the per-level vectors are concatenated in level order.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "ahgcn/kernels.hpp"
#include "ahgcn/matrix.hpp"

namespace ahgcn {

struct FeatureMap {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> values;  // (channel, row, col)

    FeatureMap() = default;
    FeatureMap(std::size_t c, std::size_t h, std::size_t w, double fill = 0.0)
        : channels(c), height(h), width(w), values(c * h * w, fill) {}

    double& at(std::size_t c, std::size_t y, std::size_t x) {
        return values[(c * height + y) * width + x];
    }
    double at(std::size_t c, std::size_t y, std::size_t x) const {
        return values[(c * height + y) * width + x];
    }
    kernels::MapView view() const { return {values, channels, height, width}; }

    friend bool operator==(const FeatureMap&, const FeatureMap&) = default;
};

struct FeaturePyramid {
    std::vector<FeatureMap> levels;

    // Checks level count, finiteness, buffer sizes and minimum spatial extent.
    void validate(std::size_t expected_levels, std::size_t min_extent) const;

    friend bool operator==(const FeaturePyramid&, const FeaturePyramid&) = default;
};

// Channel count and square spatial extent per level.
struct PyramidProfile {
    std::vector<std::size_t> channels{64, 128, 256, 512};
    std::vector<std::size_t> extents{64, 32, 16, 8};
};

struct CompactionShape {
    std::size_t reduced_channels = 16;
    std::size_t pool_grid = 8;
    std::size_t out_dim = 256;

    std::size_t flat_dim() const noexcept { return reduced_channels * pool_grid * pool_grid; }
};

struct LevelCompaction {
    Matrix reduce_weight;  // C_j x reduced_channels
    Matrix reduce_bias;    // 1 x reduced_channels
    Matrix fc_weight;      // flat_dim x out_dim
    Matrix fc_bias;        // 1 x out_dim
};

struct CompactionParams {
    CompactionShape shape;
    std::vector<LevelCompaction> levels;

    static CompactionParams zeros(std::span<const std::size_t> channels, CompactionShape shape = {});
    // Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and biases.
    static CompactionParams random(std::span<const std::size_t> channels, std::mt19937_64& rng,
                                   CompactionShape shape = {});

    std::size_t feature_dim() const noexcept { return levels.size() * shape.out_dim; }
    std::vector<std::size_t> channel_profile() const;
    // Throws if the pyramid's channel counts differ from the reduce weights.
    void check_compatible(const FeaturePyramid& pyramid) const;
};

// Intermediates of one level's compaction kept for the backward pass. The
// referenced input map must outlive the record.
struct LevelRecord {
    const FeatureMap* input = nullptr;
    std::vector<double> flat;           // pooled activations, flat_dim
    std::vector<std::uint32_t> argmax;  // spatial index per pooled entry
};

// Compacts one level to a vector of shape.out_dim entries.
std::vector<double> compact_level(const FeatureMap& map, const LevelCompaction& params,
                                  const CompactionShape& shape, LevelRecord* record = nullptr);

// Level-order concatenation; every part must have `out_dim` entries.
std::vector<double> concat_levels(std::span<const std::vector<double>> compacted,
                                  std::size_t expected_levels, std::size_t out_dim);

// Recorded intermediates of a batched descriptor pass over V viewports.
struct DescriptorTape {
    std::vector<const FeaturePyramid*> inputs;
    std::vector<Matrix> flats;                              // per level, V x flat_dim
    std::vector<std::vector<std::vector<std::uint32_t>>> argmax;  // [level][viewport]
};

// Runs the descriptor on each pyramid and stacks the results: V x (m * out_dim).
Matrix describe(std::span<const FeaturePyramid* const> pyramids, const CompactionParams& params,
                DescriptorTape* tape = nullptr);

struct DescriptorGrads {
    CompactionParams params;                 // same shapes as the forward parameters
    std::vector<FeaturePyramid> inputs;      // empty unless requested
};

// Exact reverse-mode gradients of the batched descriptor. Max-pool routes
// each upstream entry to its recorded argmax position.
DescriptorGrads descriptor_backward(const Matrix& grad_x, const DescriptorTape& tape,
                                    const CompactionParams& params, bool want_input_grads = false);

// Single-viewport form: grad_x has m * out_dim entries.
DescriptorGrads descriptor_backward(std::span<const double> grad_x, const DescriptorTape& tape,
                                    const CompactionParams& params, bool want_input_grads = false);

// Deterministic pyramid with values in [-1, 1]; identical seeds give
// bitwise-identical pyramids on every platform.
FeaturePyramid synthesize_pyramid(std::uint64_t seed, const PyramidProfile& profile = {});

// AHGF feature-pyramid files (little-endian, float32 payload).
FeaturePyramid read_pyramid(const std::filesystem::path& path);
void write_pyramid(const std::filesystem::path& path, const FeaturePyramid& pyramid);

}  // namespace ahgcn
