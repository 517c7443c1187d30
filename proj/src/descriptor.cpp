#include "ahgcn/descriptor.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include "ahgcn/atomic_file.hpp"
#include "binary_io.hpp"

namespace ahgcn {

namespace {

constexpr char kPyramidMagic[4] = {'A', 'H', 'G', 'F'};
constexpr std::uint16_t kPyramidVersion = 1;

using Index = std::ptrdiff_t;

Matrix uniform_matrix(std::size_t rows, std::size_t cols, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix m(rows, cols);
    for (double& v : m.values()) v = dist(rng);
    return m;
}

// Portable mapping of a 64-bit draw to [-1, 1].
double unit_interval_symmetric(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

}  // namespace

void FeaturePyramid::validate(std::size_t expected_levels, std::size_t min_extent) const {
    if (levels.size() != expected_levels) {
        throw std::invalid_argument("FeaturePyramid: expected " + std::to_string(expected_levels) +
                                    " levels, got " + std::to_string(levels.size()));
    }
    for (std::size_t j = 0; j < levels.size(); ++j) {
        const FeatureMap& map = levels[j];
        if (map.values.size() != map.channels * map.height * map.width) {
            throw std::invalid_argument("FeaturePyramid: level " + std::to_string(j) +
                                        " buffer does not match its shape");
        }
        if (map.height < min_extent || map.width < min_extent) {
            throw std::invalid_argument("FeaturePyramid: level " + std::to_string(j) + " is " +
                                        std::to_string(map.height) + "x" +
                                        std::to_string(map.width) + ", minimum extent is " +
                                        std::to_string(min_extent));
        }
        for (double v : map.values) {
            if (!std::isfinite(v)) {
                throw std::invalid_argument("FeaturePyramid: level " + std::to_string(j) +
                                            " contains a non-finite value");
            }
        }
    }
}

CompactionParams CompactionParams::zeros(std::span<const std::size_t> channels, CompactionShape shape) {
    CompactionParams p;
    p.shape = shape;
    for (std::size_t c : channels) {
        p.levels.push_back({Matrix(c, shape.reduced_channels), Matrix(1, shape.reduced_channels),
                            Matrix(shape.flat_dim(), shape.out_dim), Matrix(1, shape.out_dim)});
    }
    return p;
}

CompactionParams CompactionParams::random(std::span<const std::size_t> channels,
                                          std::mt19937_64& rng, CompactionShape shape) {
    CompactionParams p;
    p.shape = shape;
    for (std::size_t c : channels) {
        const double rb = 1.0 / std::sqrt(static_cast<double>(c));
        const double fb = 1.0 / std::sqrt(static_cast<double>(shape.flat_dim()));
        LevelCompaction level;
        level.reduce_weight = uniform_matrix(c, shape.reduced_channels, rb, rng);
        level.reduce_bias = uniform_matrix(1, shape.reduced_channels, rb, rng);
        level.fc_weight = uniform_matrix(shape.flat_dim(), shape.out_dim, fb, rng);
        level.fc_bias = uniform_matrix(1, shape.out_dim, fb, rng);
        p.levels.push_back(std::move(level));
    }
    return p;
}

std::vector<std::size_t> CompactionParams::channel_profile() const {
    std::vector<std::size_t> out;
    for (const auto& level : levels) out.push_back(level.reduce_weight.rows());
    return out;
}

void CompactionParams::check_compatible(const FeaturePyramid& pyramid) const {
    if (pyramid.levels.size() != levels.size()) {
        throw std::invalid_argument("descriptor: pyramid has " + std::to_string(pyramid.levels.size()) +
                                    " levels, parameters expect " + std::to_string(levels.size()));
    }
    for (std::size_t j = 0; j < levels.size(); ++j) {
        const FeatureMap& map = pyramid.levels[j];
        if (map.channels != levels[j].reduce_weight.rows()) {
            throw std::invalid_argument("descriptor: level " + std::to_string(j) + " has " +
                                        std::to_string(map.channels) + " channels, parameters expect " +
                                        std::to_string(levels[j].reduce_weight.rows()));
        }
        if (map.values.size() != map.channels * map.height * map.width) {
            throw std::invalid_argument("descriptor: level " + std::to_string(j) +
                                        " buffer does not match its shape");
        }
    }
}

std::vector<double> compact_level(const FeatureMap& map, const LevelCompaction& params,
                                  const CompactionShape& shape, LevelRecord* record) {
    require_shape(params.reduce_weight, map.channels, shape.reduced_channels, "compact_level reduce weight");
    require_shape(params.fc_weight, shape.flat_dim(), shape.out_dim, "compact_level fc weight");
    require_shape(params.fc_bias, 1, shape.out_dim, "compact_level fc bias");
    kernels::PooledMap pooled =
        kernels::reduce_pool(map.view(), params.reduce_weight, params.reduce_bias, shape.pool_grid);

    std::vector<double> out(params.fc_bias.values().begin(), params.fc_bias.values().end());
    for (std::size_t i = 0; i < pooled.pooled.size(); ++i) {
        const double v = pooled.pooled[i];
        if (v == 0.0) continue;
        const auto w = params.fc_weight.row(i);
        for (std::size_t o = 0; o < out.size(); ++o) out[o] += v * w[o];
    }
    if (record) {
        record->input = &map;
        record->flat = std::move(pooled.pooled);
        record->argmax = std::move(pooled.argmax);
    }
    return out;
}

std::vector<double> concat_levels(std::span<const std::vector<double>> compacted,
                                  std::size_t expected_levels, std::size_t out_dim) {
    if (compacted.size() != expected_levels) {
        throw std::invalid_argument("concat_levels: expected " + std::to_string(expected_levels) +
                                    " levels, got " + std::to_string(compacted.size()));
    }
    std::vector<double> x;
    x.reserve(expected_levels * out_dim);
    for (std::size_t j = 0; j < compacted.size(); ++j) {
        if (compacted[j].size() != out_dim) {
            throw std::invalid_argument("concat_levels: level " + std::to_string(j) + " has length " +
                                        std::to_string(compacted[j].size()) + ", expected " +
                                        std::to_string(out_dim));
        }
        x.insert(x.end(), compacted[j].begin(), compacted[j].end());
    }
    return x;
}

Matrix describe(std::span<const FeaturePyramid* const> pyramids, const CompactionParams& params,
                DescriptorTape* tape) {
    const std::size_t count = pyramids.size();
    const std::size_t levels = params.levels.size();
    const std::size_t d = params.shape.out_dim;
    const std::size_t flat_dim = params.shape.flat_dim();
    for (const FeaturePyramid* p : pyramids) params.check_compatible(*p);

    Matrix x(count, levels * d);
    if (tape) {
        tape->inputs.assign(pyramids.begin(), pyramids.end());
        tape->flats.assign(levels, Matrix());
        tape->argmax.assign(levels, {});
    }
    for (std::size_t j = 0; j < levels; ++j) {
        const LevelCompaction& lp = params.levels[j];
        std::vector<kernels::MapView> views;
        views.reserve(count);
        for (const FeaturePyramid* p : pyramids) views.push_back(p->levels[j].view());
        std::vector<kernels::PooledMap> pooled =
            kernels::reduce_pool_batch(views, lp.reduce_weight, lp.reduce_bias, params.shape.pool_grid);

        Matrix flats(count, flat_dim);
        for (std::size_t v = 0; v < count; ++v) {
            std::copy(pooled[v].pooled.begin(), pooled[v].pooled.end(), flats.row(v).begin());
        }
        const Matrix compacted = kernels::matmul(flats, lp.fc_weight);
        for (std::size_t v = 0; v < count; ++v) {
            for (std::size_t o = 0; o < d; ++o) x(v, j * d + o) = compacted(v, o) + lp.fc_bias[o];
        }
        if (tape) {
            tape->flats[j] = std::move(flats);
            auto& am = tape->argmax[j];
            am.resize(count);
            for (std::size_t v = 0; v < count; ++v) am[v] = std::move(pooled[v].argmax);
        }
    }
    return x;
}

DescriptorGrads descriptor_backward(const Matrix& grad_x, const DescriptorTape& tape,
                                    const CompactionParams& params, bool want_input_grads) {
    const std::size_t count = tape.inputs.size();
    const std::size_t levels = params.levels.size();
    const std::size_t d = params.shape.out_dim;
    if (tape.flats.size() != levels || tape.argmax.size() != levels) {
        throw std::logic_error("descriptor_backward: no recorded forward pass for these parameters");
    }
    require_shape(grad_x, count, levels * d, "descriptor_backward upstream gradient");

    DescriptorGrads grads;
    grads.params = CompactionParams::zeros(params.channel_profile(), params.shape);
    if (want_input_grads) {
        grads.inputs.resize(count);
        for (std::size_t v = 0; v < count; ++v) {
            for (const FeatureMap& map : tape.inputs[v]->levels) {
                grads.inputs[v].levels.emplace_back(map.channels, map.height, map.width);
            }
        }
    }

    for (std::size_t j = 0; j < levels; ++j) {
        const LevelCompaction& lp = params.levels[j];
        LevelCompaction& g = grads.params.levels[j];

        Matrix upstream(count, d);
        for (std::size_t v = 0; v < count; ++v) {
            for (std::size_t o = 0; o < d; ++o) {
                upstream(v, o) = grad_x(v, j * d + o);
                g.fc_bias[o] += upstream(v, o);
            }
        }
        g.fc_weight = kernels::matmul_tn(tape.flats[j], upstream);
        const Matrix grad_flat = kernels::matmul_nt(upstream, lp.fc_weight);

        const std::size_t cells = params.shape.pool_grid * params.shape.pool_grid;
        for (std::size_t v = 0; v < count; ++v) {
            for (std::size_t e = 0; e < grad_flat.cols(); ++e) g.reduce_bias[e / cells] += grad_flat(v, e);
        }
        // Rows of the reduce weight are independent, so each thread owns whole rows.
        const std::size_t channels = lp.reduce_weight.rows();
#pragma omp parallel for schedule(static)
        for (Index ci = 0; ci < static_cast<Index>(channels); ++ci) {
            const auto c = static_cast<std::size_t>(ci);
            for (std::size_t v = 0; v < count; ++v) {
                const FeatureMap& map = tape.inputs[v]->levels[j];
                const double* plane = map.values.data() + c * map.height * map.width;
                const auto& argmax = tape.argmax[j][v];
                for (std::size_t e = 0; e < grad_flat.cols(); ++e) {
                    g.reduce_weight(c, e / cells) += grad_flat(v, e) * plane[argmax[e]];
                }
            }
        }
        if (want_input_grads) {
            for (std::size_t v = 0; v < count; ++v) {
                FeatureMap& gin = grads.inputs[v].levels[j];
                const std::size_t plane = gin.height * gin.width;
                const auto& argmax = tape.argmax[j][v];
                for (std::size_t e = 0; e < grad_flat.cols(); ++e) {
                    const std::size_t r = e / cells;
                    const double ge = grad_flat(v, e);
                    for (std::size_t c = 0; c < gin.channels; ++c) {
                        gin.values[c * plane + argmax[e]] += lp.reduce_weight(c, r) * ge;
                    }
                }
            }
        }
    }
    return grads;
}

DescriptorGrads descriptor_backward(std::span<const double> grad_x, const DescriptorTape& tape,
                                    const CompactionParams& params, bool want_input_grads) {
    if (tape.inputs.size() != 1) {
        throw std::invalid_argument("descriptor_backward: single-viewport form needs a one-viewport tape");
    }
    return descriptor_backward(Matrix(1, grad_x.size(), std::vector<double>(grad_x.begin(), grad_x.end())),
                               tape, params, want_input_grads);
}

FeaturePyramid synthesize_pyramid(std::uint64_t seed, const PyramidProfile& profile) {
    if (profile.channels.size() != profile.extents.size() || profile.channels.empty()) {
        throw std::invalid_argument("synthesize_pyramid: channel and extent lists must match");
    }
    std::mt19937_64 rng(seed);
    FeaturePyramid p;
    for (std::size_t j = 0; j < profile.channels.size(); ++j) {
        FeatureMap map(profile.channels[j], profile.extents[j], profile.extents[j]);
        for (double& v : map.values) v = unit_interval_symmetric(rng());
        p.levels.push_back(std::move(map));
    }
    return p;
}

FeaturePyramid read_pyramid(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path.string() + ": cannot open feature pyramid");
    detail::LeReader reader(in, path.string());
    if (reader.get_bytes(4) != std::string(kPyramidMagic, 4)) reader.fail("bad magic, not an AHGF file");
    const auto version = reader.get<std::uint16_t>();
    if (version != kPyramidVersion) reader.fail("unsupported AHGF version " + std::to_string(version));
    const auto levels = reader.get<std::uint8_t>();
    FeaturePyramid p;
    for (std::size_t j = 0; j < levels; ++j) {
        const auto c = reader.get<std::uint32_t>();
        const auto h = reader.get<std::uint32_t>();
        const auto w = reader.get<std::uint32_t>();
        FeatureMap map(c, h, w);
        for (double& v : map.values) v = reader.get_f32();
        p.levels.push_back(std::move(map));
    }
    if (!reader.at_end()) reader.fail("trailing bytes after last level");
    return p;
}

void write_pyramid(const std::filesystem::path& path, const FeaturePyramid& pyramid) {
    if (pyramid.levels.size() > 255) throw std::invalid_argument("write_pyramid: too many levels");
    write_atomically(path, [&](const std::filesystem::path& tmp) {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error(tmp.string() + ": cannot create");
        out.write(kPyramidMagic, 4);
        detail::put_le<std::uint16_t>(out, kPyramidVersion);
        detail::put_le<std::uint8_t>(out, static_cast<std::uint8_t>(pyramid.levels.size()));
        for (const FeatureMap& map : pyramid.levels) {
            detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(map.channels));
            detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(map.height));
            detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(map.width));
            for (double v : map.values) detail::put_f32(out, v);
        }
        out.flush();
        if (!out) throw std::runtime_error(tmp.string() + ": write failed");
    });
}

}  // namespace ahgcn
