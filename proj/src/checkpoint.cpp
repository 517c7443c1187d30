#include "ahgcn/checkpoint.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>

#include "ahgcn/atomic_file.hpp"
#include "binary_io.hpp"

namespace ahgcn {

namespace {

constexpr char kMagic[4] = {'A', 'H', 'G', 'C'};
constexpr std::uint16_t kVersion = 1;
// float32 holds every integer up to 2^24 exactly.
constexpr std::uint64_t kMaxStoredStep = 1ull << 24;

void put_tensor(std::ostream& out, const std::string& name, const Matrix& m, bool vector) {
    if (name.size() > 0xFFFF) throw std::invalid_argument("checkpoint: tensor name too long");
    detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    if (vector) {
        detail::put_le<std::uint8_t>(out, 1);
        detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.size()));
    } else {
        detail::put_le<std::uint8_t>(out, 2);
        detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
        detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
    }
    for (double v : m.values()) detail::put_f32(out, v);
}

std::size_t parse_index(const std::string& name, std::size_t pos) {
    std::size_t end = pos;
    while (end < name.size() && std::isdigit(static_cast<unsigned char>(name[end]))) ++end;
    if (end == pos) throw std::runtime_error("checkpoint: malformed tensor name " + name);
    return std::stoul(name.substr(pos, end - pos));
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, const AdamState* adam) {
    const auto tensors = named_tensors(params);
    if (params.predictor.layers.size() > 255) throw std::invalid_argument("checkpoint: too many layers");
    if (adam && adam->step > kMaxStoredStep) {
        throw std::invalid_argument("checkpoint: optimizer step count exceeds the storable range");
    }
    write_atomically(path, [&](const std::filesystem::path& tmp) {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error(tmp.string() + ": cannot create");
        out.write(kMagic, 4);
        detail::put_le<std::uint16_t>(out, kVersion);
        detail::put_le<std::uint8_t>(out, static_cast<std::uint8_t>(params.predictor.layers.size()));
        for (const auto& t : tensors) put_tensor(out, t.name, *t.value, t.vector);
        if (adam) {
            std::size_t i = 0;
            for (const auto& t : tensors) {
                if (!t.trainable) continue;
                put_tensor(out, "adam.m." + t.name, adam->first_moment.at(i), t.vector);
                put_tensor(out, "adam.v." + t.name, adam->second_moment.at(i), t.vector);
                ++i;
            }
            put_tensor(out, "adam.step", Matrix(1, 1, static_cast<double>(adam->step)), true);
        }
        out.flush();
        if (!out) throw std::runtime_error(tmp.string() + ": write failed");
    });
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path.string() + ": cannot open checkpoint");
    detail::LeReader reader(in, path.string());
    if (reader.get_bytes(4) != std::string(kMagic, 4)) reader.fail("bad magic, not an AHGC checkpoint");
    const auto version = reader.get<std::uint16_t>();
    if (version != kVersion) reader.fail("unsupported AHGC version " + std::to_string(version));
    const std::size_t layer_count = reader.get<std::uint8_t>();

    std::map<std::string, Matrix> tensors;
    std::vector<std::string> order;
    while (!reader.at_end()) {
        const auto len = reader.get<std::uint16_t>();
        std::string name = reader.get_bytes(len);
        const auto rank = reader.get<std::uint8_t>();
        if (rank == 0 || rank > 2) reader.fail("tensor " + name + " has unsupported rank " + std::to_string(rank));
        std::size_t rows = 1, cols = reader.get<std::uint32_t>();
        if (rank == 2) {
            rows = cols;
            cols = reader.get<std::uint32_t>();
        }
        Matrix m(rows, cols);
        for (double& v : m.values()) v = reader.get_f32();
        if (!tensors.emplace(name, std::move(m)).second) reader.fail("duplicate tensor " + name);
        order.push_back(std::move(name));
    }

    auto take = [&](const std::string& name) -> Matrix {
        auto it = tensors.find(name);
        if (it == tensors.end()) reader.fail("missing tensor " + name);
        Matrix m = std::move(it->second);
        tensors.erase(it);
        return m;
    };

    std::size_t levels = 0;
    for (const auto& name : order) {
        if (name.rfind("desc.l", 0) == 0) levels = std::max(levels, parse_index(name, 6) + 1);
    }
    Checkpoint ck;
    for (std::size_t j = 0; j < levels; ++j) {
        const std::string base = "desc.l" + std::to_string(j) + ".";
        LevelCompaction level{take(base + "reduce_w"), take(base + "reduce_b"), take(base + "fc_w"),
                              take(base + "fc_b")};
        ck.params.compaction.levels.push_back(std::move(level));
    }
    if (levels > 0) {
        const auto& first = ck.params.compaction.levels.front();
        CompactionShape shape;
        shape.reduced_channels = first.reduce_weight.cols();
        shape.out_dim = first.fc_weight.cols();
        const auto grid = static_cast<std::size_t>(
            std::lround(std::sqrt(static_cast<double>(first.fc_weight.rows()) /
                                  static_cast<double>(std::max<std::size_t>(1, shape.reduced_channels)))));
        shape.pool_grid = grid;
        if (shape.flat_dim() != first.fc_weight.rows()) reader.fail("descriptor tensor shapes are inconsistent");
        ck.params.compaction.shape = shape;
        for (const auto& l : ck.params.compaction.levels) {
            if (l.reduce_weight.cols() != shape.reduced_channels || l.reduce_bias.cols() != shape.reduced_channels ||
                l.fc_weight.rows() != shape.flat_dim() || l.fc_weight.cols() != shape.out_dim ||
                l.fc_bias.cols() != shape.out_dim) {
                reader.fail("descriptor tensor shapes are inconsistent");
            }
        }
    }
    for (std::size_t t = 0; t < layer_count; ++t) {
        const std::string base = "hgcn.l" + std::to_string(t) + ".";
        HgcnLayerParams layer;
        layer.w1 = take(base + "w1");
        layer.w2 = take(base + "w2");
        layer.bn_gamma = take(base + "bn_gamma");
        layer.bn_beta = take(base + "bn_beta");
        layer.bn_running_mean = take(base + "bn_running_mean");
        layer.bn_running_var = take(base + "bn_running_var");
        if (!layer.w1.same_shape(layer.w2) || layer.bn_gamma.cols() != layer.out_dim()) {
            reader.fail("layer " + std::to_string(t) + " tensor shapes are inconsistent");
        }
        if (t > 0 && ck.params.predictor.layers.back().out_dim() != layer.in_dim()) {
            reader.fail("layer " + std::to_string(t) + " input does not match the previous layer");
        }
        ck.params.predictor.layers.push_back(std::move(layer));
    }

    if (tensors.count("adam.step")) {
        AdamState adam;
        adam.step = static_cast<std::uint64_t>(take("adam.step")[0]);
        for (const auto& t : named_tensors(ck.params)) {
            if (!t.trainable) continue;
            adam.first_moment.push_back(take("adam.m." + t.name));
            adam.second_moment.push_back(take("adam.v." + t.name));
            if (!adam.first_moment.back().same_shape(*t.value) || !adam.second_moment.back().same_shape(*t.value)) {
                reader.fail("optimizer state for " + t.name + " has the wrong shape");
            }
        }
        ck.adam = std::move(adam);
    }
    if (!tensors.empty()) reader.fail("unexpected tensor " + tensors.begin()->first);
    return ck;
}

}  // namespace ahgcn
