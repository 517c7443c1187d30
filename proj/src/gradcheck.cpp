#include "ahgcn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>

#include "ahgcn/descriptor.hpp"
#include "ahgcn/hgcn.hpp"
#include "ahgcn/hypergraph.hpp"
#include "ahgcn/model.hpp"
#include "ahgcn/training.hpp"

namespace ahgcn {

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Matrix m(rows, cols);
    for (double& v : m.values()) v = dist(rng);
    return m;
}

double weighted_sum(const Matrix& m, const Matrix& weights) {
    double acc = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) acc += m[i] * weights[i];
    return acc;
}

class Checker {
public:
    Checker(const GradcheckOptions& options, GradcheckReport& report) : options_(options), report_(report) {}

    void check(const std::string& block, const std::string& tensor, Matrix& x, Matrix analytic,
               const std::function<double()>& objective) {
        if (options_.corrupt && analytic.size() > 0) {
            double scale = 0.0;
            for (double v : analytic.values()) scale = std::max(scale, std::abs(v));
            analytic[0] += 0.05 * scale + 1e-3;
        }
        GradcheckEntry e;
        e.block = block;
        e.tensor = tensor;
        e.entries = x.size();
        e.max_rel_error = finite_difference_error(x, analytic, objective, options_.step);
        e.passed = e.max_rel_error < options_.threshold;
        report_.entries.push_back(std::move(e));
    }

private:
    const GradcheckOptions& options_;
    GradcheckReport& report_;
};

const PyramidProfile kSmallProfile{{3, 4, 5, 2}, {4, 6, 5, 4}};
const CompactionShape kSmallShape{3, 2, 4};

// Smallest gap between the largest and second-largest reduced value in any
// pool window. Max pooling is only differentiable away from ties.
double min_pool_gap(const FeaturePyramid& p, const CompactionParams& params) {
    double gap = std::numeric_limits<double>::infinity();
    const std::size_t grid = params.shape.pool_grid;
    for (std::size_t j = 0; j < p.levels.size(); ++j) {
        const FeatureMap& map = p.levels[j];
        const auto& lp = params.levels[j];
        const std::size_t wy = kernels::pool_window(map.height, grid);
        const std::size_t wx = kernels::pool_window(map.width, grid);
        for (std::size_t r = 0; r < params.shape.reduced_channels; ++r) {
            for (std::size_t gy = 0; gy < grid; ++gy) {
                for (std::size_t gx = 0; gx < grid; ++gx) {
                    std::vector<double> vals;
                    for (std::size_t y = gy * wy; y < std::min(map.height, (gy + 1) * wy); ++y) {
                        for (std::size_t x = gx * wx; x < std::min(map.width, (gx + 1) * wx); ++x) {
                            double acc = lp.reduce_bias[r];
                            for (std::size_t c = 0; c < map.channels; ++c) acc += lp.reduce_weight(c, r) * map.at(c, y, x);
                            vals.push_back(acc);
                        }
                    }
                    if (vals.size() < 2) continue;
                    std::partial_sort(vals.begin(), vals.begin() + 2, vals.end(), std::greater<>());
                    gap = std::min(gap, vals[0] - vals[1]);
                }
            }
        }
    }
    return gap;
}

// Smallest gap between the k-th and (k+1)-th most similar neighbour of any node.
double min_knn_gap(const Matrix& features, std::size_t k) {
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < features.rows(); ++i) {
        std::vector<double> sims;
        for (std::size_t p = 0; p < features.rows(); ++p) {
            if (p != i) sims.push_back(cosine_similarity(features.row(i), features.row(p)));
        }
        std::sort(sims.begin(), sims.end(), std::greater<>());
        if (k < sims.size()) gap = std::min(gap, sims[k - 1] - sims[k]);
    }
    return gap;
}

FeaturePyramid draw_tie_free(std::mt19937_64& rng, const CompactionParams& params) {
    for (int attempt = 0; attempt < 100000; ++attempt) {
        FeaturePyramid p = synthesize_pyramid(rng(), kSmallProfile);
        if (min_pool_gap(p, params) > 3e-3) return p;
    }
    throw std::runtime_error("gradcheck: could not draw a tie-free pyramid");
}

void check_descriptor(Checker& checker, std::mt19937_64& rng) {
    const std::size_t viewports = 2;
    std::vector<FeaturePyramid> pyramids;
    CompactionParams params;
    params = CompactionParams::random(kSmallProfile.channels, rng, kSmallShape);
    for (std::size_t v = 0; v < viewports; ++v) pyramids.push_back(draw_tie_free(rng, params));
    std::vector<const FeaturePyramid*> ptrs;
    for (const auto& p : pyramids) ptrs.push_back(&p);
    const Matrix weights = random_matrix(viewports, params.feature_dim(), rng);

    DescriptorTape tape;
    describe(ptrs, params, &tape);
    DescriptorGrads grads = descriptor_backward(weights, tape, params, /*want_input_grads=*/true);
    auto objective = [&] { return weighted_sum(describe(ptrs, params), weights); };

    ModelParams wrapper;
    wrapper.compaction = params;
    ModelParams grad_wrapper;
    grad_wrapper.compaction = grads.params;
    // Perturb the wrapper's copy, so evaluate through it.
    auto wrapped_objective = [&] { return weighted_sum(describe(ptrs, wrapper.compaction), weights); };
    auto refs = named_tensors(wrapper);
    const auto grad_refs = named_tensors(static_cast<const ModelParams&>(grad_wrapper));
    for (std::size_t i = 0; i < refs.size(); ++i) {
        checker.check("descriptor", refs[i].name, *refs[i].value, *grad_refs[i].value, wrapped_objective);
    }
    for (std::size_t v = 0; v < viewports; ++v) {
        for (std::size_t j = 0; j < pyramids[v].levels.size(); ++j) {
            FeatureMap& map = pyramids[v].levels[j];
            Matrix as_matrix(1, map.values.size(), map.values);
            const FeatureMap& g = grads.inputs[v].levels[j];
            auto input_objective = [&] {
                map.values.assign(as_matrix.values().begin(), as_matrix.values().end());
                return objective();
            };
            checker.check("descriptor", "desc.input.v" + std::to_string(v) + ".l" + std::to_string(j), as_matrix,
                          Matrix(1, g.values.size(), g.values), input_objective);
            map.values.assign(as_matrix.values().begin(), as_matrix.values().end());
        }
    }
}

void check_batchnorm(Checker& checker, std::mt19937_64& rng) {
    HgcnLayerParams params = HgcnLayerParams::zeros(1, 3);
    params.bn_gamma = random_matrix(1, 3, rng, 0.5, 1.5);
    params.bn_beta = random_matrix(1, 3, rng);
    Matrix input = random_matrix(6, 3, rng, -2.0, 2.0);
    const Matrix weights = random_matrix(6, 3, rng);

    BatchNormRecord record;
    batchnorm_forward(input, params, Mode::train, &record);
    BatchNormGrads g = batchnorm_backward(weights, record, params);
    auto objective = [&] { return weighted_sum(batchnorm_forward(input, params, Mode::train), weights); };
    checker.check("batchnorm", "bn.input", input, g.input, objective);
    checker.check("batchnorm", "bn.gamma", params.bn_gamma, g.gamma, objective);
    checker.check("batchnorm", "bn.beta", params.bn_beta, g.beta, objective);
}

Matrix random_operator(std::size_t n, std::mt19937_64& rng) {
    IncidenceMatrix e(n);
    std::bernoulli_distribution coin(0.4);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::size_t> members{i};
        for (std::size_t p = 0; p < n; ++p) {
            if (p != i && coin(rng)) members.push_back(p);
        }
        e.add_edge(members, EdgeKind::location);
    }
    return normalize(e).op;
}

void check_predictor(Checker& checker, std::mt19937_64& rng) {
    const std::size_t batch = 3, nodes = 5;
    PredictorConfig config{{8, 6, 4, 1}, 0.5};
    PredictorParams params = PredictorParams::random(config, rng);
    for (auto& layer : params.layers) {
        layer.w1 = random_matrix(layer.in_dim(), layer.out_dim(), rng);
        layer.w2 = random_matrix(layer.in_dim(), layer.out_dim(), rng);
        layer.bn_gamma = random_matrix(1, layer.out_dim(), rng, 0.5, 1.5);
        layer.bn_beta = random_matrix(1, layer.out_dim(), rng, -0.5, 0.5);
    }
    std::vector<Matrix> ops;
    for (std::size_t b = 0; b < batch; ++b) ops.push_back(random_operator(nodes, rng));
    Matrix x = random_matrix(batch * nodes, 8, rng);
    const std::vector<double> weights = {0.7, -1.3, 0.4};
    const std::uint64_t mask_seed = rng();

    auto forward = [&](ForwardTape* tape) {
        std::mt19937_64 mask_rng(mask_seed);
        ForwardOptions options{Mode::train, config.dropout_rate, &mask_rng};
        return predict_batch(ops, x, params, options, tape);
    };
    auto objective = [&] {
        const auto out = forward(nullptr);
        double acc = 0.0;
        for (std::size_t b = 0; b < batch; ++b) acc += weights[b] * out.quality[b];
        return acc;
    };
    ForwardTape tape;
    forward(&tape);
    PredictorGrads g = network_backward(tape, params, weights);

    for (std::size_t t = 0; t < params.layers.size(); ++t) {
        const std::string block = "hgcn.l" + std::to_string(t);
        auto& layer = params.layers[t];
        checker.check(block, block + ".w1", layer.w1, g.layers[t].w1, objective);
        checker.check(block, block + ".w2", layer.w2, g.layers[t].w2, objective);
        checker.check(block, block + ".bn_gamma", layer.bn_gamma, g.layers[t].bn_gamma, objective);
        checker.check(block, block + ".bn_beta", layer.bn_beta, g.layers[t].bn_beta, objective);
    }
    checker.check("hgcn.input", "hgcn.input", x, g.input, objective);
}

void check_mse(Checker& checker, std::mt19937_64& rng) {
    Matrix pred = random_matrix(1, 5, rng, 0.0, 10.0);
    const Matrix target = random_matrix(1, 5, rng, 0.0, 10.0);
    const LossResult r = mse_loss(pred.values(), target.values());
    auto objective = [&] { return mse_loss(pred.values(), target.values()).loss; };
    checker.check("mse", "mse.pred", pred, Matrix(1, r.grad.size(), r.grad), objective);
}

void check_pipeline(Checker& checker, std::mt19937_64& rng) {
    const std::size_t nodes = 4, batch = 2, k = 1;
    std::vector<SphereCoord> centers = {SphereCoord::from_degrees(0, 0), SphereCoord::from_degrees(40, 10),
                                        SphereCoord::from_degrees(100, -20), SphereCoord::from_degrees(-60, 50)};
    const HypergraphBuilder builder({centers, deg_to_rad(45.0), k});
    const PredictorConfig config{{kSmallProfile.channels.size() * kSmallShape.out_dim, 5, 1}, 0.0};

    std::vector<FeaturePyramid> pyramids;
    ModelParams params;
    std::vector<const FeaturePyramid*> ptrs;
    params = ModelParams::random(kSmallProfile.channels, kSmallShape, config, rng);
    for (auto& layer : params.predictor.layers) {
        layer.w1 = random_matrix(layer.in_dim(), layer.out_dim(), rng);
        layer.w2 = random_matrix(layer.in_dim(), layer.out_dim(), rng);
    }
    for (std::size_t b = 0; b < batch; ++b) {
        for (int attempt = 0;; ++attempt) {
            if (attempt == 1000) throw std::runtime_error("gradcheck: could not draw a tie-free pipeline instance");
            std::vector<FeaturePyramid> sample;
            std::vector<const FeaturePyramid*> sample_ptrs;
            for (std::size_t i = 0; i < nodes; ++i) sample.push_back(draw_tie_free(rng, params.compaction));
            for (const auto& p : sample) sample_ptrs.push_back(&p);
            if (min_knn_gap(describe(sample_ptrs, params.compaction), k) > 5e-3) {
                for (auto& p : sample) pyramids.push_back(std::move(p));
                break;
            }
        }
    }
    for (const auto& p : pyramids) ptrs.push_back(&p);
    const std::vector<double> targets = {3.0, 7.0};
    auto objective = [&] {
        const auto out = run_pipeline(ptrs, params, builder, ForwardOptions{Mode::train});
        return mse_loss(out.quality, targets).loss;
    };
    PipelineTape tape;
    const auto out = run_pipeline(ptrs, params, builder, ForwardOptions{Mode::train}, &tape);
    const LossResult loss = mse_loss(out.quality, targets);
    const ModelParams grads = pipeline_backward(tape, params, loss.grad);

    auto refs = trainable_tensors(params);
    std::vector<ConstTensorRef> grad_refs;
    for (auto& t : named_tensors(grads)) {
        if (t.trainable) grad_refs.push_back(t);
    }
    for (std::size_t i = 0; i < refs.size(); ++i) {
        checker.check("pipeline", "pipeline." + refs[i].name, *refs[i].value, *grad_refs[i].value, objective);
    }
}

}  // namespace

double finite_difference_error(Matrix& x, const Matrix& analytic, const std::function<double()>& objective,
                               double step) {
    if (!x.same_shape(analytic)) throw std::invalid_argument("finite_difference_error: shape mismatch");
    double worst_diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + step;
        const double up = objective();
        x[i] = saved - step;
        const double down = objective();
        x[i] = saved;
        const double numeric = (up - down) / (2.0 * step);
        worst_diff = std::max(worst_diff, std::abs(numeric - analytic[i]));
        scale = std::max({scale, std::abs(numeric), std::abs(analytic[i])});
    }
    return worst_diff / std::max(scale, kGradientFloor);
}

bool GradcheckReport::passed() const {
    return !entries.empty() && std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.passed; });
}

double GradcheckReport::max_error(const std::string& block) const {
    double worst = 0.0;
    for (const auto& e : entries) {
        if (e.block == block) worst = std::max(worst, e.max_rel_error);
    }
    return worst;
}

std::string GradcheckReport::format() const {
    std::string out;
    char buf[256];
    std::vector<std::string> blocks;
    for (const auto& e : entries) {
        std::snprintf(buf, sizeof buf, "%-4s %-12s %-34s n=%-5zu max_rel_err=%.3e\n", e.passed ? "ok" : "FAIL",
                      e.block.c_str(), e.tensor.c_str(), e.entries, e.max_rel_error);
        out += buf;
        if (std::find(blocks.begin(), blocks.end(), e.block) == blocks.end()) blocks.push_back(e.block);
    }
    out += "--\n";
    for (const auto& b : blocks) {
        const double err = max_error(b);
        std::snprintf(buf, sizeof buf, "%-4s block %-12s max_rel_err=%.3e (threshold %.1e)\n",
                      err < threshold ? "ok" : "FAIL", b.c_str(), err, threshold);
        out += buf;
    }
    out += passed() ? "gradcheck: PASS\n" : "gradcheck: FAIL\n";
    return out;
}

GradcheckReport run_gradcheck(const GradcheckOptions& options) {
    GradcheckReport report;
    report.threshold = options.threshold;
    Checker checker(options, report);
    std::mt19937_64 rng(options.seed);
    check_descriptor(checker, rng);
    check_batchnorm(checker, rng);
    check_predictor(checker, rng);
    check_mse(checker, rng);
    check_pipeline(checker, rng);
    return report;
}

}  // namespace ahgcn
