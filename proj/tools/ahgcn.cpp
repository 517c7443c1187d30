// ahgcn: command-line front end for viewport sampling, training, evaluation,
// gradient checking and hypergraph inspection.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ahgcn/atomic_file.hpp"
#include "ahgcn/checkpoint.hpp"
#include "ahgcn/config.hpp"
#include "ahgcn/gradcheck.hpp"
#include "ahgcn/image_io.hpp"
#include "ahgcn/metrics.hpp"
#include "ahgcn/training.hpp"

namespace fs = std::filesystem;
using namespace ahgcn;

namespace {

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string manifest;
    std::string checkpoint;
};

RunConfig resolve_config(const CommonFlags& flags) {
    RunConfig c = flags.config.empty() ? RunConfig{} : load_config(flags.config);
    if (flags.seed) c.train.seed = *flags.seed;
    if (!flags.out.empty()) c.out = flags.out;
    if (!flags.manifest.empty()) c.manifest = flags.manifest;
    if (!flags.checkpoint.empty()) c.checkpoint = flags.checkpoint;
    c.validate();
    return c;
}

void require_file(const fs::path& p, const char* what) {
    if (p.empty()) throw std::invalid_argument(std::string("no ") + what + " given");
    if (!fs::exists(p)) throw std::invalid_argument(std::string(what) + " '" + p.string() + "' does not exist");
}

fs::path require_out(const RunConfig& c) {
    if (c.out.empty()) throw std::invalid_argument("no output directory given (--out)");
    fs::create_directories(c.out);
    return c.out;
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

int cmd_sample_viewports(const CommonFlags& flags, const std::string& image) {
    const RunConfig c = resolve_config(flags);
    require_file(image, "image");
    const fs::path out = require_out(c);
    const EquirectImage equi = image_io::to_equirect(image_io::read_image(image));
    const auto centers = c.centers();
    std::string csv = "id,lon_deg,lat_deg\n";
    for (std::size_t i = 0; i < centers.size(); ++i) {
        const ViewportSpec spec{centers[i], c.fov_deg, c.resolution};
        const auto vp = render_viewport(equi, spec);
        const fs::path target = out / viewport_file_name(i, ".png");
        image_io::write_png(target, image_io::from_viewport(vp));
        csv += std::to_string(i) + "," + fmt("%.17g", rad_to_deg(centers[i].lon())) + "," +
               fmt("%.17g", rad_to_deg(centers[i].lat())) + "\n";
    }
    write_text_atomically(out / "centers.csv", csv);
    std::cout << "wrote " << centers.size() << " viewports to " << out.string() << "\n";
    return 0;
}

int cmd_train(const CommonFlags& flags) {
    const RunConfig c = resolve_config(flags);
    require_file(c.manifest, "manifest");
    const fs::path out = require_out(c);
    const fs::path checkpoint = c.checkpoint.empty() ? out / "model.ahgc" : c.checkpoint;
    const Dataset data = load_manifest(c.manifest, c.manifest_options());
    const TrainConfig tc = c.train_config();

    write_text_atomically(out / "config.json", dump_config(c));
    auto on_epoch = [&](const EpochLog& log, const ModelParams& params, const AdamState& adam) {
        std::cout << "epoch " << log.epoch << " lr " << fmt("%.3e", log.lr) << " train_mse "
                  << fmt("%.6g", log.train_mse) << "\n";
        if (tc.checkpoint_every > 0 && (log.epoch + 1) % tc.checkpoint_every == 0 && log.epoch + 1 < tc.epochs) {
            char name[64];
            std::snprintf(name, sizeof name, "checkpoint_ep%04zu.ahgc", log.epoch + 1);
            save_checkpoint(out / name, params, &adam);
        }
    };
    const TrainResult result = train(data, tc, std::nullopt, on_epoch);
    save_checkpoint(checkpoint, result.params, &result.adam);
    write_text_atomically(out / "loss.csv", loss_log_csv(result.log));
    std::cout << "checkpoint " << checkpoint.string() << "\n";
    return 0;
}

std::vector<metrics::PairLabel> read_pair_labels(const fs::path& path, const Dataset& data) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path.string() + ": cannot open pair labels");
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < data.size(); ++i) index[data[i].id] = i;
    std::vector<metrics::PairLabel> labels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
        auto fail = [&](const std::string& what) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + what);
        };
        if (line_no == 1) {
            if (line != "id_a,id_b,different,a_better") fail("expected header id_a,id_b,different,a_better");
            continue;
        }
        if (cells.size() != 4) fail("expected 4 fields");
        auto a = index.find(cells[0]), b = index.find(cells[1]);
        if (a == index.end() || b == index.end()) fail("unknown sample id");
        if (a->second == b->second) fail("pair of identical ids");
        auto flag = [&](const std::string& s) {
            if (s != "0" && s != "1") fail("flags must be 0 or 1");
            return s == "1";
        };
        metrics::PairLabel l;
        const bool swap = a->second > b->second;
        l.i = swap ? b->second : a->second;
        l.j = swap ? a->second : b->second;
        l.different = flag(cells[2]);
        l.i_better = flag(cells[3]) != swap;
        labels.push_back(l);
    }
    return labels;
}

int cmd_evaluate(const CommonFlags& flags) {
    const RunConfig c = resolve_config(flags);
    require_file(c.manifest, "manifest");
    require_file(c.checkpoint, "checkpoint");
    const fs::path out = require_out(c);
    const Dataset data = load_manifest(c.manifest, c.manifest_options());
    if (data.empty()) throw std::invalid_argument("evaluate: empty test set");
    Checkpoint ck = load_checkpoint(c.checkpoint);
    if (ck.params.predictor.layer_dims() != c.train.layer_dims) {
        throw std::invalid_argument("evaluate: checkpoint layer dims do not match the configured model.layer_dims");
    }
    const TrainConfig tc = c.train_config();
    const auto first = data.front().source->load();
    check_model_compatible(ck.params, *first, tc.layer_dims);

    const std::vector<double> preds = evaluate(data, ck.params, tc.hypergraph_config());
    std::vector<std::string> ids;
    std::vector<double> mos;
    for (const auto& s : data) {
        ids.push_back(s.id);
        mos.push_back(s.mos);
    }
    metrics::EvalReport report = metrics::evaluate_predictions(ids, preds, mos, c.krasula_threshold);
    if (!c.pair_labels.empty()) {
        report.krasula = metrics::krasula_analysis(preds, read_pair_labels(c.pair_labels, data));
    }
    write_text_atomically(out / "report.json", metrics::report_json(report));
    write_text_atomically(out / "scatter.csv", metrics::scatter_csv(report));
    std::cout << "plcc " << fmt("%.4f", report.plcc) << " srocc " << fmt("%.4f", report.srocc) << " rmse "
              << fmt("%.4f", report.rmse) << "\n";
    return 0;
}

int cmd_gradcheck(const CommonFlags& flags, bool corrupt) {
    GradcheckOptions options;
    options.seed = flags.seed.value_or(0);
    options.corrupt = corrupt;
    const GradcheckReport report = run_gradcheck(options);
    std::cout << report.format();
    return report.passed() ? 0 : 1;
}

int cmd_dump_hypergraph(const CommonFlags& flags, const std::string& sample_id) {
    const RunConfig c = resolve_config(flags);
    require_file(c.manifest, "manifest");
    const fs::path out = require_out(c);
    const Dataset data = load_manifest(c.manifest, c.manifest_options());
    const auto it = std::find_if(data.begin(), data.end(), [&](const Sample& s) { return s.id == sample_id; });
    if (it == data.end()) throw std::invalid_argument("dump-hypergraph: unknown sample id '" + sample_id + "'");
    const auto pyramids = it->source->load();
    const TrainConfig tc = c.train_config();

    // Content edges depend on the descriptor; without a checkpoint the seeded
    // initial parameters are used, as at the start of training.
    ModelParams params;
    if (!c.checkpoint.empty()) {
        params = load_checkpoint(c.checkpoint).params;
    } else {
        std::vector<std::size_t> channels;
        for (const auto& level : pyramids->front().levels) channels.push_back(level.channels);
        std::mt19937_64 rng(tc.seed);
        params = ModelParams::random(channels, tc.compaction, tc.predictor_config(), rng);
    }
    std::vector<const FeaturePyramid*> ptrs;
    for (const auto& p : *pyramids) ptrs.push_back(&p);
    const Matrix x = describe(ptrs, params.compaction);
    const HypergraphBuilder builder(tc.hypergraph_config());
    const IncidenceMatrix e = builder.build(x);
    const NormalizedOperator op = normalize(e);

    write_text_atomically(out / "incidence.csv", incidence_csv(e));
    write_text_atomically(out / "operator.csv", operator_csv(op));
    nlohmann::json summary;
    summary["sample"] = sample_id;
    summary["nodes"] = e.nodes();
    summary["edges"] = e.edges();
    summary["k"] = tc.k;
    summary["delta_deg"] = c.delta_deg;
    summary["node_degrees"] = op.node_degree;
    summary["edge_degrees"] = op.edge_degree;
    write_text_atomically(out / "summary.json", summary.dump(2) + "\n");
    std::cout << "E: " << e.nodes() << "x" << e.edges() << "\n";
    return 0;
}

int cmd_synthesize(const CommonFlags& flags, std::size_t samples, double mos_lo, double mos_hi) {
    const RunConfig c = resolve_config(flags);
    const fs::path out = require_out(c);
    const PyramidProfile profile = c.synthetic_profile.channels.empty() ? PyramidProfile{} : c.synthetic_profile;
    const Dataset data = synthetic_dataset(samples, c.centers().size(), profile, c.train.seed, mos_lo, mos_hi);
    write_pyramid_dataset(out, data);
    std::cout << "wrote " << samples << " samples to " << out.string() << "\n";
    return 0;
}

void add_common(CLI::App* cmd, CommonFlags& flags, bool with_data) {
    cmd->add_option("--config", flags.config, "JSON run configuration");
    cmd->add_option("--seed", flags.seed, "RNG seed (overrides the config)");
    cmd->add_option("--out", flags.out, "output directory");
    if (with_data) {
        cmd->add_option("--manifest", flags.manifest, "dataset manifest CSV (id,path,mos)");
        cmd->add_option("--checkpoint", flags.checkpoint, "AHGC checkpoint");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hypergraph convolution quality predictor for 360-degree images"};
    app.require_subcommand(1);
    CommonFlags flags;

    std::string image;
    auto* sample = app.add_subcommand("sample-viewports", "render viewports of an equirectangular image");
    add_common(sample, flags, false);
    sample->add_option("image,--image", image, "8-bit PNG or PPM equirectangular image")->required();

    auto* train_cmd = app.add_subcommand("train", "train on a manifest");
    add_common(train_cmd, flags, true);

    auto* eval_cmd = app.add_subcommand("evaluate", "score a manifest with a checkpoint");
    add_common(eval_cmd, flags, true);

    bool corrupt = false;
    auto* grad = app.add_subcommand("gradcheck", "finite-difference check of every backward pass");
    grad->add_option("--seed", flags.seed, "instance seed");
    grad->add_flag("--corrupt-gradients", corrupt, "perturb analytic gradients (negative control)");

    std::string sample_id;
    auto* dump = app.add_subcommand("dump-hypergraph", "write E and the normalized operator for one sample");
    add_common(dump, flags, true);
    dump->add_option("--sample", sample_id, "sample id")->required();

    std::size_t samples = 16;
    double mos_lo = 1.0, mos_hi = 10.0;
    auto* synth = app.add_subcommand("synthesize-dataset", "write a seeded synthetic pyramid dataset");
    add_common(synth, flags, false);
    synth->add_option("--samples", samples, "sample count")->check(CLI::PositiveNumber);
    synth->add_option("--mos-lo", mos_lo, "lowest MOS");
    synth->add_option("--mos-hi", mos_hi, "highest MOS");

    CLI11_PARSE(app, argc, argv);
    try {
        if (sample->parsed()) return cmd_sample_viewports(flags, image);
        if (train_cmd->parsed()) return cmd_train(flags);
        if (eval_cmd->parsed()) return cmd_evaluate(flags);
        if (grad->parsed()) return cmd_gradcheck(flags, corrupt);
        if (dump->parsed()) return cmd_dump_hypergraph(flags, sample_id);
        if (synth->parsed()) return cmd_synthesize(flags, samples, mos_lo, mos_hi);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
