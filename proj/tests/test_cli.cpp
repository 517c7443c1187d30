#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

#include "ahgcn/checkpoint.hpp"
#include "ahgcn/config.hpp"
#include "ahgcn/image_io.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace ahgcn;

namespace {

struct Run {
    int code = -1;
    std::string output;
};

Run cli(const std::string& args) {
    const std::string cmd = std::string(AHGCN_CLI_PATH) + " " + args + " 2>&1";
    Run r;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf{};
    while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) r.output.append(buf.data(), n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

bool contains(const std::string& s, const std::string& sub) { return s.find(sub) != std::string::npos; }

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

image_io::Rgb8 test_image(std::size_t w, std::size_t h) {
    image_io::Rgb8 img{w, h, std::vector<std::uint8_t>(w * h * 3)};
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c)
            for (std::size_t ch = 0; ch < 3; ++ch) img.pixels[(r * w + c) * 3 + ch] = static_cast<std::uint8_t>((r * 3 + c * 5 + ch * 70) % 256);
    return img;
}

// Small model on a tiny synthetic pyramid dataset.
const char* kConfig = R"({
  "seed": 4,
  "train": {"batch_size": 3, "epochs": 3, "checkpoint_every": 2},
  "model": {"layer_dims": [8, 4, 1], "reduced_channels": 2, "pool_grid": 2, "out_dim": 4},
  "features": {"channels": [3, 4], "extents": [4, 4]}
})";

struct Workspace {
    testutil::TempDir dir{"cli"};
    fs::path config = dir / "config.json";
    fs::path data = dir / "data";

    Workspace() {
        write(config, kConfig);
        const auto r = cli("synthesize-dataset --config " + q(config) + " --samples 16 --mos-lo 1 --mos-hi 10 --out " + q(data));
        REQUIRE_MESSAGE(r.code == 0, r.output);
    }
    std::string data_args(const fs::path& out) const {
        return "--config " + q(config) + " --manifest " + q(data / "manifest.csv") + " --out " + q(out);
    }
};

}  // namespace

TEST_CASE("sample-viewports") {
    testutil::TempDir dir("sv");
    image_io::write_png(dir / "equi.png", test_image(128, 64));
    const auto a = cli("sample-viewports " + q(dir / "equi.png") + " --out " + q(dir / "a"));
    REQUIRE_MESSAGE(a.code == 0, a.output);
    const auto b = cli("sample-viewports --image " + q(dir / "equi.png") + " --out " + q(dir / "b"));
    REQUIRE(b.code == 0);
    for (int i = 0; i < 20; ++i) {
        char name[16];
        std::snprintf(name, sizeof name, "vp_%02d.png", i);
        const auto img = image_io::read_image(dir / "a" / name);
        CHECK(img.width == 256);
        CHECK(img.height == 256);
        CHECK(testutil::read_file(dir / "a" / name) == testutil::read_file(dir / "b" / name));
    }
    CHECK_FALSE(fs::exists(dir / "a" / "vp_20.png"));
    const std::string centers = testutil::read_file(dir / "a" / "centers.csv");
    CHECK(centers.rfind("id,lon_deg,lat_deg\n", 0) == 0);
    CHECK(std::count(centers.begin(), centers.end(), '\n') == 21);

    image_io::write_png(dir / "square.png", test_image(64, 64));
    const auto bad = cli("sample-viewports " + q(dir / "square.png") + " --out " + q(dir / "c"));
    CHECK(bad.code == 2);
    CHECK(contains(bad.output, "2:1"));
    const auto missing = cli("sample-viewports " + q(dir / "none.png") + " --out " + q(dir / "c"));
    CHECK(missing.code == 2);
    CHECK(contains(missing.output, "does not exist"));
}

TEST_CASE("train and evaluate") {
    Workspace ws;
    const auto a = cli("train " + ws.data_args(ws.dir / "run_a"));
    REQUIRE_MESSAGE(a.code == 0, a.output);
    const auto b = cli("train " + ws.data_args(ws.dir / "run_b"));
    REQUIRE(b.code == 0);
    const std::string loss = testutil::read_file(ws.dir / "run_a" / "loss.csv");
    CHECK(loss == testutil::read_file(ws.dir / "run_b" / "loss.csv"));
    CHECK(loss.rfind("epoch,lr,train_mse\n", 0) == 0);
    CHECK(std::count(loss.begin(), loss.end(), '\n') == 4);
    CHECK(fs::exists(ws.dir / "run_a" / "checkpoint_ep0002.ahgc"));
    CHECK_FALSE(fs::exists(ws.dir / "run_a" / "checkpoint_ep0003.ahgc"));

    const auto ck = load_checkpoint(ws.dir / "run_a" / "model.ahgc");
    CHECK(ck.params.predictor.layer_dims() == std::vector<std::size_t>{8, 4, 1});
    CHECK(ck.adam.has_value());

    // Same run in-process: the checkpoint holds exactly its parameters (as float32).
    const RunConfig rc = load_config(ws.config);
    const auto trained = train(load_manifest(ws.data / "manifest.csv", rc.manifest_options()), rc.train_config());
    auto expected = trained.params;
    for (auto& t : named_tensors(expected))
        for (double& v : t.value->values()) v = static_cast<double>(static_cast<float>(v));
    CHECK(ck.params == expected);

    // The dumped effective configuration reproduces the run.
    const fs::path dumped = ws.dir / "run_a" / "config.json";
    const auto c = cli("train --config " + q(dumped) + " --manifest " + q(ws.data / "manifest.csv") +
                         " --out " + q(ws.dir / "run_c"));
    REQUIRE_MESSAGE(c.code == 0, c.output);
    CHECK(testutil::read_file(ws.dir / "run_c" / "loss.csv") == loss);
    const auto d = cli("train " + ws.data_args(ws.dir / "run_d") + " --seed 9");
    REQUIRE(d.code == 0);
    CHECK(testutil::read_file(ws.dir / "run_d" / "loss.csv") != loss);

    const auto e = cli("evaluate " + ws.data_args(ws.dir / "eval") + " --checkpoint " +
                         q(ws.dir / "run_a" / "model.ahgc"));
    REQUIRE_MESSAGE(e.code == 0, e.output);
    const auto report = nlohmann::json::parse(testutil::read_file(ws.dir / "eval" / "report.json"));
    CHECK(report["sample_count"] == 16);
    CHECK(report.contains("krasula"));
    const std::string scatter = testutil::read_file(ws.dir / "eval" / "scatter.csv");
    CHECK(std::count(scatter.begin(), scatter.end(), '\n') == 17);

    write(ws.dir / "pairs.csv", "id_a,id_b,different,a_better\nsyn_001,syn_000,1,1\nsyn_002,syn_003,0,0\n");
    write(ws.dir / "pairs_config.json",
          std::string(kConfig).substr(0, std::string(kConfig).rfind('}')) + R"(, "metrics": {"pair_labels": "pairs.csv"}})");
    const auto p = cli("evaluate --config " + q(ws.dir / "pairs_config.json") + " --manifest " +
                         q(ws.data / "manifest.csv") + " --out " + q(ws.dir / "eval_pairs") + " --checkpoint " +
                         q(ws.dir / "run_a" / "model.ahgc"));
    REQUIRE_MESSAGE(p.code == 0, p.output);
    const auto pr = nlohmann::json::parse(testutil::read_file(ws.dir / "eval_pairs" / "report.json"));
    CHECK_FALSE(pr["krasula"]["auc_ds"].is_null());

    // Layer dims in the config must match the checkpoint.
    write(ws.dir / "other.json", R"({"model": {"layer_dims": [8, 3, 1], "reduced_channels": 2, "pool_grid": 2, "out_dim": 4}})");
    const auto mismatch = cli("evaluate --config " + q(ws.dir / "other.json") + " --manifest " +
                                q(ws.data / "manifest.csv") + " --out " + q(ws.dir / "eval2") + " --checkpoint " +
                                q(ws.dir / "run_a" / "model.ahgc"));
    CHECK(mismatch.code == 2);
    CHECK(contains(mismatch.output, "layer dims"));
    const auto no_ck = cli("evaluate " + ws.data_args(ws.dir / "eval3"));
    CHECK(no_ck.code == 2);
}

TEST_CASE("missing feature file names the sample") {
    Workspace ws;
    fs::remove(ws.data / "syn_004" / "vp_07.ahgf");
    const auto r = cli("train " + ws.data_args(ws.dir / "run"));
    CHECK(r.code == 2);
    CHECK(contains(r.output, "syn_004"));
    CHECK(contains(r.output, "vp_07.ahgf"));
}

TEST_CASE("dump-hypergraph") {
    Workspace ws;
    const auto r = cli("dump-hypergraph " + ws.data_args(ws.dir / "hg") + " --sample syn_002");
    REQUIRE_MESSAGE(r.code == 0, r.output);
    const std::string inc = testutil::read_file(ws.dir / "hg" / "incidence.csv");
    const auto header_end = inc.find('\n');
    const std::string header = inc.substr(0, header_end);
    CHECK(std::count(header.begin(), header.end(), ',') == 40);
    CHECK(std::count(inc.begin(), inc.end(), '\n') == 21);
    const auto summary = nlohmann::json::parse(testutil::read_file(ws.dir / "hg" / "summary.json"));
    CHECK(summary["nodes"] == 20);
    CHECK(summary["edges"] == 40);
    CHECK(summary["k"] == 5);
    for (const auto& d : summary["edge_degrees"].get<std::vector<double>>()) CHECK(d >= 1.0);

    // Operator is symmetric as written.
    std::ifstream op(ws.dir / "hg" / "operator.csv");
    std::string line;
    std::getline(op, line);
    std::vector<std::vector<double>> m;
    while (std::getline(op, line)) {
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        m.push_back(row);
    }
    REQUIRE(m.size() == 20);
    for (std::size_t i = 0; i < 20; ++i)
        for (std::size_t j = 0; j < 20; ++j) CHECK(m[i][j] == m[j][i]);

    write(ws.dir / "k0.json", std::string(kConfig).substr(0, std::string(kConfig).rfind('}')) + R"(, "hypergraph": {"k": 0}})");
    const auto k0 = cli("dump-hypergraph --config " + q(ws.dir / "k0.json") + " --manifest " +
                          q(ws.data / "manifest.csv") + " --out " + q(ws.dir / "hg0") + " --sample syn_002");
    REQUIRE_MESSAGE(k0.code == 0, k0.output);
    const std::string inc0 = testutil::read_file(ws.dir / "hg0" / "incidence.csv");
    const std::string header0 = inc0.substr(0, inc0.find('\n'));
    CHECK(std::count(header0.begin(), header0.end(), ',') == 20);

    const auto unknown = cli("dump-hypergraph " + ws.data_args(ws.dir / "hg1") + " --sample nope");
    CHECK(unknown.code == 2);
    CHECK(contains(unknown.output, "unknown sample id 'nope'"));
}

TEST_CASE("gradcheck command") {
    const auto ok = cli("gradcheck");
    CHECK(ok.code == 0);
    for (const char* name : {"desc.l0.reduce_w", "bn.gamma", "hgcn.l0.w1", "hgcn.l2.w2", "hgcn.input", "mse.pred",
                             "pipeline.hgcn.l1.bn_beta"})
        CHECK_MESSAGE(contains(ok.output, name), name);
    const auto bad = cli("gradcheck --corrupt-gradients");
    CHECK(bad.code == 1);
    CHECK(contains(bad.output, "FAIL"));
}

TEST_CASE("configuration errors") {
    testutil::TempDir dir("cfg");
    write(dir / "typo.json", R"({"train": {"epocs": 3}})");
    const auto r = cli("train --config " + q(dir / "typo.json") + " --manifest " + q(dir / "m.csv") + " --out " + q(dir / "o"));
    CHECK(r.code == 2);
    CHECK(contains(r.output, "train.epocs"));
    const auto none = cli("train --out " + q(dir / "o"));
    CHECK(none.code == 2);
    CHECK(contains(none.output, "manifest"));
    CHECK(cli("").code != 0);
    CHECK(cli("frobnicate").code != 0);
}
