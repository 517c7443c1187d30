#include "ahgcn/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace ahgcn {

namespace {

using nlohmann::json;

// Reads keys from one JSON object and rejects whatever is left over.
class Section {
public:
    Section(const json& value, std::string path) : value_(value), path_(std::move(path)) {
        if (!value_.is_object()) throw std::invalid_argument("config: '" + display() + "' must be an object");
    }

    bool has(const std::string& key) const { return value_.contains(key); }

    const json* get(const std::string& key) {
        used_.insert(key);
        auto it = value_.find(key);
        return it == value_.end() ? nullptr : &*it;
    }

    template <typename T>
    void read(const std::string& key, T& out) {
        const json* v = get(key);
        if (!v) return;
        try {
            if constexpr (std::is_same_v<T, bool>) {
                if (!v->is_boolean()) throw std::invalid_argument("expected true or false");
            } else if constexpr (std::is_unsigned_v<T>) {
                if (!v->is_number_unsigned()) throw std::invalid_argument("expected a non-negative integer");
            } else if constexpr (std::is_floating_point_v<T>) {
                if (!v->is_number()) throw std::invalid_argument("expected a number");
            }
            out = v->get<T>();
        } catch (const std::exception& e) {
            throw std::invalid_argument("config: '" + qualified(key) + "': " + e.what());
        }
    }

    void read_path(const std::string& key, std::filesystem::path& out, const std::filesystem::path& base) {
        std::string s;
        read(key, s);
        if (s.empty()) return;
        std::filesystem::path p(s);
        out = (p.is_relative() && !base.empty()) ? base / p : p;
    }

    Section child(const std::string& key) {
        const json* v = get(key);
        static const json empty = json::object();
        return Section(v ? *v : empty, qualified(key));
    }

    void finish() const {
        for (auto it = value_.begin(); it != value_.end(); ++it) {
            if (!used_.count(it.key())) throw std::invalid_argument("config: unknown key '" + qualified(it.key()) + "'");
        }
    }

    std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    std::string display() const { return path_.empty() ? "<root>" : path_; }

    const json& value_;
    std::string path_;
    std::set<std::string> used_;
};

std::string scheme_name(ViewportScheme s) { return s == ViewportScheme::default_icosahedron ? "default" : "explicit"; }
std::string source_name(FeatureSource s) { return s == FeatureSource::files ? "files" : "synthetic"; }

}  // namespace

std::string profile_name(Profile profile) { return profile == Profile::oiqa ? "oiqa" : "cviqd"; }

Profile parse_profile(const std::string& name) {
    if (name == "oiqa") return Profile::oiqa;
    if (name == "cviqd") return Profile::cviqd;
    throw std::invalid_argument("config: unknown profile '" + name + "' (expected oiqa or cviqd)");
}

RunConfig RunConfig::for_profile(Profile profile) {
    RunConfig c;
    c.profile = profile;
    c.train.k = profile == Profile::oiqa ? 5 : 0;
    c.krasula_threshold = profile == Profile::oiqa ? 0.5 : 5.0;
    return c;
}

std::vector<SphereCoord> RunConfig::centers() const {
    if (viewport_scheme == ViewportScheme::default_icosahedron) return default_viewport_centers();
    std::vector<SphereCoord> out;
    for (const auto& c : centers_deg) out.push_back(SphereCoord::from_degrees(c[0], c[1]));
    return out;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig t = train;
    t.delta = deg_to_rad(delta_deg);
    t.centers = centers();
    return t;
}

void RunConfig::validate() const {
    if (viewport_scheme == ViewportScheme::explicit_list && centers_deg.empty()) {
        throw std::invalid_argument("config: viewports.scheme 'explicit' needs viewports.centers_deg");
    }
    if (viewport_scheme == ViewportScheme::default_icosahedron && !centers_deg.empty()) {
        throw std::invalid_argument("config: viewports.centers_deg is only allowed with scheme 'explicit'");
    }
    ViewportSpec spec{SphereCoord(0, 0), fov_deg, resolution};
    spec.validate();
    if (!(krasula_threshold >= 0.0)) throw std::invalid_argument("config: metrics.krasula_threshold must be >= 0");
    if (feature_source == FeatureSource::synthetic) {
        if (synthetic_profile.channels.size() != synthetic_profile.extents.size() ||
            synthetic_profile.channels.empty()) {
            throw std::invalid_argument("config: features.channels and features.extents must be non-empty and match");
        }
    }
    train_config().validate();
}

ManifestOptions RunConfig::manifest_options() const {
    ManifestOptions o;
    o.centers = centers();
    o.fov_deg = fov_deg;
    o.resolution = resolution;
    if (feature_source == FeatureSource::synthetic) {
        o.extractor = std::make_shared<ProjectionExtractor>(synthetic_profile, synthetic_seed);
    }
    return o;
}

RunConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
    Section root(doc, "");
    std::string profile = "oiqa";
    root.read("profile", profile);
    RunConfig c = RunConfig::for_profile(parse_profile(profile));

    root.read_path("manifest", c.manifest, base_dir);
    root.read_path("out", c.out, base_dir);
    root.read_path("checkpoint", c.checkpoint, base_dir);
    root.read("seed", c.train.seed);

    Section train = root.child("train");
    train.read("batch_size", c.train.batch_size);
    train.read("epochs", c.train.epochs);
    train.read("lr_predictor", c.train.lr_predictor);
    train.read("lr_decay", c.train.lr_decay);
    train.read("lr_decay_every", c.train.lr_decay_every);
    train.read("checkpoint_every", c.train.checkpoint_every);
    train.finish();

    Section model = root.child("model");
    model.read("layer_dims", c.train.layer_dims);
    model.read("dropout", c.train.dropout);
    model.read("dropout_last_layer", c.train.dropout_last_layer);
    model.read("reduced_channels", c.train.compaction.reduced_channels);
    model.read("pool_grid", c.train.compaction.pool_grid);
    model.read("out_dim", c.train.compaction.out_dim);
    model.finish();

    Section graph = root.child("hypergraph");
    graph.read("k", c.train.k);
    graph.read("delta_deg", c.delta_deg);
    graph.finish();

    Section vp = root.child("viewports");
    std::string scheme = "default";
    vp.read("scheme", scheme);
    if (scheme == "default") {
        c.viewport_scheme = ViewportScheme::default_icosahedron;
    } else if (scheme == "explicit") {
        c.viewport_scheme = ViewportScheme::explicit_list;
    } else {
        throw std::invalid_argument("config: viewports.scheme must be 'default' or 'explicit'");
    }
    vp.read("centers_deg", c.centers_deg);
    vp.read("fov_deg", c.fov_deg);
    vp.read("resolution", c.resolution);
    vp.finish();

    Section features = root.child("features");
    std::string source = "files";
    features.read("source", source);
    if (source == "files") {
        c.feature_source = FeatureSource::files;
    } else if (source == "synthetic") {
        c.feature_source = FeatureSource::synthetic;
    } else {
        throw std::invalid_argument("config: features.source must be 'files' or 'synthetic'");
    }
    features.read("channels", c.synthetic_profile.channels);
    features.read("extents", c.synthetic_profile.extents);
    features.read("seed", c.synthetic_seed);
    features.finish();

    Section metrics = root.child("metrics");
    metrics.read("krasula_threshold", c.krasula_threshold);
    metrics.read_path("pair_labels", c.pair_labels, base_dir);
    metrics.finish();

    root.finish();
    c.validate();
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot read '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), std::filesystem::absolute(path).parent_path());
}

std::string dump_config(const RunConfig& c) {
    json doc;
    doc["profile"] = profile_name(c.profile);
    doc["manifest"] = c.manifest.string();
    doc["out"] = c.out.string();
    doc["checkpoint"] = c.checkpoint.string();
    doc["seed"] = c.train.seed;
    doc["train"] = {{"batch_size", c.train.batch_size},         {"epochs", c.train.epochs},
                    {"lr_predictor", c.train.lr_predictor},     {"lr_decay", c.train.lr_decay},
                    {"lr_decay_every", c.train.lr_decay_every}, {"checkpoint_every", c.train.checkpoint_every}};
    doc["model"] = {{"layer_dims", c.train.layer_dims},
                    {"dropout", c.train.dropout},
                    {"dropout_last_layer", c.train.dropout_last_layer},
                    {"reduced_channels", c.train.compaction.reduced_channels},
                    {"pool_grid", c.train.compaction.pool_grid},
                    {"out_dim", c.train.compaction.out_dim}};
    doc["hypergraph"] = {{"k", c.train.k}, {"delta_deg", c.delta_deg}};
    doc["viewports"] = {{"scheme", scheme_name(c.viewport_scheme)},
                        {"centers_deg", c.centers_deg},
                        {"fov_deg", c.fov_deg},
                        {"resolution", c.resolution}};
    doc["features"] = {{"source", source_name(c.feature_source)},
                       {"channels", c.synthetic_profile.channels},
                       {"extents", c.synthetic_profile.extents},
                       {"seed", c.synthetic_seed}};
    doc["metrics"] = {{"krasula_threshold", c.krasula_threshold}, {"pair_labels", c.pair_labels.string()}};
    return doc.dump(2) + "\n";
}

}  // namespace ahgcn
