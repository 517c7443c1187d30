#pragma once

// Run configuration loaded from a JSON document. Every object rejects keys
// it does not know, so a typo fails loudly instead of silently using a default.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ahgcn/dataset.hpp"
#include "ahgcn/training.hpp"

namespace ahgcn {

enum class Profile { oiqa, cviqd };
enum class ViewportScheme { default_icosahedron, explicit_list };
enum class FeatureSource { files, synthetic };

struct RunConfig {
    Profile profile = Profile::oiqa;
    std::filesystem::path manifest;
    std::filesystem::path out;
    std::filesystem::path checkpoint;

    // Angles are kept in degrees as written; train_config() converts them,
    // so `train.delta` and `train.centers` are ignored here.
    TrainConfig train;
    double delta_deg = 45.0;
    ViewportScheme viewport_scheme = ViewportScheme::default_icosahedron;
    std::vector<std::array<double, 2>> centers_deg;  // (lon, lat), explicit scheme only
    double fov_deg = 90.0;
    std::size_t resolution = 256;

    FeatureSource feature_source = FeatureSource::files;
    PyramidProfile synthetic_profile;
    std::uint64_t synthetic_seed = 0;

    double krasula_threshold = 0.5;
    std::filesystem::path pair_labels;  // optional CSV `id_a,id_b,different,a_better`

    // Profile defaults for the settings that differ between dataset scales.
    static RunConfig for_profile(Profile profile);

    void validate() const;
    std::vector<SphereCoord> centers() const;
    TrainConfig train_config() const;
    ManifestOptions manifest_options() const;
};

std::string profile_name(Profile profile);
Profile parse_profile(const std::string& name);

// Relative paths inside the document are resolved against `base_dir`.
RunConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

// Every effective setting; parsing the result gives back an equal configuration.
std::string dump_config(const RunConfig& config);

}  // namespace ahgcn
