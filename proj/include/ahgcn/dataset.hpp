#pragma once

// Samples and their viewport sources: in-memory pyramids, per-viewport AHGF
// files, or an equirectangular image rendered into viewports and run through
// a feature extractor.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "ahgcn/descriptor.hpp"
#include "ahgcn/sphere.hpp"

namespace ahgcn {

using PyramidSet = std::vector<FeaturePyramid>;

class ViewportSource {
public:
    virtual ~ViewportSource() = default;
    // Pyramids for every viewport of the sample, in centre order.
    virtual std::shared_ptr<const PyramidSet> load() const = 0;
    // Cheap pre-flight check (files present etc.); throws on failure.
    virtual void check() const {}
};

struct Sample {
    std::string id;
    double mos = 0.0;
    std::shared_ptr<const ViewportSource> source;
};

using Dataset = std::vector<Sample>;

Sample in_memory_sample(std::string id, double mos, PyramidSet pyramids);

// `vp_00.ahgf` .. `vp_<N-1>.ahgf` inside `dir`.
std::shared_ptr<const ViewportSource> pyramid_directory_source(std::string sample_id,
                                                               std::filesystem::path dir,
                                                               std::size_t viewports);
std::string viewport_file_name(std::size_t index, std::string_view extension);

// Stand-in for a pretrained backbone: each level average-pools the viewport
// to its extent and maps per-pixel colour/gradient cues through a seeded
// random projection followed by tanh.
class ProjectionExtractor {
public:
    ProjectionExtractor(PyramidProfile profile, std::uint64_t seed);
    FeaturePyramid extract(const ViewportImage& viewport) const;
    const PyramidProfile& profile() const noexcept { return profile_; }

    static constexpr std::size_t kCues = 6;

private:
    PyramidProfile profile_;
    std::vector<Matrix> projection_;  // per level, kCues x C_j
    std::vector<Matrix> bias_;        // per level, 1 x C_j
};

std::shared_ptr<const ViewportSource> image_source(std::string sample_id, std::filesystem::path image,
                                                   std::vector<SphereCoord> centers, double fov_deg,
                                                   std::size_t resolution,
                                                   std::shared_ptr<const ProjectionExtractor> extractor);

struct ManifestOptions {
    std::vector<SphereCoord> centers;
    double fov_deg = 90.0;
    std::size_t resolution = 256;
    // Needed only for image entries.
    std::shared_ptr<const ProjectionExtractor> extractor;
};

// CSV with header `id,path,mos`. Paths are relative to the manifest's
// directory. Errors carry the manifest line number.
Dataset load_manifest(const std::filesystem::path& manifest, const ManifestOptions& options);

// Writes `<dir>/<id>/vp_XX.ahgf` for every in-memory sample plus `<dir>/manifest.csv`.
void write_pyramid_dataset(const std::filesystem::path& dir, const Dataset& dataset);

// Deterministic synthetic dataset: seeded pyramids and MOS uniform in [mos_lo, mos_hi].
Dataset synthetic_dataset(std::size_t samples, std::size_t viewports, const PyramidProfile& profile,
                          std::uint64_t seed, double mos_lo = 1.0, double mos_hi = 10.0);

}  // namespace ahgcn
