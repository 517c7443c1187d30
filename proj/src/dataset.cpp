#include "ahgcn/dataset.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "ahgcn/atomic_file.hpp"
#include "ahgcn/image_io.hpp"

namespace ahgcn {

namespace {

class InMemorySource final : public ViewportSource {
public:
    explicit InMemorySource(PyramidSet pyramids)
        : pyramids_(std::make_shared<const PyramidSet>(std::move(pyramids))) {}
    std::shared_ptr<const PyramidSet> load() const override { return pyramids_; }

private:
    std::shared_ptr<const PyramidSet> pyramids_;
};

class DirectorySource final : public ViewportSource {
public:
    DirectorySource(std::string id, std::filesystem::path dir, std::size_t viewports)
        : id_(std::move(id)), dir_(std::move(dir)), viewports_(viewports) {}

    void check() const override {
        for (std::size_t i = 0; i < viewports_; ++i) {
            const auto path = dir_ / viewport_file_name(i, ".ahgf");
            if (!std::filesystem::is_regular_file(path)) {
                throw std::runtime_error("sample '" + id_ + "': missing feature file " + path.string());
            }
        }
    }

    std::shared_ptr<const PyramidSet> load() const override {
        check();
        auto set = std::make_shared<PyramidSet>();
        for (std::size_t i = 0; i < viewports_; ++i) {
            try {
                set->push_back(read_pyramid(dir_ / viewport_file_name(i, ".ahgf")));
            } catch (const std::exception& e) {
                throw std::runtime_error("sample '" + id_ + "': " + e.what());
            }
        }
        return set;
    }

private:
    std::string id_;
    std::filesystem::path dir_;
    std::size_t viewports_;
};

class ImageSource final : public ViewportSource {
public:
    ImageSource(std::string id, std::filesystem::path image, std::vector<SphereCoord> centers, double fov,
                std::size_t resolution, std::shared_ptr<const ProjectionExtractor> extractor)
        : id_(std::move(id)), image_(std::move(image)), centers_(std::move(centers)), fov_(fov),
          resolution_(resolution), extractor_(std::move(extractor)) {}

    void check() const override {
        if (!std::filesystem::is_regular_file(image_)) {
            throw std::runtime_error("sample '" + id_ + "': missing image " + image_.string());
        }
        if (!extractor_) throw std::runtime_error("sample '" + id_ + "': image entries need a feature source");
    }

    std::shared_ptr<const PyramidSet> load() const override {
        check();
        EquirectImage img = image_io::to_equirect(image_io::read_image(image_));
        img.validate();
        auto set = std::make_shared<PyramidSet>();
        for (const SphereCoord& c : centers_) {
            const ViewportImage vp = render_viewport(img, {c, fov_, resolution_});
            set->push_back(extractor_->extract(vp));
        }
        return set;
    }

private:
    std::string id_;
    std::filesystem::path image_;
    std::vector<SphereCoord> centers_;
    double fov_;
    std::size_t resolution_;
    std::shared_ptr<const ProjectionExtractor> extractor_;
};

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

bool is_image_path(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return ext == ".png" || ext == ".ppm";
}

}  // namespace

Sample in_memory_sample(std::string id, double mos, PyramidSet pyramids) {
    return {std::move(id), mos, std::make_shared<InMemorySource>(std::move(pyramids))};
}

std::string viewport_file_name(std::size_t index, std::string_view extension) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "vp_%02zu", index);
    return std::string(buf) + std::string(extension);
}

std::shared_ptr<const ViewportSource> pyramid_directory_source(std::string sample_id, std::filesystem::path dir,
                                                               std::size_t viewports) {
    return std::make_shared<DirectorySource>(std::move(sample_id), std::move(dir), viewports);
}

ProjectionExtractor::ProjectionExtractor(PyramidProfile profile, std::uint64_t seed) : profile_(std::move(profile)) {
    if (profile_.channels.size() != profile_.extents.size() || profile_.channels.empty()) {
        throw std::invalid_argument("ProjectionExtractor: channel and extent lists must match");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t c : profile_.channels) {
        Matrix p(kCues, c), b(1, c);
        for (double& v : p.values()) v = gauss(rng);
        for (double& v : b.values()) v = 0.1 * gauss(rng);
        projection_.push_back(std::move(p));
        bias_.push_back(std::move(b));
    }
}

FeaturePyramid ProjectionExtractor::extract(const ViewportImage& vp) const {
    const std::size_t res = vp.resolution;
    FeaturePyramid out;
    for (std::size_t j = 0; j < profile_.channels.size(); ++j) {
        const std::size_t extent = profile_.extents[j];
        if (extent > res) throw std::invalid_argument("ProjectionExtractor: level extent exceeds viewport size");
        // Area-average the RGB viewport onto an extent x extent raster.
        std::vector<double> rgb(extent * extent * 3, 0.0);
        for (std::size_t y = 0; y < extent; ++y) {
            const std::size_t y0 = y * res / extent, y1 = (y + 1) * res / extent;
            for (std::size_t x = 0; x < extent; ++x) {
                const std::size_t x0 = x * res / extent, x1 = (x + 1) * res / extent;
                const double count = static_cast<double>((y1 - y0) * (x1 - x0));
                for (std::size_t yy = y0; yy < y1; ++yy) {
                    for (std::size_t xx = x0; xx < x1; ++xx) {
                        for (std::size_t ch = 0; ch < 3; ++ch) rgb[(y * extent + x) * 3 + ch] += vp.at(yy, xx, ch) / count;
                    }
                }
            }
        }
        auto luma = [&](std::size_t y, std::size_t x) {
            const double* p = &rgb[(y * extent + x) * 3];
            return 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
        };
        FeatureMap map(profile_.channels[j], extent, extent);
        std::array<double, kCues> cues{};
        for (std::size_t y = 0; y < extent; ++y) {
            for (std::size_t x = 0; x < extent; ++x) {
                const double* p = &rgb[(y * extent + x) * 3];
                cues[0] = p[0] - 0.5;
                cues[1] = p[1] - 0.5;
                cues[2] = p[2] - 0.5;
                cues[3] = luma(y, std::min(x + 1, extent - 1)) - luma(y, x > 0 ? x - 1 : 0);
                cues[4] = luma(std::min(y + 1, extent - 1), x) - luma(y > 0 ? y - 1 : 0, x);
                cues[5] = std::hypot(cues[3], cues[4]);
                for (std::size_t c = 0; c < map.channels; ++c) {
                    double acc = bias_[j][c];
                    for (std::size_t f = 0; f < kCues; ++f) acc += projection_[j](f, c) * cues[f];
                    map.at(c, y, x) = std::tanh(acc);
                }
            }
        }
        out.levels.push_back(std::move(map));
    }
    return out;
}

std::shared_ptr<const ViewportSource> image_source(std::string sample_id, std::filesystem::path image,
                                                   std::vector<SphereCoord> centers, double fov_deg,
                                                   std::size_t resolution,
                                                   std::shared_ptr<const ProjectionExtractor> extractor) {
    return std::make_shared<ImageSource>(std::move(sample_id), std::move(image), std::move(centers), fov_deg,
                                         resolution, std::move(extractor));
}

Dataset load_manifest(const std::filesystem::path& manifest, const ManifestOptions& options) {
    std::ifstream in(manifest);
    if (!in) throw std::runtime_error(manifest.string() + ": cannot open manifest");
    const auto base = manifest.parent_path();
    auto fail = [&](std::size_t line, const std::string& what) {
        throw std::runtime_error(manifest.string() + ":" + std::to_string(line) + ": " + what);
    };

    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) fail(1, "empty manifest");
    ++line_no;
    const auto header = split_csv_line(line);
    if (header.size() != 3 || trim(header[0]) != "id" || trim(header[1]) != "path" || trim(header[2]) != "mos") {
        fail(line_no, "expected header 'id,path,mos'");
    }
    Dataset data;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 3) fail(line_no, "expected 3 fields, got " + std::to_string(fields.size()));
        Sample s;
        s.id = trim(fields[0]);
        if (s.id.empty()) fail(line_no, "empty sample id");
        for (const Sample& prev : data) {
            if (prev.id == s.id) fail(line_no, "duplicate sample id '" + s.id + "'");
        }
        const std::string mos_text = trim(fields[2]);
        try {
            std::size_t used = 0;
            s.mos = std::stod(mos_text, &used);
            if (used != mos_text.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            fail(line_no, "invalid MOS '" + mos_text + "'");
        }
        if (!std::isfinite(s.mos)) fail(line_no, "MOS must be finite");
        std::filesystem::path path = trim(fields[1]);
        if (path.empty()) fail(line_no, "empty path");
        if (path.is_relative()) path = base / path;
        if (is_image_path(path)) {
            s.source = image_source(s.id, path, options.centers, options.fov_deg, options.resolution,
                                    options.extractor);
        } else {
            s.source = pyramid_directory_source(s.id, path, options.centers.size());
        }
        data.push_back(std::move(s));
    }
    return data;
}

void write_pyramid_dataset(const std::filesystem::path& dir, const Dataset& dataset) {
    std::string manifest = "id,path,mos\n";
    char mos[64];
    for (const Sample& s : dataset) {
        const auto pyramids = s.source->load();
        for (std::size_t i = 0; i < pyramids->size(); ++i) {
            write_pyramid(dir / s.id / viewport_file_name(i, ".ahgf"), (*pyramids)[i]);
        }
        std::snprintf(mos, sizeof mos, "%.17g", s.mos);
        manifest += s.id + "," + s.id + "," + mos + "\n";
    }
    write_text_atomically(dir / "manifest.csv", manifest);
}

Dataset synthetic_dataset(std::size_t samples, std::size_t viewports, const PyramidProfile& profile,
                          std::uint64_t seed, double mos_lo, double mos_hi) {
    std::mt19937_64 rng(seed);
    Dataset data;
    char id[32];
    for (std::size_t s = 0; s < samples; ++s) {
        PyramidSet set;
        for (std::size_t v = 0; v < viewports; ++v) set.push_back(synthesize_pyramid(rng(), profile));
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        std::snprintf(id, sizeof id, "syn_%03zu", s);
        data.push_back(in_memory_sample(id, mos_lo + (mos_hi - mos_lo) * u, std::move(set)));
    }
    return data;
}

}  // namespace ahgcn
