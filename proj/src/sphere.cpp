#include "ahgcn/sphere.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ahgcn {

namespace {

double wrap_lon(double lon) {
    double w = std::fmod(lon + kPi, 2.0 * kPi);
    if (w < 0.0) w += 2.0 * kPi;
    w -= kPi;
    // fmod can round up to exactly +pi.
    if (w >= kPi) w -= 2.0 * kPi;
    return w;
}

Vec3 normalized(Vec3 v) {
    const double n = std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z);
    return {v.x / n, v.y / n, v.z / n};
}

}  // namespace

SphereCoord::SphereCoord(double lon, double lat) {
    if (!std::isfinite(lon) || !std::isfinite(lat)) {
        throw std::invalid_argument("SphereCoord: non-finite coordinate");
    }
    lon_ = wrap_lon(lon);
    lat_ = std::clamp(lat, -kPi / 2.0, kPi / 2.0);
}

Vec3 to_unit_vector(const SphereCoord& c) {
    const double cl = std::cos(c.lat());
    return {cl * std::cos(c.lon()), cl * std::sin(c.lon()), std::sin(c.lat())};
}

SphereCoord from_vector(const Vec3& v) {
    const Vec3 u = normalized(v);
    return {std::atan2(u.y, u.x), std::asin(std::clamp(u.z, -1.0, 1.0))};
}

double angular_distance(const SphereCoord& a, const SphereCoord& b) {
    // arccos is ill-conditioned at 1: rounding in the dot product alone would give ~1e-8.
    if (a == b) return 0.0;
    const double dot = std::sin(a.lat()) * std::sin(b.lat()) +
                       std::cos(a.lat()) * std::cos(b.lat()) * std::cos(a.lon() - b.lon());
    return std::acos(std::clamp(dot, -1.0, 1.0));
}

std::vector<SphereCoord> default_viewport_centers(std::size_t n) {
    if (n != 20) {
        throw std::invalid_argument("default_viewport_centers: the built-in scheme places 20 "
                                    "viewports; got n=" + std::to_string(n) +
                                    ", supply an explicit centre list instead");
    }
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    const std::array<Vec3, 12> verts = {{{0, 1, phi},  {0, -1, phi},  {0, 1, -phi}, {0, -1, -phi},
                                         {1, phi, 0},  {-1, phi, 0},  {1, -phi, 0}, {-1, -phi, 0},
                                         {phi, 0, 1},  {-phi, 0, 1},  {phi, 0, -1}, {-phi, 0, -1}}};
    auto dist2 = [](const Vec3& a, const Vec3& b) {
        return (a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z);
    };
    // Edge length is 2, so faces are vertex triples at mutual squared distance 4.
    auto adjacent = [&](std::size_t i, std::size_t j) {
        return std::abs(dist2(verts[i], verts[j]) - 4.0) < 1e-9;
    };
    std::vector<SphereCoord> centers;
    for (std::size_t i = 0; i < verts.size(); ++i) {
        for (std::size_t j = i + 1; j < verts.size(); ++j) {
            if (!adjacent(i, j)) continue;
            for (std::size_t k = j + 1; k < verts.size(); ++k) {
                if (!adjacent(i, k) || !adjacent(j, k)) continue;
                centers.push_back(from_vector({verts[i].x + verts[j].x + verts[k].x,
                                               verts[i].y + verts[j].y + verts[k].y,
                                               verts[i].z + verts[j].z + verts[k].z}));
            }
        }
    }
    // Quantise before comparing so rounding noise cannot reorder equal latitudes.
    auto key = [](double v) { return std::round(v * 1e9); };
    std::sort(centers.begin(), centers.end(), [&](const SphereCoord& a, const SphereCoord& b) {
        if (key(a.lat()) != key(b.lat())) return key(a.lat()) > key(b.lat());
        return key(a.lon()) < key(b.lon());
    });
    return centers;
}

void ViewportSpec::validate() const {
    if (!(fov_deg > 0.0 && fov_deg < 180.0)) {
        throw std::invalid_argument("ViewportSpec: fov must be in (0, 180) degrees, got " +
                                    std::to_string(fov_deg));
    }
    if (resolution < 2) {
        throw std::invalid_argument("ViewportSpec: resolution must be at least 2");
    }
}

void EquirectImage::validate() const {
    if (width == 0 || height == 0) {
        throw std::invalid_argument("EquirectImage: degenerate dimensions " +
                                    std::to_string(width) + "x" + std::to_string(height));
    }
    if (width != 2 * height) {
        throw std::invalid_argument("EquirectImage: equirectangular images need a 2:1 aspect "
                                    "ratio, got " + std::to_string(width) + "x" +
                                    std::to_string(height));
    }
    if (pixels.size() != width * height * kChannels) {
        throw std::invalid_argument("EquirectImage: pixel buffer does not match dimensions");
    }
    for (double v : pixels) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw std::invalid_argument("EquirectImage: intensity outside [0,1]");
        }
    }
}

void sample_equirect(const EquirectImage& img, double lon, double lat,
                     std::span<double, 3> out) {
    const double w = static_cast<double>(img.width);
    const double h = static_cast<double>(img.height);
    // Pixel centres sit at half-integer offsets.
    const double px = (lon + kPi) / (2.0 * kPi) * w - 0.5;
    const double py = std::clamp((kPi / 2.0 - lat) / kPi * h - 0.5, 0.0, h - 1.0);

    const double fx = std::floor(px);
    const double tx = px - fx;
    const double fy = std::floor(py);
    const double ty = py - fy;
    const auto wrap = [&](long long c) {
        const long long m = static_cast<long long>(img.width);
        return static_cast<std::size_t>(((c % m) + m) % m);
    };
    const std::size_t x0 = wrap(static_cast<long long>(fx));
    const std::size_t x1 = wrap(static_cast<long long>(fx) + 1);
    const std::size_t y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, img.height - 1);

    for (std::size_t ch = 0; ch < 3; ++ch) {
        const double top = (1.0 - tx) * img.at(y0, x0, ch) + tx * img.at(y0, x1, ch);
        const double bottom = (1.0 - tx) * img.at(y1, x0, ch) + tx * img.at(y1, x1, ch);
        out[ch] = std::clamp((1.0 - ty) * top + ty * bottom, 0.0, 1.0);
    }
}

SphereCoord viewport_ray(const ViewportSpec& spec, double row, double col) {
    const double half = std::tan(deg_to_rad(spec.fov_deg) / 2.0);
    const double res = static_cast<double>(spec.resolution);
    const double x = (2.0 * (col + 0.5) / res - 1.0) * half;
    const double y = (1.0 - 2.0 * (row + 0.5) / res) * half;

    const double lon = spec.center.lon();
    const double lat = spec.center.lat();
    const Vec3 forward = to_unit_vector(spec.center);
    const Vec3 east{-std::sin(lon), std::cos(lon), 0.0};
    const Vec3 north{-std::sin(lat) * std::cos(lon), -std::sin(lat) * std::sin(lon), std::cos(lat)};
    return from_vector({forward.x + x * east.x + y * north.x, forward.y + x * east.y + y * north.y,
                        forward.z + x * east.z + y * north.z});
}

ViewportImage render_viewport(const EquirectImage& img, const ViewportSpec& spec) {
    spec.validate();
    img.validate();
    ViewportImage out;
    out.resolution = spec.resolution;
    out.pixels.resize(spec.resolution * spec.resolution * 3);
    const auto rows = static_cast<std::ptrdiff_t>(spec.resolution);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ri = 0; ri < rows; ++ri) {
        const auto r = static_cast<std::size_t>(ri);
        for (std::size_t c = 0; c < spec.resolution; ++c) {
            const SphereCoord ray = viewport_ray(spec, static_cast<double>(r), static_cast<double>(c));
            sample_equirect(img, ray.lon(), ray.lat(),
                            std::span<double, 3>(out.pixels.data() + (r * spec.resolution + c) * 3, 3));
        }
    }
    return out;
}

}  // namespace ahgcn
