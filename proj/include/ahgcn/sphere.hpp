#pragma once

#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

namespace ahgcn {

inline constexpr double kPi = std::numbers::pi;

constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

// Point on the unit sphere. Longitude is wrapped into [-pi, pi) and latitude
// clamped into [-pi/2, pi/2] on construction.
class SphereCoord {
public:
    SphereCoord() = default;
    SphereCoord(double lon, double lat);

    static SphereCoord from_degrees(double lon_deg, double lat_deg) {
        return {deg_to_rad(lon_deg), deg_to_rad(lat_deg)};
    }

    double lon() const noexcept { return lon_; }
    double lat() const noexcept { return lat_; }

    friend bool operator==(const SphereCoord&, const SphereCoord&) = default;

private:
    double lon_ = 0.0;
    double lat_ = 0.0;
};

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;
};

Vec3 to_unit_vector(const SphereCoord& c);
SphereCoord from_vector(const Vec3& v);

// Great-circle central angle in [0, pi].
double angular_distance(const SphereCoord& a, const SphereCoord& b);

// The 20 face-centre directions of a regular icosahedron, ordered by latitude
// descending then longitude ascending. Only n == 20 is supported; other
// counts need an explicit centre list.
std::vector<SphereCoord> default_viewport_centers(std::size_t n = 20);

struct ViewportSpec {
    SphereCoord center;
    double fov_deg = 90.0;
    std::size_t resolution = 256;

    void validate() const;
};

// Equirectangular image, 3 interleaved channels, row-major, intensities in [0,1].
// Row 0 is latitude +90 deg, column 0 is longitude -180 deg.
struct EquirectImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> pixels;  // (row, col, channel)

    static constexpr std::size_t kChannels = 3;

    double at(std::size_t row, std::size_t col, std::size_t ch) const {
        return pixels[(row * width + col) * kChannels + ch];
    }
    double& at(std::size_t row, std::size_t col, std::size_t ch) {
        return pixels[(row * width + col) * kChannels + ch];
    }

    // Throws unless width == 2 * height, the buffer matches, and values are in [0,1].
    void validate() const;
};

// Square RGB image produced by render_viewport; same pixel layout as EquirectImage.
struct ViewportImage {
    std::size_t resolution = 0;
    std::vector<double> pixels;

    double at(std::size_t row, std::size_t col, std::size_t ch) const {
        return pixels[(row * resolution + col) * 3 + ch];
    }
};

// Bilinear sample at fractional (lon, lat), wrapping horizontally and clamping
// vertically.
void sample_equirect(const EquirectImage& img, double lon, double lat, std::span<double, 3> out);

// Gnomonic projection of the sphere onto the tangent plane at spec.center.
ViewportImage render_viewport(const EquirectImage& img, const ViewportSpec& spec);

// Direction seen through output pixel (row, col) of a viewport.
SphereCoord viewport_ray(const ViewportSpec& spec, double row, double col);

}  // namespace ahgcn
