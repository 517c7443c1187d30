#include <doctest.h>

#include <cmath>
#include <algorithm>
#include <random>
#include <stdexcept>
#include <string>

#include "ahgcn/sphere.hpp"

using namespace ahgcn;

namespace {

double oracle_angle(const SphereCoord& a, const SphereCoord& b) {
    // Independent path: 3D unit vectors and the dot product.
    const double ax = std::cos(a.lat()) * std::cos(a.lon()), ay = std::cos(a.lat()) * std::sin(a.lon()),
                 az = std::sin(a.lat());
    const double bx = std::cos(b.lat()) * std::cos(b.lon()), by = std::cos(b.lat()) * std::sin(b.lon()),
                 bz = std::sin(b.lat());
    return std::acos(std::clamp(ax * bx + ay * by + az * bz, -1.0, 1.0));
}

// Well conditioned for nearby points, unlike arccos.
double chord(const SphereCoord& a, const SphereCoord& b) {
    const Vec3 u = to_unit_vector(a), v = to_unit_vector(b);
    return std::sqrt((u.x - v.x) * (u.x - v.x) + (u.y - v.y) * (u.y - v.y) + (u.z - v.z) * (u.z - v.z));
}

SphereCoord random_coord(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> lon(-kPi, kPi);
    return {lon(rng), std::asin(u(rng))};
}

EquirectImage constant_image(std::size_t h, double r, double g, double b) {
    EquirectImage img{2 * h, h, {}};
    for (std::size_t i = 0; i < 2 * h * h; ++i) {
        img.pixels.push_back(r);
        img.pixels.push_back(g);
        img.pixels.push_back(b);
    }
    return img;
}

EquirectImage random_image(std::size_t h, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    EquirectImage img{2 * h, h, std::vector<double>(2 * h * h * 3)};
    for (double& v : img.pixels) v = u(rng);
    return img;
}

}  // namespace

TEST_CASE("sphere coord normalises on construction") {
    const SphereCoord c(3.0 * kPi / 2.0, 2.0);
    CHECK(c.lon() == doctest::Approx(-kPi / 2.0));
    CHECK(c.lat() == kPi / 2.0);
    CHECK(SphereCoord(kPi, 0.0).lon() == doctest::Approx(-kPi));
    CHECK(SphereCoord(kPi, 0.0).lon() < kPi);
    CHECK_THROWS_AS(SphereCoord(std::nan(""), 0.0), std::invalid_argument);
}

TEST_CASE("angular distance examples") {
    CHECK(angular_distance({0, 0}, {0, 0}) == 0.0);
    CHECK(angular_distance(SphereCoord::from_degrees(0, 0), SphereCoord::from_degrees(180, 0)) ==
          doctest::Approx(kPi).epsilon(1e-15));
    CHECK(angular_distance(SphereCoord::from_degrees(0, 0), SphereCoord::from_degrees(90, 0)) ==
          doctest::Approx(kPi / 2.0).epsilon(1e-15));
}

TEST_CASE("angular distance matches unit-vector oracle, is symmetric and obeys the triangle inequality") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 2000; ++i) {
        const auto a = random_coord(rng), b = random_coord(rng), c = random_coord(rng);
        const double ab = angular_distance(a, b);
        CHECK(std::abs(ab - oracle_angle(a, b)) <= 1e-12);
        CHECK(ab == angular_distance(b, a));
        CHECK(ab >= 0.0);
        CHECK(ab <= kPi);
        CHECK(angular_distance(a, c) <= ab + angular_distance(b, c) + 1e-9);
        CHECK(angular_distance(a, a) == 0.0);
    }
}

TEST_CASE("default viewport centers") {
    const auto centers = default_viewport_centers(20);
    REQUIRE(centers.size() == 20);

    SUBCASE("minimum pairwise distance equals the adjacent-face angle") {
        // Adjacent face normals of an icosahedron meet at arccos(sqrt(5)/3).
        const double expected = std::acos(std::sqrt(5.0) / 3.0);
        double min_d = 10.0;
        for (std::size_t i = 0; i < 20; ++i) {
            for (std::size_t j = i + 1; j < 20; ++j) min_d = std::min(min_d, oracle_angle(centers[i], centers[j]));
        }
        CHECK(min_d > 0.0);
        CHECK(min_d == doctest::Approx(expected).epsilon(1e-12));
        CHECK(rad_to_deg(min_d) == doctest::Approx(41.81).epsilon(1e-4));
    }
    SUBCASE("unit vectors sum to zero") {
        Vec3 sum;
        for (const auto& c : centers) {
            const Vec3 v = to_unit_vector(c);
            sum.x += v.x;
            sum.y += v.y;
            sum.z += v.z;
        }
        CHECK(std::abs(sum.x) < 1e-9);
        CHECK(std::abs(sum.y) < 1e-9);
        CHECK(std::abs(sum.z) < 1e-9);
    }
    SUBCASE("sorted by latitude descending then longitude ascending") {
        for (std::size_t i = 1; i < 20; ++i) {
            const bool same_lat = std::abs(centers[i].lat() - centers[i - 1].lat()) < 1e-9;
            if (same_lat) {
                CHECK(centers[i].lon() > centers[i - 1].lon());
            } else {
                CHECK(centers[i].lat() < centers[i - 1].lat());
            }
        }
    }
    SUBCASE("deterministic") { CHECK(default_viewport_centers() == centers); }
    SUBCASE("each centre has exactly three others within 45 degrees") {
        for (std::size_t i = 0; i < 20; ++i) {
            int near = 0;
            for (std::size_t j = 0; j < 20; ++j) near += (i != j && angular_distance(centers[i], centers[j]) <= deg_to_rad(45.0));
            CHECK(near == 3);
        }
    }
    CHECK_THROWS_AS(default_viewport_centers(7), std::invalid_argument);
}

TEST_CASE("viewport spec and image validation") {
    CHECK_THROWS_AS((ViewportSpec{{0, 0}, 180.0, 256}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((ViewportSpec{{0, 0}, 0.0, 256}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((ViewportSpec{{0, 0}, 90.0, 1}.validate()), std::invalid_argument);
    CHECK_NOTHROW((ViewportSpec{{0, 0}, 90.0, 2}.validate()));

    EquirectImage bad{30, 20, std::vector<double>(30 * 20 * 3, 0.5)};
    try {
        bad.validate();
        FAIL("expected aspect error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("2:1") != std::string::npos);
    }
    EquirectImage out_of_range = constant_image(4, 0.5, 0.5, 0.5);
    out_of_range.pixels[5] = 1.5;
    CHECK_THROWS_AS(out_of_range.validate(), std::invalid_argument);
    CHECK_THROWS_AS(render_viewport(EquirectImage{}, ViewportSpec{}), std::invalid_argument);
}

TEST_CASE("constant image renders a constant viewport") {
    const auto img = constant_image(32, 0.25, 0.5, 0.75);
    for (const auto& c : default_viewport_centers()) {
        const auto vp = render_viewport(img, {c, 90.0, 16});
        for (std::size_t i = 0; i < vp.pixels.size(); i += 3) {
            CHECK(vp.pixels[i] == doctest::Approx(0.25).epsilon(1e-12));
            CHECK(vp.pixels[i + 1] == doctest::Approx(0.5).epsilon(1e-12));
            CHECK(vp.pixels[i + 2] == doctest::Approx(0.75).epsilon(1e-12));
        }
    }
}

TEST_CASE("principal point looks at the viewport centre") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 200; ++i) {
        SphereCoord c = random_coord(rng);
        c = SphereCoord(c.lon(), std::clamp(c.lat(), -1.4, 1.4));
        // Odd resolution puts a pixel centre exactly on the principal point.
        const ViewportSpec spec{c, 90.0, 33};
        const SphereCoord ray = viewport_ray(spec, 16.0, 16.0);
        CHECK(chord(ray, c) < 1e-12);
    }
    // Even resolution: the central sample sits within half a source pixel of the centre.
    const auto img_h = 64;
    const ViewportSpec spec{SphereCoord::from_degrees(30, 20), 90.0, 256};
    const double half_pixel = kPi / img_h / 2.0;
    CHECK(chord(viewport_ray(spec, 127.5, 127.5), spec.center) < 1e-12);
    CHECK(angular_distance(viewport_ray(spec, 128, 128), spec.center) < half_pixel);
}

TEST_CASE("longitude gradient: centre column samples lon 0") {
    const std::size_t h = 256;
    EquirectImage img{2 * h, h, std::vector<double>(2 * h * h * 3)};
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < 2 * h; ++c) {
            const double v = (static_cast<double>(c) + 0.5) / (2.0 * h);  // (lon + pi) / 2pi at pixel centres
            for (std::size_t ch = 0; ch < 3; ++ch) img.at(r, c, ch) = v;
        }
    }
    const auto vp = render_viewport(img, {SphereCoord(0, 0), 90.0, 256});
    for (std::size_t r = 0; r < 256; ++r) CHECK(std::abs(vp.at(r, 128, 0) - 0.5) <= 1e-3);
}

TEST_CASE("rendered intensities stay in [0,1]") {
    std::mt19937_64 rng(5);
    const auto img = random_image(24, rng);
    for (int i = 0; i < 20; ++i) {
        const auto vp = render_viewport(img, {random_coord(rng), 60.0 + i * 5.0, 17});
        for (double v : vp.pixels) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("longitudinal equivariance of rendering") {
    std::mt19937_64 rng(17);
    const std::size_t h = 40, w = 2 * h;
    const auto img = random_image(h, rng);
    for (std::size_t shift : {1u, 7u, 40u, 63u}) {
        EquirectImage rolled{w, h, std::vector<double>(img.pixels.size())};
        for (std::size_t r = 0; r < h; ++r) {
            for (std::size_t c = 0; c < w; ++c) {
                for (std::size_t ch = 0; ch < 3; ++ch) rolled.at(r, (c + shift) % w, ch) = img.at(r, c, ch);
            }
        }
        const double dlon = 2.0 * kPi * static_cast<double>(shift) / static_cast<double>(w);
        for (int t = 0; t < 5; ++t) {
            const SphereCoord c = random_coord(rng);
            const auto a = render_viewport(img, {c, 90.0, 24});
            const auto b = render_viewport(rolled, {SphereCoord(c.lon() + dlon, c.lat()), 90.0, 24});
            double worst = 0.0;
            for (std::size_t i = 0; i < a.pixels.size(); ++i) worst = std::max(worst, std::abs(a.pixels[i] - b.pixels[i]));
            CHECK(worst <= 1e-6);
        }
    }
}

TEST_CASE("unit-vector round trip") {
    std::mt19937_64 rng(23);
    for (int i = 0; i < 500; ++i) {
        const auto c = random_coord(rng);
        CHECK(chord(from_vector(to_unit_vector(c)), c) < 1e-12);
    }
}
