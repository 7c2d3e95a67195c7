#include <doctest.h>

#include <cmath>
#include <random>

#include "raptor/volume.hpp"

using namespace raptor;

namespace {

Volume linear_volume(const Dims& dims, double a, double b, double c, double d) {
    Volume v(dims);
    for (int k = 0; k < dims[2]; ++k)
        for (int j = 0; j < dims[1]; ++j)
            for (int i = 0; i < dims[0]; ++i) v.at(i, j, k) = a + b * i + c * j + d * k;
    return v;
}

} // namespace

TEST_CASE("volume construction validates invariants") {
    CHECK_THROWS_AS(Volume({4, 4, 4}, {1, 1, 1}, {0, 0, 0}, std::vector<double>(3)), StructuralError);
    CHECK_THROWS_AS(Volume({4, 4, 4}, {0, 1, 1}, {0, 0, 0}, std::vector<double>(64, 0.0)),
                    StructuralError);
    std::vector<double> bad(64, 0.0);
    bad[5] = std::nan("");
    CHECK_THROWS_AS(Volume({4, 4, 4}, {1, 1, 1}, {0, 0, 0}, bad), StructuralError);
}

TEST_CASE("interpolate hits grid points exactly") {
    Volume v({5, 5, 5});
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> dist(-10.0, 10.0);
    for (auto& x : v.data()) x = dist(rng);
    CHECK(interpolate(v, {2.0, 3.0, 1.0}) == doctest::Approx(v.at(2, 3, 1)).epsilon(1e-14));
    CHECK(interpolate(v, {0.0, 0.0, 0.0}) == doctest::Approx(v.at(0, 0, 0)).epsilon(1e-14));
}

TEST_CASE("interpolate linear midpoint") {
    Volume v({4, 4, 4});
    v.at(1, 1, 1) = 0.0;
    v.at(2, 1, 1) = 10.0;
    CHECK(interpolate(v, {1.5, 1.0, 1.0}) == doctest::Approx(5.0));
}

TEST_CASE("interpolate clamps out-of-bounds coordinates") {
    Volume v({4, 4, 4});
    for (int k = 0; k < 4; ++k)
        for (int j = 0; j < 4; ++j) v.at(0, j, k) = 7.0;
    CHECK(interpolate(v, {-3.2, 0.0, 0.0}) == doctest::Approx(7.0));
    CHECK(interpolate(v, {-100.0, 2.0, 3.0}) == doctest::Approx(7.0));
}

TEST_CASE("interpolate is exact on trilinear functions") {
    const Volume v = linear_volume({6, 5, 7}, 0.3, 1.7, -2.1, 0.9);
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const Vec3 p{dist(rng) * 5.0, dist(rng) * 4.0, dist(rng) * 6.0};
        const double expected = 0.3 + 1.7 * p[0] - 2.1 * p[1] + 0.9 * p[2];
        CHECK(interpolate(v, p) == doctest::Approx(expected).epsilon(1e-10));
    }
}

TEST_CASE("interpolate_with_gradient matches finite differences of the interpolant") {
    Volume v({6, 6, 6});
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (auto& x : v.data()) x = dist(rng);
    std::uniform_real_distribution<double> coord(0.6, 4.3);
    for (int trial = 0; trial < 20; ++trial) {
        const Vec3 p{coord(rng), coord(rng), coord(rng)};
        const auto [value, grad] = interpolate_with_gradient(v, p);
        CHECK(value == doctest::Approx(interpolate(v, p)).epsilon(1e-12));
        const double eps = 1e-7;
        for (int d = 0; d < 3; ++d) {
            Vec3 pp = p, pm = p;
            pp[d] += eps;
            pm[d] -= eps;
            const double fd = (interpolate(v, pp) - interpolate(v, pm)) / (2 * eps);
            CHECK(grad[d] == doctest::Approx(fd).epsilon(1e-5));
        }
    }
}

TEST_CASE("warp with zero displacement is the identity") {
    Volume v({5, 6, 4});
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (auto& x : v.data()) x = dist(rng);
    const Volume w = warp(v, DisplacementField(v.dims()));
    for (std::size_t n = 0; n < v.size(); ++n) CHECK(w[n] == v[n]);
}

TEST_CASE("warp of a constant volume is constant under any displacement") {
    Volume v({5, 5, 5}, 4.2);
    DisplacementField d(v.dims());
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> dist(-3.0, 3.0);
    for (int c = 0; c < 3; ++c)
        for (auto& x : d.component(c)) x = dist(rng);
    const Volume w = warp(v, d);
    for (std::size_t n = 0; n < w.size(); ++n) CHECK(w[n] == doctest::Approx(4.2).epsilon(1e-14));
}

TEST_CASE("warp relocates an impulse by one voxel") {
    // impulse at (2,2,2); displacement +1 along x samples the impulse at
    // output voxel (1,2,2)
    Volume v({5, 5, 5});
    v.at(2, 2, 2) = 1.0;
    DisplacementField d(v.dims());
    for (auto& x : d.component(0)) x = 1.0;
    const Volume w = warp(v, d);
    for (int k = 0; k < 5; ++k)
        for (int j = 0; j < 5; ++j)
            for (int i = 0; i < 5; ++i)
                CHECK(w.at(i, j, k) == doctest::Approx(i == 1 && j == 2 && k == 2 ? 1.0 : 0.0));
    CHECK_THROWS_AS(warp(v, DisplacementField({4, 4, 4})), StructuralError);
}

TEST_CASE("spatial_gradient basics") {
    SUBCASE("constant volume has zero gradient") {
        const Volume v({4, 4, 4}, 3.0);
        const auto g = spatial_gradient(v);
        for (int a = 0; a < 3; ++a)
            for (std::size_t n = 0; n < v.size(); ++n) CHECK(g[a][n] == doctest::Approx(0.0));
    }
    SUBCASE("linear ramp has exact gradient") {
        const Volume v = linear_volume({8, 4, 4}, 0.0, 2.0, 0.0, 0.0);
        const auto g = spatial_gradient(v);
        for (int i = 0; i < 8; ++i) CHECK(g[0].at(i, 2, 2) == doctest::Approx(2.0));
    }
    SUBCASE("quadratic profile, central difference value") {
        Volume v({8, 4, 4});
        for (int k = 0; k < 4; ++k)
            for (int j = 0; j < 4; ++j)
                for (int i = 0; i < 8; ++i) v.at(i, j, k) = static_cast<double>(i) * i;
        const auto g = spatial_gradient(v);
        CHECK(g[0].at(3, 1, 1) == doctest::Approx(6.0)); // (16 - 4) / 2
    }
    SUBCASE("dim < 2 raises") {
        CHECK_THROWS_AS(spatial_gradient(Volume({1, 4, 4})), StructuralError);
    }
}

TEST_CASE("downsample contracts") {
    SUBCASE("factor 1 keeps dims") {
        const Volume v({8, 8, 8}, 1.5);
        const Volume d = downsample(v, 1);
        CHECK(d.dims() == Dims{8, 8, 8});
    }
    SUBCASE("constant volume stays constant at every level") {
        const Volume v({16, 16, 16}, 2.5);
        for (int f : {1, 2, 4}) {
            const Volume d = downsample(v, f);
            for (std::size_t n = 0; n < d.size(); ++n) CHECK(d[n] == doctest::Approx(2.5).epsilon(1e-12));
        }
    }
    SUBCASE("8^3 by factor 2 gives 4^3 with doubled spacing") {
        const Volume v({8, 8, 8});
        const Volume d = downsample(v, 2);
        CHECK(d.dims() == Dims{4, 4, 4});
        CHECK(d.spacing()[0] == doctest::Approx(2.0));
    }
    SUBCASE("factor larger than an axis raises") {
        CHECK_THROWS_AS(downsample(Volume({8, 8, 8}), 9), StructuralError);
    }
}

TEST_CASE("upsample_displacement contracts") {
    SUBCASE("zero field stays zero") {
        const DisplacementField d({4, 4, 4});
        const DisplacementField u = upsample_displacement(d, {8, 8, 8});
        CHECK(u.max_abs() == doctest::Approx(0.0));
    }
    SUBCASE("uniform one-voxel shift doubles with the dims") {
        DisplacementField d({4, 4, 4});
        for (auto& x : d.component(0)) x = 1.0;
        const DisplacementField u = upsample_displacement(d, {8, 8, 8});
        for (std::size_t n = 0; n < u.size(); ++n)
            CHECK(u.component(0)[n] == doctest::Approx(2.0).epsilon(1e-12));
    }
    SUBCASE("linear ramps are reproduced at corresponding grid points") {
        const Dims src{5, 5, 5};
        DisplacementField d(src);
        for (int k = 0; k < 5; ++k)
            for (int j = 0; j < 5; ++j)
                for (int i = 0; i < 5; ++i) {
                    d.at(0, i, j, k) = 0.25 * i - 0.1 * j;
                    d.at(1, i, j, k) = 0.05 * k;
                    d.at(2, i, j, k) = -0.2 * i + 0.02 * j;
                }
        const Dims dst{10, 10, 10};
        const DisplacementField u = upsample_displacement(d, dst);
        for (int k = 0; k < 5; ++k)
            for (int j = 0; j < 5; ++j)
                for (int i = 0; i < 5; ++i)
                    for (int c = 0; c < 3; ++c)
                        CHECK(u.at(c, 2 * i, 2 * j, 2 * k) ==
                              doctest::Approx(2.0 * d.at(c, i, j, k)).epsilon(1e-6));
    }
}
