#include <doctest.h>

#include <cmath>
#include <numbers>

#include "raptor/fourier.hpp"
#include "support/oracles.hpp"

using namespace raptor;

namespace {

// Trunc 5 on an 8^3 grid: band halfwidth 2, so pointwise products of two
// in-band fields (spectrum up to |k|=4) cannot alias back into the band on
// the dense grid; the dense computation is then an exact oracle.
const Dims kFull{8, 8, 8};
const Dims kTrunc{5, 5, 5};

DisplacementField dense_pointwise(const DisplacementField& a, const DisplacementField& b) {
    DisplacementField out(a.dims());
    for (int c = 0; c < 3; ++c)
        for (std::size_t n = 0; n < out.size(); ++n)
            out.component(c)[n] = a.component(c)[n] * b.component(c)[n];
    return out;
}

} // namespace

TEST_CASE("operator multiplier table") {
    SUBCASE("DC multiplier is 1 for any alpha, c") {
        const FourierOperator op(2.7, 4, {7, 7, 7}, {16, 16, 16});
        CHECK(op.l_at(0, 0, 0) == doctest::Approx(1.0));
        CHECK(op.k_at(0, 0, 0) == doctest::Approx(1.0));
    }
    SUBCASE("symbol at the Nyquist frequency of a 16 grid") {
        // alpha=3, c=1, k=(8,0,0): 1 + 3*2*(1-cos(pi)) = 13
        CHECK(FourierOperator::symbol(3.0, 1, {8, 0, 0}, {16, 16, 16}) == doctest::Approx(13.0));
    }
    SUBCASE("K is the reciprocal of L everywhere") {
        const FourierOperator op(3.0, 3, kTrunc, kFull);
        const auto& h = op.shape().halfwidth;
        for (int kz = -h[2]; kz <= h[2]; ++kz)
            for (int ky = -h[1]; ky <= h[1]; ++ky)
                for (int kx = -h[0]; kx <= h[0]; ++kx) {
                    CHECK(op.l_at(kx, ky, kz) * op.k_at(kx, ky, kz) == doctest::Approx(1.0).epsilon(1e-12));
                    CHECK(op.l_at(kx, ky, kz) >= 1.0);
                }
    }
    SUBCASE("K(L(v)) is the identity") {
        const FourierOperator op(3.0, 3, kTrunc, kFull);
        const auto v = oracle::random_band_field(op.shape(), 99);
        const auto round = op.apply_k(op.apply_l(v));
        CHECK(oracle::max_coeff_diff(v, round) <= 1e-12 * v.max_abs());
    }
}

TEST_CASE("project basics") {
    SUBCASE("zero field projects to zero") {
        const BandlimitedVelocity b = project(DisplacementField(kFull), kTrunc);
        CHECK(b.max_abs() == doctest::Approx(0.0));
    }
    SUBCASE("constant field concentrates at DC with voxel-count scale") {
        DisplacementField f(kFull);
        for (auto& x : f.component(1)) x = 0.75;
        const BandlimitedVelocity b = project(f, kTrunc);
        CHECK(b.at(1, 0, 0, 0).real() == doctest::Approx(0.75 * 512.0));
        CHECK(std::abs(b.at(1, 1, 0, 0)) == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(std::abs(b.at(0, 0, 0, 0)) == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("an in-band sinusoid yields one conjugate coefficient pair") {
        DisplacementField f(kFull);
        for (int k = 0; k < kFull[2]; ++k)
            for (int j = 0; j < kFull[1]; ++j)
                for (int i = 0; i < kFull[0]; ++i)
                    f.at(0, i, j, k) = std::cos(2.0 * std::numbers::pi * (2.0 * i) / kFull[0]);
        const BandlimitedVelocity b = project(f, kTrunc);
        CHECK(b.at(0, 2, 0, 0).real() == doctest::Approx(256.0).epsilon(1e-10));
        CHECK(b.at(0, -2, 0, 0).real() == doctest::Approx(256.0).epsilon(1e-10));
        // everything else vanishes
        double rest = 0.0;
        const auto& h = b.shape().halfwidth;
        for (int kz = -h[2]; kz <= h[2]; ++kz)
            for (int ky = -h[1]; ky <= h[1]; ++ky)
                for (int kx = -h[0]; kx <= h[0]; ++kx)
                    if (!(ky == 0 && kz == 0 && std::abs(kx) == 2))
                        rest = std::max(rest, std::abs(b.at(0, kx, ky, kz)));
        CHECK(rest <= 1e-10 * 256.0);
    }
}

TEST_CASE("lift basics and round trips") {
    const BandShape shape = make_band_shape(kFull, kTrunc);
    SUBCASE("zero coefficients lift to the zero field") {
        CHECK(lift(BandlimitedVelocity(shape)).max_abs() == doctest::Approx(0.0));
    }
    SUBCASE("lift then project is the identity on the band") {
        const auto v = oracle::random_band_field(shape, 42);
        const auto round = project(lift(v), kTrunc);
        CHECK(oracle::max_coeff_diff(v, round) <= 1e-10 * std::max(1.0, v.max_abs()));
    }
    SUBCASE("project then lift is the identity on in-band fields") {
        const auto v = oracle::random_band_field(shape, 43);
        const DisplacementField f = lift(v);
        const DisplacementField round = lift(project(f, kTrunc));
        CHECK(oracle::max_field_diff(f, round) <= 1e-10);
    }
    SUBCASE("out-of-band modes are annihilated") {
        DisplacementField f(kFull);
        for (int k = 0; k < kFull[2]; ++k)
            for (int j = 0; j < kFull[1]; ++j)
                for (int i = 0; i < kFull[0]; ++i)
                    f.at(2, i, j, k) = std::sin(2.0 * std::numbers::pi * (3.0 * j) / kFull[1]);
        const DisplacementField round = lift(project(f, kTrunc)); // halfwidth 2 < 3
        CHECK(round.max_abs() <= 1e-10);
    }
    SUBCASE("symmetry violation raises") {
        BandlimitedVelocity v(shape);
        v.at(0, 1, 0, 0) = Complex(1.0, 0.5);
        v.at(0, -1, 0, 0) = Complex(5.0, 0.5); // not the conjugate
        CHECK_THROWS_AS(lift(v), NumericalError);
    }
}

TEST_CASE("fourier_jacobian applies the central-difference symbol") {
    const BandShape shape = make_band_shape(kFull, kTrunc);
    SUBCASE("constant field has zero jacobian") {
        BandlimitedVelocity v(shape);
        v.at(0, 0, 0, 0) = 3.0;
        const auto jac = fourier_jacobian(v);
        for (int e = 0; e < 3; ++e) CHECK(jac[e].max_abs() == doctest::Approx(0.0));
    }
    SUBCASE("single mode picks up i sin(2 pi k / N)") {
        BandlimitedVelocity v(shape);
        v.at(0, 1, 0, 0) = Complex(1.0, 0.0);
        v.at(0, -1, 0, 0) = Complex(1.0, 0.0);
        const auto jac = fourier_jacobian(v);
        const double s = std::sin(2.0 * std::numbers::pi / kFull[0]);
        CHECK(jac[0].at(0, 1, 0, 0).imag() == doctest::Approx(s));
        CHECK(jac[0].at(0, -1, 0, 0).imag() == doctest::Approx(-s));
        CHECK(jac[1].max_abs() == doctest::Approx(0.0));
        CHECK(jac[2].max_abs() == doctest::Approx(0.0));
    }
    SUBCASE("lift of the jacobian equals the periodic central difference of the lift") {
        const auto v = oracle::random_band_field(shape, 7);
        const DisplacementField dense = lift(v);
        const auto jac = fourier_jacobian(v);
        for (int e = 0; e < 3; ++e) {
            const DisplacementField dense_jac = lift(jac[e]);
            for (int c = 0; c < 3; ++c) {
                const auto expect = oracle::periodic_central_diff(dense.component(c), kFull, e);
                for (std::size_t n = 0; n < expect.size(); ++n)
                    CHECK(dense_jac.component(c)[n] == doctest::Approx(expect[n]).epsilon(1e-8));
            }
        }
    }
}

TEST_CASE("truncated correlation matches the dense pointwise product oracle") {
    const BandShape shape = make_band_shape(kFull, kTrunc);
    SUBCASE("zero operand gives zero") {
        const auto a = oracle::random_band_field(shape, 1);
        const BandlimitedVelocity zero(shape);
        CHECK(truncated_correlation(a, zero).max_abs() == doctest::Approx(0.0));
    }
    SUBCASE("DC times DC is the DC product") {
        BandlimitedVelocity a(shape), b(shape);
        a.at(0, 0, 0, 0) = 512.0 * 2.0; // constant 2 in dense space
        b.at(0, 0, 0, 0) = 512.0 * 3.0; // constant 3
        const auto c = truncated_correlation(a, b);
        CHECK(c.at(0, 0, 0, 0).real() == doctest::Approx(512.0 * 6.0).epsilon(1e-10));
    }
    SUBCASE("random in-band pair against the dense oracle") {
        const auto a = oracle::random_band_field(shape, 21, 20.0);
        const auto b = oracle::random_band_field(shape, 22, 20.0);
        const auto c = truncated_correlation(a, b);
        const auto expected = project(dense_pointwise(lift(a), lift(b)), kTrunc);
        CHECK(oracle::max_coeff_diff(c, expected) <= 1e-8 * std::max(1.0, expected.max_abs()));
    }
}

TEST_CASE("jacobian transpose correlation against the dense oracle") {
    const BandShape shape = make_band_shape(kFull, kTrunc);
    const auto v = oracle::random_band_field(shape, 31, 10.0);
    const auto m = oracle::random_band_field(shape, 32, 10.0);
    const auto got = jacobian_transpose_correlation(v, m);

    const DisplacementField dv = lift(v);
    const DisplacementField dm = lift(m);
    DisplacementField dense(kFull);
    for (int c = 0; c < 3; ++c)
        for (int e = 0; e < 3; ++e) {
            const auto d = oracle::periodic_central_diff(dv.component(e), kFull, c);
            for (std::size_t n = 0; n < d.size(); ++n)
                dense.component(c)[n] += d[n] * dm.component(e)[n];
        }
    const auto expected = project(dense, kTrunc);
    CHECK(oracle::max_coeff_diff(got, expected) <= 1e-8 * std::max(1.0, expected.max_abs()));
}

TEST_CASE("tensor product divergence against the dense oracle") {
    const BandShape shape = make_band_shape(kFull, kTrunc);
    SUBCASE("zero momentum gives zero") {
        const auto v = oracle::random_band_field(shape, 41);
        CHECK(tensor_product_divergence(BandlimitedVelocity(shape), v).max_abs() ==
              doctest::Approx(0.0));
    }
    SUBCASE("DC-only operands have zero divergence") {
        BandlimitedVelocity m(shape), v(shape);
        m.at(0, 0, 0, 0) = 100.0;
        m.at(1, 0, 0, 0) = -50.0;
        v.at(2, 0, 0, 0) = 80.0;
        CHECK(tensor_product_divergence(m, v).max_abs() <= 1e-12);
    }
    SUBCASE("random in-band pair against the dense oracle") {
        const auto m = oracle::random_band_field(shape, 51, 10.0);
        const auto v = oracle::random_band_field(shape, 52, 10.0);
        const auto got = tensor_product_divergence(m, v);

        const DisplacementField dm = lift(m);
        const DisplacementField dv = lift(v);
        DisplacementField dense(kFull);
        for (int c = 0; c < 3; ++c)
            for (int e = 0; e < 3; ++e) {
                std::vector<double> prod(dm.component(c).size());
                for (std::size_t n = 0; n < prod.size(); ++n)
                    prod[n] = dm.component(c)[n] * dv.component(e)[n];
                const auto d = oracle::periodic_central_diff(prod, kFull, e);
                for (std::size_t n = 0; n < d.size(); ++n) dense.component(c)[n] += d[n];
            }
        const auto expected = project(dense, kTrunc);
        CHECK(oracle::max_coeff_diff(got, expected) <= 1e-8 * std::max(1.0, expected.max_abs()));
    }
}

TEST_CASE("hermitian symmetry is preserved by the operator algebra") {
    const BandShape shape = make_band_shape(kFull, kTrunc);
    const FourierOperator op(3.0, 3, kTrunc, kFull);
    const auto a = oracle::random_band_field(shape, 61, 5.0);
    const auto b = oracle::random_band_field(shape, 62, 5.0);
    CHECK(truncated_correlation(a, b).max_hermitian_violation() <= 1e-9);
    CHECK(jacobian_transpose_correlation(a, b).max_hermitian_violation() <= 1e-9);
    CHECK(tensor_product_divergence(a, b).max_hermitian_violation() <= 1e-9);
    CHECK(op.apply_l(a).max_hermitian_violation() <= 1e-9);
}

TEST_CASE("band shape uses the largest odd symmetric box") {
    const BandShape s16 = make_band_shape({16, 16, 16}, {16, 16, 16});
    CHECK(s16.halfwidth == Dims{7, 7, 7});
    const BandShape s17 = make_band_shape({32, 32, 32}, {17, 17, 17});
    CHECK(s17.halfwidth == Dims{8, 8, 8});
    CHECK_THROWS_AS(make_band_shape({8, 8, 8}, {9, 9, 9}), StructuralError);
}
