#include <doctest.h>

#include <cmath>
#include <random>

#include "raptor/optimizer.hpp"
#include "raptor/phantom.hpp"
#include "support/oracles.hpp"

using namespace raptor;

namespace {

const Dims kDims{12, 12, 12};

RegistrationConfig ssd_config() {
    RegistrationConfig cfg;
    cfg.metric = MetricKind::ssd;
    cfg.sigma = 0.25;
    cfg.trunc_dims = {7, 7, 7};
    cfg.num_time_steps = 4;
    cfg.pyramid_levels = {1};
    cfg.max_iterations = {20};
    cfg.step_size = 1e-3;
    cfg.momentum = 0.0;
    cfg.regularizer_weight = 1e-6;
    return cfg;
}

Volume textured(const Dims& dims, std::uint32_t seed) {
    auto [v, labels] = make_phantom(PhantomKind::sphere, dims,
                                    {.radius = dims[0] / 3.0,
                                     .edge_width = 2.0,
                                     .texture_amplitude = 0.4,
                                     .seed = seed});
    return v;
}

} // namespace

TEST_CASE("energy trivial cases") {
    const RegistrationConfig cfg = ssd_config();
    const Volume x = textured(kDims, 1);
    const FourierOperator op(cfg.alpha, cfg.c, cfg.trunc_dims, kDims);
    const BandlimitedVelocity zero(op.shape());

    SUBCASE("identical pair at zero velocity costs nothing") {
        const EnergyBreakdown e = energy(zero, x, x, cfg);
        CHECK(e.total == doctest::Approx(0.0));
        CHECK(e.data == doctest::Approx(0.0));
        CHECK(e.reg == doctest::Approx(0.0));
    }
    SUBCASE("zero velocity scores the unwarped pair with zero regularizer") {
        const Volume y = textured(kDims, 2);
        const EnergyBreakdown e = energy(zero, x, y, cfg);
        CHECK(e.reg == doctest::Approx(0.0));
        CHECK(e.data == doctest::Approx(ssd_value(x, y, {cfg.sigma})).epsilon(1e-12));
        CHECK(e.total == doctest::Approx(e.data + e.reg).epsilon(1e-9));
    }
    SUBCASE("single-mode regularizer equals 2 w L(k) m^2") {
        RegistrationConfig rcfg = cfg;
        rcfg.regularizer_weight = 1.0;
        BandlimitedVelocity v(op.shape());
        const double m = 0.37;
        v.at(1, 2, -1, 0) = Complex(0.0, m);
        v.at(1, -2, 1, 0) = Complex(0.0, -m);
        const EnergyBreakdown e = energy(v, x, x, rcfg);
        const double l = FourierOperator::symbol(rcfg.alpha, rcfg.c, {2, -1, 0}, kDims);
        CHECK(e.reg == doctest::Approx(2.0 * l * m * m).epsilon(1e-9));
    }
}

TEST_CASE("energy_gradient structure at the identity") {
    const RegistrationConfig cfg = ssd_config();
    const Volume x = textured(kDims, 3);
    const FourierOperator op(cfg.alpha, cfg.c, cfg.trunc_dims, kDims);
    const BandlimitedVelocity zero(op.shape());

    SUBCASE("stationary at a perfect match") {
        const BandlimitedVelocity g = energy_gradient(zero, x, x, cfg);
        CHECK(g.max_abs() <= 1e-14);
    }
    SUBCASE("at v0 = 0 the gradient is the smoothed projected image term") {
        // no adjoint correction at the identity: the whole pullback
        // collapses to -K nu(psi_bar * interpolant slope of y) / voxels
        const Volume y = textured(kDims, 4);
        const BandlimitedVelocity got = energy_gradient(zero, x, y, cfg);

        const Volume psi_bar = ssd_gradient(x, y, {cfg.sigma});
        DisplacementField dense(kDims);
        for (int k = 0; k < kDims[2]; ++k)
            for (int j = 0; j < kDims[1]; ++j)
                for (int i = 0; i < kDims[0]; ++i) {
                    const auto [value, slope] =
                        interpolate_with_gradient(y, {double(i), double(j), double(k)});
                    (void)value;
                    const std::size_t n = dense.index(i, j, k);
                    for (int c = 0; c < 3; ++c)
                        dense.component(c)[n] = psi_bar[n] * slope[c];
                }
        BandlimitedVelocity expected = project(dense, cfg.trunc_dims);
        expected.scale(-1.0 / static_cast<double>(voxel_count(kDims)));
        expected = op.apply_k(expected);
        CHECK(oracle::max_coeff_diff(got, expected) <= 1e-12 * std::max(1.0, expected.max_abs()));
    }
}

TEST_CASE("energy gradient matches finite differences (ssd)") {
    RegistrationConfig cfg = ssd_config();
    cfg.num_time_steps = 5;
    const Volume x = textured(kDims, 5);
    const Volume y = textured(kDims, 6);
    const FourierOperator op(cfg.alpha, cfg.c, cfg.trunc_dims, kDims);

    auto v0 = oracle::random_band_field(op.shape(), 21, 1.0);
    v0.scale(0.4 / lift(v0).max_abs());
    const BandlimitedVelocity grad = energy_gradient(v0, x, y, cfg);

    std::mt19937 rng(33);
    const auto& h = op.shape().halfwidth;
    std::uniform_int_distribution<int> pk(-h[0], h[0]);
    std::uniform_int_distribution<int> pc(0, 2);
    const double eps = 1e-4 * std::max(1.0, v0.max_abs());
    double worst = 0.0;
    for (int t = 0; t < 8; ++t) {
        const int kx = pk(rng), ky = pk(rng), kz = pk(rng), comp = pc(rng);
        BandlimitedVelocity delta(op.shape());
        const Complex unit = (t % 2 && !(kx == 0 && ky == 0 && kz == 0)) ? Complex(0, 1) : Complex(1, 0);
        delta.at(comp, kx, ky, kz) += unit;
        delta.at(comp, -kx, -ky, -kz) += std::conj(unit);
        if (kx == 0 && ky == 0 && kz == 0) delta.at(comp, 0, 0, 0) = Complex(1, 0);

        BandlimitedVelocity vp = v0, vm = v0;
        vp.axpy(eps, delta);
        vm.axpy(-eps, delta);
        const double fd =
            (energy(vp, x, y, cfg).total - energy(vm, x, y, cfg).total) / (2.0 * eps);
        const double an = inner_product_v(grad, delta, op);
        if (std::abs(fd) < 1e-12) continue;
        worst = std::max(worst, std::abs(an - fd) / std::abs(fd));
    }
    CHECK(worst < 1e-3);
}

TEST_CASE("ssd metric selection reproduces the hand-assembled pipeline bit for bit") {
    RegistrationConfig cfg = ssd_config();
    const Volume x = textured(kDims, 7);
    const Volume y = textured(kDims, 8);
    const FourierOperator op(cfg.alpha, cfg.c, cfg.trunc_dims, kDims);
    auto v0 = oracle::random_band_field(op.shape(), 51, 1.0);
    v0.scale(0.5 / lift(v0).max_abs());

    const BandlimitedVelocity got = energy_gradient(v0, x, y, cfg);

    // independent assembly of the same chain with the explicit residual
    // formula substituted for the metric derivative
    const ShootingConfig scfg{cfg.num_time_steps, op};
    const GeodesicTrajectory traj = shoot_forward(v0, scfg);
    const Volume yw = warp(y, traj.final_inverse_map());
    DisplacementField ubar(kDims);
    for (int k = 0; k < kDims[2]; ++k)
        for (int j = 0; j < kDims[1]; ++j)
            for (int i = 0; i < kDims[0]; ++i) {
                const std::size_t n = ubar.index(i, j, k);
                const Vec3 p{i + traj.final_inverse_map().component(0)[n],
                             j + traj.final_inverse_map().component(1)[n],
                             k + traj.final_inverse_map().component(2)[n]};
                const auto [value, slope] = interpolate_with_gradient(y, p);
                const double residual = (value - x[n]) / (cfg.sigma * cfg.sigma);
                for (int c = 0; c < 3; ++c) ubar.component(c)[n] = residual * slope[c];
            }
    BandlimitedVelocity expected = op.apply_k(pullback_image_gradient(traj, ubar, scfg));
    expected.axpy(2.0 * cfg.regularizer_weight, v0);

    CHECK(oracle::max_coeff_diff(got, expected) == 0.0);
}

TEST_CASE("minimize on an identical pair converges immediately") {
    RegistrationConfig cfg = ssd_config();
    const Volume x = textured(kDims, 9);
    const RegistrationResult r = minimize(x, x, cfg);
    CHECK(r.converged);
    CHECK(r.energy_trace.back().iteration <= 2);
    CHECK(r.v0.max_abs() <= 1e-14);
    CHECK(r.inverse_map.max_abs() <= 1e-12);
}

TEST_CASE("zero momentum is plain gradient descent") {
    RegistrationConfig cfg = ssd_config();
    cfg.max_iterations = {3};
    cfg.convergence_tolerance = 1e-30;
    const Volume x = textured(kDims, 10);
    const Volume y = textured(kDims, 11);

    const RegistrationResult r = minimize(x, y, cfg);

    // manual GD over the same (single) level; level images pass through
    // the factor-1 pyramid smoothing
    const Volume xl = downsample(x, 1);
    const Volume yl = downsample(y, 1);
    const FourierOperator op(cfg.alpha, cfg.c, cfg.trunc_dims, xl.dims());
    BandlimitedVelocity v0(op.shape());
    for (int it = 0; it < 3; ++it) {
        const BandlimitedVelocity g = energy_gradient(v0, xl, yl, cfg);
        v0.axpy(-cfg.step_size, g);
    }
    CHECK(oracle::max_coeff_diff(r.v0, v0) == 0.0);
}

TEST_CASE("updates preserve hermitian symmetry and positive jacobians") {
    RegistrationConfig cfg = ssd_config();
    cfg.momentum = 0.9;
    cfg.max_iterations = {10};
    const Volume x = textured(kDims, 12);
    const Volume y = textured(kDims, 13);
    const RegistrationResult r = minimize(x, y, cfg);
    CHECK(r.v0.max_hermitian_violation() <= 1e-9);
    const Volume det = jacobian_determinant(r.inverse_map);
    CHECK(det.min_value() > 0.0);
    for (const EnergyRecord& rec : r.energy_trace)
        CHECK(rec.total == doctest::Approx(rec.data + rec.reg).epsilon(1e-9));
}

TEST_CASE("runaway step sizes fail loudly") {
    RegistrationConfig cfg = ssd_config();
    cfg.num_time_steps = 1; // keeps every trial energy finite
    cfg.step_size = 1e12;
    const Volume x = textured(kDims, 14);
    const Volume y = textured(kDims, 15);
    SUBCASE("plain descent exhausts its halvings") {
        cfg.momentum = 0.0;
        CHECK_THROWS_AS(minimize(x, y, cfg), StepSizeError);
    }
    SUBCASE("momentum descent detects sustained increase") {
        cfg.momentum = 0.9;
        CHECK_THROWS_AS(minimize(x, y, cfg), StepSizeError);
    }
}

TEST_CASE("velocity transfer keeps the dense field consistent across grids") {
    const Dims coarse{12, 12, 12};
    const Dims fine{24, 24, 24};
    const FourierOperator op_c(3.0, 3, {7, 7, 7}, coarse);
    auto v = oracle::random_band_field(op_c.shape(), 71, 2.0);

    const BandlimitedVelocity vf = transfer_velocity(v, fine, {7, 7, 7});
    const DisplacementField uc = lift(v);
    const DisplacementField uf = lift(vf);
    for (int k = 0; k < coarse[2]; ++k)
        for (int j = 0; j < coarse[1]; ++j)
            for (int i = 0; i < coarse[0]; ++i)
                for (int c = 0; c < 3; ++c)
                    CHECK(uf.at(c, 2 * i, 2 * j, 2 * k) ==
                          doctest::Approx(2.0 * uc.at(c, i, j, k)).epsilon(1e-9));
}

TEST_CASE("synthetic warp recovery with ssd on a single level") {
    const Dims dims{24, 24, 24};
    auto [x, labels] = make_phantom(PhantomKind::sphere, dims,
                                    {.radius = 7.0,
                                     .edge_width = 2.5,
                                     .texture_amplitude = 0.5,
                                     .texture_freq_min = 2,
                                     .texture_freq_max = 5,
                                     .seed = 31});

    RegistrationConfig cfg;
    cfg.metric = MetricKind::ssd;
    cfg.sigma = 0.1;
    cfg.trunc_dims = {9, 9, 9};
    cfg.num_time_steps = 5;
    cfg.pyramid_levels = {1};
    cfg.max_iterations = {120};
    cfg.step_size = 2e-4;
    cfg.momentum = 0.9;
    cfg.convergence_tolerance = 1e-7;
    cfg.regularizer_weight = 1e-8;

    // ground truth: smooth in-band warp of ~1.2 voxels
    const FourierOperator op_truth(3.0, 3, {5, 5, 5}, dims);
    auto v_truth = oracle::random_band_field(op_truth.shape(), 77, 1.0);
    v_truth.scale(1.2 / lift(v_truth).max_abs());
    const ShootingConfig truth_cfg{10, op_truth};
    const DisplacementField u_truth = shoot_forward(v_truth, truth_cfg).final_inverse_map();
    const Volume y = warp(x, u_truth);

    const RegistrationResult r = minimize(x, y, cfg);

    const double before = ssd_value(x, y, {cfg.sigma});
    const double after = ssd_value(x, r.warped, {cfg.sigma});
    CHECK(after <= 0.1 * before);

    // compare against the numerically inverted truth (fixed-point iteration
    // of g = -u o (id + g))
    std::array<Volume, 3> u_comp;
    for (int c = 0; c < 3; ++c) {
        u_comp[c] = Volume(dims);
        u_comp[c].data() = u_truth.component(c);
    }
    DisplacementField truth_inv(dims);
    for (int pass = 0; pass < 40; ++pass) {
        DisplacementField next(dims);
        for (int k = 0; k < dims[2]; ++k)
            for (int j = 0; j < dims[1]; ++j)
                for (int i = 0; i < dims[0]; ++i) {
                    const std::size_t n = truth_inv.index(i, j, k);
                    const Vec3 p{i + truth_inv.component(0)[n], j + truth_inv.component(1)[n],
                                 k + truth_inv.component(2)[n]};
                    for (int c = 0; c < 3; ++c) next.component(c)[n] = -interpolate(u_comp[c], p);
                }
        truth_inv = next;
    }
    double err_sum = 0.0;
    for (std::size_t n = 0; n < truth_inv.size(); ++n) {
        double d2 = 0.0;
        for (int c = 0; c < 3; ++c) {
            const double d = truth_inv.component(c)[n] - r.inverse_map.component(c)[n];
            d2 += d * d;
        }
        err_sum += std::sqrt(d2);
    }
    CHECK(err_sum / truth_inv.size() <= 0.5);
}
