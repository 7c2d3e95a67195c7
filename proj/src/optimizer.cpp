#include "raptor/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>

#include "raptor/parallel.hpp"

namespace raptor {

void RegistrationConfig::validate() const {
    if (!(alpha > 0.0)) throw StructuralError("config: alpha must be > 0");
    if (c < 1) throw StructuralError("config: c must be >= 1");
    if (!(sigma > 0.0)) throw StructuralError("config: sigma must be > 0");
    if (num_time_steps < 1) throw StructuralError("config: num_time_steps must be >= 1");
    if (!(step_size > 0.0)) throw StructuralError("config: step_size must be > 0");
    if (momentum < 0.0 || momentum >= 1.0) throw StructuralError("config: momentum must be in [0, 1)");
    if (!(convergence_tolerance > 0.0)) throw StructuralError("config: tolerance must be > 0");
    if (!(regularizer_weight > 0.0)) throw StructuralError("config: regularizer_weight must be > 0");
    if (pyramid_levels.empty()) throw StructuralError("config: pyramid_levels must be non-empty");
    for (std::size_t i = 0; i < pyramid_levels.size(); ++i) {
        if (pyramid_levels[i] < 1) throw StructuralError("config: pyramid factors must be >= 1");
        if (i > 0 && pyramid_levels[i] >= pyramid_levels[i - 1])
            throw StructuralError("config: pyramid factors must be strictly decreasing");
    }
    if (max_iterations.empty()) throw StructuralError("config: max_iterations must be non-empty");
    if (max_iterations.size() != 1 && max_iterations.size() != pyramid_levels.size())
        throw StructuralError("config: max_iterations must match pyramid_levels (or be a single value)");
    for (int m : max_iterations)
        if (m < 1) throw StructuralError("config: max_iterations entries must be >= 1");
    raptor.validate();
    for (int d = 0; d < 3; ++d)
        if (trunc_dims[d] < 3) throw StructuralError("config: trunc_dims must be >= 3 per axis");
}

int RegistrationConfig::iterations_for_level(std::size_t level) const {
    return max_iterations.size() == 1 ? max_iterations[0] : max_iterations[level];
}

std::unique_ptr<DissimilarityMetric> make_metric(const RegistrationConfig& cfg, const Volume& x_level,
                                                 const Volume& y_level) {
    if (cfg.metric == MetricKind::ssd) return std::make_unique<SsdMetric>(SsdConfig{cfg.sigma});
    return std::make_unique<RaptorLevelMetric>(cfg.raptor, x_level, y_level);
}

namespace {

struct WarpWithGradient {
    Volume warped;
    DisplacementField image_gradient; // d interp(y)/dp sampled at the warped points
};

// Resamples y through the displacement and records the interpolant slope at
// every warped point (needed for the exact chain rule through the warp).
WarpWithGradient warp_with_gradient(const Volume& y, const DisplacementField& u) {
    if (y.dims() != u.dims()) throw StructuralError("warp_with_gradient: dims differ");
    const Dims dims = y.dims();
    WarpWithGradient out{Volume(dims), DisplacementField(dims)};
    out.warped.set_spacing(y.spacing());
    out.warped.set_origin(y.origin());
    const std::size_t plane = static_cast<std::size_t>(dims[0]) * dims[1];
    par::parallel_for(static_cast<std::size_t>(dims[2]), [&](std::size_t kb, std::size_t ke) {
        for (std::size_t k = kb; k < ke; ++k)
            for (int j = 0; j < dims[1]; ++j)
                for (int i = 0; i < dims[0]; ++i) {
                    const std::size_t n = i + dims[0] * j + plane * k;
                    const Vec3 p{i + u.component(0)[n], j + u.component(1)[n],
                                 static_cast<double>(k) + u.component(2)[n]};
                    const auto [value, grad] = interpolate_with_gradient(y, p);
                    out.warped[n] = value;
                    for (int c = 0; c < 3; ++c) out.image_gradient.component(c)[n] = grad[c];
                }
    });
    return out;
}

struct LevelContext {
    Volume x;
    Volume y;
    ShootingConfig scfg;
    std::unique_ptr<DissimilarityMetric> metric;
    double reg_weight = 1.0;

    EnergyBreakdown eval_energy(const BandlimitedVelocity& v0) const {
        const GeodesicTrajectory traj = shoot_forward(v0, scfg);
        const Volume yw = warp(y, traj.final_inverse_map());
        EnergyBreakdown e;
        e.data = metric->value(x, yw);
        e.reg = reg_weight * inner_product_v(v0, v0, scfg.op);
        e.total = e.data + e.reg;
        return e;
    }

    std::pair<EnergyBreakdown, BandlimitedVelocity> eval_energy_gradient(
        const BandlimitedVelocity& v0) const {
        const GeodesicTrajectory traj = shoot_forward(v0, scfg);
        const WarpWithGradient wg = warp_with_gradient(y, traj.final_inverse_map());

        auto [data, psi_bar] = metric->value_and_gradient(x, wg.warped);

        // dE/du for the final map: psi_bar(x) * grad(interp y)(x + u(x))
        DisplacementField ubar(wg.image_gradient.dims());
        for (int c = 0; c < 3; ++c) {
            auto& dst = ubar.component(c);
            const auto& g = wg.image_gradient.component(c);
            for (std::size_t n = 0; n < dst.size(); ++n) dst[n] = psi_bar[n] * g[n];
        }

        BandlimitedVelocity lambda0 = pullback_image_gradient(traj, ubar, scfg);
        BandlimitedVelocity grad = scfg.op.apply_k(lambda0);
        grad.axpy(2.0 * reg_weight, v0);

        EnergyBreakdown e;
        e.data = data;
        e.reg = reg_weight * inner_product_v(v0, v0, scfg.op);
        e.total = e.data + e.reg;
        return {e, std::move(grad)};
    }
};

LevelContext make_level_context(const Volume& x, const Volume& y, const RegistrationConfig& cfg) {
    if (x.dims() != y.dims()) throw StructuralError("registration: fixed/moving dims differ");
    LevelContext ctx;
    ctx.x = x;
    ctx.y = y;
    ctx.scfg.num_time_steps = cfg.num_time_steps;
    ctx.scfg.op = FourierOperator(cfg.alpha, cfg.c, cfg.trunc_dims, x.dims());
    ctx.metric = make_metric(cfg, x, y);
    ctx.reg_weight = cfg.regularizer_weight;
    return ctx;
}

} // namespace

EnergyBreakdown energy(const BandlimitedVelocity& v0, const Volume& x, const Volume& y,
                       const RegistrationConfig& cfg) {
    cfg.validate();
    const LevelContext ctx = make_level_context(x, y, cfg);
    if (!(v0.shape() == ctx.scfg.op.shape()))
        throw StructuralError("energy: v0 band does not match config/grid");
    return ctx.eval_energy(v0);
}

BandlimitedVelocity energy_gradient(const BandlimitedVelocity& v0, const Volume& x, const Volume& y,
                                    const RegistrationConfig& cfg) {
    cfg.validate();
    const LevelContext ctx = make_level_context(x, y, cfg);
    if (!(v0.shape() == ctx.scfg.op.shape()))
        throw StructuralError("energy_gradient: v0 band does not match config/grid");
    return ctx.eval_energy_gradient(v0).second;
}

BandlimitedVelocity transfer_velocity(const BandlimitedVelocity& v, const Dims& new_full_dims,
                                      const Dims& trunc_dims) {
    const BandShape new_shape = make_band_shape(new_full_dims, trunc_dims);
    const BandShape& old_shape = v.shape();
    BandlimitedVelocity out(new_shape);

    const double volume_ratio = static_cast<double>(new_shape.dense_size()) /
                                static_cast<double>(old_shape.dense_size());
    Vec3 axis_ratio;
    for (int d = 0; d < 3; ++d)
        axis_ratio[d] = static_cast<double>(new_full_dims[d]) /
                        static_cast<double>(old_shape.full_dims[d]);

    Dims h;
    for (int d = 0; d < 3; ++d) h[d] = std::min(new_shape.halfwidth[d], old_shape.halfwidth[d]);
    for (int comp = 0; comp < 3; ++comp) {
        // coefficients carry the voxel-count scale of the DFT convention, and
        // voxel-unit displacement magnitudes scale with the axis resolution
        const double s = volume_ratio * axis_ratio[comp];
        for (int kz = -h[2]; kz <= h[2]; ++kz)
            for (int ky = -h[1]; ky <= h[1]; ++ky)
                for (int kx = -h[0]; kx <= h[0]; ++kx)
                    out.at(comp, kx, ky, kz) = s * v.at(comp, kx, ky, kz);
    }
    return out;
}

RegistrationResult minimize(const Volume& x, const Volume& y, const RegistrationConfig& cfg) {
    cfg.validate();
    if (x.dims() != y.dims()) throw StructuralError("minimize: fixed/moving dims differ");

    RegistrationResult result;
    BandlimitedVelocity v0;
    Dims prev_dims{0, 0, 0};
    bool have_v0 = false;

    for (std::size_t level = 0; level < cfg.pyramid_levels.size(); ++level) {
        const int factor = cfg.pyramid_levels[level];
        const Volume xl = downsample(x, factor);
        const Volume yl = downsample(y, factor);
        const LevelContext ctx = make_level_context(xl, yl, cfg);

        if (!have_v0) {
            v0 = BandlimitedVelocity(ctx.scfg.op.shape());
            have_v0 = true;
        } else if (xl.dims() != prev_dims) {
            v0 = transfer_velocity(v0, xl.dims(), cfg.trunc_dims);
        }
        prev_dims = xl.dims();

        EnergyBreakdown e = ctx.eval_energy(v0);
        result.energy_trace.push_back({static_cast<int>(level), 0, e.data, e.reg, e.total});

        BandlimitedVelocity momentum_buf(ctx.scfg.op.shape());
        double step = cfg.step_size;
        int consecutive_increases = 0;
        bool level_converged = false;
        std::deque<double> window{e.total};

        const int max_it = cfg.iterations_for_level(level);
        for (int it = 1; it <= max_it; ++it) {
            auto [e_now, grad] = ctx.eval_energy_gradient(v0);
            (void)e_now;
            if (grad.max_abs() <= 1e-20) {
                level_converged = true;
                break;
            }

            EnergyBreakdown e_next;
            if (cfg.momentum == 0.0) {
                bool accepted = false;
                BandlimitedVelocity cand;
                for (int halving = 0; halving <= 10; ++halving) {
                    cand = v0;
                    cand.axpy(-step, grad);
                    e_next = ctx.eval_energy(cand);
                    if (!std::isfinite(e_next.total))
                        throw NumericalError("minimize: energy diverged; reduce step_size");
                    if (e_next.total <= e.total) {
                        accepted = true;
                        break;
                    }
                    step *= 0.5;
                }
                if (!accepted)
                    throw StepSizeError(
                        "minimize: energy kept increasing after 10 step halvings; reduce step_size");
                v0 = std::move(cand);
            } else {
                momentum_buf.scale(cfg.momentum);
                momentum_buf.axpy(-step, grad);
                BandlimitedVelocity cand = v0;
                cand.axpy(1.0, momentum_buf);
                e_next = ctx.eval_energy(cand);
                if (!std::isfinite(e_next.total))
                    throw NumericalError("minimize: energy diverged; reduce step_size");
                if (e_next.total > e.total) {
                    if (++consecutive_increases >= 10)
                        throw StepSizeError(
                            "minimize: energy increased for 10 consecutive iterations; reduce step_size");
                } else {
                    consecutive_increases = 0;
                }
                v0 = std::move(cand);
            }

            e = e_next;
            result.energy_trace.push_back({static_cast<int>(level), it, e.data, e.reg, e.total});

            window.push_back(e.total);
            if (window.size() > 6) window.pop_front();
            if (window.size() == 6) {
                const double old = window.front();
                const double rel = (old - e.total) / std::max(std::abs(old), 1e-300);
                // a stalled plateau counts as converged; a sustained climb is
                // handled by the increase guard above
                if (std::abs(rel) < cfg.convergence_tolerance) {
                    level_converged = true;
                    break;
                }
            }
        }
        result.converged = level_converged;
    }

    // Final resample on the requested grid.
    {
        const int finest = cfg.pyramid_levels.back();
        const Volume xl = downsample(x, finest);
        const LevelContext ctx = make_level_context(xl, downsample(y, finest), cfg);
        const GeodesicTrajectory traj = shoot_forward(v0, ctx.scfg);
        DisplacementField u = traj.final_inverse_map();
        if (u.dims() != x.dims()) u = upsample_displacement(u, x.dims());
        u.set_spacing(x.spacing());
        u.set_origin(x.origin());
        result.warped = warp(y, u);
        result.warped.set_spacing(x.spacing());
        result.warped.set_origin(x.origin());
        result.inverse_map = std::move(u);
        result.v0 = std::move(v0);
    }
    return result;
}

} // namespace raptor
