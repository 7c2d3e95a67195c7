#include "raptor/geodesic.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "raptor/parallel.hpp"

namespace raptor {

namespace {

using TableVec = std::vector<Complex>;

TableVec symbol_times(const BandShape& shape, int axis, std::span<const Complex> table) {
    TableVec out(table.begin(), table.end());
    const auto& h = shape.halfwidth;
    const Dims m = shape.table_dims();
    for (int kz = -h[2]; kz <= h[2]; ++kz)
        for (int ky = -h[1]; ky <= h[1]; ++ky)
            for (int kx = -h[0]; kx <= h[0]; ++kx) {
                const int k = axis == 0 ? kx : (axis == 1 ? ky : kz);
                const std::size_t n =
                    (static_cast<std::size_t>(kz + h[2]) * m[1] + static_cast<std::size_t>(ky + h[1])) * m[0] +
                    static_cast<std::size_t>(kx + h[0]);
                out[n] *= derivative_symbol(shape, axis, k);
            }
    return out;
}

TableVec table_scaled(std::span<const Complex> table, std::span<const double> mult) {
    TableVec out(table.begin(), table.end());
    for (std::size_t n = 0; n < out.size(); ++n) out[n] *= mult[n];
    return out;
}

void check_band(const BandlimitedVelocity& v, const FourierOperator& op, const char* what) {
    if (!(v.shape() == op.shape()))
        throw StructuralError(std::string(what) + ": velocity band does not match operator band");
}

} // namespace

BandlimitedVelocity ad_transpose(const BandlimitedVelocity& v, const BandlimitedVelocity& w,
                                 const FourierOperator& op) {
    check_band(v, op, "ad_transpose");
    check_band(w, op, "ad_transpose");
    const BandShape& shape = op.shape();
    const BandProduct prod(shape);
    const auto l = op.l_table();
    const auto k = op.k_table();

    // spatial (padded-grid) samples of m = Lw and of v
    std::array<TableVec, 3> m_spatial, v_spatial;
    for (int e = 0; e < 3; ++e) {
        m_spatial[e] = prod.to_pad_spatial(table_scaled(w.component(e), l));
        v_spatial[e] = prod.to_pad_spatial(v.component(e));
    }

    BandlimitedVelocity out(shape);
    TableVec pw(prod.pad_size());
    for (int c = 0; c < 3; ++c) {
        // (Dv)^T * m : sum_e (D_c v_e) m_e, summed on the padded grid
        TableVec acc(prod.pad_size(), Complex(0.0, 0.0));
        for (int e = 0; e < 3; ++e) {
            const TableVec dv_spatial = prod.to_pad_spatial(symbol_times(shape, c, v.component(e)));
            for (std::size_t n = 0; n < acc.size(); ++n) acc[n] += dv_spatial[n] * m_spatial[e][n];
        }
        TableVec total = prod.from_pad_spatial(acc);

        // div(m (x) v) : sum_e D_e (m_c v_e)
        for (int e = 0; e < 3; ++e) {
            for (std::size_t n = 0; n < pw.size(); ++n) pw[n] = m_spatial[c][n] * v_spatial[e][n];
            TableVec t = prod.from_pad_spatial(pw);
            t = symbol_times(shape, e, t);
            for (std::size_t n = 0; n < total.size(); ++n) total[n] += t[n];
        }

        auto span = out.component(c);
        for (std::size_t n = 0; n < span.size(); ++n) span[n] = k[n] * total[n];
    }
    return out;
}

BandlimitedVelocity ad_transpose_dv_adjoint(const BandlimitedVelocity& lambda,
                                            const BandlimitedVelocity& w, const FourierOperator& op) {
    check_band(lambda, op, "ad_transpose_dv_adjoint");
    check_band(w, op, "ad_transpose_dv_adjoint");
    const BandShape& shape = op.shape();
    const BandProduct prod(shape);
    const auto l = op.l_table();
    const auto k = op.k_table();

    std::array<TableVec, 3> kl;        // K lambda_c tables
    std::array<TableVec, 3> kl_spatial; // their padded samples
    std::array<TableVec, 3> m_spatial;  // Lw_e padded samples
    for (int c = 0; c < 3; ++c) {
        kl[c] = table_scaled(lambda.component(c), k);
        kl_spatial[c] = prod.to_pad_spatial(kl[c]);
        m_spatial[c] = prod.to_pad_spatial(table_scaled(w.component(c), l));
    }

    BandlimitedVelocity out(shape);
    TableVec pw(prod.pad_size());
    for (int e = 0; e < 3; ++e) {
        TableVec total(shape.table_size(), Complex(0.0, 0.0));
        // - sum_c D_c bandlimit( (K lambda_c) * (Lw_e) )
        for (int c = 0; c < 3; ++c) {
            for (std::size_t n = 0; n < pw.size(); ++n) pw[n] = kl_spatial[c][n] * m_spatial[e][n];
            TableVec t = symbol_times(shape, c, prod.from_pad_spatial(pw));
            for (std::size_t n = 0; n < total.size(); ++n) total[n] += t[n];
        }
        // - sum_c bandlimit( (D_e K lambda_c) * (Lw_c) )
        TableVec acc(prod.pad_size(), Complex(0.0, 0.0));
        for (int c = 0; c < 3; ++c) {
            const TableVec skl_spatial = prod.to_pad_spatial(symbol_times(shape, e, kl[c]));
            for (std::size_t n = 0; n < acc.size(); ++n) acc[n] += skl_spatial[n] * m_spatial[c][n];
        }
        const TableVec t2 = prod.from_pad_spatial(acc);
        auto span = out.component(e);
        for (std::size_t n = 0; n < span.size(); ++n) span[n] = -(total[n] + t2[n]);
    }
    return out;
}

BandlimitedVelocity ad_transpose_dw_adjoint(const BandlimitedVelocity& lambda,
                                            const BandlimitedVelocity& v, const FourierOperator& op) {
    check_band(lambda, op, "ad_transpose_dw_adjoint");
    check_band(v, op, "ad_transpose_dw_adjoint");
    const BandShape& shape = op.shape();
    const BandProduct prod(shape);
    const auto l = op.l_table();
    const auto k = op.k_table();

    std::array<TableVec, 3> kl;
    std::array<TableVec, 3> kl_spatial;
    std::array<TableVec, 3> v_spatial;
    for (int c = 0; c < 3; ++c) {
        kl[c] = table_scaled(lambda.component(c), k);
        kl_spatial[c] = prod.to_pad_spatial(kl[c]);
        v_spatial[c] = prod.to_pad_spatial(v.component(c));
    }

    BandlimitedVelocity out(shape);
    for (int d = 0; d < 3; ++d) {
        // sum_c bandlimit( (K lambda_c) * (D_c v_d) )
        TableVec acc(prod.pad_size(), Complex(0.0, 0.0));
        for (int c = 0; c < 3; ++c) {
            const TableVec sv_spatial = prod.to_pad_spatial(symbol_times(shape, c, v.component(d)));
            for (std::size_t n = 0; n < acc.size(); ++n) acc[n] += kl_spatial[c][n] * sv_spatial[n];
        }
        // - sum_e bandlimit( (D_e K lambda_d) * v_e )
        TableVec acc2(prod.pad_size(), Complex(0.0, 0.0));
        for (int e = 0; e < 3; ++e) {
            const TableVec skl_spatial = prod.to_pad_spatial(symbol_times(shape, e, kl[d]));
            for (std::size_t n = 0; n < acc2.size(); ++n) acc2[n] += skl_spatial[n] * v_spatial[e][n];
        }
        const TableVec t1 = prod.from_pad_spatial(acc);
        const TableVec t2 = prod.from_pad_spatial(acc2);
        auto span = out.component(d);
        for (std::size_t n = 0; n < span.size(); ++n) span[n] = l[n] * (t1[n] - t2[n]);
    }
    return out;
}

namespace {

double sample_component(const std::vector<double>& f, const Dims& dims, const TrilinearSample& s) {
    double acc = 0.0;
    for (int dz = 0; dz < 2; ++dz) {
        const double wz = dz ? s.frac[2] : 1.0 - s.frac[2];
        if (wz == 0.0) continue;
        const int kk = std::min(s.lo[2] + dz, dims[2] - 1);
        for (int dy = 0; dy < 2; ++dy) {
            const double wy = dy ? s.frac[1] : 1.0 - s.frac[1];
            if (wy == 0.0) continue;
            const int jj = std::min(s.lo[1] + dy, dims[1] - 1);
            for (int dx = 0; dx < 2; ++dx) {
                const double wx = dx ? s.frac[0] : 1.0 - s.frac[0];
                if (wx == 0.0) continue;
                const int ii = std::min(s.lo[0] + dx, dims[0] - 1);
                acc += wx * wy * wz *
                       f[static_cast<std::size_t>(ii) +
                         static_cast<std::size_t>(dims[0]) *
                             (static_cast<std::size_t>(jj) + static_cast<std::size_t>(dims[1]) * kk)];
            }
        }
    }
    return acc;
}

} // namespace

DisplacementField semi_lagrangian_step(const DisplacementField& u, const DisplacementField& w,
                                       double dt) {
    if (u.dims() != w.dims()) throw StructuralError("semi_lagrangian_step: dims differ");
    const Dims dims = u.dims();
    DisplacementField out(dims, u.spacing(), u.origin());
    const std::size_t plane = static_cast<std::size_t>(dims[0]) * dims[1];
    par::parallel_for(static_cast<std::size_t>(dims[2]), [&](std::size_t kb, std::size_t ke) {
        for (std::size_t k = kb; k < ke; ++k)
            for (int j = 0; j < dims[1]; ++j)
                for (int i = 0; i < dims[0]; ++i) {
                    const std::size_t n = i + dims[0] * j + plane * k;
                    const Vec3 back{i - dt * w.component(0)[n], j - dt * w.component(1)[n],
                                    static_cast<double>(k) - dt * w.component(2)[n]};
                    const TrilinearSample s = trilinear_sample(dims, back);
                    for (int c = 0; c < 3; ++c)
                        out.component(c)[n] =
                            sample_component(u.component(c), dims, s) - dt * w.component(c)[n];
                }
    });
    return out;
}

GeodesicTrajectory shoot_forward(const BandlimitedVelocity& v0, const ShootingConfig& cfg) {
    check_band(v0, cfg.op, "shoot_forward");
    if (cfg.num_time_steps < 1) throw StructuralError("shoot_forward: num_time_steps must be >= 1");
    const int steps = cfg.num_time_steps;
    const double dt = 1.0 / steps;

    GeodesicTrajectory traj;
    traj.velocities.reserve(steps + 1);
    traj.velocities.push_back(v0);
    for (int i = 1; i <= steps; ++i) {
        const BandlimitedVelocity rhs = ad_transpose(traj.velocities[i - 1], traj.velocities[i - 1], cfg.op);
        BandlimitedVelocity next = traj.velocities[i - 1];
        next.axpy(-dt, rhs);
        if (!next.all_finite())
            throw NumericalError("shoot_forward: velocity diverged at time step " + std::to_string(i));
        traj.velocities.push_back(std::move(next));
    }

    const Dims dims = cfg.op.shape().full_dims;
    traj.inverse_maps.reserve(steps + 1);
    traj.inverse_maps.emplace_back(dims);
    for (int i = 0; i < steps; ++i) {
        const DisplacementField w = lift(traj.velocities[i]);
        traj.inverse_maps.push_back(semi_lagrangian_step(traj.inverse_maps[i], w, dt));
    }
    return traj;
}

DisplacementField integrate_inverse_map(std::span<const BandlimitedVelocity> step_velocities,
                                        double dt) {
    if (step_velocities.empty())
        throw StructuralError("integrate_inverse_map: empty velocity sequence");
    const Dims dims = step_velocities.front().shape().full_dims;
    DisplacementField u(dims);
    for (const BandlimitedVelocity& v : step_velocities) {
        const DisplacementField w = lift(v);
        u = semi_lagrangian_step(u, w, dt);
        if (!std::isfinite(u.max_abs()))
            throw NumericalError("integrate_inverse_map: displacement diverged");
    }
    return u;
}

BandlimitedVelocity backward_adjoint(const GeodesicTrajectory& traj,
                                     const BandlimitedVelocity& gradient_at_t1,
                                     const ShootingConfig& cfg) {
    if (traj.num_time_steps() != cfg.num_time_steps)
        throw StructuralError("backward_adjoint: trajectory/step count mismatch");
    check_band(gradient_at_t1, cfg.op, "backward_adjoint");
    const double dt = 1.0 / cfg.num_time_steps;
    BandlimitedVelocity lambda = gradient_at_t1;
    for (int i = cfg.num_time_steps - 1; i >= 0; --i) {
        const BandlimitedVelocity& vi = traj.velocities[i];
        const BandlimitedVelocity a = ad_transpose_dv_adjoint(lambda, vi, cfg.op);
        const BandlimitedVelocity b = ad_transpose_dw_adjoint(lambda, vi, cfg.op);
        lambda.axpy(-dt, a);
        lambda.axpy(-dt, b);
    }
    return lambda;
}

namespace {

struct StepAdjoint {
    DisplacementField wbar; // dE/dw for this step's dense velocity samples
    DisplacementField ubar; // dE/du for the previous displacement field
};

StepAdjoint semi_lagrangian_adjoint(const DisplacementField& u, const DisplacementField& w,
                                    const DisplacementField& ubar_next, double dt) {
    const Dims dims = u.dims();
    StepAdjoint out{DisplacementField(dims), DisplacementField(dims)};
    const std::size_t plane = static_cast<std::size_t>(dims[0]) * dims[1];

    for (int k = 0; k < dims[2]; ++k)
        for (int j = 0; j < dims[1]; ++j)
            for (int i = 0; i < dims[0]; ++i) {
                const std::size_t n = i + dims[0] * j + plane * k;
                const Vec3 back{i - dt * w.component(0)[n], j - dt * w.component(1)[n],
                                static_cast<double>(k) - dt * w.component(2)[n]};
                const TrilinearSample s = trilinear_sample(dims, back);

                // corner indices/weights, shared across components
                int idx[2][3];
                for (int d = 0; d < 3; ++d) {
                    idx[0][d] = s.lo[d];
                    idx[1][d] = std::min(s.lo[d] + 1, dims[d] - 1);
                }
                const double wxs[2] = {1.0 - s.frac[0], s.frac[0]};
                const double wys[2] = {1.0 - s.frac[1], s.frac[1]};
                const double wzs[2] = {1.0 - s.frac[2], s.frac[2]};

                double grad[3][3]; // grad[c][d] = d interp(u_c)/d p_d at back
                for (int c = 0; c < 3; ++c)
                    for (int d = 0; d < 3; ++d) grad[c][d] = 0.0;

                for (int dz = 0; dz < 2; ++dz)
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) {
                            const std::size_t corner =
                                static_cast<std::size_t>(idx[dx][0]) +
                                static_cast<std::size_t>(dims[0]) *
                                    (static_cast<std::size_t>(idx[dy][1]) +
                                     static_cast<std::size_t>(dims[1]) * idx[dz][2]);
                            const double weight = wxs[dx] * wys[dy] * wzs[dz];
                            const double sx = (dx ? 1.0 : -1.0) * wys[dy] * wzs[dz];
                            const double sy = (dy ? 1.0 : -1.0) * wxs[dx] * wzs[dz];
                            const double sz = (dz ? 1.0 : -1.0) * wxs[dx] * wys[dy];
                            for (int c = 0; c < 3; ++c) {
                                const double uc = u.component(c)[corner];
                                grad[c][0] += sx * uc;
                                grad[c][1] += sy * uc;
                                grad[c][2] += sz * uc;
                                // splat: transpose of the interpolation
                                out.ubar.component(c)[corner] += weight * ubar_next.component(c)[n];
                            }
                        }
                for (int c = 0; c < 3; ++c)
                    for (int d = 0; d < 3; ++d)
                        if (s.clamped[d]) grad[c][d] = 0.0;

                for (int d = 0; d < 3; ++d) {
                    double acc = ubar_next.component(d)[n];
                    for (int c = 0; c < 3; ++c) acc += ubar_next.component(c)[n] * grad[c][d];
                    out.wbar.component(d)[n] = -dt * acc;
                }
            }
    return out;
}

} // namespace

BandlimitedVelocity pullback_image_gradient(const GeodesicTrajectory& traj,
                                            const DisplacementField& d_final_map,
                                            const ShootingConfig& cfg) {
    if (traj.num_time_steps() != cfg.num_time_steps)
        throw StructuralError("pullback_image_gradient: trajectory/step count mismatch");
    const BandShape& shape = cfg.op.shape();
    if (d_final_map.dims() != shape.full_dims)
        throw StructuralError("pullback_image_gradient: dense gradient dims mismatch");
    const int steps = cfg.num_time_steps;
    const double dt = 1.0 / steps;
    const double lift_adjoint_scale = 1.0 / static_cast<double>(shape.dense_size());
    const Dims trunc = shape.table_dims();

    // dense sweep: accumulate per-step velocity sensitivities
    std::vector<BandlimitedVelocity> g(steps, BandlimitedVelocity(shape));
    DisplacementField ubar = d_final_map;
    for (int i = steps - 1; i >= 0; --i) {
        const DisplacementField w = lift(traj.velocities[i]);
        StepAdjoint adj = semi_lagrangian_adjoint(traj.inverse_maps[i], w, ubar, dt);
        g[i] = project(adj.wbar, trunc);
        g[i].scale(lift_adjoint_scale);
        ubar = std::move(adj.ubar);
    }

    // band sweep: adjoint of the Euler shooting recursion with injections
    BandlimitedVelocity lambda(shape);
    for (int i = steps - 1; i >= 0; --i) {
        const BandlimitedVelocity& vi = traj.velocities[i];
        const BandlimitedVelocity a = ad_transpose_dv_adjoint(lambda, vi, cfg.op);
        const BandlimitedVelocity b = ad_transpose_dw_adjoint(lambda, vi, cfg.op);
        lambda.axpy(-dt, a);
        lambda.axpy(-dt, b);
        lambda.axpy(1.0, g[i]);
    }
    return lambda;
}

} // namespace raptor
