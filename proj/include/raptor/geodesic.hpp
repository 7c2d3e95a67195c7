#pragma once

#include <span>
#include <vector>

#include "raptor/fourier.hpp"

namespace raptor {

struct ShootingConfig {
    int num_time_steps = 10;
    FourierOperator op;
};

// Momentum-transport operator of the geodesic evolution equation,
//   ad_transpose(v, w) = K[ (Dv)^T * Lw + div(Lw (x) v) ],
// so the evolution reads dv/dt = -ad_transpose(v, v).
BandlimitedVelocity ad_transpose(const BandlimitedVelocity& v, const BandlimitedVelocity& w,
                                 const FourierOperator& op);

// Adjoints (in the real coefficient inner product) of the linearizations
// of ad_transpose in its first and second slot. Both preserve Hermitian
// symmetry and vanish when the frozen field is zero.
BandlimitedVelocity ad_transpose_dv_adjoint(const BandlimitedVelocity& lambda,
                                            const BandlimitedVelocity& w, const FourierOperator& op);
BandlimitedVelocity ad_transpose_dw_adjoint(const BandlimitedVelocity& lambda,
                                            const BandlimitedVelocity& v, const FourierOperator& op);

struct GeodesicTrajectory {
    std::vector<BandlimitedVelocity> velocities; // num_time_steps + 1 entries
    std::vector<DisplacementField> inverse_maps; // phi^-1 - id after each step
    const DisplacementField& final_inverse_map() const { return inverse_maps.back(); }
    const BandlimitedVelocity& initial_velocity() const { return velocities.front(); }
    int num_time_steps() const { return static_cast<int>(velocities.size()) - 1; }
};

// Explicit Euler integration of the geodesic evolution equation together
// with semi-Lagrangian transport of the inverse map.
GeodesicTrajectory shoot_forward(const BandlimitedVelocity& v0, const ShootingConfig& cfg);

// One semi-Lagrangian composition step:
//   u'(x) = u(x - dt*w(x)) + (-dt*w(x)),  w = lift(v_step).
DisplacementField semi_lagrangian_step(const DisplacementField& u, const DisplacementField& w,
                                       double dt);

// Integrates the inverse map for the given per-step velocities (left
// endpoints), each over a time interval dt. Returns phi^-1 - id.
DisplacementField integrate_inverse_map(std::span<const BandlimitedVelocity> step_velocities,
                                        double dt);

// Transports a gradient at t=1 back to t=0 along the stored trajectory via
// the adjoint of the linearized Euler shooting steps.
BandlimitedVelocity backward_adjoint(const GeodesicTrajectory& traj,
                                     const BandlimitedVelocity& gradient_at_t1,
                                     const ShootingConfig& cfg);

// Exact reverse-mode derivative of the whole forward integration: given
// dE/d(final inverse map) as a dense field, returns dE/d(v0) in the real
// coefficient pairing. Walks the semi-Lagrangian steps backward, injecting
// each step's velocity sensitivity into the adjoint shooting recursion.
BandlimitedVelocity pullback_image_gradient(const GeodesicTrajectory& traj,
                                            const DisplacementField& d_final_map,
                                            const ShootingConfig& cfg);

} // namespace raptor
