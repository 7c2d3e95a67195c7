#pragma once

#include <memory>
#include <vector>

#include "raptor/geodesic.hpp"
#include "raptor/metric.hpp"

namespace raptor {

enum class MetricKind { raptor, ssd };

struct RegistrationConfig {
    double alpha = 3.0;
    int c = 3;
    double sigma = 1.0; // SSD only
    MetricKind metric = MetricKind::raptor;
    RaptorConfig raptor;
    Dims trunc_dims{16, 16, 16};
    int num_time_steps = 10;
    std::vector<int> pyramid_levels{4, 2, 1}; // downsample factors, coarse to fine
    std::vector<int> max_iterations{100, 100, 50};
    double step_size = 0.05;
    double momentum = 0.9;                 // in [0, 1)
    double convergence_tolerance = 1e-5;   // relative energy decrease over 5 iterations
    double regularizer_weight = 1.0;       // scales <L v0, v0> over the coefficient table

    void validate() const;
    int iterations_for_level(std::size_t level) const;
};

struct EnergyBreakdown {
    double total = 0.0;
    double data = 0.0;
    double reg = 0.0;
};

struct EnergyRecord {
    int level = 0;
    int iteration = 0;
    double data = 0.0;
    double reg = 0.0;
    double total = 0.0;
};

struct RegistrationResult {
    BandlimitedVelocity v0;        // at the finest pyramid level
    DisplacementField inverse_map; // phi^-1 - id on the fixed grid
    Volume warped;                 // moving image resampled by inverse_map
    std::vector<EnergyRecord> energy_trace;
    bool converged = false;
};

// Total cost: metric(warp(y, phi^-1(v0)), x) + w * sum_k L(k) |v0(k)|^2.
EnergyBreakdown energy(const BandlimitedVelocity& v0, const Volume& x, const Volume& y,
                       const RegistrationConfig& cfg);

// Gradient of the total energy with respect to v0, expressed in the metric
// inner product: inner_product_v(gradient, delta, op) equals the directional
// derivative of energy() along any symmetric perturbation delta. The data
// term is the smoothed (K-multiplied) exact coefficient adjoint transported
// back from t=1; the regularizer contributes 2 * w * v0.
BandlimitedVelocity energy_gradient(const BandlimitedVelocity& v0, const Volume& x, const Volume& y,
                                    const RegistrationConfig& cfg);

// Momentum gradient descent over the multi-resolution pyramid.
RegistrationResult minimize(const Volume& x, const Volume& y, const RegistrationConfig& cfg);

// Carries coefficients to a grid of different dims, rescaling so the induced
// dense displacement is consistent in voxel units of the new grid.
BandlimitedVelocity transfer_velocity(const BandlimitedVelocity& v, const Dims& new_full_dims,
                                      const Dims& trunc_dims);

std::unique_ptr<DissimilarityMetric> make_metric(const RegistrationConfig& cfg, const Volume& x_level,
                                                 const Volume& y_level);

} // namespace raptor
