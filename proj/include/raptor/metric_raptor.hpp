#pragma once

#include <optional>
#include <span>
#include <vector>

#include "raptor/volume.hpp"

namespace raptor {

struct RaptorConfig {
    int num_bins = 32;
    int patch_size = 9;   // voxels per side, cubic patches
    int patch_stride = 6; // overlapping tiling
    // Patch rejection threshold, relative to the squared intensity range of
    // the volume the variance is measured on.
    double min_variance = 1e-6;

    void validate() const;
};

// Reference-intensity normalization used for bin placement; computed once
// per volume (per pyramid level in the optimizer).
struct BinRange {
    double lo = 0.0;
    double hi = 1.0;
    bool degenerate() const { return !(hi > lo); }
};

BinRange volume_range(const Volume& v);

// Per-patch histogram quantities behind the correlation ratio. Each sample
// contributes linearly to its two nearest bins (triangular Parzen window).
struct PatchHistogramState {
    std::vector<double> bin_mass;     // N_j = sum_i lambda_ij
    std::vector<double> bin_mean;     // mu_j, zero where N_j == 0
    std::vector<int> lambda_bin;      // lower bin index per sample
    std::vector<double> lambda_lo;    // weight on lambda_bin (upper gets 1 - w)
    double mean = 0.0;                // patch mean of y
    double variance = 0.0;            // biased patch variance of y
    double sum_squares = 0.0;         // sum y_i^2
    double weighted_square_sum = 0.0; // sum_j N_j mu_j^2
};

struct PatchCr {
    double value = 0.0; // 1 - eta(Y|X) for this patch
    PatchHistogramState state;
};

// Correlation-ratio complement on one patch. Bins are placed uniformly over
// `x_range`; the patch is rejected (nullopt) when the y variance falls below
// `y_var_threshold` or the x samples are degenerate below `x_var_threshold`.
std::optional<PatchCr> patch_cr(std::span<const double> x_samples, std::span<const double> y_samples,
                                const RaptorConfig& cfg, const BinRange& x_range,
                                double y_var_threshold, double x_var_threshold);

// Convenience overload: ranges/thresholds derived from the given samples.
std::optional<PatchCr> patch_cr(std::span<const double> x_samples, std::span<const double> y_samples,
                                const RaptorConfig& cfg);

// Analytic derivative of patch_cr().value with respect to one y sample.
// Exposed for the finite-difference oracle.
double patch_cr_derivative(const PatchCr& patch, std::size_t sample, double y_sample);

// Mean of 1 - eta over all accepted patches (stride tiling, tail-aligned).
// Throws MetricUndefinedError when no patch is accepted.
double raptor_total(const Volume& x, const Volume& y, const RaptorConfig& cfg);

// Per-voxel derivative of raptor_total with respect to y; overlapping patch
// contributions accumulate and are divided by the accepted patch count.
Volume raptor_gradient(const Volume& x, const Volume& y_warped, const RaptorConfig& cfg);

// One-pass evaluation used by the optimizer.
std::pair<double, Volume> raptor_value_and_gradient(const Volume& x, const Volume& y_warped,
                                                    const RaptorConfig& cfg);

// Variants with externally fixed normalization (one computation per pyramid
// level keeps bin placement stable while the warped image evolves).
double raptor_total(const Volume& x, const Volume& y, const RaptorConfig& cfg,
                    const BinRange& x_range, double y_var_threshold, double x_var_threshold);
std::pair<double, Volume> raptor_value_and_gradient(const Volume& x, const Volume& y_warped,
                                                    const RaptorConfig& cfg, const BinRange& x_range,
                                                    double y_var_threshold, double x_var_threshold);

} // namespace raptor
