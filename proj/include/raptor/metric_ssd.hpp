#pragma once

#include "raptor/volume.hpp"

namespace raptor {

struct SsdConfig {
    double sigma = 1.0; // noise scale; larger values down-weight the data term
};

// (1 / 2 sigma^2) * sum_voxels (y_warped - x)^2
double ssd_value(const Volume& x, const Volume& y_warped, const SsdConfig& cfg);

// Per-voxel derivative of ssd_value with respect to the warped intensities:
// (1 / sigma^2) * (y_warped - x)
Volume ssd_gradient(const Volume& x, const Volume& y_warped, const SsdConfig& cfg);

} // namespace raptor
