#pragma once

#include <cstdint>
#include <utility>

#include "raptor/evaluation.hpp"
#include "raptor/volume.hpp"

namespace raptor {

enum class PhantomKind { sphere, checker, ramp };

struct PhantomParams {
    // sphere
    double radius = -1.0;     // default: min(dims)/4
    double edge_width = 2.0;  // smoothstep transition, voxels
    int num_satellites = 0;   // extra unlabeled blobs scattered around the sphere
    // checker: full square-wave period along x, voxels
    int period = 16;
    // shared
    double foreground = 1.0;
    double background = 0.0;
    double texture_amplitude = 0.0; // smooth low-frequency modulation
    int texture_freq_min = 2;       // texture mode frequency range, cycles per axis
    int texture_freq_max = 6;
    double noise_stddev = 0.0;      // iid gaussian, seeded
    std::uint32_t seed = 0;
};

// Deterministic synthetic volume plus matching label map (sphere interior
// gets label 1; checker stripes get their parity; ramp labels the upper
// half along x).
std::pair<Volume, LabelMap> make_phantom(PhantomKind kind, const Dims& dims,
                                         const PhantomParams& params = {});

} // namespace raptor
