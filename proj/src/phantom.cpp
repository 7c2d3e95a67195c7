#include "raptor/phantom.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace raptor {

namespace {

double smoothstep(double t) {
    t = std::clamp(t, 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

// Sum of a few random low-frequency cosines in [-1, 1], deterministic per seed.
struct SmoothTexture {
    struct Mode {
        double kx, ky, kz, phase;
    };
    std::vector<Mode> modes;

    SmoothTexture(const Dims& dims, std::uint32_t seed, int freq_min, int freq_max) {
        std::mt19937 rng(seed + 17u);
        std::uniform_int_distribution<int> freq(freq_min, freq_max);
        std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
        std::uniform_int_distribution<int> sign(0, 1);
        for (int m = 0; m < 8; ++m) {
            Mode mode;
            mode.kx = freq(rng) * (sign(rng) ? 1 : -1) * 2.0 * std::numbers::pi / dims[0];
            mode.ky = freq(rng) * (sign(rng) ? 1 : -1) * 2.0 * std::numbers::pi / dims[1];
            mode.kz = freq(rng) * (sign(rng) ? 1 : -1) * 2.0 * std::numbers::pi / dims[2];
            mode.phase = phase(rng);
            modes.push_back(mode);
        }
    }

    double operator()(int i, int j, int k) const {
        double acc = 0.0;
        for (const Mode& m : modes) acc += std::cos(m.kx * i + m.ky * j + m.kz * k + m.phase);
        return acc / static_cast<double>(modes.size());
    }
};

} // namespace

std::pair<Volume, LabelMap> make_phantom(PhantomKind kind, const Dims& dims,
                                         const PhantomParams& params) {
    for (int d = 0; d < 3; ++d)
        if (dims[d] < 8) throw StructuralError("phantom: dims must be >= 8 per axis");
    if (params.edge_width <= 0.0) throw StructuralError("phantom: edge_width must be > 0");
    if (params.period < 1) throw StructuralError("phantom: checker period must be >= 1");
    if (params.texture_freq_min < 1 || params.texture_freq_max < params.texture_freq_min)
        throw StructuralError("phantom: invalid texture frequency range");

    Volume vol(dims);
    LabelMap labels(dims);

    const double radius =
        params.radius >= 0.0 ? params.radius : std::min({dims[0], dims[1], dims[2]}) / 4.0;
    const Vec3 center{(dims[0] - 1) / 2.0, (dims[1] - 1) / 2.0, (dims[2] - 1) / 2.0};

    const SmoothTexture texture(dims, params.seed, params.texture_freq_min, params.texture_freq_max);
    std::mt19937 noise_rng(params.seed);
    std::normal_distribution<double> noise(0.0, params.noise_stddev);

    // satellite blobs: deterministic per seed; intensity-only, never labeled
    struct Blob {
        Vec3 pos;
        double radius;
        double intensity;
    };
    std::vector<Blob> blobs;
    {
        std::mt19937 rng(params.seed + 101u);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (int b = 0; b < params.num_satellites; ++b) {
            Blob blob;
            for (int d = 0; d < 3; ++d) blob.pos[d] = 4.0 + unit(rng) * (dims[d] - 9.0);
            blob.radius = 3.0 + 5.0 * unit(rng);
            blob.intensity = (0.4 + 0.6 * unit(rng)) * (unit(rng) < 0.5 ? -1.0 : 1.0);
            blobs.push_back(blob);
        }
    }

    for (int k = 0; k < dims[2]; ++k)
        for (int j = 0; j < dims[1]; ++j)
            for (int i = 0; i < dims[0]; ++i) {
                double value = params.background;
                std::int32_t label = 0;
                switch (kind) {
                    case PhantomKind::sphere: {
                        const double dx = i - center[0];
                        const double dy = j - center[1];
                        const double dz = k - center[2];
                        const double dist = std::sqrt(dx * dx + dy * dy + dz * dz);
                        const double t = (radius - dist) / params.edge_width + 0.5;
                        value = params.background +
                                (params.foreground - params.background) * smoothstep(t);
                        label = dist <= radius && radius > 0.0 ? 1 : 0;
                        break;
                    }
                    case PhantomKind::checker: {
                        const int stripe = (2 * i) / params.period;
                        const bool odd = stripe % 2 == 1;
                        value = odd ? params.foreground : params.background;
                        label = odd ? 1 : 0;
                        break;
                    }
                    case PhantomKind::ramp: {
                        value = params.background +
                                (params.foreground - params.background) *
                                    (dims[0] > 1 ? static_cast<double>(i) / (dims[0] - 1) : 0.0);
                        label = i >= dims[0] / 2 ? 1 : 0;
                        break;
                    }
                }
                for (const Blob& b : blobs) {
                    const double dx = i - b.pos[0];
                    const double dy = j - b.pos[1];
                    const double dz = k - b.pos[2];
                    const double dist = std::sqrt(dx * dx + dy * dy + dz * dz);
                    value += b.intensity *
                             smoothstep((b.radius - dist) / params.edge_width + 0.5);
                }
                if (params.texture_amplitude != 0.0)
                    value += params.texture_amplitude * texture(i, j, k);
                if (params.noise_stddev > 0.0) value += noise(noise_rng);
                vol.at(i, j, k) = value;
                labels.at(i, j, k) = label;
            }
    return {std::move(vol), std::move(labels)};
}

} // namespace raptor
