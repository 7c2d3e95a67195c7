#include "raptor/volume.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "raptor/parallel.hpp"

namespace raptor {

namespace {

void check_dims(const Dims& d) {
    if (d[0] <= 0 || d[1] <= 0 || d[2] <= 0)
        throw StructuralError("volume dims must be positive, got " + std::to_string(d[0]) + "x" +
                              std::to_string(d[1]) + "x" + std::to_string(d[2]));
}

void check_spacing(const Vec3& s) {
    for (double v : s)
        if (!(v > 0.0)) throw StructuralError("voxel spacing must be strictly positive");
}

} // namespace

Volume::Volume(Dims dims, double fill) : dims_(dims) {
    check_dims(dims);
    data_.assign(voxel_count(dims), fill);
}

Volume::Volume(Dims dims, Vec3 spacing, Vec3 origin, std::vector<double> data)
    : dims_(dims), spacing_(spacing), origin_(origin), data_(std::move(data)) {
    check_dims(dims);
    check_spacing(spacing);
    if (data_.size() != voxel_count(dims))
        throw StructuralError("volume data length " + std::to_string(data_.size()) +
                              " does not match dims product " + std::to_string(voxel_count(dims)));
    for (double v : data_)
        if (!std::isfinite(v)) throw StructuralError("volume data contains non-finite values");
}

void Volume::set_spacing(const Vec3& s) {
    check_spacing(s);
    spacing_ = s;
}

double Volume::min_value() const {
    return *std::min_element(data_.begin(), data_.end());
}

double Volume::max_value() const {
    return *std::max_element(data_.begin(), data_.end());
}

DisplacementField::DisplacementField(Dims dims) : dims_(dims) {
    check_dims(dims);
    for (auto& c : comp_) c.assign(voxel_count(dims), 0.0);
}

DisplacementField::DisplacementField(Dims dims, Vec3 spacing, Vec3 origin)
    : DisplacementField(dims) {
    check_spacing(spacing);
    spacing_ = spacing;
    origin_ = origin;
}

double DisplacementField::max_abs() const {
    double m = 0.0;
    for (const auto& c : comp_)
        for (double v : c) m = std::max(m, std::abs(v));
    return m;
}

TrilinearSample trilinear_sample(const Dims& dims, const Vec3& p) {
    TrilinearSample s;
    for (int d = 0; d < 3; ++d) {
        const double hi = static_cast<double>(dims[d] - 1);
        double pc = p[d];
        s.clamped[d] = (pc < 0.0 || pc > hi);
        pc = std::clamp(pc, 0.0, hi);
        if (dims[d] == 1) {
            s.lo[d] = 0;
            s.frac[d] = 0.0;
            s.clamped[d] = true;
            continue;
        }
        int lo = static_cast<int>(std::floor(pc));
        lo = std::min(lo, dims[d] - 2);
        s.lo[d] = lo;
        s.frac[d] = pc - static_cast<double>(lo);
    }
    return s;
}

double interpolate(const Volume& v, const Vec3& p) {
    const TrilinearSample s = trilinear_sample(v.dims(), p);
    const auto& dims = v.dims();
    double acc = 0.0;
    for (int dz = 0; dz < 2; ++dz) {
        const double wz = dz ? s.frac[2] : 1.0 - s.frac[2];
        if (wz == 0.0) continue;
        const int k = std::min(s.lo[2] + dz, dims[2] - 1);
        for (int dy = 0; dy < 2; ++dy) {
            const double wy = dy ? s.frac[1] : 1.0 - s.frac[1];
            if (wy == 0.0) continue;
            const int j = std::min(s.lo[1] + dy, dims[1] - 1);
            for (int dx = 0; dx < 2; ++dx) {
                const double wx = dx ? s.frac[0] : 1.0 - s.frac[0];
                if (wx == 0.0) continue;
                const int i = std::min(s.lo[0] + dx, dims[0] - 1);
                acc += wx * wy * wz * v.at(i, j, k);
            }
        }
    }
    return acc;
}

std::pair<double, Vec3> interpolate_with_gradient(const Volume& v, const Vec3& p) {
    const TrilinearSample s = trilinear_sample(v.dims(), p);
    const auto& dims = v.dims();
    // corner values c[dx][dy][dz]
    double c[2][2][2];
    for (int dx = 0; dx < 2; ++dx)
        for (int dy = 0; dy < 2; ++dy)
            for (int dz = 0; dz < 2; ++dz) {
                const int i = std::min(s.lo[0] + dx, dims[0] - 1);
                const int j = std::min(s.lo[1] + dy, dims[1] - 1);
                const int k = std::min(s.lo[2] + dz, dims[2] - 1);
                c[dx][dy][dz] = v.at(i, j, k);
            }
    const double fx = s.frac[0], fy = s.frac[1], fz = s.frac[2];
    const double wx[2] = {1.0 - fx, fx};
    const double wy[2] = {1.0 - fy, fy};
    const double wz[2] = {1.0 - fz, fz};

    double value = 0.0;
    Vec3 grad{0.0, 0.0, 0.0};
    for (int dx = 0; dx < 2; ++dx)
        for (int dy = 0; dy < 2; ++dy)
            for (int dz = 0; dz < 2; ++dz) {
                const double cv = c[dx][dy][dz];
                value += wx[dx] * wy[dy] * wz[dz] * cv;
                grad[0] += (dx ? 1.0 : -1.0) * wy[dy] * wz[dz] * cv;
                grad[1] += (dy ? 1.0 : -1.0) * wx[dx] * wz[dz] * cv;
                grad[2] += (dz ? 1.0 : -1.0) * wx[dx] * wy[dy] * cv;
            }
    for (int d = 0; d < 3; ++d)
        if (s.clamped[d]) grad[d] = 0.0;
    return {value, grad};
}

Volume warp(const Volume& v, const DisplacementField& d) {
    if (v.dims() != d.dims())
        throw StructuralError("warp: volume and displacement dims differ");
    const auto& dims = v.dims();
    Volume out(dims);
    out.set_spacing(v.spacing());
    out.set_origin(v.origin());
    const std::size_t plane = static_cast<std::size_t>(dims[0]) * dims[1];
    par::parallel_for(static_cast<std::size_t>(dims[2]), [&](std::size_t kb, std::size_t ke) {
        for (std::size_t k = kb; k < ke; ++k)
            for (int j = 0; j < dims[1]; ++j)
                for (int i = 0; i < dims[0]; ++i) {
                    const std::size_t n = i + dims[0] * j + plane * k;
                    const Vec3 p{static_cast<double>(i) + d.component(0)[n],
                                 static_cast<double>(j) + d.component(1)[n],
                                 static_cast<double>(k) + d.component(2)[n]};
                    out[n] = interpolate(v, p);
                }
    });
    return out;
}

std::array<Volume, 3> spatial_gradient(const Volume& v) {
    const auto& dims = v.dims();
    for (int d = 0; d < 3; ++d)
        if (dims[d] < 2)
            throw StructuralError("spatial_gradient: axis " + std::to_string(d) + " has dim < 2");
    std::array<Volume, 3> g{Volume(dims), Volume(dims), Volume(dims)};
    for (auto& gv : g) {
        gv.set_spacing(v.spacing());
        gv.set_origin(v.origin());
    }
    auto diff = [&](int axis, int i, int j, int k) {
        int idx[3] = {i, j, k};
        const int n = dims[axis];
        const int c = idx[axis];
        int a = c - 1, b = c + 1;
        double scale = 0.5;
        if (c == 0) {
            a = 0;
            b = 1;
            scale = 1.0;
        } else if (c == n - 1) {
            a = n - 2;
            b = n - 1;
            scale = 1.0;
        }
        int ia[3] = {idx[0], idx[1], idx[2]};
        int ib[3] = {idx[0], idx[1], idx[2]};
        ia[axis] = a;
        ib[axis] = b;
        return scale * (v.at(ib[0], ib[1], ib[2]) - v.at(ia[0], ia[1], ia[2]));
    };
    par::parallel_for(static_cast<std::size_t>(dims[2]), [&](std::size_t kb, std::size_t ke) {
        for (std::size_t k = kb; k < ke; ++k)
            for (int j = 0; j < dims[1]; ++j)
                for (int i = 0; i < dims[0]; ++i)
                    for (int axis = 0; axis < 3; ++axis)
                        g[axis].at(i, j, static_cast<int>(k)) = diff(axis, i, j, static_cast<int>(k));
    });
    return g;
}

namespace {

// Separable Gaussian pass along one axis, clamp-to-edge sampling.
Volume gaussian_axis(const Volume& v, int axis, const std::vector<double>& kernel) {
    const auto& dims = v.dims();
    Volume out(dims);
    out.set_spacing(v.spacing());
    out.set_origin(v.origin());
    const int r = static_cast<int>(kernel.size() / 2);
    for (int k = 0; k < dims[2]; ++k)
        for (int j = 0; j < dims[1]; ++j)
            for (int i = 0; i < dims[0]; ++i) {
                double acc = 0.0;
                for (int t = -r; t <= r; ++t) {
                    int q[3] = {i, j, k};
                    q[axis] = std::clamp(q[axis] + t, 0, dims[axis] - 1);
                    acc += kernel[t + r] * v.at(q[0], q[1], q[2]);
                }
                out.at(i, j, k) = acc;
            }
    return out;
}

} // namespace

Volume downsample(const Volume& v, int factor) {
    if (factor < 1) throw StructuralError("downsample: factor must be >= 1");
    const auto& dims = v.dims();
    for (int d = 0; d < 3; ++d)
        if (factor > dims[d])
            throw StructuralError("downsample: factor " + std::to_string(factor) +
                                  " exceeds axis dim " + std::to_string(dims[d]));

    const double sigma = 0.5 * factor;
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    double norm = 0.0;
    for (int t = -radius; t <= radius; ++t) {
        kernel[t + radius] = std::exp(-0.5 * (t / sigma) * (t / sigma));
        norm += kernel[t + radius];
    }
    for (double& w : kernel) w /= norm;

    Volume smooth = v;
    for (int axis = 0; axis < 3; ++axis) smooth = gaussian_axis(smooth, axis, kernel);

    Dims out_dims{(dims[0] - 1) / factor + 1, (dims[1] - 1) / factor + 1, (dims[2] - 1) / factor + 1};
    Volume out(out_dims);
    out.set_spacing({v.spacing()[0] * factor, v.spacing()[1] * factor, v.spacing()[2] * factor});
    out.set_origin(v.origin());
    for (int k = 0; k < out_dims[2]; ++k)
        for (int j = 0; j < out_dims[1]; ++j)
            for (int i = 0; i < out_dims[0]; ++i)
                out.at(i, j, k) = smooth.at(i * factor, j * factor, k * factor);
    return out;
}

DisplacementField upsample_displacement(const DisplacementField& d, const Dims& target_dims) {
    const auto& src = d.dims();
    for (int a = 0; a < 3; ++a)
        if (target_dims[a] < src[a])
            throw StructuralError("upsample_displacement: target dims must be >= source dims");

    DisplacementField out(target_dims);
    out.set_origin(d.origin());
    Vec3 sp = d.spacing();
    Vec3 ratio;
    for (int a = 0; a < 3; ++a) {
        ratio[a] = static_cast<double>(target_dims[a]) / static_cast<double>(src[a]);
        sp[a] = sp[a] * static_cast<double>(src[a]) / static_cast<double>(target_dims[a]);
    }
    out.set_spacing(sp);

    // Reuse the scalar interpolator per component.
    std::array<Volume, 3> comps;
    for (int c = 0; c < 3; ++c)
        comps[c] = Volume(src, d.spacing(), d.origin(), d.component(c));

    const std::size_t plane = static_cast<std::size_t>(target_dims[0]) * target_dims[1];
    par::parallel_for(static_cast<std::size_t>(target_dims[2]), [&](std::size_t kb, std::size_t ke) {
        for (std::size_t k = kb; k < ke; ++k)
            for (int j = 0; j < target_dims[1]; ++j)
                for (int i = 0; i < target_dims[0]; ++i) {
                    const Vec3 p{i / ratio[0], j / ratio[1], k / ratio[2]};
                    const std::size_t n = i + target_dims[0] * j + plane * k;
                    for (int c = 0; c < 3; ++c)
                        out.component(c)[n] = ratio[c] * interpolate(comps[c], p);
                }
    });
    return out;
}

} // namespace raptor
