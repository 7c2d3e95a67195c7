#pragma once

#include <array>
#include <cstddef>
#include <utility>
#include <vector>

#include "raptor/errors.hpp"

namespace raptor {

using Dims = std::array<int, 3>;
using Vec3 = std::array<double, 3>;

inline std::size_t voxel_count(const Dims& d) {
    return static_cast<std::size_t>(d[0]) * static_cast<std::size_t>(d[1]) *
           static_cast<std::size_t>(d[2]);
}

// Dense 3D scalar grid. Data is stored x-fastest (NIfTI order):
// index(i,j,k) = i + dims[0]*(j + dims[1]*k).
class Volume {
public:
    Volume() = default;
    explicit Volume(Dims dims, double fill = 0.0);
    Volume(Dims dims, Vec3 spacing, Vec3 origin, std::vector<double> data);

    const Dims& dims() const { return dims_; }
    const Vec3& spacing() const { return spacing_; }
    const Vec3& origin() const { return origin_; }
    void set_spacing(const Vec3& s);
    void set_origin(const Vec3& o) { origin_ = o; }

    std::size_t size() const { return data_.size(); }
    std::size_t index(int i, int j, int k) const {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(dims_[0]) *
                   (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims_[1]) * static_cast<std::size_t>(k));
    }
    double& at(int i, int j, int k) { return data_[index(i, j, k)]; }
    double at(int i, int j, int k) const { return data_[index(i, j, k)]; }
    double& operator[](std::size_t n) { return data_[n]; }
    double operator[](std::size_t n) const { return data_[n]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    double min_value() const;
    double max_value() const;

private:
    Dims dims_{0, 0, 0};
    Vec3 spacing_{1.0, 1.0, 1.0};
    Vec3 origin_{0.0, 0.0, 0.0};
    std::vector<double> data_;
};

// Dense 3-vector grid holding voxel-unit displacements (or velocities).
// Identity transform corresponds to the all-zero field.
class DisplacementField {
public:
    DisplacementField() = default;
    explicit DisplacementField(Dims dims);
    DisplacementField(Dims dims, Vec3 spacing, Vec3 origin);

    const Dims& dims() const { return dims_; }
    const Vec3& spacing() const { return spacing_; }
    const Vec3& origin() const { return origin_; }
    void set_spacing(const Vec3& s) { spacing_ = s; }
    void set_origin(const Vec3& o) { origin_ = o; }

    std::size_t size() const { return comp_[0].size(); }
    std::size_t index(int i, int j, int k) const {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(dims_[0]) *
                   (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims_[1]) * static_cast<std::size_t>(k));
    }
    double& at(int c, int i, int j, int k) { return comp_[c][index(i, j, k)]; }
    double at(int c, int i, int j, int k) const { return comp_[c][index(i, j, k)]; }

    std::vector<double>& component(int c) { return comp_[c]; }
    const std::vector<double>& component(int c) const { return comp_[c]; }

    Vec3 vector_at(std::size_t n) const { return {comp_[0][n], comp_[1][n], comp_[2][n]}; }

    double max_abs() const;

private:
    Dims dims_{0, 0, 0};
    Vec3 spacing_{1.0, 1.0, 1.0};
    Vec3 origin_{0.0, 0.0, 0.0};
    std::array<std::vector<double>, 3> comp_;
};

// Corner/fraction decomposition of a sample point under the clamp-to-edge
// policy. `clamped[d]` marks coordinates that fell outside [0, dim-1]; the
// interpolant is constant (zero derivative) along those axes.
struct TrilinearSample {
    std::array<int, 3> lo;
    std::array<double, 3> frac;
    std::array<bool, 3> clamped;
};

TrilinearSample trilinear_sample(const Dims& dims, const Vec3& p);

// Trilinear interpolation with out-of-bounds coordinates clamped to the
// boundary. Total: never throws for finite p.
double interpolate(const Volume& v, const Vec3& p);

// Value and derivative of the trilinear interpolant with respect to p.
// The derivative is the in-cell slope; it is zero along clamped axes.
std::pair<double, Vec3> interpolate_with_gradient(const Volume& v, const Vec3& p);

// output(x) = interpolate(v, x + d(x)) for every voxel x.
Volume warp(const Volume& v, const DisplacementField& d);

// Central differences in the interior, one-sided at boundaries, voxel units.
std::array<Volume, 3> spatial_gradient(const Volume& v);

// Gaussian pre-smoothing (stddev 0.5*factor, truncated at 3 sigma) followed
// by subsampling at stride `factor`; spacing is multiplied by factor.
Volume downsample(const Volume& v, int factor);

// Trilinear upsampling of each component with magnitudes rescaled by the
// per-axis dimension ratio, so displacements stay in target voxel units.
DisplacementField upsample_displacement(const DisplacementField& d, const Dims& target_dims);

} // namespace raptor
