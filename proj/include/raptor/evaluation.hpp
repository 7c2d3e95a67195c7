#pragma once

#include <cstdint>
#include <vector>

#include "raptor/volume.hpp"

namespace raptor {

// Integer label grid; 0 is background.
class LabelMap {
public:
    LabelMap() = default;
    explicit LabelMap(Dims dims);
    LabelMap(Dims dims, Vec3 spacing, Vec3 origin, std::vector<std::int32_t> data);

    const Dims& dims() const { return dims_; }
    const Vec3& spacing() const { return spacing_; }
    const Vec3& origin() const { return origin_; }
    void set_spacing(const Vec3& s) { spacing_ = s; }
    void set_origin(const Vec3& o) { origin_ = o; }

    std::size_t size() const { return data_.size(); }
    std::size_t index(int i, int j, int k) const {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(dims_[0]) *
                   (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims_[1]) * static_cast<std::size_t>(k));
    }
    std::int32_t& at(int i, int j, int k) { return data_[index(i, j, k)]; }
    std::int32_t at(int i, int j, int k) const { return data_[index(i, j, k)]; }
    std::int32_t& operator[](std::size_t n) { return data_[n]; }
    std::int32_t operator[](std::size_t n) const { return data_[n]; }
    std::vector<std::int32_t>& data() { return data_; }
    const std::vector<std::int32_t>& data() const { return data_; }

    std::size_t count(std::int32_t label) const;

private:
    Dims dims_{0, 0, 0};
    Vec3 spacing_{1.0, 1.0, 1.0};
    Vec3 origin_{0.0, 0.0, 0.0};
    std::vector<std::int32_t> data_;
};

// 2|A n B| / (|A| + |B|); 1 when both label sets are empty.
double dice(const LabelMap& a, const LabelMap& b, std::int32_t label);

// Nearest-neighbour resampling through the displacement (labels not blended).
LabelMap warp_labels(const LabelMap& m, const DisplacementField& d);

// det(I + grad d) per voxel; central differences, one-sided at boundaries.
Volume jacobian_determinant(const DisplacementField& d);

struct JacobianHistogram {
    double bin_width = 0.05;
    // bin i covers [center - w/2, center + w/2) with center = (min_index + i)*w
    int min_index = 0;
    std::vector<std::int64_t> counts;
    std::int64_t nonpositive = 0; // det <= 0: folding, reported separately
    std::int64_t total = 0;

    double center(std::size_t i) const { return (min_index + static_cast<int>(i)) * bin_width; }
    // voxel fraction with |log10 det J| <= bound (nonpositive excluded)
    double mass_within(double bound) const;
};

// Histogram of log10(det J) with the central bin centered at zero.
JacobianHistogram jacobian_histogram(const DisplacementField& d, double bin_width);

} // namespace raptor
