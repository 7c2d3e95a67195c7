#include "raptor/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace raptor {

LabelMap::LabelMap(Dims dims) : dims_(dims) {
    if (dims[0] <= 0 || dims[1] <= 0 || dims[2] <= 0)
        throw StructuralError("label map dims must be positive");
    data_.assign(voxel_count(dims), 0);
}

LabelMap::LabelMap(Dims dims, Vec3 spacing, Vec3 origin, std::vector<std::int32_t> data)
    : LabelMap(dims) {
    spacing_ = spacing;
    origin_ = origin;
    if (data.size() != voxel_count(dims))
        throw StructuralError("label map data length does not match dims");
    for (std::int32_t v : data)
        if (v < 0) throw StructuralError("label map values must be non-negative");
    data_ = std::move(data);
}

std::size_t LabelMap::count(std::int32_t label) const {
    return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), label));
}

double dice(const LabelMap& a, const LabelMap& b, std::int32_t label) {
    if (a.dims() != b.dims()) throw StructuralError("dice: label map dims differ");
    std::size_t na = 0, nb = 0, overlap = 0;
    for (std::size_t n = 0; n < a.size(); ++n) {
        const bool in_a = a[n] == label;
        const bool in_b = b[n] == label;
        na += in_a;
        nb += in_b;
        overlap += in_a && in_b;
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * static_cast<double>(overlap) / static_cast<double>(na + nb);
}

LabelMap warp_labels(const LabelMap& m, const DisplacementField& d) {
    if (m.dims() != d.dims()) throw StructuralError("warp_labels: dims differ");
    const Dims dims = m.dims();
    LabelMap out(dims);
    out.set_spacing(m.spacing());
    out.set_origin(m.origin());
    const std::size_t plane = static_cast<std::size_t>(dims[0]) * dims[1];
    for (int k = 0; k < dims[2]; ++k)
        for (int j = 0; j < dims[1]; ++j)
            for (int i = 0; i < dims[0]; ++i) {
                const std::size_t n = i + dims[0] * j + plane * k;
                int q[3];
                const double p[3] = {i + d.component(0)[n], j + d.component(1)[n],
                                     k + d.component(2)[n]};
                for (int c = 0; c < 3; ++c)
                    q[c] = std::clamp(static_cast<int>(std::lround(p[c])), 0, dims[c] - 1);
                out[n] = m.at(q[0], q[1], q[2]);
            }
    return out;
}

Volume jacobian_determinant(const DisplacementField& d) {
    const Dims dims = d.dims();
    for (int a = 0; a < 3; ++a)
        if (dims[a] < 2) throw StructuralError("jacobian_determinant: axis dim < 2");

    // gradient of each displacement component, as volumes
    std::array<std::array<Volume, 3>, 3> g; // g[c][axis]
    for (int c = 0; c < 3; ++c) {
        Volume comp(dims);
        comp.data() = d.component(c);
        g[c] = spatial_gradient(comp);
    }

    Volume det(dims);
    det.set_spacing(d.spacing());
    det.set_origin(d.origin());
    for (std::size_t n = 0; n < det.size(); ++n) {
        double j[3][3];
        for (int c = 0; c < 3; ++c)
            for (int a = 0; a < 3; ++a) j[c][a] = (c == a ? 1.0 : 0.0) + g[c][a][n];
        det[n] = j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1]) -
                 j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0]) +
                 j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0]);
    }
    return det;
}

double JacobianHistogram::mass_within(double bound) const {
    if (total == 0) return 0.0;
    std::int64_t inside = 0;
    for (std::size_t i = 0; i < counts.size(); ++i)
        if (std::abs(center(i)) <= bound + 1e-12) inside += counts[i];
    return static_cast<double>(inside) / static_cast<double>(total);
}

JacobianHistogram jacobian_histogram(const DisplacementField& d, double bin_width) {
    if (!(bin_width > 0.0)) throw StructuralError("jacobian_histogram: bin width must be > 0");
    const Volume det = jacobian_determinant(d);

    JacobianHistogram h;
    h.bin_width = bin_width;
    h.total = static_cast<std::int64_t>(det.size());

    std::map<int, std::int64_t> bins;
    for (std::size_t n = 0; n < det.size(); ++n) {
        if (det[n] <= 0.0) {
            ++h.nonpositive;
            continue;
        }
        const int idx = static_cast<int>(std::lround(std::log10(det[n]) / bin_width));
        ++bins[idx];
    }
    if (bins.empty()) {
        h.min_index = 0;
        return h;
    }
    h.min_index = bins.begin()->first;
    const int max_index = bins.rbegin()->first;
    h.counts.assign(max_index - h.min_index + 1, 0);
    for (const auto& [idx, cnt] : bins) h.counts[idx - h.min_index] = cnt;
    return h;
}

} // namespace raptor
