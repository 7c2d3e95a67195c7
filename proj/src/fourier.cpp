#include "raptor/fourier.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <string>

namespace raptor {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// FFTW plans are cached per grid size; plan creation is not thread safe, so
// it is guarded. Execution via fftw_execute_dft on caller buffers is safe.
class PlanCache {
public:
    static PlanCache& instance() {
        static PlanCache cache;
        return cache;
    }

    fftw_plan get(const Dims& dims, bool forward) {
        std::lock_guard<std::mutex> lock(mutex_);
        const std::array<int, 4> key{dims[0], dims[1], dims[2], forward ? 1 : 0};
        auto it = plans_.find(key);
        if (it != plans_.end()) return it->second;
        // FFTW uses row-major order with the last listed dimension contiguous;
        // our x axis is the fastest, so it is listed last.
        std::vector<Complex> dummy(voxel_count(dims));
        fftw_plan p = fftw_plan_dft_3d(dims[2], dims[1], dims[0],
                                       reinterpret_cast<fftw_complex*>(dummy.data()),
                                       reinterpret_cast<fftw_complex*>(dummy.data()),
                                       forward ? FFTW_FORWARD : FFTW_BACKWARD,
                                       FFTW_ESTIMATE | FFTW_UNALIGNED);
        plans_.emplace(key, p);
        return p;
    }

private:
    PlanCache() = default;
    std::mutex mutex_;
    std::map<std::array<int, 4>, fftw_plan> plans_;
};

} // namespace

namespace detail {

void fft3(const Dims& dims, std::vector<Complex>& data, bool forward) {
    fftw_plan p = PlanCache::instance().get(dims, forward);
    fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(data.data()),
                     reinterpret_cast<fftw_complex*>(data.data()));
}

} // namespace detail

BandShape make_band_shape(const Dims& full_dims, const Dims& trunc_dims) {
    for (int d = 0; d < 3; ++d) {
        if (full_dims[d] <= 0 || trunc_dims[d] <= 0)
            throw StructuralError("band shape: dims must be positive");
        if (trunc_dims[d] > full_dims[d])
            throw StructuralError("band shape: trunc_dims must be <= full_dims");
    }
    BandShape s;
    s.full_dims = full_dims;
    for (int d = 0; d < 3; ++d)
        s.halfwidth[d] = std::min((trunc_dims[d] - 1) / 2, (full_dims[d] - 1) / 2);
    return s;
}

BandlimitedVelocity::BandlimitedVelocity(BandShape shape) : shape_(shape) {
    c_.assign(3 * shape_.table_size(), Complex(0.0, 0.0));
}

std::size_t BandlimitedVelocity::index(int comp, int kx, int ky, int kz) const {
    const Dims m = shape_.table_dims();
    const std::size_t ix = static_cast<std::size_t>(kx + shape_.halfwidth[0]);
    const std::size_t iy = static_cast<std::size_t>(ky + shape_.halfwidth[1]);
    const std::size_t iz = static_cast<std::size_t>(kz + shape_.halfwidth[2]);
    return (static_cast<std::size_t>(comp) * m[2] + iz) * (static_cast<std::size_t>(m[1]) * m[0]) +
           iy * m[0] + ix;
}

std::span<const Complex> BandlimitedVelocity::component(int comp) const {
    return {c_.data() + static_cast<std::size_t>(comp) * component_size(), component_size()};
}

std::span<Complex> BandlimitedVelocity::component(int comp) {
    return {c_.data() + static_cast<std::size_t>(comp) * component_size(), component_size()};
}

double BandlimitedVelocity::max_hermitian_violation() const {
    double worst = 0.0;
    const auto& h = shape_.halfwidth;
    for (int comp = 0; comp < 3; ++comp)
        for (int kz = -h[2]; kz <= h[2]; ++kz)
            for (int ky = -h[1]; ky <= h[1]; ++ky)
                for (int kx = -h[0]; kx <= h[0]; ++kx) {
                    const Complex a = at(comp, kx, ky, kz);
                    const Complex b = std::conj(at(comp, -kx, -ky, -kz));
                    worst = std::max(worst, std::abs(a - b));
                }
    return worst;
}

void BandlimitedVelocity::hermitian_project() {
    const auto& h = shape_.halfwidth;
    for (int comp = 0; comp < 3; ++comp)
        for (int kz = -h[2]; kz <= h[2]; ++kz)
            for (int ky = -h[1]; ky <= h[1]; ++ky)
                for (int kx = -h[0]; kx <= h[0]; ++kx) {
                    if (kz < 0 || (kz == 0 && (ky < 0 || (ky == 0 && kx < 0)))) continue;
                    Complex& a = at(comp, kx, ky, kz);
                    Complex& b = at(comp, -kx, -ky, -kz);
                    const Complex avg = 0.5 * (a + std::conj(b));
                    a = avg;
                    b = std::conj(avg);
                }
}

bool BandlimitedVelocity::all_finite() const {
    for (const Complex& z : c_)
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    return true;
}

double BandlimitedVelocity::max_abs() const {
    double m = 0.0;
    for (const Complex& z : c_) m = std::max(m, std::abs(z));
    return m;
}

void BandlimitedVelocity::scale(double s) {
    for (Complex& z : c_) z *= s;
}

void BandlimitedVelocity::axpy(double a, const BandlimitedVelocity& x) {
    if (!(shape_ == x.shape_)) throw StructuralError("axpy: band shapes differ");
    for (std::size_t n = 0; n < c_.size(); ++n) c_[n] += a * x.c_[n];
}

void BandlimitedVelocity::fill_zero() {
    std::fill(c_.begin(), c_.end(), Complex(0.0, 0.0));
}

double FourierOperator::symbol(double alpha, int c, const std::array<int, 3>& k,
                               const Dims& full_dims) {
    double lap = 0.0;
    for (int d = 0; d < 3; ++d)
        lap += 2.0 * (1.0 - std::cos(kTwoPi * k[d] / full_dims[d]));
    return std::pow(alpha * lap + 1.0, c);
}

FourierOperator::FourierOperator(double alpha, int c, const Dims& trunc_dims, const Dims& full_dims)
    : shape_(make_band_shape(full_dims, trunc_dims)), alpha_(alpha), order_(c) {
    if (!(alpha > 0.0)) throw StructuralError("operator: alpha must be > 0");
    if (c < 1) throw StructuralError("operator: power c must be >= 1");
    l_.resize(shape_.table_size());
    k_.resize(shape_.table_size());
    const auto& h = shape_.halfwidth;
    for (int kz = -h[2]; kz <= h[2]; ++kz)
        for (int ky = -h[1]; ky <= h[1]; ++ky)
            for (int kx = -h[0]; kx <= h[0]; ++kx) {
                const double m = symbol(alpha, c, {kx, ky, kz}, full_dims);
                l_[flat(kx, ky, kz)] = m;
                k_[flat(kx, ky, kz)] = 1.0 / m;
            }
}

std::size_t FourierOperator::flat(int kx, int ky, int kz) const {
    const Dims m = shape_.table_dims();
    return (static_cast<std::size_t>(kz + shape_.halfwidth[2]) * m[1] +
            static_cast<std::size_t>(ky + shape_.halfwidth[1])) *
               m[0] +
           static_cast<std::size_t>(kx + shape_.halfwidth[0]);
}

BandlimitedVelocity FourierOperator::apply_l(const BandlimitedVelocity& v) const {
    if (!(v.shape() == shape_)) throw StructuralError("apply_l: band shapes differ");
    BandlimitedVelocity out = v;
    const std::size_t ts = shape_.table_size();
    for (int comp = 0; comp < 3; ++comp) {
        auto span = out.component(comp);
        for (std::size_t n = 0; n < ts; ++n) span[n] *= l_[n];
    }
    return out;
}

BandlimitedVelocity FourierOperator::apply_k(const BandlimitedVelocity& v) const {
    if (!(v.shape() == shape_)) throw StructuralError("apply_k: band shapes differ");
    BandlimitedVelocity out = v;
    const std::size_t ts = shape_.table_size();
    for (int comp = 0; comp < 3; ++comp) {
        auto span = out.component(comp);
        for (std::size_t n = 0; n < ts; ++n) span[n] *= k_[n];
    }
    return out;
}

Complex derivative_symbol(const BandShape& shape, int axis, int k) {
    return Complex(0.0, std::sin(kTwoPi * k / shape.full_dims[axis]));
}

namespace {

// Scatter a band table into the zero-frequency-first layout of a grid of
// size `dims` (frequency k lands in bin (k + dims) % dims).
void scatter_band(const BandShape& shape, const std::span<const Complex> table, const Dims& dims,
                  std::vector<Complex>& out) {
    out.assign(voxel_count(dims), Complex(0.0, 0.0));
    const auto& h = shape.halfwidth;
    const Dims m = shape.table_dims();
    for (int kz = -h[2]; kz <= h[2]; ++kz) {
        const int bz = (kz + dims[2]) % dims[2];
        for (int ky = -h[1]; ky <= h[1]; ++ky) {
            const int by = (ky + dims[1]) % dims[1];
            for (int kx = -h[0]; kx <= h[0]; ++kx) {
                const int bx = (kx + dims[0]) % dims[0];
                const std::size_t src =
                    (static_cast<std::size_t>(kz + h[2]) * m[1] + static_cast<std::size_t>(ky + h[1])) * m[0] +
                    static_cast<std::size_t>(kx + h[0]);
                out[(static_cast<std::size_t>(bz) * dims[1] + by) * dims[0] + bx] = table[src];
            }
        }
    }
}

void gather_band(const BandShape& shape, const std::vector<Complex>& grid, const Dims& dims,
                 std::span<Complex> table, double scale) {
    const auto& h = shape.halfwidth;
    const Dims m = shape.table_dims();
    for (int kz = -h[2]; kz <= h[2]; ++kz) {
        const int bz = (kz + dims[2]) % dims[2];
        for (int ky = -h[1]; ky <= h[1]; ++ky) {
            const int by = (ky + dims[1]) % dims[1];
            for (int kx = -h[0]; kx <= h[0]; ++kx) {
                const int bx = (kx + dims[0]) % dims[0];
                const std::size_t dst =
                    (static_cast<std::size_t>(kz + h[2]) * m[1] + static_cast<std::size_t>(ky + h[1])) * m[0] +
                    static_cast<std::size_t>(kx + h[0]);
                table[dst] = scale * grid[(static_cast<std::size_t>(bz) * dims[1] + by) * dims[0] + bx];
            }
        }
    }
}

} // namespace

BandlimitedVelocity project(const DisplacementField& field, const Dims& trunc_dims) {
    const BandShape shape = make_band_shape(field.dims(), trunc_dims);
    BandlimitedVelocity out(shape);
    std::vector<Complex> work(shape.dense_size());
    for (int comp = 0; comp < 3; ++comp) {
        const auto& src = field.component(comp);
        for (std::size_t n = 0; n < src.size(); ++n) work[n] = Complex(src[n], 0.0);
        detail::fft3(field.dims(), work, /*forward=*/true);
        gather_band(shape, work, field.dims(), out.component(comp), 1.0);
    }
    out.hermitian_project();
    return out;
}

DisplacementField lift(const BandlimitedVelocity& v) {
    const BandShape& shape = v.shape();
    const double viol = v.max_hermitian_violation();
    const double tol = 1e-8 * std::max(1.0, v.max_abs());
    if (viol > tol)
        throw NumericalError("lift: Hermitian symmetry violated by " + std::to_string(viol));

    DisplacementField out(shape.full_dims);
    const double inv_n = 1.0 / static_cast<double>(shape.dense_size());
    std::vector<Complex> work;
    for (int comp = 0; comp < 3; ++comp) {
        scatter_band(shape, v.component(comp), shape.full_dims, work);
        detail::fft3(shape.full_dims, work, /*forward=*/false);
        auto& dst = out.component(comp);
        for (std::size_t n = 0; n < dst.size(); ++n) dst[n] = work[n].real() * inv_n;
    }
    return out;
}

std::array<BandlimitedVelocity, 3> fourier_jacobian(const BandlimitedVelocity& v) {
    const BandShape& shape = v.shape();
    std::array<BandlimitedVelocity, 3> jac{BandlimitedVelocity(shape), BandlimitedVelocity(shape),
                                           BandlimitedVelocity(shape)};
    const auto& h = shape.halfwidth;
    for (int axis = 0; axis < 3; ++axis) {
        for (int comp = 0; comp < 3; ++comp)
            for (int kz = -h[2]; kz <= h[2]; ++kz)
                for (int ky = -h[1]; ky <= h[1]; ++ky)
                    for (int kx = -h[0]; kx <= h[0]; ++kx) {
                        const int k = axis == 0 ? kx : (axis == 1 ? ky : kz);
                        jac[axis].at(comp, kx, ky, kz) =
                            derivative_symbol(shape, axis, k) * v.at(comp, kx, ky, kz);
                    }
    }
    return jac;
}

BandProduct::BandProduct(const BandShape& shape) : shape_(shape) {
    const Dims m = shape.table_dims();
    pad_dims_ = {2 * m[0], 2 * m[1], 2 * m[2]};
}

std::vector<Complex> BandProduct::to_pad_spatial(std::span<const Complex> table) const {
    std::vector<Complex> work;
    scatter_band(shape_, table, pad_dims_, work);
    detail::fft3(pad_dims_, work, /*forward=*/false);
    return work;
}

std::vector<Complex> BandProduct::from_pad_spatial(std::span<const Complex> spatial) const {
    std::vector<Complex> work(spatial.begin(), spatial.end());
    detail::fft3(pad_dims_, work, /*forward=*/true);
    std::vector<Complex> table(shape_.table_size());
    // 1/pad voxels undoes the unscaled round trip; 1/dense voxels expresses
    // the pointwise product in the dense-grid coefficient convention.
    const double scale = 1.0 / (static_cast<double>(pad_size()) * static_cast<double>(shape_.dense_size()));
    gather_band(shape_, work, pad_dims_, table, scale);
    return table;
}

std::vector<Complex> BandProduct::multiply(std::span<const Complex> a, std::span<const Complex> b) const {
    std::vector<Complex> sa = to_pad_spatial(a);
    const std::vector<Complex> sb = to_pad_spatial(b);
    for (std::size_t n = 0; n < sa.size(); ++n) sa[n] *= sb[n];
    return from_pad_spatial(sa);
}

namespace {

void check_same_band(const BandlimitedVelocity& a, const BandlimitedVelocity& b, const char* what) {
    if (!(a.shape() == b.shape()))
        throw StructuralError(std::string(what) + ": band shapes differ");
}

void assign_component(BandlimitedVelocity& out, int comp, const std::vector<Complex>& table) {
    auto span = out.component(comp);
    std::copy(table.begin(), table.end(), span.begin());
}

void apply_derivative_symbol(const BandShape& shape, int axis, std::vector<Complex>& table) {
    const auto& h = shape.halfwidth;
    const Dims m = shape.table_dims();
    for (int kz = -h[2]; kz <= h[2]; ++kz)
        for (int ky = -h[1]; ky <= h[1]; ++ky)
            for (int kx = -h[0]; kx <= h[0]; ++kx) {
                const int k = axis == 0 ? kx : (axis == 1 ? ky : kz);
                const std::size_t n =
                    (static_cast<std::size_t>(kz + h[2]) * m[1] + static_cast<std::size_t>(ky + h[1])) * m[0] +
                    static_cast<std::size_t>(kx + h[0]);
                table[n] *= derivative_symbol(shape, axis, k);
            }
}

} // namespace

BandlimitedVelocity truncated_correlation(const BandlimitedVelocity& a, const BandlimitedVelocity& b) {
    check_same_band(a, b, "truncated_correlation");
    const BandProduct prod(a.shape());
    BandlimitedVelocity out(a.shape());
    for (int comp = 0; comp < 3; ++comp)
        assign_component(out, comp, prod.multiply(a.component(comp), b.component(comp)));
    return out;
}

BandlimitedVelocity jacobian_transpose_correlation(const BandlimitedVelocity& v,
                                                   const BandlimitedVelocity& m) {
    check_same_band(v, m, "jacobian_transpose_correlation");
    const BandShape& shape = v.shape();
    const BandProduct prod(shape);
    BandlimitedVelocity out(shape);

    // result_c = sum_e bandlimit( (D_c v_e) * m_e ); the sum is taken on the
    // padded spatial grid so each output component needs one forward pass.
    std::array<std::vector<Complex>, 3> m_spatial;
    for (int e = 0; e < 3; ++e) m_spatial[e] = prod.to_pad_spatial(m.component(e));

    for (int c = 0; c < 3; ++c) {
        std::vector<Complex> acc(prod.pad_size(), Complex(0.0, 0.0));
        for (int e = 0; e < 3; ++e) {
            std::vector<Complex> dv(v.component(e).begin(), v.component(e).end());
            apply_derivative_symbol(shape, c, dv);
            const std::vector<Complex> dv_spatial = prod.to_pad_spatial(dv);
            for (std::size_t n = 0; n < acc.size(); ++n) acc[n] += dv_spatial[n] * m_spatial[e][n];
        }
        assign_component(out, c, prod.from_pad_spatial(acc));
    }
    return out;
}

BandlimitedVelocity tensor_product_divergence(const BandlimitedVelocity& m,
                                              const BandlimitedVelocity& v) {
    check_same_band(m, v, "tensor_product_divergence");
    const BandShape& shape = m.shape();
    const BandProduct prod(shape);
    BandlimitedVelocity out(shape);

    std::array<std::vector<Complex>, 3> v_spatial;
    for (int e = 0; e < 3; ++e) v_spatial[e] = prod.to_pad_spatial(v.component(e));

    for (int c = 0; c < 3; ++c) {
        const std::vector<Complex> mc_spatial = prod.to_pad_spatial(m.component(c));
        std::vector<Complex> total(shape.table_size(), Complex(0.0, 0.0));
        std::vector<Complex> pw(prod.pad_size());
        for (int e = 0; e < 3; ++e) {
            for (std::size_t n = 0; n < pw.size(); ++n) pw[n] = mc_spatial[n] * v_spatial[e][n];
            std::vector<Complex> t = prod.from_pad_spatial(pw);
            apply_derivative_symbol(shape, e, t);
            for (std::size_t n = 0; n < total.size(); ++n) total[n] += t[n];
        }
        assign_component(out, c, total);
    }
    return out;
}

double inner_product_l2(const BandlimitedVelocity& a, const BandlimitedVelocity& b) {
    check_same_band(a, b, "inner_product_l2");
    double acc = 0.0;
    const auto& ca = a.coeffs();
    const auto& cb = b.coeffs();
    for (std::size_t n = 0; n < ca.size(); ++n)
        acc += ca[n].real() * cb[n].real() + ca[n].imag() * cb[n].imag();
    return acc;
}

double inner_product_v(const BandlimitedVelocity& a, const BandlimitedVelocity& b,
                       const FourierOperator& op) {
    check_same_band(a, b, "inner_product_v");
    if (!(a.shape() == op.shape())) throw StructuralError("inner_product_v: operator band differs");
    double acc = 0.0;
    const auto l = op.l_table();
    const std::size_t ts = a.component_size();
    for (int comp = 0; comp < 3; ++comp) {
        const auto ca = a.component(comp);
        const auto cb = b.component(comp);
        for (std::size_t n = 0; n < ts; ++n)
            acc += l[n] * (ca[n].real() * cb[n].real() + ca[n].imag() * cb[n].imag());
    }
    return acc;
}

} // namespace raptor
