#pragma once

#include <array>
#include <complex>
#include <span>
#include <vector>

#include "raptor/volume.hpp"

namespace raptor {

using Complex = std::complex<double>;

// Retained frequency band of a truncated Fourier representation.
//
// The band is the symmetric box |k_d| <= halfwidth[d] of signed frequencies
// on a dense grid of size full_dims. An odd coefficient count per axis keeps
// every retained frequency paired with its conjugate, so real fields stay
// exactly representable (even truncation sizes would leave an unpaired
// Nyquist row when they coincide with the grid size).
struct BandShape {
    Dims full_dims{0, 0, 0};
    Dims halfwidth{0, 0, 0};

    Dims table_dims() const {
        return {2 * halfwidth[0] + 1, 2 * halfwidth[1] + 1, 2 * halfwidth[2] + 1};
    }
    std::size_t table_size() const { return voxel_count(table_dims()); }
    std::size_t dense_size() const { return voxel_count(full_dims); }
    bool operator==(const BandShape&) const = default;
};

// Largest odd symmetric band that fits both the requested truncation and the
// grid: halfwidth = min((trunc-1)/2, (full-1)/2).
BandShape make_band_shape(const Dims& full_dims, const Dims& trunc_dims);

// Truncated complex Fourier coefficients of a 3-vector field.
//
// DFT convention: forward transform unscaled, inverse scaled by 1/voxels.
// Hermitian symmetry coeff(-k) == conj(coeff(k)) makes lift() real-valued.
class BandlimitedVelocity {
public:
    BandlimitedVelocity() = default;
    explicit BandlimitedVelocity(BandShape shape);

    const BandShape& shape() const { return shape_; }

    // Signed-frequency accessors, |k_d| <= halfwidth[d].
    Complex& at(int comp, int kx, int ky, int kz) { return c_[index(comp, kx, ky, kz)]; }
    const Complex& at(int comp, int kx, int ky, int kz) const { return c_[index(comp, kx, ky, kz)]; }
    std::size_t index(int comp, int kx, int ky, int kz) const;

    std::vector<Complex>& coeffs() { return c_; }
    const std::vector<Complex>& coeffs() const { return c_; }
    std::span<const Complex> component(int comp) const;
    std::span<Complex> component(int comp);

    std::size_t component_size() const { return shape_.table_size(); }

    double max_hermitian_violation() const;
    // Projects onto the Hermitian-symmetric subspace (averages conjugate pairs).
    void hermitian_project();

    bool all_finite() const;
    double max_abs() const;

    // In-place linear algebra used by the integrators and the optimizer.
    void scale(double s);
    void axpy(double a, const BandlimitedVelocity& x); // this += a*x
    void fill_zero();

private:
    BandShape shape_;
    std::vector<Complex> c_;
};

// Frequency tables of the metric operator L = (-alpha*Laplacian + I)^c and
// its inverse K, using the discrete Laplacian symbol of the dense grid:
// L(k) = (alpha * sum_d 2(1 - cos(2 pi k_d / full_dims[d])) + 1)^c.
class FourierOperator {
public:
    FourierOperator() = default;
    FourierOperator(double alpha, int c, const Dims& trunc_dims, const Dims& full_dims);

    const BandShape& shape() const { return shape_; }
    double alpha() const { return alpha_; }
    int order() const { return order_; }

    double l_at(int kx, int ky, int kz) const { return l_[flat(kx, ky, kz)]; }
    double k_at(int kx, int ky, int kz) const { return k_[flat(kx, ky, kz)]; }
    std::span<const double> l_table() const { return l_; }
    std::span<const double> k_table() const { return k_; }

    BandlimitedVelocity apply_l(const BandlimitedVelocity& v) const;
    BandlimitedVelocity apply_k(const BandlimitedVelocity& v) const;

    // The L multiplier at one signed frequency; usable without building tables.
    static double symbol(double alpha, int c, const std::array<int, 3>& k, const Dims& full_dims);

private:
    std::size_t flat(int kx, int ky, int kz) const;
    BandShape shape_;
    double alpha_ = 0.0;
    int order_ = 0;
    std::vector<double> l_;
    std::vector<double> k_;
};

// Central-difference derivative symbol along `axis`: i*sin(2 pi k / N).
Complex derivative_symbol(const BandShape& shape, int axis, int k);

// Projection of a dense vector field onto the band (forward DFT, truncated,
// Hermitian symmetry enforced).
BandlimitedVelocity project(const DisplacementField& field, const Dims& trunc_dims);

// Zero-pad to the dense grid and inverse transform; throws NumericalError if
// the Hermitian invariant is violated beyond tolerance. The imaginary
// residue of the inverse transform is checked and discarded.
DisplacementField lift(const BandlimitedVelocity& v);

// Frequency-domain Jacobian: result[e] holds the derivative of every
// component along axis e, i.e. result[e].component(c) = D_e v_c.
std::array<BandlimitedVelocity, 3> fourier_jacobian(const BandlimitedVelocity& v);

// Engine for band-limited pointwise products. Operands are lifted onto a
// zero-padded grid (2x the coefficient table per axis) so the product
// spectrum cannot alias back into the band before re-truncation.
class BandProduct {
public:
    explicit BandProduct(const BandShape& shape);

    const Dims& pad_dims() const { return pad_dims_; }
    std::size_t pad_size() const { return voxel_count(pad_dims_); }

    // Spatial samples on the padded grid of one scalar coefficient table
    // (inverse transform, unscaled).
    std::vector<Complex> to_pad_spatial(std::span<const Complex> table) const;
    // Forward transform of padded spatial samples, truncated to the band and
    // scaled so the composition encodes the product of the lifted fields in
    // the dense-grid DFT convention.
    std::vector<Complex> from_pad_spatial(std::span<const Complex> spatial) const;

    // from_pad_spatial(to_pad_spatial(a) .* to_pad_spatial(b))
    std::vector<Complex> multiply(std::span<const Complex> a, std::span<const Complex> b) const;

private:
    BandShape shape_;
    Dims pad_dims_;
};

// Componentwise band-limited pointwise product (the truncated correlation):
// lift(result).component(c) == bandlimit(lift(a)_c * lift(b)_c).
BandlimitedVelocity truncated_correlation(const BandlimitedVelocity& a, const BandlimitedVelocity& b);

// (D v)^T correlated with m: result_c = sum_e bandlimit(D_c v_e * m_e).
BandlimitedVelocity jacobian_transpose_correlation(const BandlimitedVelocity& v,
                                                   const BandlimitedVelocity& m);

// Divergence of the tensor product: result_c = sum_e D_e bandlimit(m_c * v_e).
BandlimitedVelocity tensor_product_divergence(const BandlimitedVelocity& m,
                                              const BandlimitedVelocity& v);

// Real coefficient-space inner product Re sum_k a conj(b), over the full table.
double inner_product_l2(const BandlimitedVelocity& a, const BandlimitedVelocity& b);
// Metric inner product Re sum_k L(k) a conj(b).
double inner_product_v(const BandlimitedVelocity& a, const BandlimitedVelocity& b,
                       const FourierOperator& op);

namespace detail {
// Dense c2c transforms used by project/lift; exposed for the test oracles.
void fft3(const Dims& dims, std::vector<Complex>& data, bool forward);
} // namespace detail

} // namespace raptor
