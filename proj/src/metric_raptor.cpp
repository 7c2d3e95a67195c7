#include "raptor/metric_raptor.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "raptor/parallel.hpp"

namespace raptor {

void RaptorConfig::validate() const {
    if (num_bins < 2) throw StructuralError("raptor: num_bins must be >= 2");
    if (patch_size < 2) throw StructuralError("raptor: patch_size must be >= 2");
    if (patch_stride < 1) throw StructuralError("raptor: patch_stride must be >= 1");
    if (min_variance < 0.0) throw StructuralError("raptor: min_variance must be >= 0");
}

BinRange volume_range(const Volume& v) {
    return {v.min_value(), v.max_value()};
}

namespace {

double sample_variance(std::span<const double> s, double& mean_out) {
    double mean = 0.0;
    for (double v : s) mean += v;
    mean /= static_cast<double>(s.size());
    double acc = 0.0;
    for (double v : s) acc += (v - mean) * (v - mean);
    mean_out = mean;
    return acc / static_cast<double>(s.size());
}

} // namespace

std::optional<PatchCr> patch_cr(std::span<const double> x_samples, std::span<const double> y_samples,
                                const RaptorConfig& cfg, const BinRange& x_range,
                                double y_var_threshold, double x_var_threshold) {
    cfg.validate();
    if (x_samples.size() != y_samples.size())
        throw StructuralError("patch_cr: sample counts differ");
    const std::size_t n = x_samples.size();
    if (n < 2) throw StructuralError("patch_cr: need at least 2 samples");
    if (x_range.degenerate()) return std::nullopt;

    double y_mean = 0.0;
    const double y_var = sample_variance(y_samples, y_mean);
    if (!(y_var > y_var_threshold) || y_var == 0.0) return std::nullopt;
    double x_mean = 0.0;
    const double x_var = sample_variance(x_samples, x_mean);
    if (!(x_var > x_var_threshold) || x_var == 0.0) return std::nullopt;

    const int nb = cfg.num_bins;
    PatchCr out;
    PatchHistogramState& st = out.state;
    st.bin_mass.assign(nb, 0.0);
    st.bin_mean.assign(nb, 0.0);
    st.lambda_bin.resize(n);
    st.lambda_lo.resize(n);
    st.mean = y_mean;
    st.variance = y_var;

    // Parzen weights from the reference samples; the y statistics are
    // computed on centered values for stability (the value is shift
    // invariant in exact arithmetic).
    std::vector<double> mass_y(nb, 0.0); // sum_i lambda_ij * (y_i - mean)
    const double inv_span = (nb - 1) / (x_range.hi - x_range.lo);
    double sum_sq_centered = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double p = (x_samples[i] - x_range.lo) * inv_span;
        p = std::clamp(p, 0.0, static_cast<double>(nb - 1));
        int lo = std::min(static_cast<int>(p), nb - 2);
        const double w_hi = p - lo;
        const double w_lo = 1.0 - w_hi;
        st.lambda_bin[i] = lo;
        st.lambda_lo[i] = w_lo;
        const double z = y_samples[i] - y_mean;
        st.bin_mass[lo] += w_lo;
        st.bin_mass[lo + 1] += w_hi;
        mass_y[lo] += w_lo * z;
        mass_y[lo + 1] += w_hi * z;
        sum_sq_centered += z * z;
        st.sum_squares += y_samples[i] * y_samples[i];
    }

    double weighted_centered = 0.0;
    for (int j = 0; j < nb; ++j) {
        if (st.bin_mass[j] > 0.0) {
            const double mu_z = mass_y[j] / st.bin_mass[j];
            st.bin_mean[j] = mu_z + y_mean;
            weighted_centered += st.bin_mass[j] * mu_z * mu_z;
            st.weighted_square_sum += st.bin_mass[j] * st.bin_mean[j] * st.bin_mean[j];
        }
    }

    out.value = (sum_sq_centered - weighted_centered) / sum_sq_centered;
    return out;
}

std::optional<PatchCr> patch_cr(std::span<const double> x_samples, std::span<const double> y_samples,
                                const RaptorConfig& cfg) {
    if (x_samples.empty()) throw StructuralError("patch_cr: empty patch");
    const auto [lo, hi] = std::minmax_element(x_samples.begin(), x_samples.end());
    const BinRange range{*lo, *hi};
    // Standalone use: bins span the patch itself; only exactly degenerate
    // patches are rejected.
    return patch_cr(x_samples, y_samples, cfg, range, 0.0, 0.0);
}

double patch_cr_derivative(const PatchCr& patch, std::size_t sample, double y_sample) {
    const PatchHistogramState& st = patch.state;
    const std::size_t n = st.lambda_bin.size();
    const double n_var = static_cast<double>(n) * st.variance;
    const int lo = st.lambda_bin[sample];
    const double w_lo = st.lambda_lo[sample];
    const double w_hi = 1.0 - w_lo;
    const double z = y_sample - st.mean;
    const double mu_lo = st.bin_mean[lo] - st.mean;
    const double mu_hi = st.bin_mean[lo + 1] - st.mean;
    return (2.0 / n_var) * (z - w_lo * mu_lo - w_hi * mu_hi - patch.value * z);
}

namespace {

std::vector<int> patch_starts(int dim, int size, int stride) {
    std::vector<int> out;
    if (size > dim) return out;
    int s = 0;
    while (true) {
        out.push_back(s);
        if (s == dim - size) break;
        s = std::min(s + stride, dim - size);
    }
    return out;
}

struct PatchOrigin {
    int i, j, k;
};

std::vector<PatchOrigin> tile_patches(const Dims& dims, const RaptorConfig& cfg) {
    std::vector<PatchOrigin> out;
    const auto xs = patch_starts(dims[0], cfg.patch_size, cfg.patch_stride);
    const auto ys = patch_starts(dims[1], cfg.patch_size, cfg.patch_stride);
    const auto zs = patch_starts(dims[2], cfg.patch_size, cfg.patch_stride);
    out.reserve(xs.size() * ys.size() * zs.size());
    for (int k : zs)
        for (int j : ys)
            for (int i : xs) out.push_back({i, j, k});
    return out;
}

struct RaptorAccumulator {
    double value_sum = 0.0;
    long accepted = 0;
    Volume grad; // empty unless gradient requested
};

// Evaluates one range of patches; gradient contributions are accumulated
// into acc.grad when it is non-empty.
void eval_patches(const Volume& x, const Volume& y, const RaptorConfig& cfg, const BinRange& x_range,
                  double y_thr, double x_thr, const std::vector<PatchOrigin>& patches,
                  std::size_t begin, std::size_t end, RaptorAccumulator& acc) {
    const int ps = cfg.patch_size;
    const std::size_t np = static_cast<std::size_t>(ps) * ps * ps;
    std::vector<double> xs(np), ys(np);
    std::vector<std::size_t> voxels(np);
    const bool want_grad = acc.grad.size() > 0;

    for (std::size_t pidx = begin; pidx < end; ++pidx) {
        const PatchOrigin& o = patches[pidx];
        std::size_t t = 0;
        for (int dk = 0; dk < ps; ++dk)
            for (int dj = 0; dj < ps; ++dj)
                for (int di = 0; di < ps; ++di, ++t) {
                    const std::size_t n = x.index(o.i + di, o.j + dj, o.k + dk);
                    voxels[t] = n;
                    xs[t] = x[n];
                    ys[t] = y[n];
                }
        const auto res = patch_cr(xs, ys, cfg, x_range, y_thr, x_thr);
        if (!res) continue;
        acc.value_sum += res->value;
        acc.accepted += 1;
        if (want_grad) {
            for (std::size_t i = 0; i < np; ++i)
                acc.grad[voxels[i]] += patch_cr_derivative(*res, i, ys[i]);
        }
    }
}

RaptorAccumulator raptor_eval(const Volume& x, const Volume& y, const RaptorConfig& cfg,
                              const BinRange& x_range, double y_thr, double x_thr, bool want_grad) {
    cfg.validate();
    if (x.dims() != y.dims()) throw StructuralError("raptor: volume dims differ");
    const auto patches = tile_patches(x.dims(), cfg);

    const int workers = std::min<int>(par::num_threads(), std::max<std::size_t>(patches.size(), 1));
    std::vector<RaptorAccumulator> parts(std::max(workers, 1));
    for (auto& p : parts)
        if (want_grad) p.grad = Volume(x.dims());

    if (workers <= 1) {
        eval_patches(x, y, cfg, x_range, y_thr, x_thr, patches, 0, patches.size(), parts[0]);
    } else {
        const std::size_t chunk = (patches.size() + workers - 1) / workers;
        std::vector<std::thread> pool;
        for (int w = 1; w < workers; ++w) {
            const std::size_t b = chunk * w;
            const std::size_t e = std::min(patches.size(), b + chunk);
            if (b >= e) break;
            pool.emplace_back([&, w, b, e] {
                eval_patches(x, y, cfg, x_range, y_thr, x_thr, patches, b, e, parts[w]);
            });
        }
        eval_patches(x, y, cfg, x_range, y_thr, x_thr, patches, 0, std::min(chunk, patches.size()),
                     parts[0]);
        for (auto& t : pool) t.join();
        // deterministic merge order
        for (int w = 1; w < workers; ++w) {
            parts[0].value_sum += parts[w].value_sum;
            parts[0].accepted += parts[w].accepted;
            if (want_grad)
                for (std::size_t n = 0; n < parts[0].grad.size(); ++n)
                    parts[0].grad[n] += parts[w].grad[n];
        }
    }

    if (parts[0].accepted == 0)
        throw MetricUndefinedError("raptor: no patch was accepted (check variance guard / patch size)");
    return std::move(parts[0]);
}

struct Thresholds {
    BinRange x_range;
    double y_thr;
    double x_thr;
};

Thresholds derive_thresholds(const Volume& x, const Volume& y, const RaptorConfig& cfg) {
    const BinRange xr = volume_range(x);
    const BinRange yr = volume_range(y);
    const double xs = xr.hi - xr.lo;
    const double ys = yr.hi - yr.lo;
    return {xr, cfg.min_variance * ys * ys, cfg.min_variance * xs * xs};
}

} // namespace

double raptor_total(const Volume& x, const Volume& y, const RaptorConfig& cfg,
                    const BinRange& x_range, double y_var_threshold, double x_var_threshold) {
    const RaptorAccumulator acc =
        raptor_eval(x, y, cfg, x_range, y_var_threshold, x_var_threshold, /*want_grad=*/false);
    return acc.value_sum / static_cast<double>(acc.accepted);
}

double raptor_total(const Volume& x, const Volume& y, const RaptorConfig& cfg) {
    const Thresholds t = derive_thresholds(x, y, cfg);
    return raptor_total(x, y, cfg, t.x_range, t.y_thr, t.x_thr);
}

std::pair<double, Volume> raptor_value_and_gradient(const Volume& x, const Volume& y_warped,
                                                    const RaptorConfig& cfg, const BinRange& x_range,
                                                    double y_var_threshold, double x_var_threshold) {
    RaptorAccumulator acc =
        raptor_eval(x, y_warped, cfg, x_range, y_var_threshold, x_var_threshold, /*want_grad=*/true);
    const double inv_np = 1.0 / static_cast<double>(acc.accepted);
    for (std::size_t n = 0; n < acc.grad.size(); ++n) acc.grad[n] *= inv_np;
    return {acc.value_sum * inv_np, std::move(acc.grad)};
}

std::pair<double, Volume> raptor_value_and_gradient(const Volume& x, const Volume& y_warped,
                                                    const RaptorConfig& cfg) {
    const Thresholds t = derive_thresholds(x, y_warped, cfg);
    return raptor_value_and_gradient(x, y_warped, cfg, t.x_range, t.y_thr, t.x_thr);
}

Volume raptor_gradient(const Volume& x, const Volume& y_warped, const RaptorConfig& cfg) {
    return raptor_value_and_gradient(x, y_warped, cfg).second;
}

} // namespace raptor
