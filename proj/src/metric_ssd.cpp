#include "raptor/metric_ssd.hpp"

namespace raptor {

namespace {
void check(const Volume& x, const Volume& y, const SsdConfig& cfg) {
    if (x.dims() != y.dims()) throw StructuralError("ssd: volume dims differ");
    if (!(cfg.sigma > 0.0)) throw StructuralError("ssd: sigma must be > 0");
}
} // namespace

double ssd_value(const Volume& x, const Volume& y_warped, const SsdConfig& cfg) {
    check(x, y_warped, cfg);
    double acc = 0.0;
    for (std::size_t n = 0; n < x.size(); ++n) {
        const double d = y_warped[n] - x[n];
        acc += d * d;
    }
    return acc / (2.0 * cfg.sigma * cfg.sigma);
}

Volume ssd_gradient(const Volume& x, const Volume& y_warped, const SsdConfig& cfg) {
    check(x, y_warped, cfg);
    Volume g(x.dims());
    g.set_spacing(x.spacing());
    g.set_origin(x.origin());
    const double inv = 1.0 / (cfg.sigma * cfg.sigma);
    for (std::size_t n = 0; n < x.size(); ++n) g[n] = inv * (y_warped[n] - x[n]);
    return g;
}

} // namespace raptor
