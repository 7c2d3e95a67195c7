#include "raptor/metric.hpp"

namespace raptor {

double SsdMetric::value(const Volume& x, const Volume& y_warped) const {
    return ssd_value(x, y_warped, cfg_);
}

std::pair<double, Volume> SsdMetric::value_and_gradient(const Volume& x, const Volume& y_warped) const {
    return {ssd_value(x, y_warped, cfg_), ssd_gradient(x, y_warped, cfg_)};
}

RaptorLevelMetric::RaptorLevelMetric(RaptorConfig cfg, const Volume& x_level, const Volume& y_level)
    : cfg_(cfg), x_range_(volume_range(x_level)) {
    cfg_.validate();
    const BinRange yr = volume_range(y_level);
    const double ys = yr.hi - yr.lo;
    const double xs = x_range_.hi - x_range_.lo;
    y_var_threshold_ = cfg_.min_variance * ys * ys;
    x_var_threshold_ = cfg_.min_variance * xs * xs;
}

double RaptorLevelMetric::value(const Volume& x, const Volume& y_warped) const {
    return raptor_total(x, y_warped, cfg_, x_range_, y_var_threshold_, x_var_threshold_);
}

std::pair<double, Volume> RaptorLevelMetric::value_and_gradient(const Volume& x,
                                                                const Volume& y_warped) const {
    return raptor_value_and_gradient(x, y_warped, cfg_, x_range_, y_var_threshold_, x_var_threshold_);
}

} // namespace raptor
