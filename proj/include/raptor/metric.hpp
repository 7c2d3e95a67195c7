#pragma once

#include <memory>
#include <utility>

#include "raptor/metric_raptor.hpp"
#include "raptor/metric_ssd.hpp"
#include "raptor/volume.hpp"

namespace raptor {

// Common surface the optimizer drives. `gradient` is the per-voxel
// derivative of the dissimilarity with respect to the warped intensities;
// the surrounding assembly (chain rule through the warp, smoothing,
// projection, adjoint transport) is metric-agnostic.
class DissimilarityMetric {
public:
    virtual ~DissimilarityMetric() = default;
    virtual double value(const Volume& x, const Volume& y_warped) const = 0;
    virtual std::pair<double, Volume> value_and_gradient(const Volume& x,
                                                         const Volume& y_warped) const = 0;
};

class SsdMetric final : public DissimilarityMetric {
public:
    explicit SsdMetric(SsdConfig cfg) : cfg_(cfg) {}
    double value(const Volume& x, const Volume& y_warped) const override;
    std::pair<double, Volume> value_and_gradient(const Volume& x, const Volume& y_warped) const override;

private:
    SsdConfig cfg_;
};

// RaPTOR with bin placement and variance guards frozen from the level
// images, so the normalization does not drift while the warp evolves.
class RaptorLevelMetric final : public DissimilarityMetric {
public:
    RaptorLevelMetric(RaptorConfig cfg, const Volume& x_level, const Volume& y_level);
    double value(const Volume& x, const Volume& y_warped) const override;
    std::pair<double, Volume> value_and_gradient(const Volume& x, const Volume& y_warped) const override;

private:
    RaptorConfig cfg_;
    BinRange x_range_;
    double y_var_threshold_;
    double x_var_threshold_;
};

} // namespace raptor
