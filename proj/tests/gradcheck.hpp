#pragma once

#include <algorithm>
#include <cmath>

#include "epf/training.hpp"
#include "support.hpp"

namespace epf::test {

// Parameters kept at least 2 * margin from zero, redrawn until no residual or
// pre-activation lies within `margin` of a kink, so central differences see a
// smooth loss.
inline ParamSet smooth_point(const ModelSpec& spec, const ParamShape& shape, const Batch& batch, Gen& g, double scale = 0.3,
                             double margin = 1e-3) {
    for (;;) {
        ParamSet p(shape);
        for (double& v : p.values()) {
            v = g.uniform(-scale, scale);
            if (std::abs(v) < 2.0 * margin) v = v < 0.0 ? -2.0 * margin : 2.0 * margin;
        }
        ForwardCache cache;
        forward_pass(spec, p, batch, cache);
        const Eigen::MatrixXd r = cache.output - batch.targets;
        bool ok = r.cwiseAbs().minCoeff() > margin;
        if (ok && shape.hidden_n > 0) ok = cache.pre.cwiseAbs().minCoeff() > margin;
        if (ok) return p;
    }
}

// Largest relative gap between backprop and central differences over all coordinates.
inline double max_relative_error(const ModelSpec& spec, const ParamSet& p, const Batch& batch, LossKind kind,
                                 double step = 1e-5) {
    const ParamSet g = gradient(spec, p, batch, kind);
    ParamSet probe = p;
    double worst = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double x = p.values()[i];
        probe.values()[i] = x + step;
        const double up = loss(spec, probe, batch, kind);
        probe.values()[i] = x - step;
        const double down = loss(spec, probe, batch, kind);
        probe.values()[i] = x;
        const double numeric = (up - down) / (2.0 * step);
        const double analytic = g.values()[i];
        const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-4});
        worst = std::max(worst, std::abs(numeric - analytic) / scale);
    }
    return worst;
}

// Toy standardized batch: n days of Gaussian inputs, targets near zero.
inline Batch toy_batch(const FeatureLayout& layout, std::size_t n, Gen& g) {
    Batch b;
    b.full.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(layout.full_width()));
    for (Eigen::Index i = 0; i < b.full.size(); ++i) b.full.data()[i] = g.normal();
    for (int h = 0; h < kHours; ++h) {
        const std::size_t w = layout.reduced_width(h);
        b.reduced[h].resize(b.full.rows(), static_cast<Eigen::Index>(w));
        for (std::size_t k = 0; k < w; ++k) b.reduced[h].col(static_cast<Eigen::Index>(k)) = b.full.col(static_cast<Eigen::Index>(layout.full_index(h, k)));
    }
    b.targets.resize(b.full.rows(), kHours);
    for (Eigen::Index i = 0; i < b.targets.size(); ++i) b.targets.data()[i] = g.normal(0.0, 3.0);
    return b;
}

}  // namespace epf::test
