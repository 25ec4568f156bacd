#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "pinntherm/pde_params.hpp"
#include "pinntherm/series.hpp"

namespace pinntherm {

/// Affine maps between physical units and the unit training domain.
/// x in [0,H] -> [0,1], t in [0,T] -> [0,1], temperatures min-max scaled over
/// the joint ambient/top-oil range with a 5% margin, load losses scaled by
/// the rated peak. All maps are exactly invertible up to rounding.
struct ScalingInfo {
    double x_scale = 1.0;   // H [m]
    double t_scale = 1.0;   // T [s]
    double theta_min = 0.0;
    double theta_max = 1.0;
    double p_min = 0.0;
    double p_max = 1.0;

    double scale_theta(double v) const { return (v - theta_min) / (theta_max - theta_min); }
    double unscale_theta(double s) const { return theta_min + s * (theta_max - theta_min); }
    double theta_range() const { return theta_max - theta_min; }

    double scale_p(double v) const { return (v - p_min) / (p_max - p_min); }
    double unscale_p(double s) const { return p_min + s * (p_max - p_min); }

    double scale_x(double v) const { return v / x_scale; }
    double unscale_x(double s) const { return s * x_scale; }
    double scale_t(double v) const { return v / t_scale; }
    double unscale_t(double s) const { return s * t_scale; }
};

/// Boundary samples of an operating series mapped into the unit domain:
/// times in [0,1] plus the scaled targets used for training and testing.
struct ScaledSeries {
    std::vector<double> t;         // N scaled times in [0,1]
    std::vector<double> theta_a;   // scaled ambient (x=0 boundary target)
    std::vector<double> theta_to;  // scaled top-oil (x=1 boundary target)
    std::vector<double> p_k;       // scaled load losses K^2*mu/p_max
};

/// Maps a series into the unit training domain. Temperatures use joint
/// min-max over {theta_A, theta_TO} with a 5% margin so boundary targets sit
/// strictly inside (0,1); load losses are scaled by p_max = mu * max(K)^2.
inline std::pair<ScaledSeries, ScalingInfo> normalize(const OperatingSeries& series,
                                                      const PdeParams& params) {
    series.validate();
    params.validate();

    double lo = series.theta_a[0], hi = series.theta_a[0];
    for (double v : series.theta_a) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    for (double v : series.theta_to) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!(hi > lo)) throw std::runtime_error("normalize: degenerate temperature range");
    const double margin = 0.05 * (hi - lo);

    double k_max = 0.0;
    for (double v : series.k) k_max = std::max(k_max, v);
    if (!(k_max > 0.0)) throw std::runtime_error("normalize: degenerate load range (K is all zero)");

    ScalingInfo info;
    info.x_scale = params.height;
    info.t_scale = series.duration();
    info.theta_min = lo - margin;
    info.theta_max = hi + margin;
    info.p_min = 0.0;
    info.p_max = params.mu * k_max * k_max;

    ScaledSeries scaled;
    const std::size_t n = series.size();
    scaled.t.resize(n);
    scaled.theta_a.resize(n);
    scaled.theta_to.resize(n);
    scaled.p_k.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        scaled.t[i] = (series.dt * static_cast<double>(i)) / info.t_scale;
        scaled.theta_a[i] = info.scale_theta(series.theta_a[i]);
        scaled.theta_to[i] = info.scale_theta(series.theta_to[i]);
        scaled.p_k[i] = info.scale_p(params.mu * series.k[i] * series.k[i]);
    }
    return {std::move(scaled), info};
}

}  // namespace pinntherm
