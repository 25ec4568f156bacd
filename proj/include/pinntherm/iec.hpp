#pragma once

#include <cmath>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "pinntherm/series.hpp"

namespace pinntherm {

/// IEC 60076-7 thermal constants. Time constants are given in minutes as on
/// the heat-run report; the recursion converts everything to seconds. The
/// winding exponent y has no universal nameplate value, so configuration
/// files must state it explicitly (1.3 is the typical ONAN figure).
struct IecParams {
    double delta_theta_hr = 15.1;  // hotspot rise over top-oil at rated load [K]
    double k21 = 2.32;
    double k22 = 2.05;
    double tau_w_min = 9.75;    // winding time constant [min]
    double tau_to_min = 266.8;  // oil time constant [min]
    double y = 1.3;             // winding exponent
    double dt = 60.0;           // recursion step [s]

    double tau_w_s() const { return tau_w_min * 60.0; }
    double tau_to_s() const { return tau_to_min * 60.0; }
    double tau_min_s() const { return std::min(tau_w_s(), tau_to_s()); }

    // difference-equation coefficients
    double upsilon1() const { return dt / (k22 * tau_w_s()); }
    double beta1() const { return k21 * delta_theta_hr; }
    double upsilon2() const { return k22 * dt / tau_to_s(); }
    double beta2() const { return (k21 - 1.0) * delta_theta_hr; }

    void validate() const {
        if (!(delta_theta_hr > 0.0) || !(k21 > 0.0) || !(k22 > 0.0) || !(tau_w_min > 0.0) ||
            !(tau_to_min > 0.0) || !(y > 0.0) || !(dt > 0.0))
            throw std::runtime_error("iec: all parameters must be positive");
        if (dt > tau_min_s() / 2.0)
            throw std::runtime_error("iec: dt violates the stability rule dt <= tau_min/2");
    }
};

/// Hotspot trajectory with the two internal rise states exposed, so the rise
/// delta_theta_h = delta_h1 - delta_h2 can be reused by the winding model
/// without recomputation.
struct HstTrajectory {
    std::vector<double> theta_h;   // hotspot temperature [degC]
    std::vector<double> delta_h1;  // [K]
    std::vector<double> delta_h2;  // [K]

    double rise_at(std::size_t i) const { return delta_h1[i] - delta_h2[i]; }
};

/// Steady-state initial condition: both rise states at their fixed points for
/// the initial load.
inline std::tuple<double, double, double> hst_initial(double k0, double theta_to0,
                                                      const IecParams& p) {
    p.validate();
    if (k0 < 0.0) throw std::runtime_error("iec: load factor must be >= 0");
    const double ky = std::pow(k0, p.y);
    const double d1 = p.beta1() * ky;
    const double d2 = p.beta2() * ky;
    return {theta_to0 + d1 - d2, d1, d2};
}

/// One step of the two-state rise recursion
///   delta_i <- delta_i + upsilon_i * (beta_i * K^y - delta_i).
inline std::pair<double, double> hst_rise_step(std::pair<double, double> state, double k,
                                               const IecParams& p) {
    const double ky = std::pow(k, p.y);
    state.first += p.upsilon1() * (p.beta1() * ky - state.first);
    state.second += p.upsilon2() * (p.beta2() * ky - state.second);
    return state;
}

/// Full hotspot trajectory for an operating series: steady-state seed at the
/// first sample, then the rise recursion per sample.
inline HstTrajectory hst_series(const OperatingSeries& series, const IecParams& p) {
    series.validate();
    p.validate();
    if (std::abs(series.dt - p.dt) > 1e-9 * std::max(series.dt, p.dt))
        throw std::runtime_error("iec: series dt does not match params.dt");

    const std::size_t n = series.size();
    HstTrajectory traj;
    traj.theta_h.resize(n);
    traj.delta_h1.resize(n);
    traj.delta_h2.resize(n);

    auto [th0, d1, d2] = hst_initial(series.k[0], series.theta_to[0], p);
    traj.theta_h[0] = th0;
    traj.delta_h1[0] = d1;
    traj.delta_h2[0] = d2;
    std::pair<double, double> state{d1, d2};
    for (std::size_t i = 1; i < n; ++i) {
        state = hst_rise_step(state, series.k[i], p);
        traj.delta_h1[i] = state.first;
        traj.delta_h2[i] = state.second;
        traj.theta_h[i] = series.theta_to[i] + state.first - state.second;
    }
    return traj;
}

/// Insulation ageing acceleration factor: doubles every 6 degC above the
/// 98 degC reference.
inline double ageing_factor(double theta) {
    return std::exp2((theta - 98.0) / 6.0);
}

/// Cumulative loss of life in equivalent ageing minutes: prefix sums of
/// V * dt/60 per sample.
inline std::vector<double> lol_temporal(const std::vector<double>& v, double dt) {
    if (!(dt > 0.0)) throw std::runtime_error("lol: dt must be positive");
    std::vector<double> lol(v.size());
    const double w = dt / 60.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] < 0.0) throw std::runtime_error("lol: negative ageing factor");
        acc += v[i] * w;
        lol[i] = acc;
    }
    return lol;
}

}  // namespace pinntherm
