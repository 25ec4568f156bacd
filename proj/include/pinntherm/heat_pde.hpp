#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pinntherm/field.hpp"
#include "pinntherm/pde_params.hpp"
#include "pinntherm/scaling.hpp"
#include "pinntherm/series.hpp"

namespace pinntherm {

/// Extra volumetric source term [W/m^3] as a function of physical (x, t);
/// used by the manufactured-solution verification harness.
using ExtraSource = std::function<double(double, double)>;

struct PdeSolveOptions {
    std::size_t nx = 41;
    int substeps = 1;  // time substeps per series interval (accuracy, not stability)
    std::optional<std::vector<double>> initial_profile;  // size nx, physical degC
    ExtraSource extra_source;  // optional
};

/// Crank-Nicolson solution of
///   rho*cp dTheta/dt = k d2Theta/dx2 + (P0 + K(t)^2 mu)/v_eff
///                      - h (Theta - Theta_A(t)) + q_extra(x,t)
/// with Dirichlet boundaries Theta(0,t) = Theta_A(t), Theta(H,t) = Theta_TO(t).
/// Second-order central differences in space, trapezoidal stepping in time at
/// the series sample interval (optionally substepped); the scheme is
/// unconditionally stable, so substeps only refine accuracy. Output samples
/// land exactly on the series time grid.
inline TemperatureField solve_pde(const OperatingSeries& series, const PdeParams& params,
                                  const PdeSolveOptions& opts = {}) {
    series.validate();
    params.validate();
    if (opts.nx < 11) throw std::runtime_error("solve_pde: nx must be at least 11");
    if (opts.substeps < 1) throw std::runtime_error("solve_pde: substeps must be >= 1");

    const std::size_t nx = opts.nx;
    const std::size_t nt = series.size();
    const double h_phys = params.height;
    const double dx = h_phys / static_cast<double>(nx - 1);
    const double rho_cp = params.rho_cp();
    const double tau = series.dt / static_cast<double>(opts.substeps);

    // linear interpolation of the driving series at an arbitrary time
    auto series_at = [&](const std::vector<double>& v, double t) {
        const double pos = t / series.dt;
        if (pos <= 0.0) return v.front();
        const std::size_t i = static_cast<std::size_t>(pos);
        if (i >= v.size() - 1) return v.back();
        const double w = pos - static_cast<double>(i);
        return v[i] + w * (v[i + 1] - v[i]);
    };

    // volumetric source divided by rho*cp, excluding the -h*Theta sink which
    // is handled implicitly
    auto source_over_rhocp = [&](double x, double t) {
        const double kf = series_at(series.k, t);
        const double pk = kf * kf * params.mu;
        double q = (params.p0 + pk) / params.v_eff + params.h * series_at(series.theta_a, t);
        if (opts.extra_source) q += opts.extra_source(x, t);
        return q / rho_cp;
    };

    TemperatureField field;
    field.x_grid.resize(nx);
    for (std::size_t i = 0; i < nx; ++i)
        field.x_grid[i] = static_cast<double>(i) / static_cast<double>(nx - 1);
    field.t_grid.resize(nt);
    for (std::size_t i = 0; i < nt; ++i) field.t_grid[i] = series.dt * static_cast<double>(i);
    field.values.assign(nx * nt, 0.0);
    field.scaling.x_scale = h_phys;
    field.scaling.t_scale = series.duration();

    // initial profile: linear between the Dirichlet values unless supplied;
    // boundary nodes are always pinned to the driving series
    std::vector<double> theta(nx);
    if (opts.initial_profile) {
        if (opts.initial_profile->size() != nx)
            throw std::runtime_error("solve_pde: initial profile size mismatch");
        theta = *opts.initial_profile;
    } else {
        for (std::size_t i = 0; i < nx; ++i) {
            const double w = static_cast<double>(i) / static_cast<double>(nx - 1);
            theta[i] = (1.0 - w) * series.theta_a[0] + w * series.theta_to[0];
        }
    }
    theta.front() = series.theta_a[0];
    theta.back() = series.theta_to[0];
    for (std::size_t i = 0; i < nx; ++i) field.at(i, 0) = theta[i];

    const double r = params.alpha * tau / (dx * dx);          // diffusion number
    const double c = (params.h / rho_cp) * tau;               // sink number
    const double diag = 1.0 + r + 0.5 * c;
    const double off = -0.5 * r;

    const std::size_t m = nx - 2;  // interior unknowns
    std::vector<double> rhs(m), cp(m), dp(m), src_old(nx), src_new(nx);
    for (std::size_t i = 0; i < nx; ++i)
        src_old[i] = source_over_rhocp(field.x_grid[i] * h_phys, 0.0);

    double t_now = 0.0;
    for (std::size_t step = 1; step < nt; ++step) {
        for (int sub = 0; sub < opts.substeps; ++sub) {
            const double t_next = t_now + tau;
            for (std::size_t i = 0; i < nx; ++i)
                src_new[i] = source_over_rhocp(field.x_grid[i] * h_phys, t_next);
            const double bc0 = series_at(series.theta_a, t_next);
            const double bc1 = series_at(series.theta_to, t_next);

            for (std::size_t i = 0; i < m; ++i) {
                const std::size_t g = i + 1;
                const double lap = theta[g - 1] - 2.0 * theta[g] + theta[g + 1];
                rhs[i] = theta[g] + 0.5 * r * lap - 0.5 * c * theta[g] +
                         0.5 * tau * (src_old[g] + src_new[g]);
            }
            rhs[0] -= off * bc0;
            rhs[m - 1] -= off * bc1;

            // Thomas forward sweep
            cp[0] = off / diag;
            dp[0] = rhs[0] / diag;
            for (std::size_t i = 1; i < m; ++i) {
                const double denom = diag - off * cp[i - 1];
                cp[i] = off / denom;
                dp[i] = (rhs[i] - off * dp[i - 1]) / denom;
            }
            // back substitution
            theta[m] = dp[m - 1];
            for (std::size_t i = m - 1; i > 0; --i) theta[i] = dp[i - 1] - cp[i - 1] * theta[i + 1];

            theta.front() = bc0;
            theta.back() = bc1;
            src_old.swap(src_new);
            t_now = t_next;
        }
        // re-anchor to the exact sample time to avoid drift in long runs
        t_now = series.dt * static_cast<double>(step);
        theta.front() = series.theta_a[step];
        theta.back() = series.theta_to[step];
        for (std::size_t i = 0; i < nx; ++i) {
            if (!std::isfinite(theta[i]))
                throw std::runtime_error("solve_pde: non-finite value at step " + std::to_string(step));
            field.at(i, step) = theta[i];
        }
    }
    return field;
}

/// A manufactured solution with its exact derivatives in physical coordinates.
struct MmsTarget {
    int id = 0;
    std::function<double(double, double)> theta;     // Theta*(x,t)
    std::function<double(double, double)> theta_t;   // d/dt
    std::function<double(double, double)> theta_xx;  // d2/dx2
};

/// Registered smooth verification targets. Both use a time-varying linear
/// boundary lift so the Dirichlet data is nontrivial. `duration` sets the
/// target's time scale.
inline MmsTarget make_mms_target(int id, const PdeParams& params, double duration) {
    const double pi = 3.14159265358979323846;
    const double h = params.height;
    const double T = duration;
    MmsTarget target;
    target.id = id;
    if (id == 1) {
        // sin(pi x/H) e^{-t/T} plus sinusoidal boundary lift
        const double a0 = 20.0, a1 = 4.0, b0 = 40.0, b1 = 6.0, amp = 25.0;
        auto lift = [=](double x, double t) {
            const double xs = x / h;
            const double a = a0 + a1 * std::sin(2.0 * pi * t / T);
            const double b = b0 + b1 * std::cos(2.0 * pi * t / T);
            return a * (1.0 - xs) + b * xs;
        };
        target.theta = [=](double x, double t) {
            return amp * std::sin(pi * x / h) * std::exp(-t / T) + lift(x, t);
        };
        target.theta_t = [=](double x, double t) {
            const double xs = x / h;
            const double da = a1 * (2.0 * pi / T) * std::cos(2.0 * pi * t / T);
            const double db = -b1 * (2.0 * pi / T) * std::sin(2.0 * pi * t / T);
            return -amp / T * std::sin(pi * x / h) * std::exp(-t / T) + da * (1.0 - xs) + db * xs;
        };
        target.theta_xx = [=](double x, double t) {
            return -amp * (pi / h) * (pi / h) * std::sin(pi * x / h) * std::exp(-t / T);
        };
        return target;
    }
    if (id == 2) {
        // polynomial bump x(1-x) modulated in time, plus constant-slope lift
        const double c0 = 25.0, c1 = 15.0, amp = 8.0;
        target.theta = [=](double x, double t) {
            const double xs = x / h;
            return amp * xs * (1.0 - xs) * (2.0 + std::cos(2.0 * pi * t / T)) + c0 + c1 * xs;
        };
        target.theta_t = [=](double x, double t) {
            const double xs = x / h;
            return -amp * xs * (1.0 - xs) * (2.0 * pi / T) * std::sin(2.0 * pi * t / T);
        };
        target.theta_xx = [=](double x, double t) {
            return -2.0 * amp / (h * h) * (2.0 + std::cos(2.0 * pi * t / T));
        };
        return target;
    }
    throw std::runtime_error("unknown manufactured-solution target id " + std::to_string(id));
}

/// Extra volumetric source that makes Theta* solve the augmented PDE exactly:
///   q_extra = rho*cp Theta*_t - k Theta*_xx - [(P0+P_K)/v_eff - h(Theta*-Theta_A)].
inline double mms_source(const MmsTarget& target, const PdeParams& params, double x, double t,
                         double p_k_watts, double theta_a) {
    const double q_model =
        (params.p0 + p_k_watts) / params.v_eff - params.h * (target.theta(x, t) - theta_a);
    return params.rho_cp() * target.theta_t(x, t) - params.k * target.theta_xx(x, t) - q_model;
}

/// Builds the operating series whose boundary columns match a manufactured
/// target exactly at the sample times (load shape: daily half-sine).
inline OperatingSeries mms_series(const MmsTarget& target, const PdeParams& params, double dt,
                                  std::size_t n) {
    OperatingSeries s;
    s.t0 = 0.0;
    s.dt = dt;
    s.k.resize(n);
    s.theta_a.resize(n);
    s.theta_to.resize(n);
    const double pi = 3.14159265358979323846;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = dt * static_cast<double>(i);
        s.theta_a[i] = target.theta(0.0, t);
        s.theta_to[i] = target.theta(params.height, t);
        s.k[i] = std::max(0.0, std::sin(2.0 * pi * t / (dt * static_cast<double>(n - 1))));
    }
    return s;
}

/// Solves the manufactured problem on the given grid and reports the max-norm
/// error against the analytic target.
inline double mms_error(const MmsTarget& target, const OperatingSeries& series,
                        const PdeParams& params, std::size_t nx, int substeps = 1) {
    auto series_at = [&](const std::vector<double>& v, double t) {
        const double pos = t / series.dt;
        if (pos <= 0.0) return v.front();
        const std::size_t i = static_cast<std::size_t>(pos);
        if (i >= v.size() - 1) return v.back();
        const double w = pos - static_cast<double>(i);
        return v[i] + w * (v[i + 1] - v[i]);
    };
    PdeSolveOptions opts;
    opts.nx = nx;
    opts.substeps = substeps;
    opts.extra_source = [&](double x, double t) {
        const double kf = series_at(series.k, t);
        return mms_source(target, params, x, t, kf * kf * params.mu,
                          series_at(series.theta_a, t));
    };
    std::vector<double> init(nx);
    for (std::size_t i = 0; i < nx; ++i) {
        const double x = params.height * static_cast<double>(i) / static_cast<double>(nx - 1);
        init[i] = target.theta(x, 0.0);
    }
    opts.initial_profile = init;
    const TemperatureField field = solve_pde(series, params, opts);

    double err = 0.0;
    for (std::size_t ix = 0; ix < field.nx(); ++ix)
        for (std::size_t it = 0; it < field.nt(); ++it) {
            const double x = field.x_grid[ix] * params.height;
            err = std::max(err, std::abs(field.at(ix, it) - target.theta(x, field.t_grid[it])));
        }
    return err;
}

/// Grid-refinement study against a manufactured solution. Each entry of
/// nx_list must halve the spacing of the previous one (nx' = 2 nx - 1).
/// Returns {errors, observed orders log2(e_i / e_{i+1})}.
inline std::pair<std::vector<double>, std::vector<double>> convergence_study(
    const OperatingSeries& series, const PdeParams& params, const std::vector<std::size_t>& nx_list,
    int target_id = 1, int substeps = 1) {
    if (nx_list.size() < 3)
        throw std::runtime_error("convergence_study: need at least 3 grid sizes");
    for (std::size_t i = 1; i < nx_list.size(); ++i)
        if (nx_list[i] != 2 * nx_list[i - 1] - 1)
            throw std::runtime_error("convergence_study: grids must refine by factor 2");

    const MmsTarget target = make_mms_target(target_id, params, series.duration());
    std::vector<double> errors;
    errors.reserve(nx_list.size());
    for (std::size_t nx : nx_list) errors.push_back(mms_error(target, series, params, nx, substeps));
    std::vector<double> orders;
    for (std::size_t i = 0; i + 1 < errors.size(); ++i)
        orders.push_back(std::log2(errors[i] / errors[i + 1]));
    return {errors, orders};
}

}  // namespace pinntherm
