#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pinntherm/field.hpp"
#include "pinntherm/iec.hpp"
#include "pinntherm/rng.hpp"
#include "pinntherm/series.hpp"

namespace pinntherm {

/// Ageing acceleration factors and cumulative loss of life on a field grid.
struct AgeingField {
    std::vector<double> x_grid;  // scaled positions
    std::vector<double> t_grid;  // seconds
    std::vector<double> v;       // Nx x Nt acceleration factors
    std::vector<double> lol;     // Nx x Nt cumulative equivalent minutes

    std::size_t nx() const { return x_grid.size(); }
    std::size_t nt() const { return t_grid.size(); }
    double v_at(std::size_t ix, std::size_t it) const { return v[ix * nt() + it]; }
    double lol_at(std::size_t ix, std::size_t it) const { return lol[ix * nt() + it]; }
};

namespace detail {

inline void require_uniform_grid(const std::vector<double>& t, double& dt) {
    if (t.size() < 2) throw std::runtime_error("ageing: grid needs at least 2 samples");
    dt = t[1] - t[0];
    for (std::size_t i = 1; i + 1 < t.size(); ++i)
        if (std::abs(t[i + 1] - t[i] - dt) > 1e-6 * std::max(dt, 1.0))
            throw std::runtime_error("ageing: time grid must be uniform");
}

}  // namespace detail

/// Spatio-temporal winding temperature: the space-independent hotspot rise
/// from the IEC recursion added onto every spatial row of the oil field.
/// Grid times are matched to the series samples by linear interpolation of
/// the rise trajectory.
inline TemperatureField winding_field(const TemperatureField& oil, const OperatingSeries& series,
                                      const IecParams& iec) {
    oil.validate_shape();
    const auto traj = hst_series(series, iec);
    const double duration = series.duration();
    if (oil.t_grid.front() > duration + 1e-6 || oil.t_grid.back() < -1e-6)
        throw std::runtime_error("winding_field: oil grid and series time ranges are disjoint");

    auto rise_at = [&](double t) {
        const double pos = t / series.dt;
        if (pos <= 0.0) return traj.rise_at(0);
        const auto i = static_cast<std::size_t>(pos);
        if (i >= series.size() - 1) return traj.rise_at(series.size() - 1);
        const double w = pos - static_cast<double>(i);
        return traj.rise_at(i) + w * (traj.rise_at(i + 1) - traj.rise_at(i));
    };

    TemperatureField w = oil;
    for (std::size_t it = 0; it < w.nt(); ++it) {
        const double rise = rise_at(w.t_grid[it]);
        for (std::size_t ix = 0; ix < w.nx(); ++ix) w.at(ix, it) += rise;
    }
    return w;
}

/// Ageing factors and cumulative loss of life over a winding-temperature
/// field; each step contributes V * dt/60 equivalent minutes.
inline AgeingField ageing_field(const TemperatureField& winding) {
    winding.validate_shape();
    AgeingField a;
    a.x_grid = winding.x_grid;
    a.t_grid = winding.t_grid;
    double dt = 0.0;
    detail::require_uniform_grid(a.t_grid, dt);
    const std::size_t nx = a.nx(), nt = a.nt();
    a.v.resize(nx * nt);
    a.lol.resize(nx * nt);
    const double weight = dt / 60.0;
    for (std::size_t ix = 0; ix < nx; ++ix) {
        double acc = 0.0;
        for (std::size_t it = 0; it < nt; ++it) {
            const double v = ageing_factor(winding.at(ix, it));
            a.v[ix * nt + it] = v;
            acc += v * weight;
            a.lol[ix * nt + it] = acc;
        }
    }
    return a;
}

/// Instantaneous spatial maxima: for each time, the max over x and the
/// position attaining it (ties resolved to the smallest x).
struct SpatialMax {
    std::vector<double> value;
    std::vector<double> position;  // scaled x of the maximum
};

inline SpatialMax max_over_space(const TemperatureField& field) {
    field.validate_shape();
    SpatialMax m;
    m.value.resize(field.nt());
    m.position.resize(field.nt());
    for (std::size_t it = 0; it < field.nt(); ++it) {
        double best = field.at(0, it);
        std::size_t arg = 0;
        for (std::size_t ix = 1; ix < field.nx(); ++ix)
            if (field.at(ix, it) > best) {
                best = field.at(ix, it);
                arg = ix;
            }
        m.value[it] = best;
        m.position[it] = field.x_grid[arg];
    }
    return m;
}

inline SpatialMax max_over_space(const AgeingField& field) {
    SpatialMax m;
    m.value.resize(field.nt());
    m.position.resize(field.nt());
    for (std::size_t it = 0; it < field.nt(); ++it) {
        double best = field.v_at(0, it);
        std::size_t arg = 0;
        for (std::size_t ix = 1; ix < field.nx(); ++ix)
            if (field.v_at(ix, it) > best) {
                best = field.v_at(ix, it);
                arg = ix;
            }
        m.value[it] = best;
        m.position[it] = field.x_grid[arg];
    }
    return m;
}

/// Synthesizes fiber-optic channels by sampling a winding field at the given
/// fractional heights (linear interpolation in x), plus optional Gaussian
/// noise. The field's time grid must match the series samples.
inline OperatingSeries synthesize_fos(const OperatingSeries& series,
                                      const TemperatureField& winding,
                                      const std::vector<double>& heights, double noise,
                                      std::uint64_t seed) {
    series.validate();
    winding.validate_shape();
    if (winding.nt() != series.size())
        throw std::runtime_error("synthesize_fos: field grid does not match the series sampling");
    OperatingSeries out = series;
    out.fos.clear();
    Rng rng(seed);
    for (double h : heights) {
        FosChannel ch;
        ch.height = h;
        ch.theta.resize(series.size());
        for (std::size_t it = 0; it < series.size(); ++it) {
            double v = winding.interp_x(h, it);
            if (noise > 0.0) v += noise * rng.normal();
            ch.theta[it] = v;
        }
        out.fos.push_back(std::move(ch));
    }
    out.validate();
    return out;
}

/// Side-by-side ageing assessment of the three estimation configurations:
/// fiber-optic ground truth, the spatio-temporal field model, and the
/// space-agnostic IEC hotspot chain.
struct AgeingComparison {
    std::vector<double> t;  // seconds
    std::vector<double> v_fos, v_pinn, v_iec;
    std::vector<double> lol_fos, lol_pinn, lol_iec;  // cumulative minutes
    std::vector<double> e_v_pinn, e_v_iec;           // instantaneous (V_fos-V)/V_fos
    double lol_rel_err_pinn = 0.0;                   // end-of-horizon
    double lol_rel_err_iec = 0.0;
};

inline AgeingComparison compare_configurations(const TemperatureField& oil,
                                               const OperatingSeries& series,
                                               const IecParams& iec) {
    series.validate();
    if (series.fos.empty())
        throw std::runtime_error("compare_configurations: series carries no fiber-optic channels");
    if (oil.nt() != series.size())
        throw std::runtime_error("compare_configurations: field grid does not match the series");
    for (std::size_t it = 0; it < oil.nt(); ++it)
        if (std::abs(oil.t_grid[it] - series.dt * static_cast<double>(it)) > 1e-6 * series.dt)
            throw std::runtime_error("compare_configurations: field times must lie on the series grid");

    const std::size_t n = series.size();
    AgeingComparison cmp;
    cmp.t = oil.t_grid;

    // ground truth: hottest fiber-optic reading per instant
    cmp.v_fos.resize(n);
    for (std::size_t it = 0; it < n; ++it) {
        double hottest = series.fos[0].theta[it];
        for (const auto& ch : series.fos) hottest = std::max(hottest, ch.theta[it]);
        cmp.v_fos[it] = ageing_factor(hottest);
    }

    // field model: spatial maximum of the winding field per instant
    const auto winding = winding_field(oil, series, iec);
    const auto wmax = max_over_space(winding);
    cmp.v_pinn.resize(n);
    for (std::size_t it = 0; it < n; ++it) cmp.v_pinn[it] = ageing_factor(wmax.value[it]);

    // IEC chain: hotspot from the top-oil series alone
    const auto traj = hst_series(series, iec);
    cmp.v_iec.resize(n);
    for (std::size_t it = 0; it < n; ++it) cmp.v_iec[it] = ageing_factor(traj.theta_h[it]);

    cmp.lol_fos = lol_temporal(cmp.v_fos, series.dt);
    cmp.lol_pinn = lol_temporal(cmp.v_pinn, series.dt);
    cmp.lol_iec = lol_temporal(cmp.v_iec, series.dt);

    cmp.e_v_pinn.resize(n);
    cmp.e_v_iec.resize(n);
    for (std::size_t it = 0; it < n; ++it) {
        cmp.e_v_pinn[it] = (cmp.v_fos[it] - cmp.v_pinn[it]) / cmp.v_fos[it];
        cmp.e_v_iec[it] = (cmp.v_fos[it] - cmp.v_iec[it]) / cmp.v_fos[it];
    }
    cmp.lol_rel_err_pinn = (cmp.lol_fos.back() - cmp.lol_pinn.back()) / cmp.lol_fos.back();
    cmp.lol_rel_err_iec = (cmp.lol_fos.back() - cmp.lol_iec.back()) / cmp.lol_fos.back();
    return cmp;
}

}  // namespace pinntherm
