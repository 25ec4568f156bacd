#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pinntherm/field.hpp"

namespace pinntherm {

namespace detail {

inline void require_same_grid(const TemperatureField& a, const TemperatureField& b) {
    if (a.nx() != b.nx() || a.nt() != b.nt())
        throw std::runtime_error("metrics: fields live on different grids");
}

}  // namespace detail

/// Relative L2 error between a predicted and a reference field.
inline double gamma2(const TemperatureField& predicted, const TemperatureField& reference) {
    detail::require_same_grid(predicted, reference);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < reference.values.size(); ++i) {
        const double d = predicted.values[i] - reference.values[i];
        num += d * d;
        den += reference.values[i] * reference.values[i];
    }
    if (den == 0.0) throw std::runtime_error("gamma2: reference field has zero norm");
    return std::sqrt(num) / std::sqrt(den);
}

/// Elementwise relative error (u - u_hat)/u with zero-truth samples masked.
struct RelativeErrorSeries {
    std::vector<double> value;  // defined where mask is true
    std::vector<bool> mask;
};

inline RelativeErrorSeries relative_error_series(const std::vector<double>& truth,
                                                 const std::vector<double>& estimate) {
    if (truth.size() != estimate.size())
        throw std::runtime_error("relative_error_series: length mismatch");
    RelativeErrorSeries out;
    out.value.assign(truth.size(), 0.0);
    out.mask.assign(truth.size(), false);
    bool any = false;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] != 0.0) {
            out.value[i] = (truth[i] - estimate[i]) / truth[i];
            out.mask[i] = true;
            any = true;
        }
    }
    if (!any) throw std::runtime_error("relative_error_series: truth is identically zero");
    return out;
}

/// Per-slice relative L2 errors along each axis plus their running means.
struct ErrorProfiles {
    std::vector<double> per_time;        // per t column
    std::vector<double> per_time_cum;    // running mean of per_time
    std::vector<double> per_space;       // per x row
    std::vector<double> per_space_cum;   // running mean of per_space
};

inline ErrorProfiles error_profiles(const TemperatureField& predicted,
                                    const TemperatureField& reference) {
    detail::require_same_grid(predicted, reference);
    const std::size_t nx = reference.nx(), nt = reference.nt();
    ErrorProfiles prof;
    prof.per_time.resize(nt);
    prof.per_space.resize(nx);
    for (std::size_t it = 0; it < nt; ++it) {
        double num = 0.0, den = 0.0;
        for (std::size_t ix = 0; ix < nx; ++ix) {
            const double d = predicted.at(ix, it) - reference.at(ix, it);
            num += d * d;
            den += reference.at(ix, it) * reference.at(ix, it);
        }
        prof.per_time[it] = den > 0.0 ? std::sqrt(num / den) : 0.0;
    }
    for (std::size_t ix = 0; ix < nx; ++ix) {
        double num = 0.0, den = 0.0;
        for (std::size_t it = 0; it < nt; ++it) {
            const double d = predicted.at(ix, it) - reference.at(ix, it);
            num += d * d;
            den += reference.at(ix, it) * reference.at(ix, it);
        }
        prof.per_space[ix] = den > 0.0 ? std::sqrt(num / den) : 0.0;
    }
    auto running_mean = [](const std::vector<double>& v) {
        std::vector<double> out(v.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            acc += v[i];
            out[i] = acc / static_cast<double>(i + 1);
        }
        return out;
    };
    prof.per_time_cum = running_mean(prof.per_time);
    prof.per_space_cum = running_mean(prof.per_space);
    return prof;
}

/// Pointwise mean and sample standard deviation over repeated runs.
struct EnsembleStats {
    TemperatureField mean;
    TemperatureField stddev;
    std::size_t runs = 0;      // completed runs included
    std::size_t excluded = 0;  // aborted runs
};

/// Order-independent aggregation: runs register under their run index, and
/// the reduction always iterates indices in ascending order, so the stats are
/// bit-identical under any permutation of completion order.
class EnsembleAccumulator {
public:
    explicit EnsembleAccumulator(std::size_t expected_runs) : fields_(expected_runs) {}

    void add(std::size_t run_index, TemperatureField field) {
        if (run_index >= fields_.size())
            throw std::runtime_error("ensemble: run index out of range");
        if (fields_[run_index].has_value())
            throw std::runtime_error("ensemble: duplicate run index");
        fields_[run_index] = std::move(field);
    }

    void mark_excluded(std::size_t) { ++excluded_; }

    EnsembleStats finalize() const {
        const TemperatureField* first = nullptr;
        std::size_t m = 0;
        for (const auto& f : fields_)
            if (f.has_value()) {
                if (!first) first = &*f;
                ++m;
            }
        if (m < 2) throw std::runtime_error("ensemble: need at least 2 completed runs");

        EnsembleStats stats;
        stats.runs = m;
        stats.excluded = excluded_;
        stats.mean = *first;
        std::fill(stats.mean.values.begin(), stats.mean.values.end(), 0.0);
        for (const auto& f : fields_)
            if (f.has_value()) {
                detail::require_same_grid(*f, stats.mean);
                for (std::size_t i = 0; i < stats.mean.values.size(); ++i)
                    stats.mean.values[i] += f->values[i];
            }
        const double inv_m = 1.0 / static_cast<double>(m);
        for (auto& v : stats.mean.values) v *= inv_m;

        stats.stddev = stats.mean;
        std::fill(stats.stddev.values.begin(), stats.stddev.values.end(), 0.0);
        for (const auto& f : fields_)
            if (f.has_value())
                for (std::size_t i = 0; i < stats.stddev.values.size(); ++i) {
                    const double d = f->values[i] - stats.mean.values[i];
                    stats.stddev.values[i] += d * d;
                }
        const double inv_m1 = 1.0 / static_cast<double>(m - 1);
        for (auto& v : stats.stddev.values) v = std::sqrt(v * inv_m1);
        return stats;
    }

private:
    std::vector<std::optional<TemperatureField>> fields_;
    std::size_t excluded_ = 0;
};

/// Repeated-training uncertainty assessment: runs the supplied callable for
/// seeds base..base+m-1, excluding runs that abort, and aggregates pointwise
/// statistics. RunFn: (std::uint64_t seed) -> TemperatureField, may throw.
template <typename RunFn>
EnsembleStats ensemble_run(std::size_t m, std::uint64_t base_seed, RunFn&& run,
                           std::vector<std::string>* failures = nullptr) {
    if (m < 2) throw std::runtime_error("ensemble: m must be >= 2");
    EnsembleAccumulator acc(m);
    for (std::size_t i = 0; i < m; ++i) {
        try {
            acc.add(i, run(base_seed + i));
        } catch (const std::exception& e) {
            acc.mark_excluded(i);
            if (failures) failures->push_back(e.what());
        }
    }
    return acc.finalize();
}

}  // namespace pinntherm
