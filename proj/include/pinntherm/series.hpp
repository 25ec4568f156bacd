#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "pinntherm/rng.hpp"

namespace pinntherm {

/// Fiber-optic winding temperature channel at a fixed fractional height.
struct FosChannel {
    double height = 0.0;  // fractional position in (0,1)
    std::vector<double> theta;
};

/// Uniformly sampled operating record: load factor, ambient and top-oil
/// temperatures, plus optional fiber-optic winding channels.
struct OperatingSeries {
    double t0 = 0.0;  // absolute start time [s since epoch]
    double dt = 0.0;  // sample interval [s]
    std::vector<double> k;         // load factor [p.u.]
    std::vector<double> theta_a;   // ambient temperature [degC]
    std::vector<double> theta_to;  // top-oil temperature [degC]
    std::vector<FosChannel> fos;

    std::size_t size() const { return k.size(); }
    double time_at(std::size_t i) const { return t0 + dt * static_cast<double>(i); }
    double duration() const { return dt * static_cast<double>(size() - 1); }

    void validate() const {
        const std::size_t n = k.size();
        if (n < 2) throw std::runtime_error("operating series needs at least 2 samples");
        if (!(dt > 0.0)) throw std::runtime_error("operating series requires dt > 0");
        if (theta_a.size() != n || theta_to.size() != n)
            throw std::runtime_error("operating series columns have mismatched lengths");
        for (const auto& ch : fos) {
            if (ch.theta.size() != n)
                throw std::runtime_error("fos channel length mismatch");
            if (!(ch.height > 0.0 && ch.height < 1.0))
                throw std::runtime_error("fos height must lie strictly inside (0,1)");
        }
        auto all_finite = [](const std::vector<double>& v) {
            return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
        };
        if (!all_finite(theta_a) || !all_finite(theta_to))
            throw std::runtime_error("non-finite temperature sample");
        for (double v : k)
            if (!(v >= 0.0) || !std::isfinite(v))
                throw std::runtime_error("load factor must be finite and >= 0");
    }
};

/// Column-name mapping from logical fields to CSV headers.
struct CsvSchema {
    std::string timestamp = "timestamp";
    std::string k = "K";
    std::string theta_a = "theta_A";
    std::string theta_to = "theta_TO";
    struct FosColumn {
        std::string column;
        double height;
    };
    std::vector<FosColumn> fos;  // optional
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    cells.push_back(cur);
    return cells;
}

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

// days since 1970-01-01 for a civil date (Howard Hinnant's algorithm)
inline std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                         static_cast<unsigned>(d) - 1u;
    const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

/// Parses a timestamp cell: plain seconds (integer or float) or ISO-8601
/// "YYYY-MM-DD[T ]HH:MM:SS[.frac][Z]" treated as UTC.
inline double parse_timestamp(const std::string& raw) {
    const std::string s = trim(raw);
    if (s.empty()) throw std::runtime_error("empty timestamp cell");
    const bool iso = s.size() >= 10 && s[4] == '-' && s[7] == '-';
    if (!iso) {
        std::size_t pos = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &pos);
        } catch (const std::exception&) {
            throw std::runtime_error("non-numeric timestamp: '" + s + "'");
        }
        if (pos != s.size()) throw std::runtime_error("malformed timestamp: '" + s + "'");
        return v;
    }
    int y = 0, mo = 0, d = 0, h = 0, mi = 0;
    double sec = 0.0;
    char sep = 0;
    std::istringstream in(s);
    in >> y;
    in.ignore(1);
    in >> mo;
    in.ignore(1);
    in >> d;
    if (in >> sep) {
        if (sep != 'T' && sep != ' ') throw std::runtime_error("malformed ISO timestamp: '" + s + "'");
        in >> h;
        in.ignore(1);
        in >> mi;
        in.ignore(1);
        in >> sec;
        char z = 0;
        if (in >> z && z != 'Z') throw std::runtime_error("unsupported timezone in '" + s + "'");
    }
    if (y < 1 || mo < 1 || mo > 12 || d < 1 || d > 31)
        throw std::runtime_error("malformed ISO timestamp: '" + s + "'");
    return static_cast<double>(days_from_civil(y, mo, d)) * 86400.0 + h * 3600.0 + mi * 60.0 + sec;
}

inline double parse_number(const std::string& raw, std::size_t row, const std::string& col) {
    const std::string s = trim(raw);
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw std::runtime_error("non-numeric cell in column '" + col + "' at data row " +
                                 std::to_string(row));
    }
    if (pos != s.size())
        throw std::runtime_error("non-numeric cell in column '" + col + "' at data row " +
                                 std::to_string(row));
    return v;
}

}  // namespace detail

/// Loads an operating series from a header-row CSV file. Columns are located
/// by the schema map, so SCADA exports with arbitrary header names work
/// unchanged. Timestamps must be uniformly spaced (1e-6 relative tolerance).
inline OperatingSeries load_csv(const std::string& path, const CsvSchema& schema = {}) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open CSV file: " + path);

    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error("empty CSV file: " + path);
    const auto names = detail::split_csv_line(header);
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < names.size(); ++i) index[detail::trim(names[i])] = i;

    auto require = [&](const std::string& col) {
        auto it = index.find(col);
        if (it == index.end())
            throw std::runtime_error("missing column '" + col + "' in " + path);
        return it->second;
    };
    const std::size_t c_time = require(schema.timestamp);
    const std::size_t c_k = require(schema.k);
    const std::size_t c_ta = require(schema.theta_a);
    const std::size_t c_tto = require(schema.theta_to);
    std::vector<std::size_t> c_fos;
    for (const auto& f : schema.fos) c_fos.push_back(require(f.column));

    OperatingSeries series;
    for (const auto& f : schema.fos) series.fos.push_back({f.height, {}});

    std::vector<double> times;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        ++row;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() < names.size())
            throw std::runtime_error("short row " + std::to_string(row) + " in " + path);
        times.push_back(detail::parse_timestamp(cells[c_time]));
        series.k.push_back(detail::parse_number(cells[c_k], row, schema.k));
        series.theta_a.push_back(detail::parse_number(cells[c_ta], row, schema.theta_a));
        series.theta_to.push_back(detail::parse_number(cells[c_tto], row, schema.theta_to));
        for (std::size_t f = 0; f < c_fos.size(); ++f)
            series.fos[f].theta.push_back(detail::parse_number(cells[c_fos[f]], row, schema.fos[f].column));
    }
    if (times.size() < 2) throw std::runtime_error("CSV has fewer than 2 data rows: " + path);

    series.t0 = times.front();
    series.dt = times[1] - times[0];
    if (!(series.dt > 0.0)) throw std::runtime_error("timestamps must be strictly increasing");
    for (std::size_t i = 1; i + 1 < times.size(); ++i) {
        const double step = times[i + 1] - times[i];
        if (std::abs(step - series.dt) > 1e-6 * std::max(std::abs(series.dt), 1.0))
            throw std::runtime_error("non-uniform timestamp spacing at row " + std::to_string(i + 2) +
                                     " (expected dt=" + std::to_string(series.dt) + ")");
    }
    series.validate();
    return series;
}

/// Writes a series as CSV with enough digits for a bit-exact reload.
inline void write_csv(const OperatingSeries& series, const std::string& path,
                      const CsvSchema& schema = {}) {
    series.validate();
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write CSV file: " + path);
    out << schema.timestamp << ',' << schema.k << ',' << schema.theta_a << ',' << schema.theta_to;
    for (std::size_t f = 0; f < series.fos.size(); ++f) {
        out << ',' << (f < schema.fos.size() ? schema.fos[f].column : "fos" + std::to_string(f + 1));
    }
    out << '\n';
    char buf[32];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << buf;
    };
    for (std::size_t i = 0; i < series.size(); ++i) {
        put(series.time_at(i));
        out << ',';
        put(series.k[i]);
        out << ',';
        put(series.theta_a[i]);
        out << ',';
        put(series.theta_to[i]);
        for (const auto& ch : series.fos) {
            out << ',';
            put(ch.theta[i]);
        }
        out << '\n';
    }
}

/// Shape parameters for the synthetic solar-plant profile.
struct SyntheticProfileConfig {
    double peak_load = 1.0;        // daily peak load factor [p.u.], <= 1.2
    double theta_a_mean = 20.0;    // ambient daily mean [degC]
    double theta_a_amplitude = 6.0;  // ambient daily half-swing [degC]
    double top_oil_rise_rated = 18.0;  // top-oil rise over ambient at K=1 [K]
    double top_oil_tau_min = 150.0;    // first-order lag time constant [min]
    double noise = 0.0;            // gaussian noise level (K in p.u., temperatures in degC)
};

/// Generates a physically consistent synthetic operating record: zero-at-night
/// half-sine load, sinusoidal ambient, and a top-oil signal produced by a
/// first-order lag of ambient plus the K^2-driven rise. Deterministic per seed.
inline OperatingSeries synthesize_profile(int days, double dt, const SyntheticProfileConfig& cfg,
                                          std::uint64_t seed) {
    if (days < 1) throw std::runtime_error("synthesize_profile: days must be >= 1");
    if (!(dt > 0.0)) throw std::runtime_error("synthesize_profile: dt must be positive");
    if (cfg.noise < 0.0) throw std::runtime_error("synthesize_profile: negative noise level");
    if (cfg.peak_load > 1.2) throw std::runtime_error("synthesize_profile: peak load above 1.2 p.u.");

    const double day = 86400.0;
    const std::size_t n = static_cast<std::size_t>(std::llround(days * day / dt));
    const double pi = 3.14159265358979323846;

    OperatingSeries s;
    s.t0 = 0.0;
    s.dt = dt;
    s.k.resize(n);
    s.theta_a.resize(n);
    s.theta_to.resize(n);

    Rng rng(seed);
    const double tau = cfg.top_oil_tau_min * 60.0;
    double lag = cfg.theta_a_mean;  // start the lag at the night-time ambient level
    for (std::size_t i = 0; i < n; ++i) {
        const double t = dt * static_cast<double>(i);
        const double hour = std::fmod(t, day) / 3600.0;
        // solar window 06:00-18:00, peak at noon
        const double solar = std::sin(pi * (hour - 6.0) / 12.0);
        double k = cfg.peak_load * std::max(0.0, solar);
        double ta = cfg.theta_a_mean +
                    cfg.theta_a_amplitude * std::sin(2.0 * pi * (hour - 9.0) / 24.0);
        if (cfg.noise > 0.0) {
            k = std::max(0.0, k + 0.02 * cfg.noise * rng.normal());
            ta += cfg.noise * rng.normal();
        }
        const double target = ta + cfg.top_oil_rise_rated * k * k;
        lag += (dt / tau) * (target - lag);
        double tto = lag;
        if (cfg.noise > 0.0) tto += 0.5 * cfg.noise * rng.normal();
        s.k[i] = k;
        s.theta_a[i] = ta;
        s.theta_to[i] = tto;
    }
    s.validate();
    return s;
}

/// Linear-interpolation resample to dt_target. Rejects steps that violate the
/// thermal-recursion stability rule dt <= tau_min/2, where tau_min is the
/// smaller of the winding/oil time constants in seconds.
inline OperatingSeries resample_and_check(const OperatingSeries& series, double dt_target,
                                          double tau_min_seconds) {
    series.validate();
    if (!(dt_target > 0.0)) throw std::runtime_error("resample: dt_target must be positive");
    const double limit = tau_min_seconds / 2.0;
    if (dt_target > limit) {
        std::ostringstream msg;
        msg << "resample: dt_target=" << dt_target << " s exceeds tau_min/2 = " << limit << " s";
        throw std::runtime_error(msg.str());
    }
    if (dt_target == series.dt) return series;

    const double duration = series.duration();
    const std::size_t n_new = static_cast<std::size_t>(std::floor(duration / dt_target + 1e-9)) + 1;
    if (n_new < 2) throw std::runtime_error("resample: target grid has fewer than 2 samples");

    auto lerp = [&](const std::vector<double>& v, double t) {
        const double pos = t / series.dt;
        std::size_t i = static_cast<std::size_t>(std::floor(pos));
        if (i >= v.size() - 1) return v.back();
        const double w = pos - static_cast<double>(i);
        return v[i] + w * (v[i + 1] - v[i]);
    };

    OperatingSeries out;
    out.t0 = series.t0;
    out.dt = dt_target;
    out.k.resize(n_new);
    out.theta_a.resize(n_new);
    out.theta_to.resize(n_new);
    for (const auto& ch : series.fos) out.fos.push_back({ch.height, std::vector<double>(n_new)});
    for (std::size_t j = 0; j < n_new; ++j) {
        const double t = dt_target * static_cast<double>(j);
        out.k[j] = lerp(series.k, t);
        out.theta_a[j] = lerp(series.theta_a, t);
        out.theta_to[j] = lerp(series.theta_to, t);
        for (std::size_t f = 0; f < series.fos.size(); ++f)
            out.fos[f].theta[j] = lerp(series.fos[f].theta, t);
    }
    out.validate();
    return out;
}

}  // namespace pinntherm
