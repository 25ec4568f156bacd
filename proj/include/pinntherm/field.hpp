#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pinntherm/scaling.hpp"

namespace pinntherm {

/// Temperature values on a rectangular space-time grid. Positions are stored
/// in scaled units (x in [0,1], height via scaling.x_scale), times in seconds
/// from the start of the driving series, values in degC. Row-major layout:
/// values[ix * nt + it].
struct TemperatureField {
    std::vector<double> x_grid;  // Nx ascending positions in [0,1]
    std::vector<double> t_grid;  // Nt ascending times [s]
    std::vector<double> values;  // Nx x Nt, row-major
    ScalingInfo scaling;

    std::size_t nx() const { return x_grid.size(); }
    std::size_t nt() const { return t_grid.size(); }

    double& at(std::size_t ix, std::size_t it) { return values[ix * nt() + it]; }
    double at(std::size_t ix, std::size_t it) const { return values[ix * nt() + it]; }

    void validate_shape() const {
        if (x_grid.size() < 2 || t_grid.size() < 2)
            throw std::runtime_error("field: grid must be at least 2x2");
        if (values.size() != x_grid.size() * t_grid.size())
            throw std::runtime_error("field: value count does not match grid");
        for (std::size_t i = 1; i < x_grid.size(); ++i)
            if (!(x_grid[i] > x_grid[i - 1]))
                throw std::runtime_error("field: x grid must be strictly increasing");
        for (std::size_t i = 1; i < t_grid.size(); ++i)
            if (!(t_grid[i] > t_grid[i - 1]))
                throw std::runtime_error("field: t grid must be strictly increasing");
    }

    /// Linear interpolation along x at a grid time index.
    double interp_x(double x, std::size_t it) const {
        if (x <= x_grid.front()) return at(0, it);
        if (x >= x_grid.back()) return at(nx() - 1, it);
        std::size_t lo = 0, hi = nx() - 1;
        while (hi - lo > 1) {
            const std::size_t mid = (lo + hi) / 2;
            (x_grid[mid] <= x ? lo : hi) = mid;
        }
        const double w = (x - x_grid[lo]) / (x_grid[lo + 1] - x_grid[lo]);
        return at(lo, it) + w * (at(lo + 1, it) - at(lo, it));
    }
};

/// Long-format CSV export (x,t,theta), x-major, full double precision.
inline void write_field_csv(const TemperatureField& f, const std::string& path) {
    f.validate_shape();
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write field CSV: " + path);
    out << "x,t,theta\n";
    char buf[96];
    for (std::size_t ix = 0; ix < f.nx(); ++ix)
        for (std::size_t it = 0; it < f.nt(); ++it) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", f.x_grid[ix], f.t_grid[it],
                          f.at(ix, it));
            out << buf;
        }
}

inline TemperatureField read_field_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open field CSV: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty field CSV: " + path);

    TemperatureField f;
    std::vector<double> xs, ts, vals;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        double x, t, v;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &x, &t, &v) != 3)
            throw std::runtime_error("malformed field CSV row: " + line);
        xs.push_back(x);
        ts.push_back(t);
        vals.push_back(v);
    }
    if (vals.empty()) throw std::runtime_error("field CSV has no data rows: " + path);
    // x-major layout: the t grid is the leading run with constant x
    std::size_t nt = 1;
    while (nt < xs.size() && xs[nt] == xs[0]) ++nt;
    if (xs.size() % nt != 0) throw std::runtime_error("field CSV is not a full grid: " + path);
    const std::size_t nx = xs.size() / nt;
    f.t_grid.assign(ts.begin(), ts.begin() + static_cast<std::ptrdiff_t>(nt));
    f.x_grid.resize(nx);
    for (std::size_t ix = 0; ix < nx; ++ix) f.x_grid[ix] = xs[ix * nt];
    f.values = std::move(vals);
    f.validate_shape();
    return f;
}

/// Compact binary dump. Layout (little-endian throughout):
///   magic "THF1" | nx u64 | nt u64 | x grid | t grid | values row-major,
/// all floating-point payload as 64-bit IEEE doubles. Round-trips bit-exactly.
inline void write_field_binary(const TemperatureField& f, const std::string& path) {
    f.validate_shape();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write field binary: " + path);
    out.write("THF1", 4);
    const std::uint64_t nx = f.nx(), nt = f.nt();
    out.write(reinterpret_cast<const char*>(&nx), 8);
    out.write(reinterpret_cast<const char*>(&nt), 8);
    auto write_doubles = [&](const std::vector<double>& v) {
        out.write(reinterpret_cast<const char*>(v.data()),
                  static_cast<std::streamsize>(v.size() * sizeof(double)));
    };
    write_doubles(f.x_grid);
    write_doubles(f.t_grid);
    write_doubles(f.values);
    if (!out) throw std::runtime_error("write failure on field binary: " + path);
}

inline TemperatureField read_field_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open field binary: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "THF1", 4) != 0)
        throw std::runtime_error("bad magic in field binary: " + path);
    std::uint64_t nx = 0, nt = 0;
    in.read(reinterpret_cast<char*>(&nx), 8);
    in.read(reinterpret_cast<char*>(&nt), 8);
    if (!in || nx < 2 || nt < 2 || nx * nt > (1ULL << 32))
        throw std::runtime_error("bad dimensions in field binary: " + path);
    TemperatureField f;
    f.x_grid.resize(nx);
    f.t_grid.resize(nt);
    f.values.resize(nx * nt);
    auto read_doubles = [&](std::vector<double>& v) {
        in.read(reinterpret_cast<char*>(v.data()),
                static_cast<std::streamsize>(v.size() * sizeof(double)));
    };
    read_doubles(f.x_grid);
    read_doubles(f.t_grid);
    read_doubles(f.values);
    if (!in) throw std::runtime_error("truncated field binary: " + path);
    f.validate_shape();
    return f;
}

/// FNV-1a hash of the raw value bytes; used to fingerprint deterministic
/// artifacts in metadata files.
inline std::uint64_t field_checksum(const TemperatureField& f) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&](const std::vector<double>& v) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(v.data());
        for (std::size_t i = 0; i < v.size() * sizeof(double); ++i) {
            h ^= bytes[i];
            h *= 1099511628211ULL;
        }
    };
    mix(f.x_grid);
    mix(f.t_grid);
    mix(f.values);
    return h;
}

}  // namespace pinntherm
