#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "pinntherm/field.hpp"
#include "pinntherm/heat_pde.hpp"
#include "pinntherm/rng.hpp"
#include "pinntherm/series.hpp"

using namespace pinntherm;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

// parameters used by the verification scenarios; chosen so the field stays in
// a sane range and spatial truncation dominates the error budget
PdeParams mms_params() {
    PdeParams p;
    p.alpha = 1e-6;
    p.k = 0.12;
    p.h = 20.0;
    p.p0 = 842.0;
    p.mu = 9800.0;
    p.v_eff = 8.0;
    p.height = 1.0;
    return p;
}

OperatingSeries one_day_series(const MmsTarget& target, const PdeParams& params) {
    return mms_series(target, params, 60.0, 1441);
}

}  // namespace

TEST_CASE("constant boundaries and no sources give a constant field") {
    PdeParams p;
    p.alpha = 1e-6;
    p.k = 0.12;
    p.h = 0.0;
    p.p0 = 0.0;
    p.mu = 0.0;
    OperatingSeries s;
    s.t0 = 0.0;
    s.dt = 60.0;
    s.k.assign(100, 0.0);
    s.theta_a.assign(100, 33.0);
    s.theta_to.assign(100, 33.0);
    const auto field = solve_pde(s, p, {.nx = 21});
    for (double v : field.values) REQUIRE(v == Catch::Approx(33.0).epsilon(1e-13));
}

TEST_CASE("manufactured solution is reproduced within 1e-4 at nx=201") {
    const auto params = mms_params();
    const auto target = make_mms_target(1, params, 86400.0);
    const auto series = one_day_series(target, params);
    const double err = mms_error(target, series, params, 201);
    INFO("L_inf error " << err);
    CHECK(err < 1e-4);
}

TEST_CASE("spatial convergence order is close to 2") {
    const auto params = mms_params();
    const auto target = make_mms_target(1, params, 86400.0);
    const auto series = one_day_series(target, params);
    const auto [errors, orders] = convergence_study(series, params, {26, 51, 101, 201}, 1, 2);
    INFO("errors " << errors[0] << " " << errors[1] << " " << errors[2] << " " << errors[3]);
    for (double order : orders) {
        INFO("observed order " << order);
        CHECK(order > 1.85);
        CHECK(order < 2.15);
    }
}

TEST_CASE("convergence study rejects malformed grid lists") {
    const auto params = mms_params();
    const auto target = make_mms_target(1, params, 3600.0);
    const auto series = mms_series(target, params, 60.0, 61);
    CHECK_THROWS(convergence_study(series, params, {26, 26, 51}));
    CHECK_THROWS(convergence_study(series, params, {26, 51}));
}

TEST_CASE("steady state matches the analytic two-point boundary value solution") {
    PdeParams p;
    p.alpha = 1e-3;  // fast relaxation so the run reaches steady state
    p.k = 0.5;
    p.h = 2.0;
    p.p0 = 400.0;
    p.mu = 600.0;
    p.v_eff = 1.0;
    const double k_load = 0.8;
    const double theta_a0 = 18.0, theta_to0 = 46.0;

    OperatingSeries s;
    s.t0 = 0.0;
    s.dt = 10.0;
    const std::size_t n = 1000;  // 10'000 s, tau = rho_cp/h = 250 s
    s.k.assign(n, k_load);
    s.theta_a.assign(n, theta_a0);
    s.theta_to.assign(n, theta_to0);

    const std::size_t nx = 101;
    const auto field = solve_pde(s, p, {.nx = nx});

    // closed form of k theta'' + S0 - h (theta - theta_a) = 0 with the
    // Dirichlet values: particular level plus sinh boundary corrections
    const double s0 = (p.p0 + k_load * k_load * p.mu) / p.v_eff;
    const double level = theta_a0 + s0 / p.h;
    const double lam = std::sqrt(p.h / p.k);
    const double u0 = theta_a0 - level, u1 = theta_to0 - level;
    auto analytic = [&](double x) {
        return level + (u0 * std::sinh(lam * (p.height - x)) + u1 * std::sinh(lam * x)) /
                           std::sinh(lam * p.height);
    };
    for (std::size_t ix = 0; ix < nx; ++ix) {
        const double x = field.x_grid[ix] * p.height;
        REQUIRE(field.at(ix, n - 1) == Catch::Approx(analytic(x)).margin(5e-3));
    }
}

TEST_CASE("homogeneous problems obey the discrete maximum principle") {
    PdeParams p;
    p.alpha = 5e-6;
    p.k = 0.2;
    p.h = 0.0;
    p.p0 = 0.0;
    p.mu = 0.0;
    Rng rng(17);
    OperatingSeries s;
    s.t0 = 0.0;
    s.dt = 60.0;
    for (int i = 0; i < 300; ++i) {
        s.k.push_back(0.0);
        s.theta_a.push_back(rng.uniform(10.0, 30.0));
        s.theta_to.push_back(rng.uniform(35.0, 60.0));
    }
    PdeSolveOptions opts;
    opts.nx = 31;
    std::vector<double> init(31);
    for (auto& v : init) v = rng.uniform(5.0, 70.0);
    init.front() = s.theta_a[0];
    init.back() = s.theta_to[0];
    opts.initial_profile = init;

    const auto field = solve_pde(s, p, opts);
    double lo = 1e300, hi = -1e300;
    for (double v : init) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    for (double v : s.theta_a) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    for (double v : s.theta_to) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    for (double v : field.values) {
        REQUIRE(v <= hi + 1e-9);
        REQUIRE(v >= lo - 1e-9);
    }
}

TEST_CASE("boundary rows reproduce the driving series exactly") {
    const auto s = synthesize_profile(1, 60.0, {}, 4);
    PdeParams p = mms_params();
    const auto field = solve_pde(s, p, {.nx = 21});
    for (std::size_t it = 0; it < field.nt(); ++it) {
        REQUIRE(field.at(0, it) == s.theta_a[it]);
        REQUIRE(field.at(20, it) == s.theta_to[it]);
    }
}

TEST_CASE("solve_pde is deterministic") {
    const auto s = synthesize_profile(1, 60.0, {}, 9);
    const auto a = solve_pde(s, mms_params(), {.nx = 41});
    const auto b = solve_pde(s, mms_params(), {.nx = 41});
    CHECK(a.values == b.values);
    CHECK(field_checksum(a) == field_checksum(b));
}

TEST_CASE("mms_source closed forms") {
    const auto params = mms_params();

    SECTION("constant target reduces to minus the model source") {
        MmsTarget constant;
        constant.theta = [](double, double) { return 40.0; };
        constant.theta_t = [](double, double) { return 0.0; };
        constant.theta_xx = [](double, double) { return 0.0; };
        const double pk = 500.0, theta_a = 22.0;
        const double expect = -(params.p0 + pk) / params.v_eff + params.h * (40.0 - theta_a);
        CHECK(mms_source(constant, params, 0.3, 10.0, pk, theta_a) ==
              Catch::Approx(expect).epsilon(1e-13));
    }

    SECTION("sine target carries the (k pi^2 - rho cp / T) modal term") {
        // with unit height and duration the sine component of target 1
        // contributes (k*pi^2 - rho_cp/T) * 10 sin(pi x) e^{-t}
        PdeParams p = params;
        p.height = 1.0;
        const double duration = 1.0;
        const auto target = make_mms_target(1, p, duration);
        const double x = 0.37, t = 0.42;
        const double pi = 3.14159265358979323846;
        const double sine = 25.0 * std::sin(pi * x) * std::exp(-t);
        // hand-computed pieces: sine mode + lift time derivative - model source
        const double a1 = 4.0, b1 = 6.0;
        const double da = a1 * 2.0 * pi * std::cos(2.0 * pi * t);
        const double db = -b1 * 2.0 * pi * std::sin(2.0 * pi * t);
        const double lift_t = da * (1.0 - x) + db * x;
        const double pk = 777.0, theta_a = 19.0;
        const double q_model = (p.p0 + pk) / p.v_eff - p.h * (target.theta(x, t) - theta_a);
        const double expect =
            (p.k * pi * pi - p.rho_cp()) * sine + p.rho_cp() * lift_t - q_model;
        CHECK(mms_source(target, p, x, t, pk, theta_a) == Catch::Approx(expect).epsilon(1e-10));
    }

    SECTION("polynomial target spot value") {
        PdeParams p = params;
        const auto target = make_mms_target(2, p, 86400.0);
        // at t=0: theta* = 8 x(1-x) * 3 + 25 + 15x ; theta*_t = 0 ;
        // theta*_xx = -48
        const double x = 0.5;
        CHECK(target.theta(x, 0.0) == Catch::Approx(38.5).epsilon(1e-13));
        const double pk = 0.0, theta_a = 20.0;
        const double expect = -p.k * (-48.0) -
                              ((p.p0 + pk) / p.v_eff - p.h * (38.5 - theta_a));
        CHECK(mms_source(target, p, x, 0.0, pk, theta_a) == Catch::Approx(expect).epsilon(1e-12));
    }

    SECTION("unknown target id is rejected") {
        CHECK_THROWS(make_mms_target(99, params, 1.0));
    }
}

TEST_CASE("field round-trips through CSV and binary formats") {
    const auto s = synthesize_profile(1, 600.0, {}, 31);
    const auto field = solve_pde(s, mms_params(), {.nx = 15});

    SECTION("binary") {
        const auto path = temp_path("pinntherm_field.thf");
        write_field_binary(field, path);
        const auto back = read_field_binary(path);
        CHECK(back.x_grid == field.x_grid);
        CHECK(back.t_grid == field.t_grid);
        CHECK(back.values == field.values);
    }
    SECTION("csv") {
        const auto path = temp_path("pinntherm_field.csv");
        write_field_csv(field, path);
        const auto back = read_field_csv(path);
        CHECK(back.x_grid == field.x_grid);
        CHECK(back.t_grid == field.t_grid);
        CHECK(back.values == field.values);
    }
    SECTION("binary rejects a bad magic") {
        const auto path = temp_path("pinntherm_bad.thf");
        std::ofstream out(path, std::ios::binary);
        out << "NOPE1234";
        out.close();
        CHECK_THROWS(read_field_binary(path));
    }
}

TEST_CASE("solve_pde validates its inputs") {
    const auto s = synthesize_profile(1, 600.0, {}, 2);
    CHECK_THROWS(solve_pde(s, mms_params(), {.nx = 5}));
    PdeParams bad = mms_params();
    bad.alpha = 0.0;
    CHECK_THROWS(solve_pde(s, bad, {.nx = 21}));
}
