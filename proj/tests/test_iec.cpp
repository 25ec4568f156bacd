#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pinntherm/iec.hpp"
#include "pinntherm/rng.hpp"
#include "pinntherm/series.hpp"

using namespace pinntherm;

namespace {

OperatingSeries constant_series(std::size_t n, double k, double theta_to, double dt = 60.0) {
    OperatingSeries s;
    s.t0 = 0.0;
    s.dt = dt;
    s.k.assign(n, k);
    s.theta_a.assign(n, 20.0);
    s.theta_to.assign(n, theta_to);
    return s;
}

}  // namespace

TEST_CASE("hst_initial matches the steady-state formulas") {
    IecParams p;

    SECTION("zero load leaves hotspot at top-oil") {
        auto [th, d1, d2] = hst_initial(0.0, 25.0, p);
        CHECK(th == 25.0);
        CHECK(d1 == 0.0);
        CHECK(d2 == 0.0);
    }
    SECTION("rated load adds the rated rise") {
        auto [th, d1, d2] = hst_initial(1.0, 30.0, p);
        CHECK(th == Catch::Approx(30.0 + 15.1).epsilon(1e-12));
        // k21 * delta_theta_hr = 2.32 * 15.1
        CHECK(d1 == Catch::Approx(35.032).epsilon(1e-12));
        CHECK(d2 == Catch::Approx(1.32 * 15.1).epsilon(1e-12));
    }
}

TEST_CASE("hst_rise_step fixed point and first-step value") {
    IecParams p;

    SECTION("steady state is a fixed point") {
        const double ky = std::pow(0.7, p.y);
        std::pair<double, double> state{p.beta1() * ky, p.beta2() * ky};
        const auto next = hst_rise_step(state, 0.7, p);
        CHECK(next.first == Catch::Approx(state.first).epsilon(1e-14));
        CHECK(next.second == Catch::Approx(state.second).epsilon(1e-14));
    }
    SECTION("first step from cold at rated load") {
        // upsilon1*beta1 = (60 / (2.05 * 585)) * 35.032
        const auto next = hst_rise_step({0.0, 0.0}, 1.0, p);
        CHECK(next.first == Catch::Approx(1.7526).margin(2e-4));
    }
    SECTION("zero load decays geometrically") {
        std::pair<double, double> state{10.0, 5.0};
        const auto next = hst_rise_step(state, 0.0, p);
        CHECK(next.first == Catch::Approx(10.0 * (1.0 - p.upsilon1())).epsilon(1e-13));
        CHECK(next.second == Catch::Approx(5.0 * (1.0 - p.upsilon2())).epsilon(1e-13));
    }
}

TEST_CASE("hst_series converges to the steady state under constant input") {
    IecParams p;
    // 10 oil time constants of samples
    const std::size_t n = static_cast<std::size_t>(10.0 * p.tau_to_s() / p.dt) + 1;
    const double k = 0.9;
    const auto s = constant_series(n, k, 42.0);
    const auto traj = hst_series(s, p);
    const double expected = 42.0 + p.delta_theta_hr * std::pow(k, p.y);
    CHECK(std::abs(traj.theta_h.back() - expected) < 0.01);
}

TEST_CASE("hst_series with zero load tracks top-oil exactly") {
    IecParams p;
    const auto s = constant_series(200, 0.0, 25.0);
    const auto traj = hst_series(s, p);
    for (double v : traj.theta_h) CHECK(v == 25.0);
}

TEST_CASE("hst_series equals an independent scalar recursion") {
    IecParams p;
    const auto s = synthesize_profile(1, 60.0, {}, 11);
    const auto traj = hst_series(s, p);

    // independent recomputation, written directly from the difference equations
    const double tau_w = p.tau_w_min * 60.0, tau_to = p.tau_to_min * 60.0;
    const double u1 = p.dt / (p.k22 * tau_w);
    const double u2 = p.k22 * p.dt / tau_to;
    const double b1 = p.k21 * p.delta_theta_hr;
    const double b2 = (p.k21 - 1.0) * p.delta_theta_hr;
    double d1 = b1 * std::pow(s.k[0], p.y);
    double d2 = b2 * std::pow(s.k[0], p.y);
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i > 0) {
            const double ky = std::pow(s.k[i], p.y);
            d1 += u1 * (b1 * ky - d1);
            d2 += u2 * (b2 * ky - d2);
        }
        const double theta = s.theta_to[i] + d1 - d2;
        REQUIRE(traj.theta_h[i] == Catch::Approx(theta).epsilon(1e-14));
        REQUIRE(traj.rise_at(i) == Catch::Approx(d1 - d2).epsilon(1e-14));
    }
}

TEST_CASE("hst_series is monotone in the load forcing") {
    IecParams p;
    auto lo = synthesize_profile(1, 60.0, {}, 21);
    auto hi = lo;
    for (auto& v : hi.k) v = std::min(1.2, v + 0.1);
    const auto tl = hst_series(lo, p);
    const auto th = hst_series(hi, p);
    for (std::size_t i = 0; i < lo.size(); ++i) REQUIRE(th.theta_h[i] >= tl.theta_h[i]);
}

TEST_CASE("hst_series rejects a dt mismatch") {
    IecParams p;
    p.dt = 30.0;
    const auto s = constant_series(10, 0.5, 40.0, 60.0);
    CHECK_THROWS(hst_series(s, p));
}

TEST_CASE("iec stability rule rejects large steps") {
    IecParams p;
    p.dt = 300.0;  // tau_w/2 = 292.5 s
    CHECK_THROWS(p.validate());
    p.dt = 292.0;
    CHECK_NOTHROW(p.validate());
}

TEST_CASE("ageing factor doubles every 6 degrees") {
    CHECK(ageing_factor(98.0) == 1.0);
    CHECK(ageing_factor(104.0) == Catch::Approx(2.0).epsilon(1e-13));
    CHECK(ageing_factor(92.0) == Catch::Approx(0.5).epsilon(1e-13));
    for (double theta = -40.0; theta <= 200.0; theta += 0.7) {
        const double lhs = ageing_factor(theta + 6.0);
        const double rhs = 2.0 * ageing_factor(theta);
        REQUIRE(std::abs(lhs - rhs) <= 1e-12 * rhs);
    }
}

TEST_CASE("lol_temporal accumulates equivalent minutes") {
    SECTION("unit ageing for an hour") {
        const std::vector<double> v(60, 1.0);
        const auto lol = lol_temporal(v, 60.0);
        CHECK(lol.back() == Catch::Approx(60.0).epsilon(1e-13));
    }
    SECTION("zero ageing stays zero") {
        const std::vector<double> v(10, 0.0);
        const auto lol = lol_temporal(v, 60.0);
        for (double x : lol) CHECK(x == 0.0);
    }
    SECTION("prefix sums") {
        const auto lol = lol_temporal({1.0, 2.0, 4.0}, 60.0);
        CHECK(lol == std::vector<double>{1.0, 3.0, 7.0});
    }
    SECTION("negative factor rejected") {
        CHECK_THROWS(lol_temporal({1.0, -0.5}, 60.0));
    }
}

TEST_CASE("lol_temporal is nondecreasing and additive over segments") {
    Rng rng(5);
    std::vector<double> v(500);
    for (auto& x : v) x = rng.uniform(0.0, 3.0);
    const auto lol = lol_temporal(v, 60.0);
    for (std::size_t i = 1; i < lol.size(); ++i) REQUIRE(lol[i] >= lol[i - 1]);

    const std::vector<double> head(v.begin(), v.begin() + 200);
    const std::vector<double> tail(v.begin() + 200, v.end());
    const auto lol_head = lol_temporal(head, 60.0);
    const auto lol_tail = lol_temporal(tail, 60.0);
    CHECK(lol.back() ==
          Catch::Approx(lol_head.back() + lol_tail.back()).epsilon(1e-12));
}
