#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <numeric>
#include <vector>

#include "pinntherm/heat_pde.hpp"
#include "pinntherm/pinn.hpp"
#include "pinntherm/rng.hpp"

using namespace pinntherm;

namespace {

PdeParams desk_pde() {
    PdeParams p;
    p.alpha = 2e-7;
    p.k = 0.12;
    p.h = 60.0;
    p.p0 = 842.0;
    p.mu = 9800.0;
    p.v_eff = 8.0;
    p.height = 1.0;
    return p;
}

OperatingSeries tiny_series() { return synthesize_profile(1, 600.0, {}, 3); }

}  // namespace

TEST_CASE("latin hypercube sampling is stratified and deterministic") {
    SECTION("single point") {
        const auto pts = sample_lhs(1, 7);
        REQUIRE(pts.size() == 1);
        CHECK(pts[0][0] > 0.0);
        CHECK(pts[0][0] < 1.0);
    }
    SECTION("marginal bins each hold exactly one point") {
        const std::size_t n = 100;
        const auto pts = sample_lhs(n, 11);
        std::vector<int> bins_x(n, 0), bins_t(n, 0);
        for (const auto& p : pts) {
            bins_x[static_cast<std::size_t>(p[0] * static_cast<double>(n))] += 1;
            bins_t[static_cast<std::size_t>(p[1] * static_cast<double>(n))] += 1;
        }
        for (std::size_t i = 0; i < n; ++i) {
            REQUIRE(bins_x[i] == 1);
            REQUIRE(bins_t[i] == 1);
        }
    }
    SECTION("same seed reproduces the set") {
        CHECK(sample_lhs(64, 5) == sample_lhs(64, 5));
        CHECK(sample_lhs(64, 5) != sample_lhs(64, 6));
    }
}

TEST_CASE("training sets put boundary points on the walls and interior points inside") {
    const auto series = tiny_series();
    const auto [scaled, scaling] = normalize(series, desk_pde());
    const auto sets = build_training_sets(scaled, 0.75, 500, 42);
    const std::size_t pool = 2 * series.size();
    CHECK(sets.boundary.size() ==
          static_cast<std::size_t>(std::llround(0.75 * static_cast<double>(pool))));
    for (const auto& b : sets.boundary) {
        REQUIRE((b.x == 0.0 || b.x == 1.0));
        REQUIRE(b.t >= 0.0);
        REQUIRE(b.t <= 1.0);
    }
    for (const auto& c : sets.collocation) {
        REQUIRE(c[0] > 0.0);
        REQUIRE(c[0] < 1.0);
        REQUIRE(c[1] > 0.0);
        REQUIRE(c[1] < 1.0);
    }
}

TEST_CASE("residual vanishes for the zero network without sources") {
    PdeParams pde = desk_pde();
    pde.p0 = 0.0;
    pde.h = 0.0;
    MlpModel model;
    model.widths = {2, 8, 3};
    model.params.assign(param_count(model.widths), 0.0);
    const auto [scaled, scaling] = normalize(tiny_series(), pde);
    CHECK(residual(model, 0.4, 0.5, pde, scaling) == 0.0);
}

TEST_CASE("residual matches a finite-difference reimplementation") {
    const auto pde = desk_pde();
    const auto [scaled, scaling] = normalize(tiny_series(), pde);
    const auto coeffs = ResidualCoeffs::make(pde, scaling);
    const auto model = init_params({2, 16, 16, 3}, 23);
    MlpWorkspace ws;
    ws.bind(model);
    Rng rng(31);
    const double h = 1e-5;
    for (int trial = 0; trial < 10; ++trial) {
        const double x = rng.uniform(0.1, 0.9), t = rng.uniform(0.1, 0.9);
        // independent route: numerical input derivatives + direct formula
        const auto up = forward(model, x + h, t);
        const auto um = forward(model, x - h, t);
        const auto tp = forward(model, x, t + h);
        const auto tm = forward(model, x, t - h);
        const auto u0 = forward(model, x, t);
        const double du_dt = (tp[0] - tm[0]) / (2.0 * h);
        const double d2u_dx2 = (up[0] - 2.0 * u0[0] + um[0]) / (h * h);
        const double r_indep = du_dt - coeffs.c_dxx * d2u_dx2 - coeffs.c_p0 -
                               coeffs.c_pk * u0[2] + coeffs.c_h * (u0[0] - u0[1]);
        const double r_lib = residual_scaled(eval_jet(model, x, t, ws), coeffs);
        REQUIRE(r_lib == Catch::Approx(r_indep).epsilon(1e-4));
    }
}

TEST_CASE("residual of the manufactured solution equals the injected source over k") {
    const auto pde = desk_pde();
    const auto series = tiny_series();
    const auto [scaled, scaling] = normalize(series, pde);
    const auto coeffs = ResidualCoeffs::make(pde, scaling);
    const auto target = make_mms_target(1, pde, scaling.t_scale);

    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const double xs = rng.uniform(0.05, 0.95), ts = rng.uniform(0.05, 0.95);
        const double x = scaling.unscale_x(xs), t = scaling.unscale_t(ts);

        // interpolate the series drivers at t, as the residual's data terms do
        const double pos = t / series.dt;
        const std::size_t i = std::min(static_cast<std::size_t>(pos), series.size() - 2);
        const double w = pos - static_cast<double>(i);
        const double theta_a = series.theta_a[i] + w * (series.theta_a[i + 1] - series.theta_a[i]);
        const double kf = series.k[i] + w * (series.k[i + 1] - series.k[i]);
        const double p_k = kf * kf * pde.mu;

        // encode the manufactured solution as an exactly evaluated point
        PointEval e;
        e.u[0] = scaling.scale_theta(target.theta(x, t));
        e.u[1] = scaling.scale_theta(theta_a);
        e.u[2] = scaling.scale_p(p_k);
        e.du_dt[0] = target.theta_t(x, t) * scaling.t_scale / scaling.theta_range();
        e.d2u_dx2[0] =
            target.theta_xx(x, t) * scaling.x_scale * scaling.x_scale / scaling.theta_range();

        const double r_physical = residual_scaled(e, coeffs) * coeffs.to_physical;
        const double expected = mms_source(target, pde, x, t, p_k, theta_a) / pde.k;
        REQUIRE(r_physical == Catch::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("compute_loss term arithmetic") {
    PdeParams pde = desk_pde();
    pde.p0 = 0.0;
    pde.h = 0.0;
    const auto [scaled, scaling] = normalize(tiny_series(), pde);
    const auto coeffs = ResidualCoeffs::make(pde, scaling);

    MlpModel zero;
    zero.widths = {2, 4, 3};
    zero.params.assign(param_count(zero.widths), 0.0);

    TrainingSets sets;
    sets.collocation = {{0.5, 0.5}};

    SECTION("exact fit gives zero loss") {
        sets.boundary = {{0.0, 0.1, 0.0, 0.0, 0.0}, {1.0, 0.9, 0.0, 0.0, 0.0}};
        WeightingScheme scheme;
        const auto report = compute_loss(zero, sets, scheme, coeffs);
        CHECK(report.total == 0.0);
    }
    SECTION("vanilla mean squared errors") {
        sets.boundary = {{0.0, 0.1, -1.0, 0.0, 0.0}, {1.0, 0.9, -3.0, 0.0, 0.0}};
        WeightingScheme scheme;
        const auto report = compute_loss(zero, sets, scheme, coeffs);
        CHECK(report.theta_o == Catch::Approx(5.0).epsilon(1e-14));
        CHECK(report.mse_theta_o == Catch::Approx(5.0).epsilon(1e-14));
        CHECK(report.total ==
              Catch::Approx(report.theta_o + report.p_k + report.theta_a + report.residual)
                  .epsilon(1e-12));
    }
    SECTION("self-adaptive masked sum") {
        sets.boundary = {{0.0, 0.1, -1.0, 0.0, 0.0}, {1.0, 0.9, -1.0, 0.0, 0.0}};
        WeightingScheme scheme;
        scheme.kind = SchemeKind::SelfAdaptive;
        scheme.init_state(2, 1);
        scheme.sa_theta_o = {1.0, 2.0};
        const auto report = compute_loss(zero, sets, scheme, coeffs);
        // 1/2 (m(1)*1 + m(2)*1) = 1/2 (1 + 4)
        CHECK(report.theta_o == Catch::Approx(2.5).epsilon(1e-14));
    }
    SECTION("data-only scheme drops the physics term") {
        sets.boundary = {{0.0, 0.1, -1.0, 0.0, 0.0}, {1.0, 0.9, -3.0, 0.0, 0.0}};
        WeightingScheme scheme;
        scheme.kind = SchemeKind::DataOnly;
        const auto report = compute_loss(zero, sets, scheme, coeffs);
        CHECK(report.residual == 0.0);
        CHECK(report.total == Catch::Approx(5.0).epsilon(1e-12));
    }
}

TEST_CASE("self-adaptive update follows the mask gradient") {
    SECTION("zero error leaves weights unchanged") {
        std::vector<double> lam{1.0, 2.0};
        sa_update_family(lam, {0.0, 0.0}, 0.01);
        CHECK(lam == std::vector<double>{1.0, 2.0});
    }
    SECTION("documented arithmetic example") {
        std::vector<double> lam{1.0};
        sa_update_family(lam, {4.0}, 0.01);
        CHECK(lam[0] == Catch::Approx(1.04).epsilon(1e-14));
    }
    SECTION("larger errors raise weights more") {
        std::vector<double> lam{1.0, 1.0};
        sa_update_family(lam, {1.0, 9.0}, 0.01);
        CHECK(lam[1] > lam[0]);
        CHECK(lam[0] > 1.0);
    }
    SECTION("weights stay nonnegative under arbitrary updates") {
        Rng rng(9);
        std::vector<double> lam(32, 0.5);
        std::vector<double> sq(32);
        for (int it = 0; it < 200; ++it) {
            for (auto& e : sq) e = rng.uniform(0.0, 10.0);
            sa_update_family(lam, sq, 0.05);
            for (double v : lam) REQUIRE(v >= 0.0);
        }
    }
}

TEST_CASE("residual-based attention update") {
    WeightingScheme scheme;
    scheme.kind = SchemeKind::ResidualAttention;
    scheme.rba.gamma = 0.9;
    scheme.rba.eta = 0.01;

    SECTION("documented arithmetic example") {
        scheme.init_state(0, 2);
        rba_update(scheme, {2.0, -4.0});
        CHECK(scheme.rba_lambda[0] == Catch::Approx(0.005).epsilon(1e-14));
        CHECK(scheme.rba_lambda[1] == Catch::Approx(0.01).epsilon(1e-14));
    }
    SECTION("constant residuals drive weights to eta/(1-gamma)") {
        scheme.init_state(0, 3);
        for (int it = 0; it < 2000; ++it) rba_update(scheme, {1.0, 1.0, 1.0});
        const double limit = scheme.rba.eta / (1.0 - scheme.rba.gamma);
        for (double v : scheme.rba_lambda) CHECK(v == Catch::Approx(limit).epsilon(1e-8));
    }
    SECTION("update is invariant under residual scaling") {
        WeightingScheme a = scheme, b = scheme;
        a.init_state(0, 3);
        b.init_state(0, 3);
        const std::vector<double> r{0.3, -1.2, 0.7};
        std::vector<double> r10 = r;
        for (auto& v : r10) v *= 10.0;
        rba_update(a, r);
        rba_update(b, r10);
        for (std::size_t i = 0; i < a.rba_lambda.size(); ++i)
            CHECK(a.rba_lambda[i] == Catch::Approx(b.rba_lambda[i]).epsilon(1e-14));
    }
    SECTION("all-zero residuals are a no-op") {
        scheme.init_state(0, 2);
        scheme.rba_lambda = {0.4, 0.6};
        rba_update(scheme, {0.0, 0.0});
        CHECK(scheme.rba_lambda == std::vector<double>{0.4, 0.6});
    }
    SECTION("weights never exceed the geometric-series bound") {
        Rng rng(13);
        scheme.rba.gamma = 0.99;
        scheme.rba.eta = 0.05;
        scheme.rba.lambda_init = 0.3;
        scheme.init_state(0, 16);
        const double lambda0 = scheme.rba.lambda_init;
        std::vector<double> r(16);
        double gamma_n = 1.0;
        for (int it = 0; it < 1000; ++it) {
            for (auto& v : r) v = rng.normal();
            rba_update(scheme, r);
            gamma_n *= scheme.rba.gamma;
            const double bound =
                lambda0 * gamma_n + scheme.rba.eta / (1.0 - scheme.rba.gamma) + 1e-12;
            for (double v : scheme.rba_lambda) {
                REQUIRE(v >= 0.0);
                REQUIRE(v <= bound);
            }
        }
    }
}

TEST_CASE("self-adaptive loss with unit weights reduces to the vanilla sum") {
    const auto pde = desk_pde();
    const auto [scaled, scaling] = normalize(tiny_series(), pde);
    const auto coeffs = ResidualCoeffs::make(pde, scaling);
    const auto sets = build_training_sets(scaled, 0.5, 64, 3);
    const auto model = init_params({2, 8, 3}, 4);

    WeightingScheme vanilla;
    const auto rv = compute_loss(model, sets, vanilla, coeffs);

    WeightingScheme sa;
    sa.kind = SchemeKind::SelfAdaptive;
    sa.sa.lambda_init = 1.0;
    sa.init_state(sets.boundary.size(), sets.collocation.size());
    const auto rs = compute_loss(model, sets, sa, coeffs);

    const double nb = static_cast<double>(sets.boundary.size());
    const double nc = static_cast<double>(sets.collocation.size());
    CHECK(rs.theta_o == Catch::Approx(rv.theta_o * nb / 2.0).epsilon(1e-12));
    CHECK(rs.theta_a == Catch::Approx(rv.theta_a * nb / 2.0).epsilon(1e-12));
    CHECK(rs.p_k == Catch::Approx(rv.p_k * nb / 2.0).epsilon(1e-12));
    CHECK(rs.residual == Catch::Approx(rv.residual * nc / 2.0).epsilon(1e-12));
}

TEST_CASE("training reduces the loss and reproduces bit-exactly") {
    const auto series = tiny_series();
    const auto pde = desk_pde();
    TrainConfig cfg;
    cfg.hidden = {12, 12};
    cfg.nb_fraction = 0.8;
    cfg.nc_count = 400;
    cfg.iterations = 200;
    cfg.lr = 2e-3;
    cfg.log_every = 100;
    cfg.seed = 7;

    WeightingScheme vanilla;
    const auto run1 = train(series, pde, vanilla, cfg);
    REQUIRE(run1.history.size() == 2);
    CHECK(run1.history.back().total < run1.history.front().total);

    SECTION("bit-identical across reruns and worker counts") {
        const auto run2 = train(series, pde, vanilla, cfg);
        REQUIRE(run2.history.size() == run1.history.size());
        for (std::size_t i = 0; i < run1.history.size(); ++i)
            REQUIRE(run1.history[i].total == run2.history[i].total);
        CHECK(run1.model.params == run2.model.params);

        WorkerPool one(1);
        const auto run3 = train(series, pde, vanilla, cfg, &one);
        CHECK(run1.model.params == run3.model.params);
    }

    SECTION("first logged report matches the standalone loss") {
        TrainConfig probe = cfg;
        probe.iterations = 1;
        probe.log_every = 1;
        const auto run = train(series, pde, vanilla, probe);
        const auto [scaled, scaling] = normalize(series, pde);
        const auto coeffs = ResidualCoeffs::make(pde, scaling);
        const auto sets = build_training_sets(scaled, cfg.nb_fraction, cfg.nc_count, cfg.seed);
        const auto model = init_params(cfg.widths(), cfg.seed);
        const auto report = compute_loss(model, sets, vanilla, coeffs);
        CHECK(run.history.front().total == Catch::Approx(report.total).epsilon(1e-12));
        CHECK(run.history.front().residual == Catch::Approx(report.residual).epsilon(1e-12));
    }
}

TEST_CASE("all four schemes run and report consistent totals") {
    const auto series = tiny_series();
    const auto pde = desk_pde();
    TrainConfig cfg;
    cfg.hidden = {10};
    cfg.nc_count = 200;
    cfg.iterations = 50;
    cfg.log_every = 25;
    cfg.seed = 3;

    for (SchemeKind kind : {SchemeKind::Vanilla, SchemeKind::SelfAdaptive,
                            SchemeKind::ResidualAttention, SchemeKind::DataOnly}) {
        WeightingScheme scheme;
        scheme.kind = kind;
        const auto run = train(series, pde, scheme, cfg);
        for (const auto& rep : run.history) {
            REQUIRE(std::isfinite(rep.total));
            REQUIRE(rep.total >= 0.0);
            REQUIRE(rep.total ==
                    Catch::Approx(rep.theta_o + rep.p_k + rep.theta_a + rep.residual)
                        .epsilon(1e-12));
            if (kind == SchemeKind::DataOnly) REQUIRE(rep.residual == 0.0);
        }
        if (kind == SchemeKind::ResidualAttention) {
            for (double lam : run.scheme.rba_lambda) REQUIRE(lam >= 0.0);
        }
    }
}

TEST_CASE("training aborts with diagnostics when the loss explodes") {
    const auto series = tiny_series();
    const auto pde = desk_pde();
    TrainConfig cfg;
    cfg.hidden = {8};
    cfg.nc_count = 64;
    cfg.iterations = 40;
    cfg.lr = 1e160;
    cfg.seed = 2;
    WeightingScheme vanilla;
    CHECK_THROWS_AS(train(series, pde, vanilla, cfg), TrainingAborted);
    CHECK_THROWS_WITH(train(series, pde, vanilla, cfg),
                      Catch::Matchers::ContainsSubstring("non-finite loss"));
}

TEST_CASE("predict_field unscales and validates its grid") {
    const auto series = tiny_series();
    const auto pde = desk_pde();
    const auto [scaled, scaling] = normalize(series, pde);
    const auto model = init_params({2, 8, 3}, 5);

    std::vector<double> times;
    for (std::size_t i = 0; i < series.size(); ++i) times.push_back(series.dt * static_cast<double>(i));
    const auto field = predict_field(model, 11, times, scaling);
    CHECK(field.nx() == 11);
    CHECK(field.nt() == series.size());

    MlpWorkspace ws;
    ws.bind(model);
    const auto u = eval_plain(model, 0.5, scaling.scale_t(times[3]), ws);
    CHECK(field.interp_x(0.5, 3) == Catch::Approx(scaling.unscale_theta(u[0])).epsilon(1e-12));

    CHECK_THROWS(predict_field(model, 11, {0.0, 2.0 * scaling.t_scale}, scaling));
    CHECK_THROWS(predict_field(model, 1, times, scaling));
}
