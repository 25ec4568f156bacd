#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pinntherm/field.hpp"
#include "pinntherm/mlp.hpp"
#include "pinntherm/mlp_batch.hpp"
#include "pinntherm/pde_params.hpp"
#include "pinntherm/rng.hpp"
#include "pinntherm/scaling.hpp"
#include "pinntherm/series.hpp"
#include "pinntherm/worker_pool.hpp"

namespace pinntherm {

// ---------------------------------------------------------------------------
// weighting schemes

enum class SchemeKind { Vanilla, SelfAdaptive, ResidualAttention, DataOnly };

inline const char* scheme_name(SchemeKind kind) {
    switch (kind) {
        case SchemeKind::Vanilla: return "vanilla";
        case SchemeKind::SelfAdaptive: return "sa";
        case SchemeKind::ResidualAttention: return "rba";
        case SchemeKind::DataOnly: return "data_only";
    }
    return "?";
}

inline SchemeKind scheme_from_name(const std::string& name) {
    if (name == "vanilla") return SchemeKind::Vanilla;
    if (name == "sa") return SchemeKind::SelfAdaptive;
    if (name == "rba") return SchemeKind::ResidualAttention;
    if (name == "data_only") return SchemeKind::DataOnly;
    throw std::runtime_error("unknown scheme '" + name + "'");
}

/// Fixed scalar loss weights (vanilla scheme; also the data-term weights of
/// the residual-attention scheme and the data-only baseline).
struct VanillaWeights {
    double theta_o = 1.0;
    double p_k = 1.0;
    double theta_a = 1.0;
    double residual = 1.0;
};

struct SaOptions {
    double rho = 0.01;         // gradient-ascent learning rate
    double lambda_init = 1.0;  // initial per-point weight
};

struct RbaOptions {
    double gamma = 0.999;      // decay
    double eta = 0.001;        // attention learning rate
    double lambda_init = 0.0;  // initial per-collocation-point weight
};

/// Loss-weighting configuration plus the mutable per-point state.
///
/// Vanilla:  fixed scalars, mean-squared terms.
/// SA:       per-point trainable weights with mask m(lambda) = lambda^2,
///           terms 1/2 sum m(lambda_i) err_i^2, updated by gradient ascent.
/// RBA:      per-collocation-point weights, residual term
///           1/N_c sum lambda_i r_i^2, weights follow an exponentially
///           weighted moving average of normalized residual magnitudes.
/// DataOnly: vanilla data terms with the physics term removed.
struct WeightingScheme {
    SchemeKind kind = SchemeKind::Vanilla;
    VanillaWeights fixed;
    SaOptions sa;
    RbaOptions rba;

    // per-point state
    std::vector<double> sa_theta_o, sa_p_k, sa_theta_a, sa_residual;
    std::vector<double> rba_lambda;

    bool uses_physics() const { return kind != SchemeKind::DataOnly; }

    void init_state(std::size_t n_boundary, std::size_t n_collocation) {
        if (kind == SchemeKind::SelfAdaptive) {
            sa_theta_o.assign(n_boundary, sa.lambda_init);
            sa_p_k.assign(n_boundary, sa.lambda_init);
            sa_theta_a.assign(n_boundary, sa.lambda_init);
            sa_residual.assign(n_collocation, sa.lambda_init);
        } else if (kind == SchemeKind::ResidualAttention) {
            rba_lambda.assign(n_collocation, rba.lambda_init);
        }
    }
};

/// Gradient-ascent update of the self-adaptive weights:
///   lambda <- lambda + rho * 1/2 * m'(lambda) * err^2, m(lambda) = lambda^2,
/// clamped at zero.
inline void sa_update_family(std::vector<double>& lambda, const std::vector<double>& sq_err,
                             double rho) {
    if (lambda.size() != sq_err.size())
        throw std::runtime_error("sa_update: weight/error size mismatch");
    for (std::size_t i = 0; i < lambda.size(); ++i)
        lambda[i] = std::max(0.0, lambda[i] + rho * lambda[i] * sq_err[i]);
}

/// Residual-based attention update:
///   lambda_i <- gamma lambda_i + eta |r_i| / max_j |r_j|.
/// An all-zero residual vector is a no-op.
inline void rba_update(WeightingScheme& scheme, const std::vector<double>& residuals) {
    if (scheme.rba_lambda.size() != residuals.size())
        throw std::runtime_error("rba_update: weight/residual size mismatch");
    double r_max = 0.0;
    for (double r : residuals) r_max = std::max(r_max, std::abs(r));
    if (r_max == 0.0) return;
    const double g = scheme.rba.gamma, scale = scheme.rba.eta / r_max;
    for (std::size_t i = 0; i < residuals.size(); ++i)
        scheme.rba_lambda[i] = g * scheme.rba_lambda[i] + scale * std::abs(residuals[i]);
}

// ---------------------------------------------------------------------------
// training sets

/// One boundary sample in scaled coordinates: position is exactly 0 or 1,
/// the temperature target is the matching boundary measurement, and every
/// boundary sample also carries the load-loss and ambient targets.
struct BoundaryPoint {
    double x = 0.0;
    double t = 0.0;
    double theta_target = 0.0;
    double p_k_target = 0.0;
    double theta_a_target = 0.0;
};

struct TrainingSets {
    std::vector<BoundaryPoint> boundary;
    std::vector<std::array<double, 2>> collocation;  // strictly interior points
};

/// Latin hypercube sample of n points in (0,1)^2: each axis is split into n
/// equal bins and every bin holds exactly one point per axis.
inline std::vector<std::array<double, 2>> sample_lhs(std::size_t n, std::uint64_t seed) {
    if (n < 1) throw std::runtime_error("sample_lhs: n must be >= 1");
    Rng rng(seed);
    std::vector<std::size_t> perm_x(n), perm_t(n);
    std::iota(perm_x.begin(), perm_x.end(), 0);
    std::iota(perm_t.begin(), perm_t.end(), 0);
    rng.shuffle(perm_x);
    rng.shuffle(perm_t);
    std::vector<std::array<double, 2>> pts(n);
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        pts[i][0] = (static_cast<double>(perm_x[i]) + rng.uniform_open()) * inv;
        pts[i][1] = (static_cast<double>(perm_t[i]) + rng.uniform_open()) * inv;
    }
    return pts;
}

/// Builds boundary and collocation sets from a scaled series: the boundary
/// pool interleaves bottom (x=0, ambient target) and top (x=1, top-oil
/// target) samples, from which nb_fraction are drawn without replacement;
/// collocation points come from Latin hypercube sampling.
inline TrainingSets build_training_sets(const ScaledSeries& scaled, double nb_fraction,
                                        std::size_t nc_count, std::uint64_t seed) {
    if (!(nb_fraction > 0.0 && nb_fraction <= 1.0))
        throw std::runtime_error("training: nb_fraction must lie in (0,1]");
    const std::size_t n = scaled.t.size();
    const std::size_t pool = 2 * n;
    const std::size_t nb = std::max<std::size_t>(
        2, static_cast<std::size_t>(std::llround(nb_fraction * static_cast<double>(pool))));

    std::vector<std::size_t> idx(pool);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    rng.shuffle(idx);
    idx.resize(std::min(nb, pool));
    std::sort(idx.begin(), idx.end());

    TrainingSets sets;
    sets.boundary.reserve(idx.size());
    for (std::size_t j : idx) {
        const std::size_t i = j / 2;
        const bool top = (j % 2) != 0;
        BoundaryPoint p;
        p.x = top ? 1.0 : 0.0;
        p.t = scaled.t[i];
        p.theta_target = top ? scaled.theta_to[i] : scaled.theta_a[i];
        p.p_k_target = scaled.p_k[i];
        p.theta_a_target = scaled.theta_a[i];
        sets.boundary.push_back(p);
    }
    sets.collocation = sample_lhs(std::max<std::size_t>(1, nc_count), seed ^ 0x6a09e667f3bcc909ULL);
    return sets;
}

// ---------------------------------------------------------------------------
// residual

/// Precomputed factors of the heat-diffusion residual in scaled variables.
/// The network works on x,t in [0,1] and min-max-scaled outputs; the
/// physical residual
///   r = (1/alpha) dTheta/dt - d2Theta/dx2
///       - (1/k) [ (P0 + P_K)/v_eff - h (Theta_O - Theta_A) ]
/// is multiplied by alpha*T/dTheta, which makes the time-derivative
/// coefficient one and keeps the training residual well conditioned.
struct ResidualCoeffs {
    double c_dxx = 0.0;     // alpha*T/H^2
    double c_p0 = 0.0;      // alpha*T/(k*dTheta) * P0/v_eff
    double c_pk = 0.0;      // alpha*T/(k*dTheta) * p_max/v_eff
    double c_h = 0.0;       // alpha*T/k * h
    double to_physical = 1.0;  // dTheta/(alpha*T): scaled -> Eq.-form residual

    static ResidualCoeffs make(const PdeParams& pde, const ScalingInfo& scaling) {
        pde.validate();
        const double dtheta = scaling.theta_range();
        const double at = pde.alpha * scaling.t_scale;
        ResidualCoeffs c;
        c.c_dxx = at / (scaling.x_scale * scaling.x_scale);
        const double src = at / (pde.k * dtheta);
        c.c_p0 = src * pde.p0 / pde.v_eff;
        c.c_pk = src * scaling.p_max / pde.v_eff;
        c.c_h = at * pde.h / pde.k;
        c.to_physical = dtheta / at;
        return c;
    }
};

/// Scaled residual of one evaluated point (outputs u0=Theta_O, u1=Theta_A,
/// u2=P_K, all scaled).
inline double residual_scaled(const PointEval& e, const ResidualCoeffs& c) {
    return e.du_dt[0] - c.c_dxx * e.d2u_dx2[0] - c.c_p0 - c.c_pk * e.u[2] +
           c.c_h * (e.u[0] - e.u[1]);
}

/// Residual in the physical form (units K/m^2) at a scaled point.
inline double residual(const MlpModel& model, double x, double t, const PdeParams& pde,
                       const ScalingInfo& scaling) {
    MlpWorkspace ws;
    ws.bind(model);
    const auto c = ResidualCoeffs::make(pde, scaling);
    return residual_scaled(eval_jet(model, x, t, ws), c) * c.to_physical;
}

/// Adjoint seeds of the scaled residual: d r / d (exposed quantity), scaled
/// by the incoming loss sensitivity s = dLoss/dr.
inline PointAdjoint residual_adjoint(const ResidualCoeffs& c, double s) {
    PointAdjoint adj;
    adj.du_dt[0] = s;
    adj.d2u_dx2[0] = -s * c.c_dxx;
    adj.u[0] = s * c.c_h;
    adj.u[1] = -s * c.c_h;
    adj.u[2] = -s * c.c_pk;
    return adj;
}

// ---------------------------------------------------------------------------
// loss

/// Per-term loss report. The weighted terms follow each scheme's own
/// objective; the mse_* duplicates are the plain mean-squared terms with all
/// weights at one, comparable across schemes.
struct LossReport {
    long iteration = 0;
    double total = 0.0;
    double theta_o = 0.0, p_k = 0.0, theta_a = 0.0, residual = 0.0;  // weighted terms
    double mse_theta_o = 0.0, mse_p_k = 0.0, mse_theta_a = 0.0, mse_residual = 0.0;

    double unweighted_total() const {
        return mse_theta_o + mse_p_k + mse_theta_a + mse_residual;
    }
};

/// Straightforward (serial) evaluation of the compound loss for the given
/// scheme; the training loop computes the same quantities fused with the
/// gradient and is cross-checked against this in the tests.
inline LossReport compute_loss(const MlpModel& model, const TrainingSets& sets,
                               const WeightingScheme& scheme, const ResidualCoeffs& coeffs) {
    const std::size_t nb = sets.boundary.size();
    const std::size_t nc = sets.collocation.size();
    if (scheme.kind == SchemeKind::SelfAdaptive &&
        (scheme.sa_theta_o.size() != nb || scheme.sa_residual.size() != nc))
        throw std::runtime_error("compute_loss: self-adaptive state does not match sets");
    if (scheme.kind == SchemeKind::ResidualAttention && scheme.rba_lambda.size() != nc)
        throw std::runtime_error("compute_loss: attention state does not match sets");

    MlpWorkspace ws;
    ws.bind(model);
    LossReport report;
    for (std::size_t i = 0; i < nb; ++i) {
        const auto& p = sets.boundary[i];
        const auto u = eval_plain(model, p.x, p.t, ws);
        const double eo = u[0] - p.theta_target;
        const double ea = u[1] - p.theta_a_target;
        const double ep = u[2] - p.p_k_target;
        report.mse_theta_o += eo * eo;
        report.mse_theta_a += ea * ea;
        report.mse_p_k += ep * ep;
        if (scheme.kind == SchemeKind::SelfAdaptive) {
            report.theta_o += 0.5 * scheme.sa_theta_o[i] * scheme.sa_theta_o[i] * eo * eo;
            report.theta_a += 0.5 * scheme.sa_theta_a[i] * scheme.sa_theta_a[i] * ea * ea;
            report.p_k += 0.5 * scheme.sa_p_k[i] * scheme.sa_p_k[i] * ep * ep;
        } else {
            report.theta_o += eo * eo;
            report.theta_a += ea * ea;
            report.p_k += ep * ep;
        }
    }
    if (scheme.kind != SchemeKind::SelfAdaptive) {
        report.theta_o *= scheme.fixed.theta_o / static_cast<double>(nb);
        report.theta_a *= scheme.fixed.theta_a / static_cast<double>(nb);
        report.p_k *= scheme.fixed.p_k / static_cast<double>(nb);
    }
    report.mse_theta_o /= static_cast<double>(nb);
    report.mse_theta_a /= static_cast<double>(nb);
    report.mse_p_k /= static_cast<double>(nb);

    if (scheme.uses_physics()) {
        for (std::size_t j = 0; j < nc; ++j) {
            const auto e = eval_jet(model, sets.collocation[j][0], sets.collocation[j][1], ws);
            const double r = residual_scaled(e, coeffs);
            report.mse_residual += r * r;
            if (scheme.kind == SchemeKind::SelfAdaptive)
                report.residual += 0.5 * scheme.sa_residual[j] * scheme.sa_residual[j] * r * r;
            else if (scheme.kind == SchemeKind::ResidualAttention)
                report.residual += scheme.rba_lambda[j] * r * r;
            else
                report.residual += r * r;
        }
        if (scheme.kind == SchemeKind::Vanilla)
            report.residual *= scheme.fixed.residual / static_cast<double>(nc);
        else if (scheme.kind == SchemeKind::ResidualAttention)
            report.residual /= static_cast<double>(nc);
        report.mse_residual /= static_cast<double>(nc);
    }
    report.total = report.theta_o + report.p_k + report.theta_a + report.residual;
    return report;
}

// ---------------------------------------------------------------------------
// training

struct TrainConfig {
    std::vector<int> hidden = {50, 50, 50};
    double nb_fraction = 0.75;
    std::size_t nc_count = 20000;
    long iterations = 5000;
    double lr = 1e-3;
    long log_every = 100;
    std::uint64_t seed = 1;

    std::vector<int> widths() const {
        std::vector<int> w;
        w.push_back(2);
        for (int hsz : hidden) w.push_back(hsz);
        w.push_back(3);
        return w;
    }
};

/// Raised when the loss turns non-finite; carries a diagnostic snapshot.
struct TrainingAborted : std::runtime_error {
    explicit TrainingAborted(const std::string& msg) : std::runtime_error(msg) {}
};

struct TrainResult {
    MlpModel model;
    std::vector<LossReport> history;
    WeightingScheme scheme;  // final weighting state
    TrainingSets sets;
    ScalingInfo scaling;
    double wall_seconds = 0.0;  // volatile, never part of deterministic artifacts
};

namespace detail {

inline double vector_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace detail

/// Full training run: builds the training sets, runs Adam for the configured
/// iterations applying the scheme's weight update once per iteration, and
/// logs the loss every log_every iterations (plus the final one). Bit-exact
/// reproducible for a fixed (series, config, seed) regardless of worker
/// count: points are processed in fixed chunks whose partial sums are
/// reduced in chunk order.
inline TrainResult train(const OperatingSeries& series, const PdeParams& pde,
                         const WeightingScheme& scheme_config, const TrainConfig& cfg,
                         WorkerPool* pool = nullptr) {
    const auto t_start = std::chrono::steady_clock::now();
    const auto [scaled, scaling] = normalize(series, pde);
    const auto coeffs = ResidualCoeffs::make(pde, scaling);

    TrainResult result;
    result.scaling = scaling;
    result.sets = build_training_sets(scaled, cfg.nb_fraction, cfg.nc_count, cfg.seed);
    result.scheme = scheme_config;
    const std::size_t nb = result.sets.boundary.size();
    const std::size_t nc = result.sets.collocation.size();
    result.scheme.init_state(nb, nc);

    result.model = init_params(cfg.widths(), cfg.seed);
    AdamState adam(result.model.params.size(), cfg.lr);

    WorkerPool local_pool(pool ? 1 : 0);
    WorkerPool& workers = pool ? *pool : local_pool;
    const int n_workers = workers.size();

    constexpr std::size_t kChunk = 512;
    const bool physics = result.scheme.uses_physics();
    const std::size_t nb_chunks = (nb + kChunk - 1) / kChunk;
    const std::size_t nc_chunks = physics ? (nc + kChunk - 1) / kChunk : 0;
    const std::size_t n_chunks = nb_chunks + nc_chunks;

    std::vector<BatchWorkspace> workspaces(static_cast<std::size_t>(n_workers));
    std::vector<std::vector<double>> chunk_grad(n_chunks);
    // weighted term partials (theta_o, theta_a, p_k, r) and unweighted MSEs
    std::vector<std::array<double, 8>> chunk_loss(n_chunks);
    for (auto& g : chunk_grad) g.assign(result.model.params.size(), 0.0);

    // per-point caches for the scheme updates, written disjointly by chunks
    std::vector<double> sq_eo(nb), sq_ea(nb), sq_ep(nb), res(physics ? nc : 0);

    std::vector<double> grad(result.model.params.size());
    const WeightingScheme& scheme = result.scheme;

    auto process_boundary_chunk = [&](std::size_t chunk, int worker) {
        BatchWorkspace& ws = workspaces[static_cast<std::size_t>(worker)];
        const std::size_t begin = chunk * kChunk;
        const std::size_t end = std::min(nb, begin + kChunk);
        double* gbuf = chunk_grad[chunk].data();
        auto& part = chunk_loss[chunk];
        const double wo = scheme.fixed.theta_o / static_cast<double>(nb);
        const double wa = scheme.fixed.theta_a / static_cast<double>(nb);
        const double wp = scheme.fixed.p_k / static_cast<double>(nb);
        const bool sa = scheme.kind == SchemeKind::SelfAdaptive;
        double xs[kMicroBatch], ts[kMicroBatch];
        std::array<double, 3> us[kMicroBatch], seeds[kMicroBatch];
        for (std::size_t base = begin; base < end; base += kMicroBatch) {
            const std::size_t valid = std::min<std::size_t>(kMicroBatch, end - base);
            for (std::size_t p = 0; p < kMicroBatch; ++p) {
                const auto& bp = result.sets.boundary[p < valid ? base + p : base];
                xs[p] = bp.x;
                ts[p] = bp.t;
            }
            eval_plain_batch(result.model, xs, ts, ws, us);
            for (std::size_t p = 0; p < kMicroBatch; ++p) {
                if (p >= valid) {
                    seeds[p] = {0.0, 0.0, 0.0};
                    continue;
                }
                const std::size_t i = base + p;
                const auto& bp = result.sets.boundary[i];
                const double eo = us[p][0] - bp.theta_target;
                const double ea = us[p][1] - bp.theta_a_target;
                const double ep = us[p][2] - bp.p_k_target;
                sq_eo[i] = eo * eo;
                sq_ea[i] = ea * ea;
                sq_ep[i] = ep * ep;
                part[4] += eo * eo;
                part[5] += ea * ea;
                part[6] += ep * ep;
                if (sa) {
                    const double mo = scheme.sa_theta_o[i] * scheme.sa_theta_o[i];
                    const double ma = scheme.sa_theta_a[i] * scheme.sa_theta_a[i];
                    const double mp = scheme.sa_p_k[i] * scheme.sa_p_k[i];
                    part[0] += 0.5 * mo * eo * eo;
                    part[1] += 0.5 * ma * ea * ea;
                    part[2] += 0.5 * mp * ep * ep;
                    seeds[p] = {mo * eo, ma * ea, mp * ep};
                } else {
                    part[0] += wo * eo * eo;
                    part[1] += wa * ea * ea;
                    part[2] += wp * ep * ep;
                    seeds[p] = {2.0 * wo * eo, 2.0 * wa * ea, 2.0 * wp * ep};
                }
            }
            backward_plain_batch(result.model, seeds, ws, gbuf);
        }
    };

    auto process_collocation_chunk = [&](std::size_t chunk, int worker) {
        BatchWorkspace& ws = workspaces[static_cast<std::size_t>(worker)];
        const std::size_t begin = chunk * kChunk;
        const std::size_t end = std::min(nc, begin + kChunk);
        double* gbuf = chunk_grad[nb_chunks + chunk].data();
        auto& part = chunk_loss[nb_chunks + chunk];
        const double wr = scheme.fixed.residual / static_cast<double>(nc);
        const bool sa = scheme.kind == SchemeKind::SelfAdaptive;
        const bool rba = scheme.kind == SchemeKind::ResidualAttention;
        double xs[kMicroBatch], ts[kMicroBatch];
        PointEval evals[kMicroBatch];
        PointAdjoint adjs[kMicroBatch];
        for (std::size_t base = begin; base < end; base += kMicroBatch) {
            const std::size_t valid = std::min<std::size_t>(kMicroBatch, end - base);
            for (std::size_t p = 0; p < kMicroBatch; ++p) {
                const auto& cp = result.sets.collocation[p < valid ? base + p : base];
                xs[p] = cp[0];
                ts[p] = cp[1];
            }
            eval_jet_batch(result.model, xs, ts, ws, evals);
            for (std::size_t p = 0; p < kMicroBatch; ++p) {
                if (p >= valid) {
                    adjs[p] = PointAdjoint{};
                    continue;
                }
                const std::size_t j = base + p;
                const double r = residual_scaled(evals[p], coeffs);
                res[j] = r;
                part[7] += r * r;
                double s;  // dLoss/dr
                if (sa) {
                    const double m = scheme.sa_residual[j] * scheme.sa_residual[j];
                    part[3] += 0.5 * m * r * r;
                    s = m * r;
                } else if (rba) {
                    const double lam = scheme.rba_lambda[j];
                    part[3] += lam * r * r / static_cast<double>(nc);
                    s = 2.0 * lam * r / static_cast<double>(nc);
                } else {
                    part[3] += wr * r * r;
                    s = 2.0 * wr * r;
                }
                adjs[p] = residual_adjoint(coeffs, s);
            }
            backward_jet_batch(result.model, adjs, ws, gbuf);
        }
    };

    const long total_iters = std::max<long>(1, cfg.iterations);
    for (long iter = 1; iter <= total_iters; ++iter) {
        for (auto& ws : workspaces) ws.bind(result.model);
        for (auto& g : chunk_grad) std::fill(g.begin(), g.end(), 0.0);
        for (auto& c : chunk_loss) c.fill(0.0);

        workers.run_chunks(n_chunks, [&](std::size_t chunk, int worker) {
            if (chunk < nb_chunks)
                process_boundary_chunk(chunk, worker);
            else
                process_collocation_chunk(chunk - nb_chunks, worker);
        });

        // deterministic reduction in chunk order
        std::fill(grad.begin(), grad.end(), 0.0);
        for (const auto& g : chunk_grad)
            for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g[i];
        LossReport report;
        report.iteration = iter;
        for (const auto& part : chunk_loss) {
            report.theta_o += part[0];
            report.theta_a += part[1];
            report.p_k += part[2];
            report.residual += part[3];
            report.mse_theta_o += part[4];
            report.mse_theta_a += part[5];
            report.mse_p_k += part[6];
            report.mse_residual += part[7];
        }
        report.mse_theta_o /= static_cast<double>(nb);
        report.mse_theta_a /= static_cast<double>(nb);
        report.mse_p_k /= static_cast<double>(nb);
        if (physics) report.mse_residual /= static_cast<double>(nc);
        report.total = report.theta_o + report.p_k + report.theta_a + report.residual;

        if (!std::isfinite(report.total)) {
            std::ostringstream msg;
            msg << "training aborted: non-finite loss at iteration " << iter
                << " (scheme " << scheme_name(scheme.kind) << ", seed " << cfg.seed
                << ", |grad| " << detail::vector_norm(grad);
            if (!result.scheme.rba_lambda.empty()) {
                const auto [lo, hi] = std::minmax_element(result.scheme.rba_lambda.begin(),
                                                          result.scheme.rba_lambda.end());
                msg << ", rba lambda [" << *lo << ", " << *hi << "]";
            }
            msg << ")";
            throw TrainingAborted(msg.str());
        }

        adam_step(adam, result.model, grad);

        // scheme weight updates follow the parameter step, using this
        // iteration's residuals/errors
        if (scheme.kind == SchemeKind::SelfAdaptive) {
            sa_update_family(result.scheme.sa_theta_o, sq_eo, scheme.sa.rho);
            sa_update_family(result.scheme.sa_theta_a, sq_ea, scheme.sa.rho);
            sa_update_family(result.scheme.sa_p_k, sq_ep, scheme.sa.rho);
            std::vector<double> sq_r(nc);
            for (std::size_t j = 0; j < nc; ++j) sq_r[j] = res[j] * res[j];
            sa_update_family(result.scheme.sa_residual, sq_r, scheme.sa.rho);
        } else if (scheme.kind == SchemeKind::ResidualAttention) {
            rba_update(result.scheme, res);
        }

        if (iter % std::max<long>(1, cfg.log_every) == 0 || iter == total_iters)
            result.history.push_back(report);
    }

    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return result;
}

// ---------------------------------------------------------------------------
// prediction

/// Evaluates the trained oil-temperature head on a rectangular grid and
/// returns the field in physical units. Grid times are given in seconds from
/// the series start; positions span [0,1].
inline TemperatureField predict_field(const MlpModel& model, std::size_t nx,
                                      const std::vector<double>& t_seconds,
                                      const ScalingInfo& scaling) {
    if (nx < 2 || t_seconds.size() < 2)
        throw std::runtime_error("predict_field: grid must be at least 2x2");
    TemperatureField field;
    field.scaling = scaling;
    field.x_grid.resize(nx);
    for (std::size_t i = 0; i < nx; ++i)
        field.x_grid[i] = static_cast<double>(i) / static_cast<double>(nx - 1);
    field.t_grid = t_seconds;
    field.values.resize(nx * t_seconds.size());

    BatchWorkspace ws;
    ws.bind(model);
    double xs[kMicroBatch], ts[kMicroBatch];
    std::array<double, 3> us[kMicroBatch];
    const std::size_t total = nx * t_seconds.size();
    for (std::size_t base = 0; base < total; base += kMicroBatch) {
        const std::size_t valid = std::min<std::size_t>(kMicroBatch, total - base);
        for (std::size_t p = 0; p < kMicroBatch; ++p) {
            const std::size_t idx = p < valid ? base + p : base;
            const std::size_t ix = idx / t_seconds.size();
            const std::size_t it = idx % t_seconds.size();
            const double tsc = scaling.scale_t(t_seconds[it]);
            if (tsc < -1e-9 || tsc > 1.0 + 1e-9)
                throw std::runtime_error("predict_field: time outside the trained domain");
            xs[p] = field.x_grid[ix];
            ts[p] = tsc;
        }
        eval_plain_batch(model, xs, ts, ws, us);
        for (std::size_t p = 0; p < valid; ++p) {
            const std::size_t idx = base + p;
            field.values[idx] = scaling.unscale_theta(us[p][0]);
        }
    }
    return field;
}

}  // namespace pinntherm
