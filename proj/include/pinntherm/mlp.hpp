#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pinntherm/rng.hpp"

namespace pinntherm {

/// Fully connected tanh network with two inputs (x, t) and three outputs
/// (scaled oil temperature, ambient temperature, load losses). The unit-domain
/// inputs are affinely mapped to [-1,1] ahead of the first layer; exposed
/// input derivatives remain with respect to the unit-domain coordinates.
/// Parameters are packed per layer as the row-major weight matrix followed by
/// the bias vector. All arithmetic is 64-bit.
struct MlpModel {
    std::vector<int> widths;      // {2, hidden..., 3}
    std::vector<double> params;

    int layer_count() const { return static_cast<int>(widths.size()) - 1; }
};

inline std::size_t param_count(const std::vector<int>& widths) {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l)
        n += static_cast<std::size_t>(widths[l]) * widths[l + 1] + widths[l + 1];
    return n;
}

inline void validate_widths(const std::vector<int>& widths) {
    if (widths.size() < 2) throw std::runtime_error("mlp: need at least one layer");
    if (widths.front() != 2) throw std::runtime_error("mlp: input width must be 2 (x, t)");
    if (widths.back() != 3) throw std::runtime_error("mlp: output width must be 3");
    for (int w : widths)
        if (w < 1) throw std::runtime_error("mlp: layer widths must be positive");
}

/// Glorot-uniform initialization, zero biases; deterministic per seed.
inline MlpModel init_params(const std::vector<int>& widths, std::uint64_t seed) {
    validate_widths(widths);
    MlpModel model;
    model.widths = widths;
    model.params.resize(param_count(widths));
    Rng rng(seed);
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const int in = widths[l], out = widths[l + 1];
        const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
        for (int i = 0; i < in * out; ++i)
            model.params[offset + static_cast<std::size_t>(i)] = rng.uniform(-bound, bound);
        offset += static_cast<std::size_t>(in) * out;
        for (int i = 0; i < out; ++i) model.params[offset + static_cast<std::size_t>(i)] = 0.0;
        offset += static_cast<std::size_t>(out);
    }
    return model;
}

/// Model checkpoint: magic "MLP1" | width count u64 | widths u64 | params f64,
/// little-endian; round-trips bit-exactly.
inline void save_model(const MlpModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write model file: " + path);
    out.write("MLP1", 4);
    const std::uint64_t nw = model.widths.size();
    out.write(reinterpret_cast<const char*>(&nw), 8);
    for (int w : model.widths) {
        const std::uint64_t v = static_cast<std::uint64_t>(w);
        out.write(reinterpret_cast<const char*>(&v), 8);
    }
    out.write(reinterpret_cast<const char*>(model.params.data()),
              static_cast<std::streamsize>(model.params.size() * sizeof(double)));
    if (!out) throw std::runtime_error("write failure on model file: " + path);
}

inline MlpModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "MLP1", 4) != 0)
        throw std::runtime_error("bad magic in model file: " + path);
    std::uint64_t nw = 0;
    in.read(reinterpret_cast<char*>(&nw), 8);
    if (!in || nw < 2 || nw > 64) throw std::runtime_error("bad width count in " + path);
    MlpModel model;
    model.widths.resize(nw);
    for (auto& w : model.widths) {
        std::uint64_t v = 0;
        in.read(reinterpret_cast<char*>(&v), 8);
        w = static_cast<int>(v);
    }
    validate_widths(model.widths);
    model.params.resize(param_count(model.widths));
    in.read(reinterpret_cast<char*>(model.params.data()),
            static_cast<std::streamsize>(model.params.size() * sizeof(double)));
    if (!in) throw std::runtime_error("truncated model file: " + path);
    return model;
}

/// Per-point network outputs together with the input derivatives of each
/// output, all in scaled coordinates.
struct PointEval {
    std::array<double, 3> u{};
    std::array<double, 3> du_dx{};
    std::array<double, 3> d2u_dx2{};
    std::array<double, 3> du_dt{};
};

/// Adjoint seeds for the reverse sweep: dLoss/d(each exposed quantity).
struct PointAdjoint {
    std::array<double, 3> u{};
    std::array<double, 3> du_dx{};
    std::array<double, 3> d2u_dx2{};
    std::array<double, 3> du_dt{};
};

/// Reusable per-thread scratch for evaluation and the reverse sweep.
///
/// Activations are stored channel-major (value / d_dx / d2_dx2 / d_dt as
/// separate arrays per layer) and the forward pass reads a transposed copy
/// of each weight matrix, so the hot loops run contiguous fused
/// multiply-adds over whole neuron rows. bind() refreshes the transposed
/// cache; it must be called again after any parameter change before using
/// eval_/backward_ on this workspace. The batch helpers below bind
/// internally.
class MlpWorkspace {
public:
    void bind(const MlpModel& model) {
        if (model.widths != widths_) {
            widths_ = model.widths;
            const std::size_t layers = widths_.size();
            av_.assign(layers, {});
            adx_.assign(layers, {});
            adxx_.assign(layers, {});
            adt_.assign(layers, {});
            zdx_.assign(layers, {});
            zdxx_.assign(layers, {});
            zdt_.assign(layers, {});
            int max_width = 0;
            for (std::size_t l = 0; l < layers; ++l) {
                const auto n = static_cast<std::size_t>(widths_[l]);
                av_[l].resize(n);
                adx_[l].resize(n);
                adxx_[l].resize(n);
                adt_[l].resize(n);
                if (l > 0) {
                    zdx_[l].resize(n);
                    zdxx_[l].resize(n);
                    zdt_[l].resize(n);
                }
                max_width = std::max(max_width, widths_[l]);
            }
            const auto m = static_cast<std::size_t>(max_width);
            zb_v_.resize(m);
            zb_dx_.resize(m);
            zb_dxx_.resize(m);
            zb_dt_.resize(m);
            ab_v_[0].resize(m);
            ab_dx_[0].resize(m);
            ab_dxx_[0].resize(m);
            ab_dt_[0].resize(m);
            ab_v_[1].resize(m);
            ab_dx_[1].resize(m);
            ab_dxx_[1].resize(m);
            ab_dt_[1].resize(m);
            offsets_.assign(layers - 1, 0);
            wt_.assign(layers - 1, {});
            std::size_t offset = 0;
            for (std::size_t l = 0; l + 1 < layers; ++l) {
                offsets_[l] = offset;
                wt_[l].resize(static_cast<std::size_t>(widths_[l]) * widths_[l + 1]);
                offset += static_cast<std::size_t>(widths_[l]) * widths_[l + 1] + widths_[l + 1];
            }
        }
        // refresh the transposed weights
        for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
            const int in = widths_[l], out = widths_[l + 1];
            const double* w = model.params.data() + offsets_[l];
            double* wt = wt_[l].data();
            for (int i = 0; i < out; ++i)
                for (int k = 0; k < in; ++k)
                    wt[static_cast<std::size_t>(k) * out + i] = w[static_cast<std::size_t>(i) * in + k];
        }
    }

    std::size_t layer_offset(std::size_t l) const { return offsets_[l]; }

    // layer buffers (index 0 = inputs)
    std::vector<std::vector<double>> av_, adx_, adxx_, adt_;
    std::vector<std::vector<double>> zdx_, zdxx_, zdt_;
    std::vector<double> zb_v_, zb_dx_, zb_dxx_, zb_dt_;
    std::vector<double> ab_v_[2], ab_dx_[2], ab_dxx_[2], ab_dt_[2];
    std::vector<std::vector<double>> wt_;  // transposed weights per layer
    std::vector<int> widths_;

private:
    std::vector<std::size_t> offsets_;
};

/// Value-only forward pass; standalone, needs no workspace.
inline std::array<double, 3> forward(const MlpModel& model, double x, double t) {
    validate_widths(model.widths);
    thread_local std::vector<double> cur, next;
    cur = {2.0 * x - 1.0, 2.0 * t - 1.0};
    std::size_t offset = 0;
    const int layers = model.layer_count();
    for (int l = 0; l < layers; ++l) {
        const int in = model.widths[static_cast<std::size_t>(l)];
        const int out = model.widths[static_cast<std::size_t>(l) + 1];
        const double* w = model.params.data() + offset;
        const double* b = w + static_cast<std::size_t>(in) * out;
        offset += static_cast<std::size_t>(in) * out + static_cast<std::size_t>(out);
        next.assign(static_cast<std::size_t>(out), 0.0);
        for (int i = 0; i < out; ++i) {
            const double* row = w + static_cast<std::size_t>(i) * in;
            double acc = b[i];
            for (int k = 0; k < in; ++k) acc += row[k] * cur[static_cast<std::size_t>(k)];
            next[static_cast<std::size_t>(i)] = (l + 1 < layers) ? std::tanh(acc) : acc;
        }
        cur.swap(next);
    }
    return {cur[0], cur[1], cur[2]};
}

/// Jet forward pass: propagates (value, d/dx, d2/dx2, d/dt) through every
/// layer, recording per-layer states for the reverse sweep, and returns the
/// outputs with exact input derivatives. Requires a bound workspace.
inline PointEval eval_jet(const MlpModel& model, double x, double t, MlpWorkspace& ws) {
    const int layers = model.layer_count();
    ws.av_[0][0] = 2.0 * x - 1.0;
    ws.av_[0][1] = 2.0 * t - 1.0;
    ws.adx_[0][0] = 2.0;
    ws.adx_[0][1] = 0.0;
    ws.adxx_[0][0] = 0.0;
    ws.adxx_[0][1] = 0.0;
    ws.adt_[0][0] = 0.0;
    ws.adt_[0][1] = 2.0;

    std::size_t offset = 0;
    for (int l = 0; l < layers; ++l) {
        const auto lu = static_cast<std::size_t>(l);
        const int in = model.widths[lu];
        const int out = model.widths[lu + 1];
        const double* bias = model.params.data() + offset + static_cast<std::size_t>(in) * out;
        offset += static_cast<std::size_t>(in) * out + static_cast<std::size_t>(out);
        const double* wt = ws.wt_[lu].data();

        const double* __restrict__ pav = ws.av_[lu].data();
        const double* __restrict__ padx = ws.adx_[lu].data();
        const double* __restrict__ padxx = ws.adxx_[lu].data();
        const double* __restrict__ padt = ws.adt_[lu].data();
        double* __restrict__ zv = ws.av_[lu + 1].data();  // reused as z value before activation
        double* __restrict__ zdx = ws.zdx_[lu + 1].data();
        double* __restrict__ zdxx = ws.zdxx_[lu + 1].data();
        double* __restrict__ zdt = ws.zdt_[lu + 1].data();

        for (int i = 0; i < out; ++i) {
            zv[i] = bias[i];
            zdx[i] = 0.0;
            zdxx[i] = 0.0;
            zdt[i] = 0.0;
        }
        for (int k = 0; k < in; ++k) {
            const double* wrow = wt + static_cast<std::size_t>(k) * out;
            const double cv = pav[k], cdx = padx[k], cdxx = padxx[k], cdt = padt[k];
            for (int i = 0; i < out; ++i) {
                const double w = wrow[i];
                zv[i] += w * cv;
                zdx[i] += w * cdx;
                zdxx[i] += w * cdxx;
                zdt[i] += w * cdt;
            }
        }

        double* __restrict__ adx = ws.adx_[lu + 1].data();
        double* __restrict__ adxx = ws.adxx_[lu + 1].data();
        double* __restrict__ adt = ws.adt_[lu + 1].data();
        if (l + 1 < layers) {
            for (int i = 0; i < out; ++i) {
                const double f = std::tanh(zv[i]);
                const double fp = 1.0 - f * f;
                const double fpp = -2.0 * f * fp;
                zv[i] = f;  // activation value; pre-activation derivatives stay in zdx/zdxx/zdt
                adx[i] = fp * zdx[i];
                adxx[i] = fpp * zdx[i] * zdx[i] + fp * zdxx[i];
                adt[i] = fp * zdt[i];
            }
        } else {
            for (int i = 0; i < out; ++i) {
                adx[i] = zdx[i];
                adxx[i] = zdxx[i];
                adt[i] = zdt[i];
            }
        }
    }

    PointEval eval;
    const auto lo = static_cast<std::size_t>(layers);
    for (std::size_t i = 0; i < 3; ++i) {
        eval.u[i] = ws.av_[lo][i];
        eval.du_dx[i] = ws.adx_[lo][i];
        eval.d2u_dx2[i] = ws.adxx_[lo][i];
        eval.du_dt[i] = ws.adt_[lo][i];
    }
    return eval;
}

/// Reverse sweep through the jet computation recorded by eval_jet; must
/// follow the matching eval_jet on the same workspace. Accumulates
/// dLoss/dparams into grad (size param_count). Because the forward pass
/// carries dx/dxx/dt channels, the sweep yields exact gradients of losses
/// containing second input derivatives; the mixed third-order terms appear
/// as the f''' factors below.
inline void backward_jet(const MlpModel& model, const PointAdjoint& adj, MlpWorkspace& ws,
                         double* grad) {
    const int layers = model.layer_count();
    int cur = 0;
    {
        const auto lo = static_cast<std::size_t>(layers);
        const int out = model.widths[lo];
        for (int i = 0; i < out; ++i) {
            const auto iu = static_cast<std::size_t>(i);
            ws.ab_v_[cur][iu] = adj.u[iu];
            ws.ab_dx_[cur][iu] = adj.du_dx[iu];
            ws.ab_dxx_[cur][iu] = adj.d2u_dx2[iu];
            ws.ab_dt_[cur][iu] = adj.du_dt[iu];
        }
    }

    for (int l = layers - 1; l >= 0; --l) {
        const auto lu = static_cast<std::size_t>(l);
        const int in = model.widths[lu];
        const int out = model.widths[lu + 1];
        const double* w = model.params.data() + ws.layer_offset(lu);
        double* wgrad = grad + ws.layer_offset(lu);
        double* bgrad = wgrad + static_cast<std::size_t>(in) * out;

        const double* __restrict__ f = ws.av_[lu + 1].data();  // tanh values (hidden layers)
        const double* __restrict__ zdx = ws.zdx_[lu + 1].data();
        const double* __restrict__ zdxx = ws.zdxx_[lu + 1].data();
        const double* __restrict__ zdt = ws.zdt_[lu + 1].data();
        double* __restrict__ zbv = ws.zb_v_.data();
        double* __restrict__ zbdx = ws.zb_dx_.data();
        double* __restrict__ zbdxx = ws.zb_dxx_.data();
        double* __restrict__ zbdt = ws.zb_dt_.data();
        const double* __restrict__ abv = ws.ab_v_[cur].data();
        const double* __restrict__ abdx = ws.ab_dx_[cur].data();
        const double* __restrict__ abdxx = ws.ab_dxx_[cur].data();
        const double* __restrict__ abdt = ws.ab_dt_[cur].data();

        if (l + 1 < layers) {
            for (int i = 0; i < out; ++i) {
                const double fv = f[i];
                const double fp = 1.0 - fv * fv;
                const double fpp = -2.0 * fv * fp;
                const double fppp = -2.0 * (fp * fp + fv * fpp);
                zbdx[i] = abdx[i] * fp + abdxx[i] * 2.0 * fpp * zdx[i];
                zbdxx[i] = abdxx[i] * fp;
                zbdt[i] = abdt[i] * fp;
                zbv[i] = abv[i] * fp + abdx[i] * fpp * zdx[i] +
                         abdxx[i] * (fppp * zdx[i] * zdx[i] + fpp * zdxx[i]) +
                         abdt[i] * fpp * zdt[i];
            }
        } else {
            for (int i = 0; i < out; ++i) {
                zbv[i] = abv[i];
                zbdx[i] = abdx[i];
                zbdxx[i] = abdxx[i];
                zbdt[i] = abdt[i];
            }
        }

        const double* __restrict__ pav = ws.av_[lu].data();
        const double* __restrict__ padx = ws.adx_[lu].data();
        const double* __restrict__ padxx = ws.adxx_[lu].data();
        const double* __restrict__ padt = ws.adt_[lu].data();
        const int nxt = cur ^ 1;
        double* __restrict__ pbv = ws.ab_v_[nxt].data();
        double* __restrict__ pbdx = ws.ab_dx_[nxt].data();
        double* __restrict__ pbdxx = ws.ab_dxx_[nxt].data();
        double* __restrict__ pbdt = ws.ab_dt_[nxt].data();
        if (l > 0)
            for (int k = 0; k < in; ++k) {
                pbv[k] = 0.0;
                pbdx[k] = 0.0;
                pbdxx[k] = 0.0;
                pbdt[k] = 0.0;
            }

        for (int i = 0; i < out; ++i) {
            const double bv = zbv[i], bdx = zbdx[i], bdxx = zbdxx[i], bdt = zbdt[i];
            double* __restrict__ wrow = wgrad + static_cast<std::size_t>(i) * in;
            const double* __restrict__ row = w + static_cast<std::size_t>(i) * in;
            for (int k = 0; k < in; ++k)
                wrow[k] += bv * pav[k] + bdx * padx[k] + bdxx * padxx[k] + bdt * padt[k];
            bgrad[i] += bv;
            if (l > 0) {
                for (int k = 0; k < in; ++k) {
                    const double wv = row[k];
                    pbv[k] += wv * bv;
                    pbdx[k] += wv * bdx;
                    pbdxx[k] += wv * bdxx;
                    pbdt[k] += wv * bdt;
                }
            }
        }
        cur = nxt;
    }
}

/// Value-only forward pass that records layer states for backward_plain.
/// Cheaper than eval_jet; used for data points where no input derivatives
/// enter the loss. Requires a bound workspace.
inline std::array<double, 3> eval_plain(const MlpModel& model, double x, double t,
                                        MlpWorkspace& ws) {
    const int layers = model.layer_count();
    ws.av_[0][0] = 2.0 * x - 1.0;
    ws.av_[0][1] = 2.0 * t - 1.0;
    std::size_t offset = 0;
    for (int l = 0; l < layers; ++l) {
        const auto lu = static_cast<std::size_t>(l);
        const int in = model.widths[lu];
        const int out = model.widths[lu + 1];
        const double* bias = model.params.data() + offset + static_cast<std::size_t>(in) * out;
        offset += static_cast<std::size_t>(in) * out + static_cast<std::size_t>(out);
        const double* __restrict__ wt = ws.wt_[lu].data();
        const double* __restrict__ pav = ws.av_[lu].data();
        double* __restrict__ zv = ws.av_[lu + 1].data();
        for (int i = 0; i < out; ++i) zv[i] = bias[i];
        for (int k = 0; k < in; ++k) {
            const double cv = pav[k];
            const double* __restrict__ wrow = wt + static_cast<std::size_t>(k) * out;
            for (int i = 0; i < out; ++i) zv[i] += wrow[i] * cv;
        }
        if (l + 1 < layers)
            for (int i = 0; i < out; ++i) zv[i] = std::tanh(zv[i]);
    }
    const auto lo = static_cast<std::size_t>(layers);
    return {ws.av_[lo][0], ws.av_[lo][1], ws.av_[lo][2]};
}

/// Reverse sweep matching eval_plain.
inline void backward_plain(const MlpModel& model, const std::array<double, 3>& u_adj,
                           MlpWorkspace& ws, double* grad) {
    const int layers = model.layer_count();
    int cur = 0;
    for (std::size_t i = 0; i < 3; ++i) ws.ab_v_[cur][i] = u_adj[i];

    for (int l = layers - 1; l >= 0; --l) {
        const auto lu = static_cast<std::size_t>(l);
        const int in = model.widths[lu];
        const int out = model.widths[lu + 1];
        const double* w = model.params.data() + ws.layer_offset(lu);
        double* wgrad = grad + ws.layer_offset(lu);
        double* bgrad = wgrad + static_cast<std::size_t>(in) * out;
        const double* f = ws.av_[lu + 1].data();
        const double* abv = ws.ab_v_[cur].data();
        double* zbv = ws.zb_v_.data();
        if (l + 1 < layers) {
            for (int i = 0; i < out; ++i) zbv[i] = abv[i] * (1.0 - f[i] * f[i]);
        } else {
            for (int i = 0; i < out; ++i) zbv[i] = abv[i];
        }

        const double* pav = ws.av_[lu].data();
        const int nxt = cur ^ 1;
        double* pbv = ws.ab_v_[nxt].data();
        if (l > 0)
            for (int k = 0; k < in; ++k) pbv[k] = 0.0;
        for (int i = 0; i < out; ++i) {
            const double bv = zbv[i];
            double* __restrict__ wrow = wgrad + static_cast<std::size_t>(i) * in;
            const double* __restrict__ row = w + static_cast<std::size_t>(i) * in;
            for (int k = 0; k < in; ++k) wrow[k] += bv * pav[k];
            bgrad[i] += bv;
            if (l > 0)
                for (int k = 0; k < in; ++k) pbv[k] += row[k] * bv;
        }
        cur = nxt;
    }
}

/// Batch record of network outputs and input derivatives plus a gradient
/// accumulator sized for the model.
struct BatchEvaluation {
    std::vector<PointEval> points;
    std::vector<double> grad;
};

/// Evaluates outputs and exact input derivatives for a batch of scaled
/// (x, t) points.
inline BatchEvaluation input_derivatives(const MlpModel& model,
                                         std::span<const std::array<double, 2>> points) {
    validate_widths(model.widths);
    BatchEvaluation batch;
    batch.points.resize(points.size());
    batch.grad.assign(model.params.size(), 0.0);
    MlpWorkspace ws;
    ws.bind(model);
    for (std::size_t i = 0; i < points.size(); ++i)
        batch.points[i] = eval_jet(model, points[i][0], points[i][1], ws);
    return batch;
}

/// Reverse-mode gradient of a scalar loss assembled from per-point network
/// quantities. The callback receives each point's evaluation and returns the
/// loss adjoints for that point; contributions accumulate over the batch.
template <typename AdjointFn>
std::vector<double> param_gradient(const MlpModel& model,
                                   std::span<const std::array<double, 2>> points,
                                   AdjointFn&& adjoint_of) {
    validate_widths(model.widths);
    std::vector<double> grad(model.params.size(), 0.0);
    MlpWorkspace ws;
    ws.bind(model);
    for (std::size_t i = 0; i < points.size(); ++i) {
        const PointEval eval = eval_jet(model, points[i][0], points[i][1], ws);
        const PointAdjoint adj = adjoint_of(i, eval);
        backward_jet(model, adj, ws, grad.data());
    }
    return grad;
}

/// Adam optimizer state; moments are laid out like the parameter vector.
struct AdamState {
    std::vector<double> m, v;
    long step = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    explicit AdamState(std::size_t n, double learning_rate = 1e-3)
        : m(n, 0.0), v(n, 0.0), lr(learning_rate) {}
};

/// Standard bias-corrected Adam update, applied in place.
inline void adam_step(AdamState& state, MlpModel& model, std::span<const double> grad) {
    if (grad.size() != model.params.size() || state.m.size() != grad.size())
        throw std::runtime_error("adam: gradient/parameter shape mismatch");
    state.step += 1;
    const double b1t = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double b2t = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < grad.size(); ++i) {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
        const double mhat = state.m[i] / b1t;
        const double vhat = state.v[i] / b2t;
        model.params[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

}  // namespace pinntherm
