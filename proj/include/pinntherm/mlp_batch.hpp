#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <vector>

#include "pinntherm/mlp.hpp"

namespace pinntherm {

/// Micro-batch width of the training-path kernels: eight points fill one
/// 512-bit lane set. The hot loops live in standalone kernels with
/// restrict-qualified parameters so they reliably compile to register-blocked
/// vector code.
inline constexpr int kMicroBatch = 8;

namespace vecmath {

/// exp on [0, ~50): base-2 range reduction plus a degree-13 Taylor kernel.
/// Written lane-wise so the loop vectorizes; accuracy a few ulp, smooth.
inline void exp_small(const double* __restrict__ y, double* __restrict__ out, int n) {
    constexpr double kLog2E = 1.4426950408889634074;
    constexpr double kLn2Hi = 6.93147180369123816490e-01;
    constexpr double kLn2Lo = 1.90821492927058770002e-10;
    for (int i = 0; i < n; ++i) {
        const double nd = std::nearbyint(y[i] * kLog2E);
        const double r = (y[i] - nd * kLn2Hi) - nd * kLn2Lo;
        // Taylor series of e^r on |r| <= ln2/2, Horner form
        double p = 1.0 / 6227020800.0;              // 1/13!
        p = p * r + 1.0 / 479001600.0;              // 1/12!
        p = p * r + 1.0 / 39916800.0;
        p = p * r + 1.0 / 3628800.0;
        p = p * r + 1.0 / 362880.0;
        p = p * r + 1.0 / 40320.0;
        p = p * r + 1.0 / 5040.0;
        p = p * r + 1.0 / 720.0;
        p = p * r + 1.0 / 120.0;
        p = p * r + 1.0 / 24.0;
        p = p * r + 1.0 / 6.0;
        p = p * r + 0.5;
        p = p * r + 1.0;
        p = p * r + 1.0;
        const std::int64_t biased = static_cast<std::int64_t>(nd) + 1023;
        const std::uint64_t bits = static_cast<std::uint64_t>(biased) << 52;
        double scale;
        std::memcpy(&scale, &bits, sizeof scale);
        out[i] = p * scale;
    }
}

/// tanh over an array via tanh(x) = sign(x) (1 - 2/(e^{2|x|}+1)), saturating
/// exactly to +-1 once 2|x| exceeds the double rounding threshold.
inline void tanh_array(const double* __restrict__ z, double* __restrict__ f, int n) {
    constexpr int kBlock = 64;
    double y[kBlock], e[kBlock];
    for (int base = 0; base < n; base += kBlock) {
        const int m = std::min(kBlock, n - base);
        for (int i = 0; i < m; ++i) {
            const double a = std::abs(z[base + i]);
            y[i] = std::min(2.0 * a, 44.0);
        }
        exp_small(y, e, m);
        for (int i = 0; i < m; ++i) {
            const double t = 1.0 - 2.0 / (e[i] + 1.0);
            f[base + i] = std::copysign(t, z[base + i]);
        }
    }
}

}  // namespace vecmath

namespace batch_kernels {

constexpr int B = kMicroBatch;

// Eight-lane double vector via the GNU vector extension: keeps the kernels
// explicitly SIMD without relying on the auto-vectorizer (which gives up on
// these loops once the layer widths are runtime values). memcpy-based
// accessors compile to unaligned vector moves.
typedef double v8 __attribute__((vector_size(8 * sizeof(double))));
typedef double v8_loose __attribute__((vector_size(8 * sizeof(double)), aligned(8), may_alias));

inline v8 load8(const double* p) { return *reinterpret_cast<const v8_loose*>(p); }
inline void store8(double* p, v8 v) { *reinterpret_cast<v8_loose*>(p) = v; }
inline v8 bcast8(double x) { return v8{x, x, x, x, x, x, x, x}; }

/// z = W a + b on all four jet channels; weights come in transposed.
inline void jet_linear(const double* __restrict__ wt, const double* __restrict__ bias,
                       const double* __restrict__ pav, const double* __restrict__ padx,
                       const double* __restrict__ padxx, const double* __restrict__ padt,
                       double* __restrict__ zv, double* __restrict__ zdx,
                       double* __restrict__ zdxx, double* __restrict__ zdt, int in, int out_w) {
    for (int i = 0; i < out_w; ++i) {
        v8 accv = bcast8(bias[i]);
        v8 accdx = bcast8(0.0), accdxx = bcast8(0.0), accdt = bcast8(0.0);
        for (int k = 0; k < in; ++k) {
            const v8 w = bcast8(wt[static_cast<std::size_t>(k) * out_w + i]);
            accv += w * load8(pav + static_cast<std::size_t>(k) * B);
            accdx += w * load8(padx + static_cast<std::size_t>(k) * B);
            accdxx += w * load8(padxx + static_cast<std::size_t>(k) * B);
            accdt += w * load8(padt + static_cast<std::size_t>(k) * B);
        }
        store8(zv + static_cast<std::size_t>(i) * B, accv);
        store8(zdx + static_cast<std::size_t>(i) * B, accdx);
        store8(zdxx + static_cast<std::size_t>(i) * B, accdxx);
        store8(zdt + static_cast<std::size_t>(i) * B, accdt);
    }
}

/// Value-only linear layer.
inline void plain_linear(const double* __restrict__ wt, const double* __restrict__ bias,
                         const double* __restrict__ pav, double* __restrict__ zv, int in,
                         int out_w) {
    for (int i = 0; i < out_w; ++i) {
        v8 acc = bcast8(bias[i]);
        for (int k = 0; k < in; ++k) {
            const v8 w = bcast8(wt[static_cast<std::size_t>(k) * out_w + i]);
            acc += w * load8(pav + static_cast<std::size_t>(k) * B);
        }
        store8(zv + static_cast<std::size_t>(i) * B, acc);
    }
}

/// tanh jet chain: consumes pre-activation blocks, leaves activations in zv
/// (via fbuf) and the chained derivative channels in the a-blocks.
inline void jet_tanh_chain(double* __restrict__ zv, const double* __restrict__ zdx,
                           const double* __restrict__ zdxx, const double* __restrict__ zdt,
                           double* __restrict__ adx, double* __restrict__ adxx,
                           double* __restrict__ adt, double* __restrict__ fbuf, int n) {
    vecmath::tanh_array(zv, fbuf, n);
    for (int j = 0; j < n; j += B) {
        const v8 f = load8(fbuf + j);
        const v8 fp = bcast8(1.0) - f * f;
        const v8 fpp = bcast8(-2.0) * f * fp;
        const v8 dx = load8(zdx + j);
        store8(adx + j, fp * dx);
        store8(adxx + j, fpp * dx * dx + fp * load8(zdxx + j));
        store8(adt + j, fp * load8(zdt + j));
    }
    std::memcpy(zv, fbuf, static_cast<std::size_t>(n) * sizeof(double));
}

/// Adjoint of the tanh jet chain (the f\'\'\' term carries the third-order
/// mixed derivative needed by losses containing d2/dx2).
inline void jet_tanh_adjoint(const double* __restrict__ f, const double* __restrict__ zdx,
                             const double* __restrict__ zdxx, const double* __restrict__ zdt,
                             const double* __restrict__ abv, const double* __restrict__ abdx,
                             const double* __restrict__ abdxx, const double* __restrict__ abdt,
                             double* __restrict__ zbv, double* __restrict__ zbdx,
                             double* __restrict__ zbdxx, double* __restrict__ zbdt, int n) {
    for (int j = 0; j < n; j += B) {
        const v8 fv = load8(f + j);
        const v8 fp = bcast8(1.0) - fv * fv;
        const v8 fpp = bcast8(-2.0) * fv * fp;
        const v8 fppp = bcast8(-2.0) * (fp * fp + fv * fpp);
        const v8 dx = load8(zdx + j);
        const v8 adx = load8(abdx + j);
        const v8 adxx = load8(abdxx + j);
        const v8 adt = load8(abdt + j);
        store8(zbdx + j, adx * fp + adxx * bcast8(2.0) * fpp * dx);
        store8(zbdxx + j, adxx * fp);
        store8(zbdt + j, adt * fp);
        store8(zbv + j, load8(abv + j) * fp + adx * fpp * dx +
                            adxx * (fppp * dx * dx + fpp * load8(zdxx + j)) +
                            adt * fpp * load8(zdt + j));
    }
}

/// Weight/bias gradient accumulation: each output row of the gradient stays
/// resident while the eight lanes fold in, reading point-major activations.
inline void jet_weight_grad(const double* __restrict__ zbv, const double* __restrict__ zbdx,
                            const double* __restrict__ zbdxx, const double* __restrict__ zbdt,
                            const double* __restrict__ pv, const double* __restrict__ pdx,
                            const double* __restrict__ pdxx, const double* __restrict__ pdt,
                            double* __restrict__ wgrad, double* __restrict__ bgrad, int in,
                            int out_w) {
    for (int i = 0; i < out_w; ++i) {
        double* wrow = wgrad + static_cast<std::size_t>(i) * in;
        double bsum = 0.0;
        for (int p = 0; p < B; ++p) {
            const double sv = zbv[static_cast<std::size_t>(i) * B + p];
            const double sdx = zbdx[static_cast<std::size_t>(i) * B + p];
            const double sdxx = zbdxx[static_cast<std::size_t>(i) * B + p];
            const double sdt = zbdt[static_cast<std::size_t>(i) * B + p];
            bsum += sv;
            const double* rv = pv + static_cast<std::size_t>(p) * in;
            const double* rdx = pdx + static_cast<std::size_t>(p) * in;
            const double* rdxx = pdxx + static_cast<std::size_t>(p) * in;
            const double* rdt = pdt + static_cast<std::size_t>(p) * in;
            const v8 wv = bcast8(sv), wdx = bcast8(sdx), wdxx = bcast8(sdxx), wdt = bcast8(sdt);
            int k = 0;
            for (; k + B <= in; k += B) {
                v8 acc = load8(wrow + k);
                acc += wv * load8(rv + k);
                acc += wdx * load8(rdx + k);
                acc += wdxx * load8(rdxx + k);
                acc += wdt * load8(rdt + k);
                store8(wrow + k, acc);
            }
            for (; k < in; ++k)
                wrow[k] += sv * rv[k] + sdx * rdx[k] + sdxx * rdxx[k] + sdt * rdt[k];
        }
        bgrad[i] += bsum;
    }
}

inline void plain_weight_grad(const double* __restrict__ zbv, const double* __restrict__ pv,
                              double* __restrict__ wgrad, double* __restrict__ bgrad, int in,
                              int out_w) {
    for (int i = 0; i < out_w; ++i) {
        double* wrow = wgrad + static_cast<std::size_t>(i) * in;
        double bsum = 0.0;
        for (int p = 0; p < B; ++p) {
            const double sv = zbv[static_cast<std::size_t>(i) * B + p];
            bsum += sv;
            const double* rv = pv + static_cast<std::size_t>(p) * in;
            const v8 wv = bcast8(sv);
            int k = 0;
            for (; k + B <= in; k += B) store8(wrow + k, load8(wrow + k) + wv * load8(rv + k));
            for (; k < in; ++k) wrow[k] += sv * rv[k];
        }
        bgrad[i] += bsum;
    }
}

/// Adjoint propagation to the previous layer\'s activations (all channels).
inline void jet_abar(const double* __restrict__ wt, const double* __restrict__ zbv,
                     const double* __restrict__ zbdx, const double* __restrict__ zbdxx,
                     const double* __restrict__ zbdt, double* __restrict__ pbv,
                     double* __restrict__ pbdx, double* __restrict__ pbdxx,
                     double* __restrict__ pbdt, int in, int out_w) {
    for (int k = 0; k < in; ++k) {
        v8 accv = bcast8(0.0), accdx = bcast8(0.0), accdxx = bcast8(0.0), accdt = bcast8(0.0);
        const double* wtrow = wt + static_cast<std::size_t>(k) * out_w;
        for (int i = 0; i < out_w; ++i) {
            const v8 w = bcast8(wtrow[i]);
            accv += w * load8(zbv + static_cast<std::size_t>(i) * B);
            accdx += w * load8(zbdx + static_cast<std::size_t>(i) * B);
            accdxx += w * load8(zbdxx + static_cast<std::size_t>(i) * B);
            accdt += w * load8(zbdt + static_cast<std::size_t>(i) * B);
        }
        store8(pbv + static_cast<std::size_t>(k) * B, accv);
        store8(pbdx + static_cast<std::size_t>(k) * B, accdx);
        store8(pbdxx + static_cast<std::size_t>(k) * B, accdxx);
        store8(pbdt + static_cast<std::size_t>(k) * B, accdt);
    }
}

inline void plain_abar(const double* __restrict__ wt, const double* __restrict__ zbv,
                       double* __restrict__ pbv, int in, int out_w) {
    for (int k = 0; k < in; ++k) {
        v8 acc = bcast8(0.0);
        const double* wtrow = wt + static_cast<std::size_t>(k) * out_w;
        for (int i = 0; i < out_w; ++i)
            acc += bcast8(wtrow[i]) * load8(zbv + static_cast<std::size_t>(i) * B);
        store8(pbv + static_cast<std::size_t>(k) * B, acc);
    }
}

/// [width][B] -> [B][width] copy for the weight-gradient pass.
inline void transpose_block(const double* __restrict__ src, double* __restrict__ dst, int width) {
    for (int k = 0; k < width; ++k)
        for (int p = 0; p < B; ++p) dst[p * width + k] = src[k * B + p];
}

}  // namespace batch_kernels

/// Per-thread scratch for the micro-batched kernels. Channel blocks are laid
/// out [width][kMicroBatch] (neuron-major); the forward pass additionally
/// stores point-major copies of each layer's activations for the
/// weight-gradient pass. bind() refreshes the transposed weight cache and
/// must follow every parameter change.
class BatchWorkspace {
public:
    void bind(const MlpModel& model) {
        constexpr int B = kMicroBatch;
        if (model.widths != widths_) {
            widths_ = model.widths;
            const std::size_t layers = widths_.size();
            auto sized = [&](std::vector<std::vector<double>>& v) {
                v.assign(layers, {});
                for (std::size_t l = 0; l < layers; ++l)
                    v[l].assign(static_cast<std::size_t>(widths_[l]) * B, 0.0);
            };
            sized(av_);
            sized(adx_);
            sized(adxx_);
            sized(adt_);
            sized(zdx_);
            sized(zdxx_);
            sized(zdt_);
            sized(pv_);
            sized(pdx_);
            sized(pdxx_);
            sized(pdt_);
            int max_width = 0;
            for (int w : widths_) max_width = std::max(max_width, w);
            const auto m = static_cast<std::size_t>(max_width) * B;
            fbuf_.assign(m, 0.0);
            zb_v_.assign(m, 0.0);
            zb_dx_.assign(m, 0.0);
            zb_dxx_.assign(m, 0.0);
            zb_dt_.assign(m, 0.0);
            for (int side = 0; side < 2; ++side) {
                ab_v_[side].assign(m, 0.0);
                ab_dx_[side].assign(m, 0.0);
                ab_dxx_[side].assign(m, 0.0);
                ab_dt_[side].assign(m, 0.0);
            }
            offsets_.assign(layers - 1, 0);
            wt_.assign(layers - 1, {});
            std::size_t offset = 0;
            for (std::size_t l = 0; l + 1 < layers; ++l) {
                offsets_[l] = offset;
                wt_[l].resize(static_cast<std::size_t>(widths_[l]) * widths_[l + 1]);
                offset += static_cast<std::size_t>(widths_[l]) * widths_[l + 1] + widths_[l + 1];
            }
        }
        for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
            const int in = widths_[l], out = widths_[l + 1];
            const double* w = model.params.data() + offsets_[l];
            double* wt = wt_[l].data();
            for (int i = 0; i < out; ++i)
                for (int k = 0; k < in; ++k)
                    wt[static_cast<std::size_t>(k) * out + i] =
                        w[static_cast<std::size_t>(i) * in + k];
        }
    }

    std::size_t layer_offset(std::size_t l) const { return offsets_[l]; }

    std::vector<std::vector<double>> av_, adx_, adxx_, adt_;     // [width][B]
    std::vector<std::vector<double>> zdx_, zdxx_, zdt_;          // pre-activation
    std::vector<std::vector<double>> pv_, pdx_, pdxx_, pdt_;     // point-major [B][width]
    std::vector<double> zb_v_, zb_dx_, zb_dxx_, zb_dt_;
    std::vector<double> ab_v_[2], ab_dx_[2], ab_dxx_[2], ab_dt_[2];
    std::vector<double> fbuf_;
    std::vector<std::vector<double>> wt_;
    std::vector<int> widths_;

private:
    std::vector<std::size_t> offsets_;
};

/// Jet forward pass over one micro-batch of kMicroBatch points. Outputs and
/// exact input derivatives land in out[0..kMicroBatch). Matches eval_jet up
/// to the vectorized tanh (a few ulp).
inline void eval_jet_batch(const MlpModel& model, const double* xs, const double* ts,
                           BatchWorkspace& ws, PointEval* out) {
    constexpr int B = kMicroBatch;
    const int layers = model.layer_count();
    {
        double* av = ws.av_[0].data();
        double* adx = ws.adx_[0].data();
        double* adxx = ws.adxx_[0].data();
        double* adt = ws.adt_[0].data();
        for (int p = 0; p < B; ++p) {
            av[0 * B + p] = 2.0 * xs[p] - 1.0;
            av[1 * B + p] = 2.0 * ts[p] - 1.0;
            adx[0 * B + p] = 2.0;
            adx[1 * B + p] = 0.0;
            adxx[0 * B + p] = 0.0;
            adxx[1 * B + p] = 0.0;
            adt[0 * B + p] = 0.0;
            adt[1 * B + p] = 2.0;
        }
        batch_kernels::transpose_block(av, ws.pv_[0].data(), 2);
        batch_kernels::transpose_block(adx, ws.pdx_[0].data(), 2);
        batch_kernels::transpose_block(adxx, ws.pdxx_[0].data(), 2);
        batch_kernels::transpose_block(adt, ws.pdt_[0].data(), 2);
    }

    for (int l = 0; l < layers; ++l) {
        const auto lu = static_cast<std::size_t>(l);
        const int in = model.widths[lu];
        const int out_w = model.widths[lu + 1];
        const double* bias =
            model.params.data() + ws.layer_offset(lu) + static_cast<std::size_t>(in) * out_w;
        batch_kernels::jet_linear(ws.wt_[lu].data(), bias, ws.av_[lu].data(), ws.adx_[lu].data(),
                                  ws.adxx_[lu].data(), ws.adt_[lu].data(), ws.av_[lu + 1].data(),
                                  ws.zdx_[lu + 1].data(), ws.zdxx_[lu + 1].data(),
                                  ws.zdt_[lu + 1].data(), in, out_w);
        const int n = out_w * B;
        if (l + 1 < layers) {
            batch_kernels::jet_tanh_chain(ws.av_[lu + 1].data(), ws.zdx_[lu + 1].data(),
                                          ws.zdxx_[lu + 1].data(), ws.zdt_[lu + 1].data(),
                                          ws.adx_[lu + 1].data(), ws.adxx_[lu + 1].data(),
                                          ws.adt_[lu + 1].data(), ws.fbuf_.data(), n);
        } else {
            std::memcpy(ws.adx_[lu + 1].data(), ws.zdx_[lu + 1].data(),
                        static_cast<std::size_t>(n) * sizeof(double));
            std::memcpy(ws.adxx_[lu + 1].data(), ws.zdxx_[lu + 1].data(),
                        static_cast<std::size_t>(n) * sizeof(double));
            std::memcpy(ws.adt_[lu + 1].data(), ws.zdt_[lu + 1].data(),
                        static_cast<std::size_t>(n) * sizeof(double));
        }
        batch_kernels::transpose_block(ws.av_[lu + 1].data(), ws.pv_[lu + 1].data(), out_w);
        batch_kernels::transpose_block(ws.adx_[lu + 1].data(), ws.pdx_[lu + 1].data(), out_w);
        batch_kernels::transpose_block(ws.adxx_[lu + 1].data(), ws.pdxx_[lu + 1].data(), out_w);
        batch_kernels::transpose_block(ws.adt_[lu + 1].data(), ws.pdt_[lu + 1].data(), out_w);
    }

    const auto lo = static_cast<std::size_t>(layers);
    const double* av = ws.av_[lo].data();
    const double* adx = ws.adx_[lo].data();
    const double* adxx = ws.adxx_[lo].data();
    const double* adt = ws.adt_[lo].data();
    for (int p = 0; p < B; ++p)
        for (std::size_t i = 0; i < 3; ++i) {
            out[p].u[i] = av[i * B + static_cast<std::size_t>(p)];
            out[p].du_dx[i] = adx[i * B + static_cast<std::size_t>(p)];
            out[p].d2u_dx2[i] = adxx[i * B + static_cast<std::size_t>(p)];
            out[p].du_dt[i] = adt[i * B + static_cast<std::size_t>(p)];
        }
}

/// Reverse sweep over a micro-batch previously processed by eval_jet_batch.
/// A lane with an all-zero adjoint contributes exactly nothing, which is how
/// tail batches mask their padding lanes.
inline void backward_jet_batch(const MlpModel& model, const PointAdjoint* adj, BatchWorkspace& ws,
                               double* grad) {
    constexpr int B = kMicroBatch;
    const int layers = model.layer_count();
    int cur = 0;
    {
        double* abv = ws.ab_v_[cur].data();
        double* abdx = ws.ab_dx_[cur].data();
        double* abdxx = ws.ab_dxx_[cur].data();
        double* abdt = ws.ab_dt_[cur].data();
        for (std::size_t i = 0; i < 3; ++i)
            for (int p = 0; p < B; ++p) {
                abv[i * B + static_cast<std::size_t>(p)] = adj[p].u[i];
                abdx[i * B + static_cast<std::size_t>(p)] = adj[p].du_dx[i];
                abdxx[i * B + static_cast<std::size_t>(p)] = adj[p].d2u_dx2[i];
                abdt[i * B + static_cast<std::size_t>(p)] = adj[p].du_dt[i];
            }
    }

    for (int l = layers - 1; l >= 0; --l) {
        const auto lu = static_cast<std::size_t>(l);
        const int in = model.widths[lu];
        const int out_w = model.widths[lu + 1];
        double* wgrad = grad + ws.layer_offset(lu);
        double* bgrad = wgrad + static_cast<std::size_t>(in) * out_w;
        const int n = out_w * B;

        if (l + 1 < layers) {
            batch_kernels::jet_tanh_adjoint(
                ws.av_[lu + 1].data(), ws.zdx_[lu + 1].data(), ws.zdxx_[lu + 1].data(),
                ws.zdt_[lu + 1].data(), ws.ab_v_[cur].data(), ws.ab_dx_[cur].data(),
                ws.ab_dxx_[cur].data(), ws.ab_dt_[cur].data(), ws.zb_v_.data(), ws.zb_dx_.data(),
                ws.zb_dxx_.data(), ws.zb_dt_.data(), n);
        } else {
            const std::size_t bytes = static_cast<std::size_t>(n) * sizeof(double);
            std::memcpy(ws.zb_v_.data(), ws.ab_v_[cur].data(), bytes);
            std::memcpy(ws.zb_dx_.data(), ws.ab_dx_[cur].data(), bytes);
            std::memcpy(ws.zb_dxx_.data(), ws.ab_dxx_[cur].data(), bytes);
            std::memcpy(ws.zb_dt_.data(), ws.ab_dt_[cur].data(), bytes);
        }

        batch_kernels::jet_weight_grad(ws.zb_v_.data(), ws.zb_dx_.data(), ws.zb_dxx_.data(),
                                       ws.zb_dt_.data(), ws.pv_[lu].data(), ws.pdx_[lu].data(),
                                       ws.pdxx_[lu].data(), ws.pdt_[lu].data(), wgrad, bgrad, in,
                                       out_w);
        if (l > 0) {
            const int nxt = cur ^ 1;
            batch_kernels::jet_abar(ws.wt_[lu].data(), ws.zb_v_.data(), ws.zb_dx_.data(),
                                    ws.zb_dxx_.data(), ws.zb_dt_.data(), ws.ab_v_[nxt].data(),
                                    ws.ab_dx_[nxt].data(), ws.ab_dxx_[nxt].data(),
                                    ws.ab_dt_[nxt].data(), in, out_w);
            cur = nxt;
        }
    }
}

/// Value-only forward over a micro-batch, recording states for
/// backward_plain_batch.
inline void eval_plain_batch(const MlpModel& model, const double* xs, const double* ts,
                             BatchWorkspace& ws, std::array<double, 3>* out) {
    constexpr int B = kMicroBatch;
    const int layers = model.layer_count();
    {
        double* av = ws.av_[0].data();
        for (int p = 0; p < B; ++p) {
            av[0 * B + p] = 2.0 * xs[p] - 1.0;
            av[1 * B + p] = 2.0 * ts[p] - 1.0;
        }
        batch_kernels::transpose_block(av, ws.pv_[0].data(), 2);
    }
    for (int l = 0; l < layers; ++l) {
        const auto lu = static_cast<std::size_t>(l);
        const int in = model.widths[lu];
        const int out_w = model.widths[lu + 1];
        const double* bias =
            model.params.data() + ws.layer_offset(lu) + static_cast<std::size_t>(in) * out_w;
        batch_kernels::plain_linear(ws.wt_[lu].data(), bias, ws.av_[lu].data(),
                                    ws.av_[lu + 1].data(), in, out_w);
        const int n = out_w * B;
        if (l + 1 < layers) {
            vecmath::tanh_array(ws.av_[lu + 1].data(), ws.fbuf_.data(), n);
            std::memcpy(ws.av_[lu + 1].data(), ws.fbuf_.data(),
                        static_cast<std::size_t>(n) * sizeof(double));
        }
        batch_kernels::transpose_block(ws.av_[lu + 1].data(), ws.pv_[lu + 1].data(), out_w);
    }
    const auto lo = static_cast<std::size_t>(layers);
    const double* av = ws.av_[lo].data();
    for (int p = 0; p < B; ++p)
        for (std::size_t i = 0; i < 3; ++i) out[p][i] = av[i * B + static_cast<std::size_t>(p)];
}

/// Reverse sweep matching eval_plain_batch; zero-adjoint lanes contribute
/// nothing.
inline void backward_plain_batch(const MlpModel& model, const std::array<double, 3>* u_adj,
                                 BatchWorkspace& ws, double* grad) {
    constexpr int B = kMicroBatch;
    const int layers = model.layer_count();
    int cur = 0;
    {
        double* abv = ws.ab_v_[cur].data();
        for (std::size_t i = 0; i < 3; ++i)
            for (int p = 0; p < B; ++p) abv[i * B + static_cast<std::size_t>(p)] = u_adj[p][i];
    }
    for (int l = layers - 1; l >= 0; --l) {
        const auto lu = static_cast<std::size_t>(l);
        const int in = model.widths[lu];
        const int out_w = model.widths[lu + 1];
        double* wgrad = grad + ws.layer_offset(lu);
        double* bgrad = wgrad + static_cast<std::size_t>(in) * out_w;
        double* zbv = ws.zb_v_.data();
        const int n = out_w * B;
        if (l + 1 < layers) {
            const double* abv = ws.ab_v_[cur].data();
            const double* f = ws.av_[lu + 1].data();
            for (int j = 0; j < n; ++j) zbv[j] = abv[j] * (1.0 - f[j] * f[j]);
        } else {
            std::memcpy(zbv, ws.ab_v_[cur].data(), static_cast<std::size_t>(n) * sizeof(double));
        }
        batch_kernels::plain_weight_grad(zbv, ws.pv_[lu].data(), wgrad, bgrad, in, out_w);
        if (l > 0) {
            const int nxt = cur ^ 1;
            batch_kernels::plain_abar(ws.wt_[lu].data(), zbv, ws.ab_v_[nxt].data(), in, out_w);
            cur = nxt;
        }
    }
}

}  // namespace pinntherm
