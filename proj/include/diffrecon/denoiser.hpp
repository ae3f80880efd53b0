#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "diffrecon/image.hpp"
#include "diffrecon/random.hpp"
#include "diffrecon/schedule.hpp"

namespace diffrecon {

/// Conditional noise predictor f(x, y_noisy, alpha_bar) -> eps_hat.
///
/// A plain residual convolutional trunk: a stem conv taking the 2-channel
/// (condition, noisy) input, depth-2 residual blocks, and a final 1-channel
/// linear conv initialized to zero so the untrained network predicts zero
/// noise. alpha_bar enters every non-final layer as a learned per-channel
/// bias projected from a fixed sinusoidal embedding, so the model conditions
/// on the continuous noise level rather than an integer timestep.
struct DenoiserConfig {
    int depth = 6;
    int width = 32;
    int kernel = 3;
    int p_norm = 2;
    int alpha_embed_dim = 16;

    void validate() const {
        if (depth < 1) throw std::invalid_argument("DenoiserConfig: depth must be >= 1");
        if (width < 1) throw std::invalid_argument("DenoiserConfig: width must be >= 1");
        if (kernel < 1 || kernel % 2 == 0)
            throw std::invalid_argument("DenoiserConfig: kernel must be odd and positive");
        if (p_norm != 1 && p_norm != 2)
            throw std::invalid_argument("DenoiserConfig: p_norm must be 1 or 2");
        if (alpha_embed_dim < 1)
            throw std::invalid_argument("DenoiserConfig: alpha_embed_dim must be >= 1");
    }
};

struct ParamTensor {
    std::vector<int> shape;
    std::vector<double> v;

    std::size_t size() const { return v.size(); }
};

namespace detail {

struct LayerRef {
    int in_ch = 0, out_ch = 0;
    int w_idx = -1, b_idx = -1, p_idx = -1;  // p_idx < 0: no alpha injection
};

/// Tensor layout per layer: W [out,in,k,k], b [out], and for layers with
/// alpha injection P [out, embed].
inline std::vector<LayerRef> layer_refs(const DenoiserConfig& cfg) {
    std::vector<LayerRef> refs(cfg.depth);
    int idx = 0;
    for (int l = 0; l < cfg.depth; ++l) {
        LayerRef& r = refs[l];
        r.in_ch = (l == 0) ? 2 : cfg.width;
        r.out_ch = (l == cfg.depth - 1) ? 1 : cfg.width;
        r.w_idx = idx++;
        r.b_idx = idx++;
        const bool has_alpha = (cfg.depth == 1) || (l < cfg.depth - 1);
        if (has_alpha) r.p_idx = idx++;
    }
    return refs;
}

/// Copies channel planes into a zero-padded buffer with margin c; the 3x3
/// fast paths then run without edge conditionals.
inline std::vector<double> pad_planes(const double* in, int ch, int h, int w, int c) {
    const int ph = h + 2 * c, pw = w + 2 * c;
    std::vector<double> padded(static_cast<std::size_t>(ch) * ph * pw, 0.0);
    for (int ic = 0; ic < ch; ++ic)
        for (int y = 0; y < h; ++y)
            std::copy(in + (static_cast<std::size_t>(ic) * h + y) * w,
                      in + (static_cast<std::size_t>(ic) * h + y) * w + w,
                      padded.data() + (static_cast<std::size_t>(ic) * ph + y + c) * pw + c);
    return padded;
}

/// out[oc] = sum_ic W[oc][ic] * in[ic], zero-padded same-size. Generic in k;
/// the k = 3 path fuses all nine taps into one register-resident pass.
inline void conv2d_forward(const double* in, int in_ch, int h, int w, const double* weights,
                           int out_ch, int k, double* out) {
    const int c = k / 2;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    if (k == 3) {
        const int pw = w + 2;
        const std::vector<double> padded = pad_planes(in, in_ch, h, w, 1);
        std::vector<double> buf(w);
        for (int oc = 0; oc < out_ch; ++oc) {
            for (int y = 0; y < h; ++y) {
                std::fill(buf.begin(), buf.end(), 0.0);
                double* __restrict b = buf.data();
                for (int ic = 0; ic < in_ch; ++ic) {
                    const double* __restrict wp =
                        weights + (static_cast<std::size_t>(oc) * in_ch + ic) * 9;
                    const double w00 = wp[0], w01 = wp[1], w02 = wp[2];
                    const double w10 = wp[3], w11 = wp[4], w12 = wp[5];
                    const double w20 = wp[6], w21 = wp[7], w22 = wp[8];
                    const double* __restrict r0 =
                        padded.data() + (static_cast<std::size_t>(ic) * (h + 2) + y) * pw;
                    const double* __restrict r1 = r0 + pw;
                    const double* __restrict r2 = r1 + pw;
                    for (int x = 0; x < w; ++x)
                        b[x] += w00 * r0[x] + w01 * r0[x + 1] + w02 * r0[x + 2] +
                                w10 * r1[x] + w11 * r1[x + 1] + w12 * r1[x + 2] +
                                w20 * r2[x] + w21 * r2[x + 1] + w22 * r2[x + 2];
                }
                std::copy(buf.begin(), buf.end(),
                          out + oc * plane + static_cast<std::size_t>(y) * w);
            }
        }
        return;
    }

    std::vector<double> buf(w);
    for (int oc = 0; oc < out_ch; ++oc) {
        double* op = out + oc * plane;
        for (int y = 0; y < h; ++y) {
            std::fill(buf.begin(), buf.end(), 0.0);
            for (int ic = 0; ic < in_ch; ++ic) {
                const double* ip = in + ic * plane;
                const double* wp = weights + (static_cast<std::size_t>(oc) * in_ch + ic) * k * k;
                for (int ky = 0; ky < k; ++ky) {
                    const int yy = y + ky - c;
                    if (yy < 0 || yy >= h) continue;
                    const double* irow = ip + static_cast<std::size_t>(yy) * w;
                    for (int kx = 0; kx < k; ++kx) {
                        const int sx = kx - c;
                        const double wv = wp[ky * k + kx];
                        const int x0 = std::max(0, -sx), x1 = std::min(w, w - sx);
                        const double* ir = irow + sx;
                        for (int x = x0; x < x1; ++x) buf[x] += wv * ir[x];
                    }
                }
            }
            std::copy(buf.begin(), buf.end(), op + static_cast<std::size_t>(y) * w);
        }
    }
}

/// din[ic] += sum_oc W[oc][ic] (*) g[oc]: the transpose of conv2d_forward,
/// i.e. a convolution of the padded output gradient with the flipped kernel.
inline void conv2d_backward_input(const double* g, int out_ch, int h, int w,
                                  const double* weights, int in_ch, int k, double* din) {
    const int c = k / 2;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    if (k == 3) {
        const int pw = w + 2;
        const std::vector<double> padded = pad_planes(g, out_ch, h, w, 1);
        std::vector<double> buf(w);
        for (int ic = 0; ic < in_ch; ++ic) {
            for (int y = 0; y < h; ++y) {
                std::fill(buf.begin(), buf.end(), 0.0);
                double* __restrict b = buf.data();
                for (int oc = 0; oc < out_ch; ++oc) {
                    const double* __restrict wp =
                        weights + (static_cast<std::size_t>(oc) * in_ch + ic) * 9;
                    // flipped kernel
                    const double w00 = wp[8], w01 = wp[7], w02 = wp[6];
                    const double w10 = wp[5], w11 = wp[4], w12 = wp[3];
                    const double w20 = wp[2], w21 = wp[1], w22 = wp[0];
                    const double* __restrict r0 =
                        padded.data() + (static_cast<std::size_t>(oc) * (h + 2) + y) * pw;
                    const double* __restrict r1 = r0 + pw;
                    const double* __restrict r2 = r1 + pw;
                    for (int x = 0; x < w; ++x)
                        b[x] += w00 * r0[x] + w01 * r0[x + 1] + w02 * r0[x + 2] +
                                w10 * r1[x] + w11 * r1[x + 1] + w12 * r1[x + 2] +
                                w20 * r2[x] + w21 * r2[x + 1] + w22 * r2[x + 2];
                }
                double* drow = din + ic * plane + static_cast<std::size_t>(y) * w;
                for (int x = 0; x < w; ++x) drow[x] += buf[x];
            }
        }
        return;
    }

    std::vector<double> buf(w);
    for (int ic = 0; ic < in_ch; ++ic) {
        double* dp = din + ic * plane;
        for (int y = 0; y < h; ++y) {
            std::fill(buf.begin(), buf.end(), 0.0);
            for (int oc = 0; oc < out_ch; ++oc) {
                const double* gp = g + oc * plane;
                const double* wp = weights + (static_cast<std::size_t>(oc) * in_ch + ic) * k * k;
                for (int ky = 0; ky < k; ++ky) {
                    const int yy = y + c - ky;
                    if (yy < 0 || yy >= h) continue;
                    const double* grow = gp + static_cast<std::size_t>(yy) * w;
                    for (int kx = 0; kx < k; ++kx) {
                        const int sx = c - kx;
                        const double wv = wp[ky * k + kx];
                        const int x0 = std::max(0, -sx), x1 = std::min(w, w - sx);
                        const double* gr = grow + sx;
                        for (int x = x0; x < x1; ++x) buf[x] += wv * gr[x];
                    }
                }
            }
            double* drow = dp + static_cast<std::size_t>(y) * w;
            for (int x = 0; x < w; ++x) drow[x] += buf[x];
        }
    }
}

/// dW[oc][ic][ky][kx] += sum_{y,x} g[oc][y][x] * in[ic][y+ky-c][x+kx-c].
/// One sweep per (oc, ic) pair accumulates all k*k taps.
inline void conv2d_backward_weights(const double* g, int out_ch, const double* in, int in_ch,
                                    int h, int w, int k, double* dw) {
    const int c = k / 2;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    if (k == 3) {
        const int pw = w + 2;
        const std::vector<double> padded = pad_planes(in, in_ch, h, w, 1);
        for (int oc = 0; oc < out_ch; ++oc) {
            const double* gp = g + oc * plane;
            for (int ic = 0; ic < in_ch; ++ic) {
                double a00 = 0, a01 = 0, a02 = 0, a10 = 0, a11 = 0, a12 = 0, a20 = 0, a21 = 0,
                       a22 = 0;
                for (int y = 0; y < h; ++y) {
                    const double* __restrict grow = gp + static_cast<std::size_t>(y) * w;
                    const double* __restrict r0 =
                        padded.data() + (static_cast<std::size_t>(ic) * (h + 2) + y) * pw;
                    const double* __restrict r1 = r0 + pw;
                    const double* __restrict r2 = r1 + pw;
                    for (int x = 0; x < w; ++x) {
                        const double gv = grow[x];
                        a00 += gv * r0[x];
                        a01 += gv * r0[x + 1];
                        a02 += gv * r0[x + 2];
                        a10 += gv * r1[x];
                        a11 += gv * r1[x + 1];
                        a12 += gv * r1[x + 2];
                        a20 += gv * r2[x];
                        a21 += gv * r2[x + 1];
                        a22 += gv * r2[x + 2];
                    }
                }
                double* dwp = dw + (static_cast<std::size_t>(oc) * in_ch + ic) * 9;
                dwp[0] += a00;
                dwp[1] += a01;
                dwp[2] += a02;
                dwp[3] += a10;
                dwp[4] += a11;
                dwp[5] += a12;
                dwp[6] += a20;
                dwp[7] += a21;
                dwp[8] += a22;
            }
        }
        return;
    }

    std::vector<double> acc(static_cast<std::size_t>(k) * k);
    for (int oc = 0; oc < out_ch; ++oc) {
        const double* gp = g + oc * plane;
        for (int ic = 0; ic < in_ch; ++ic) {
            const double* ip = in + ic * plane;
            std::fill(acc.begin(), acc.end(), 0.0);
            for (int y = 0; y < h; ++y) {
                const double* grow = gp + static_cast<std::size_t>(y) * w;
                for (int ky = 0; ky < k; ++ky) {
                    const int yy = y + ky - c;
                    if (yy < 0 || yy >= h) continue;
                    const double* irow = ip + static_cast<std::size_t>(yy) * w;
                    for (int kx = 0; kx < k; ++kx) {
                        const int sx = kx - c;
                        const int x0 = std::max(0, -sx), x1 = std::min(w, w - sx);
                        const double* ir = irow + sx;
                        double s = 0.0;
                        for (int x = x0; x < x1; ++x) s += grow[x] * ir[x];
                        acc[ky * k + kx] += s;
                    }
                }
            }
            double* dwp = dw + (static_cast<std::size_t>(oc) * in_ch + ic) * k * k;
            for (int i = 0; i < k * k; ++i) dwp[i] += acc[i];
        }
    }
}

}  // namespace detail

struct DenoiserParams {
    DenoiserConfig cfg;
    std::vector<ParamTensor> tensors;

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& t : tensors) n += t.size();
        return n;
    }
};

/// Fixed sinusoidal embedding of the continuous noise level; frequencies are
/// geometric so both coarse and fine changes in alpha_bar are visible.
inline std::vector<double> alpha_embedding(double alpha_bar, int dim) {
    std::vector<double> emb(dim);
    const int n_freq = (dim + 1) / 2;
    for (int j = 0; j < n_freq; ++j) {
        const double freq =
            n_freq > 1 ? std::exp(j * std::log(1000.0) / (n_freq - 1)) : 1.0;
        const double arg = 2.0 * M_PI * freq * alpha_bar;
        emb[2 * j] = std::sin(arg);
        if (2 * j + 1 < dim) emb[2 * j + 1] = std::cos(arg);
    }
    return emb;
}

/// Fan-in-scaled uniform init; the final layer starts at zero so the network
/// begins by predicting zero noise.
inline DenoiserParams init_params(const DenoiserConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    DenoiserParams params;
    params.cfg = cfg;
    RandomSource rng(seed);
    const auto refs = detail::layer_refs(cfg);
    for (int l = 0; l < cfg.depth; ++l) {
        const auto& r = refs[l];
        const bool is_final = (l == cfg.depth - 1);
        ParamTensor w;
        w.shape = {r.out_ch, r.in_ch, cfg.kernel, cfg.kernel};
        w.v.assign(static_cast<std::size_t>(r.out_ch) * r.in_ch * cfg.kernel * cfg.kernel, 0.0);
        if (!is_final) {
            const double limit = std::sqrt(3.0 / (r.in_ch * cfg.kernel * cfg.kernel));
            for (double& x : w.v) x = (2.0 * rng.uniform() - 1.0) * limit;
        }
        params.tensors.push_back(std::move(w));

        ParamTensor b;
        b.shape = {r.out_ch};
        b.v.assign(r.out_ch, 0.0);
        params.tensors.push_back(std::move(b));

        if (r.p_idx >= 0) {
            ParamTensor p;
            p.shape = {r.out_ch, cfg.alpha_embed_dim};
            p.v.assign(static_cast<std::size_t>(r.out_ch) * cfg.alpha_embed_dim, 0.0);
            if (!is_final) {
                const double limit = 0.25 * std::sqrt(3.0 / cfg.alpha_embed_dim);
                for (double& x : p.v) x = (2.0 * rng.uniform() - 1.0) * limit;
            }
            params.tensors.push_back(std::move(p));
        }
    }
    return params;
}

namespace detail {

/// Activations kept for the backward pass.
struct ForwardTrace {
    std::vector<double> input;              // [2, H, W]
    std::vector<std::vector<double>> pre;   // pre-activation per non-final layer
    std::vector<std::vector<double>> sig;   // sigmoid(pre), reused by the backward pass
    std::vector<std::vector<double>> post;  // h_l per non-final layer
    std::vector<double> emb;
    int h = 0, w = 0;
};

inline void add_channel_bias(double* planes, int channels, std::size_t plane,
                             const double* bias, const double* proj, const double* emb,
                             int embed_dim) {
    for (int ch = 0; ch < channels; ++ch) {
        double shift = bias[ch];
        if (proj) {
            const double* prow = proj + static_cast<std::size_t>(ch) * embed_dim;
            for (int e = 0; e < embed_dim; ++e) shift += prow[e] * emb[e];
        }
        double* p = planes + ch * plane;
        for (std::size_t i = 0; i < plane; ++i) p[i] += shift;
    }
}

inline std::vector<double> forward_impl(const DenoiserParams& params, const RealImage& x_cond,
                                        const RealImage& y_noisy, double alpha_bar,
                                        ForwardTrace* trace) {
    const DenoiserConfig& cfg = params.cfg;
    if (!x_cond.same_shape(y_noisy))
        throw std::invalid_argument("predict_noise: condition/noisy shape mismatch");
    if (!(alpha_bar > 0.0 && alpha_bar <= 1.0))
        throw std::invalid_argument("predict_noise: alpha_bar must lie in (0,1]");

    const int h = x_cond.height, w = x_cond.width;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const auto refs = layer_refs(cfg);
    const std::vector<double> emb = alpha_embedding(alpha_bar, cfg.alpha_embed_dim);

    std::vector<double> input(2 * plane);
    std::copy(x_cond.data.begin(), x_cond.data.end(), input.begin());
    std::copy(y_noisy.data.begin(), y_noisy.data.end(), input.begin() + plane);

    if (trace) {
        trace->h = h;
        trace->w = w;
        trace->emb = emb;
        trace->input = input;
        trace->pre.clear();
        trace->sig.clear();
        trace->post.clear();
    }

    std::vector<double> current = std::move(input);
    int current_ch = 2;
    for (int l = 0; l < cfg.depth; ++l) {
        const auto& r = refs[l];
        const bool is_final = (l == cfg.depth - 1);
        std::vector<double> pre(static_cast<std::size_t>(r.out_ch) * plane, 0.0);
        conv2d_forward(current.data(), current_ch, h, w, params.tensors[r.w_idx].v.data(),
                       r.out_ch, cfg.kernel, pre.data());
        add_channel_bias(pre.data(), r.out_ch, plane, params.tensors[r.b_idx].v.data(),
                         r.p_idx >= 0 ? params.tensors[r.p_idx].v.data() : nullptr, emb.data(),
                         cfg.alpha_embed_dim);

        if (is_final && cfg.depth > 1) {
            return pre;  // final linear conv
        }
        if (cfg.depth == 1) {
            return pre;  // single linear layer
        }

        std::vector<double> sig(pre.size());
        for (std::size_t i = 0; i < pre.size(); ++i) sig[i] = 1.0 / (1.0 + std::exp(-pre[i]));
        std::vector<double> post(pre.size());
        if (l == 0) {
            for (std::size_t i = 0; i < post.size(); ++i) post[i] = pre[i] * sig[i];
        } else {
            // residual block: h_l = h_{l-1} + silu(pre)
            for (std::size_t i = 0; i < post.size(); ++i) post[i] = current[i] + pre[i] * sig[i];
        }
        if (trace) {
            trace->pre.push_back(std::move(pre));
            trace->sig.push_back(std::move(sig));
            trace->post.push_back(post);
        }
        current = std::move(post);
        current_ch = r.out_ch;
    }
    return current;  // unreachable for depth >= 1, silences control-path warnings
}

}  // namespace detail

/// Predicted noise field for (condition, noisy image, alpha_bar).
inline RealImage predict_noise(const DenoiserParams& params, const RealImage& x_cond,
                               const RealImage& y_noisy, double alpha_bar) {
    const std::vector<double> out = detail::forward_impl(params, x_cond, y_noisy, alpha_bar, nullptr);
    RealImage img(x_cond.height, x_cond.width);
    img.data = out;
    return img;
}

inline std::vector<ParamTensor> zero_like(const DenoiserParams& params) {
    std::vector<ParamTensor> grads;
    grads.reserve(params.tensors.size());
    for (const auto& t : params.tensors) {
        ParamTensor g;
        g.shape = t.shape;
        g.v.assign(t.v.size(), 0.0);
        grads.push_back(std::move(g));
    }
    return grads;
}

namespace detail {

/// Backprop of dL/dout through the trunk; accumulates into grads.
inline void backward_impl(const DenoiserParams& params, const ForwardTrace& trace,
                          std::vector<double> dout, std::vector<ParamTensor>& grads) {
    const DenoiserConfig& cfg = params.cfg;
    const auto refs = layer_refs(cfg);
    const int h = trace.h, w = trace.w;
    const std::size_t plane = static_cast<std::size_t>(h) * w;

    const auto bias_grads = [&](const LayerRef& r, const std::vector<double>& dpre) {
        for (int ch = 0; ch < r.out_ch; ++ch) {
            double s = 0.0;
            const double* p = dpre.data() + ch * plane;
            for (std::size_t i = 0; i < plane; ++i) s += p[i];
            grads[r.b_idx].v[ch] += s;
            if (r.p_idx >= 0) {
                double* prow = grads[r.p_idx].v.data() + static_cast<std::size_t>(ch) * cfg.alpha_embed_dim;
                for (int e = 0; e < cfg.alpha_embed_dim; ++e) prow[e] += s * trace.emb[e];
            }
        }
    };

    if (cfg.depth == 1) {
        const auto& r = refs[0];
        conv2d_backward_weights(dout.data(), r.out_ch, trace.input.data(), r.in_ch, h, w,
                                cfg.kernel, grads[r.w_idx].v.data());
        bias_grads(r, dout);
        return;
    }

    // final linear conv
    {
        const auto& r = refs[cfg.depth - 1];
        const std::vector<double>& below = trace.post[cfg.depth - 2];
        conv2d_backward_weights(dout.data(), r.out_ch, below.data(), r.in_ch, h, w, cfg.kernel,
                                grads[r.w_idx].v.data());
        bias_grads(r, dout);
        std::vector<double> din(static_cast<std::size_t>(r.in_ch) * plane, 0.0);
        conv2d_backward_input(dout.data(), r.out_ch, h, w, params.tensors[r.w_idx].v.data(),
                              r.in_ch, cfg.kernel, din.data());
        dout = std::move(din);
    }

    for (int l = cfg.depth - 2; l >= 0; --l) {
        const auto& r = refs[l];
        const std::vector<double>& pre = trace.pre[l];
        const std::vector<double>& sig = trace.sig[l];
        std::vector<double> dpre(pre.size());
        for (std::size_t i = 0; i < pre.size(); ++i)
            dpre[i] = dout[i] * sig[i] * (1.0 + pre[i] * (1.0 - sig[i]));

        const double* below = l == 0 ? trace.input.data() : trace.post[l - 1].data();
        conv2d_backward_weights(dpre.data(), r.out_ch, below, r.in_ch, h, w, cfg.kernel,
                                grads[r.w_idx].v.data());
        bias_grads(r, dpre);

        if (l == 0) break;
        // residual block input grad: identity path plus conv path
        std::vector<double> din(dout);
        conv2d_backward_input(dpre.data(), r.out_ch, h, w, params.tensors[r.w_idx].v.data(),
                              r.in_ch, cfg.kernel, din.data());
        dout = std::move(din);
    }
}

}  // namespace detail

/// One training draw for one batch item: the continuous noise level and the
/// noise field itself.
struct NoiseDraw {
    double alpha_bar;
    RealImage eps;
};

struct LossGrad {
    double loss = 0.0;
    std::vector<ParamTensor> grads;
};

/// Loss and exact analytic gradient for a batch with explicitly supplied
/// draws. Deterministic in all inputs; the rng-driven overload and the
/// finite-difference oracle both route through here.
inline LossGrad loss_and_grad_with_draws(const DenoiserParams& params,
                                         std::span<const std::pair<RealImage, RealImage>> batch,
                                         std::span<const NoiseDraw> draws, int p_norm) {
    if (batch.empty()) throw std::invalid_argument("loss_and_grad: empty batch");
    if (draws.size() != batch.size())
        throw std::invalid_argument("loss_and_grad: draws/batch size mismatch");
    if (p_norm != 1 && p_norm != 2) throw std::invalid_argument("loss_and_grad: p_norm must be 1 or 2");

    LossGrad result;
    result.grads = zero_like(params);
    const double inv_n = 1.0 / static_cast<double>(batch.size());

    detail::ForwardTrace trace;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& [x_cond, y0] = batch[i];
        const NoiseDraw& d = draws[i];
        if (!y0.same_shape(d.eps)) throw std::invalid_argument("loss_and_grad: eps shape mismatch");

        RealImage y_noisy(y0.height, y0.width);
        const double a = std::sqrt(d.alpha_bar);
        const double b = std::sqrt(1.0 - d.alpha_bar);
        for (std::size_t j = 0; j < y_noisy.data.size(); ++j)
            y_noisy.data[j] = a * y0.data[j] + b * d.eps.data[j];

        const std::vector<double> out =
            detail::forward_impl(params, x_cond, y_noisy, d.alpha_bar, &trace);

        double item_loss = 0.0;
        std::vector<double> dout(out.size());
        for (std::size_t j = 0; j < out.size(); ++j) {
            const double r = out[j] - d.eps.data[j];
            if (p_norm == 2) {
                item_loss += r * r;
                dout[j] = 2.0 * r * inv_n;
            } else {
                item_loss += std::abs(r);
                dout[j] = (r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0)) * inv_n;
            }
        }
        result.loss += item_loss * inv_n;
        detail::backward_impl(params, trace, std::move(dout), result.grads);
    }
    return result;
}

/// Training objective of one batch: fresh (alpha_bar, eps) per item, loss
/// mean over the batch of || f(x, sqrt(a) y0 + sqrt(1-a) eps, a) - eps ||_p^p.
inline LossGrad loss_and_grad(const DenoiserParams& params,
                              std::span<const std::pair<RealImage, RealImage>> batch,
                              const NoiseSchedule& schedule, RandomSource& rng, int p_norm) {
    if (batch.empty()) throw std::invalid_argument("loss_and_grad: empty batch");
    std::vector<NoiseDraw> draws;
    draws.reserve(batch.size());
    for (const auto& [x_cond, y0] : batch) {
        (void)x_cond;
        NoiseDraw d;
        d.alpha_bar = sample_alpha_bar(schedule, rng).first;
        d.eps = gaussian_image(rng, y0.height, y0.width);
        draws.push_back(std::move(d));
    }
    return loss_and_grad_with_draws(params, batch, draws, p_norm);
}

/// Adam state. Moments mirror the parameter tensors exactly.
struct TrainState {
    DenoiserParams params;
    long step_count = 0;
    std::vector<ParamTensor> m;
    std::vector<ParamTensor> v;
    double learning_rate = 1e-3;
};

inline TrainState init_train_state(const DenoiserConfig& cfg, std::uint64_t seed,
                                   double learning_rate = 1e-3) {
    TrainState state;
    state.params = init_params(cfg, seed);
    state.m = zero_like(state.params);
    state.v = zero_like(state.params);
    state.learning_rate = learning_rate;
    return state;
}

inline void adam_step(TrainState& state, const std::vector<ParamTensor>& grads,
                      double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
    state.step_count += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step_count));
    for (std::size_t t = 0; t < state.params.tensors.size(); ++t) {
        auto& p = state.params.tensors[t].v;
        auto& m = state.m[t].v;
        auto& v = state.v[t].v;
        const auto& g = grads[t].v;
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            p[i] -= state.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
        }
    }
}

struct TrainOptions {
    int epochs = 1;
    int batch_size = 8;
};

/// Supervised training loop: random (alpha_bar, eps) draws per item, shuffled
/// epochs, Adam updates. Returns the mean loss of each epoch. Deterministic
/// for a given rng seed and dataset order.
inline std::vector<double> train(TrainState& state,
                                 const std::vector<std::pair<RealImage, RealImage>>& dataset,
                                 const NoiseSchedule& schedule, const TrainOptions& opt,
                                 RandomSource& rng) {
    if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
    if (opt.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    if (opt.epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");

    std::vector<double> epoch_losses;
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.next_below(i)]);

        double loss_sum = 0.0;
        std::size_t item_count = 0;
        for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
            const std::size_t stop = std::min(order.size(), start + opt.batch_size);
            std::vector<std::pair<RealImage, RealImage>> batch;
            batch.reserve(stop - start);
            for (std::size_t i = start; i < stop; ++i) batch.push_back(dataset[order[i]]);
            const LossGrad lg =
                loss_and_grad(state.params, batch, schedule, rng, state.params.cfg.p_norm);
            adam_step(state, lg.grads);
            loss_sum += lg.loss * static_cast<double>(batch.size());
            item_count += batch.size();
        }
        epoch_losses.push_back(loss_sum / static_cast<double>(item_count));
    }
    return epoch_losses;
}

}  // namespace diffrecon
