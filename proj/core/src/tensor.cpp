#include "cryosr/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "cryosr/errors.hpp"

namespace cryosr {

Tensor image_to_tensor(const Image2D& img) {
    Tensor t(1, img.height, img.width);
    for (size_t i = 0; i < img.size(); ++i) t.v[i] = static_cast<float>(img.data[i]);
    return t;
}

Image2D tensor_to_image(const Tensor& t, double pixel_size, int channel) {
    Image2D img(t.w, t.h, pixel_size);
    const float* p = t.plane(channel);
    for (size_t i = 0; i < img.size(); ++i) img.data[i] = p[i];
    return img;
}

namespace {

// Uniform fan-in init with the leaky-rectifier gain.
float init_limit(int fan_in) {
    double gain2 = 2.0 / (1.0 + 0.1 * 0.1);
    return static_cast<float>(std::sqrt(3.0 * gain2 / fan_in));
}

}  // namespace

void Conv3x3::init(int in_channels, int out_channels, int stride_, bool bias,
                   Rng& rng) {
    in_c = in_channels;
    out_c = out_channels;
    stride = stride_;
    has_bias = bias;
    w.assign(static_cast<size_t>(out_c) * in_c * 9, 0.0f);
    gw.assign(w.size(), 0.0f);
    float lim = init_limit(in_c * 9);
    for (float& x : w) x = static_cast<float>((2.0 * rng.uniform01() - 1.0) * lim);
    if (has_bias) {
        b.assign(out_c, 0.0f);
        gb.assign(out_c, 0.0f);
    }
}

void Conv3x3::init_zero(int in_channels, int out_channels) {
    in_c = in_channels;
    out_c = out_channels;
    stride = 1;
    has_bias = true;
    w.assign(static_cast<size_t>(out_c) * in_c * 9, 0.0f);
    gw.assign(w.size(), 0.0f);
    b.assign(out_c, 0.0f);
    gb.assign(out_c, 0.0f);
}

Tensor Conv3x3::forward(const Tensor& x) const {
    if (x.c != in_c) throw config_error("conv input channel mismatch");
    int oh = stride == 1 ? x.h : (x.h + 1) / 2;
    int ow = stride == 1 ? x.w : (x.w + 1) / 2;
    Tensor y(out_c, oh, ow);
    for (int oc = 0; oc < out_c; ++oc) {
        float* yp = y.plane(oc);
        float bias = has_bias ? b[oc] : 0.0f;
        for (size_t i = 0, n = static_cast<size_t>(oh) * ow; i < n; ++i)
            yp[i] = bias;
    }
    if (stride == 1) {
        for (int oc = 0; oc < out_c; ++oc) {
            float* yp = y.plane(oc);
            for (int ic = 0; ic < in_c; ++ic) {
                const float* xp = x.plane(ic);
                const float* wp = &w[(static_cast<size_t>(oc) * in_c + ic) * 9];
                for (int ky = 0; ky < 3; ++ky) {
                    int dy = ky - 1;
                    for (int kx = 0; kx < 3; ++kx) {
                        int dx = kx - 1;
                        float wv = wp[ky * 3 + kx];
                        if (wv == 0.0f) continue;
                        int y0 = std::max(0, -dy), y1 = x.h - std::max(0, dy);
                        int x0 = std::max(0, -dx), x1 = x.w - std::max(0, dx);
                        for (int yy = y0; yy < y1; ++yy) {
                            float* orow = yp + static_cast<size_t>(yy) * ow;
                            const float* irow =
                                xp + static_cast<size_t>(yy + dy) * x.w + dx;
                            for (int xx = x0; xx < x1; ++xx)
                                orow[xx] += wv * irow[xx];
                        }
                    }
                }
            }
        }
    } else {
        for (int oc = 0; oc < out_c; ++oc)
            for (int ic = 0; ic < in_c; ++ic) {
                const float* xp = x.plane(ic);
                const float* wp = &w[(static_cast<size_t>(oc) * in_c + ic) * 9];
                for (int oy = 0; oy < oh; ++oy)
                    for (int ox = 0; ox < ow; ++ox) {
                        float acc = 0;
                        for (int ky = 0; ky < 3; ++ky) {
                            int iy = oy * 2 + ky - 1;
                            if (iy < 0 || iy >= x.h) continue;
                            for (int kx = 0; kx < 3; ++kx) {
                                int ix = ox * 2 + kx - 1;
                                if (ix < 0 || ix >= x.w) continue;
                                acc += wp[ky * 3 + kx] * xp[iy * x.w + ix];
                            }
                        }
                        y.at(oc, oy, ox) += acc;
                    }
            }
    }
    return y;
}

void Conv3x3::backward(const Tensor& x, const Tensor& gy, Tensor* dx) {
    if (dx) *dx = Tensor(x.c, x.h, x.w, 0.0f);
    if (has_bias)
        for (int oc = 0; oc < out_c; ++oc) {
            const float* gp = gy.plane(oc);
            double acc = 0;
            for (size_t i = 0, n = static_cast<size_t>(gy.h) * gy.w; i < n; ++i)
                acc += gp[i];
            gb[oc] += static_cast<float>(acc);
        }
    if (stride == 1) {
        for (int oc = 0; oc < out_c; ++oc) {
            const float* gp = gy.plane(oc);
            for (int ic = 0; ic < in_c; ++ic) {
                const float* xp = x.plane(ic);
                float* dxp = dx ? dx->plane(ic) : nullptr;
                float* gwp = &gw[(static_cast<size_t>(oc) * in_c + ic) * 9];
                const float* wp = &w[(static_cast<size_t>(oc) * in_c + ic) * 9];
                for (int ky = 0; ky < 3; ++ky) {
                    int dy = ky - 1;
                    for (int kx = 0; kx < 3; ++kx) {
                        int dxk = kx - 1;
                        int y0 = std::max(0, -dy), y1 = x.h - std::max(0, dy);
                        int x0 = std::max(0, -dxk), x1 = x.w - std::max(0, dxk);
                        // Row-level float partials keep both loops
                        // vectorizable; rows are summed in double.
                        double wacc = 0;
                        float wv = wp[ky * 3 + kx];
                        for (int yy = y0; yy < y1; ++yy) {
                            const float* grow = gp + static_cast<size_t>(yy) * gy.w;
                            const float* irow =
                                xp + static_cast<size_t>(yy + dy) * x.w + dxk;
                            // Eight independent lanes so the reduction
                            // vectorizes with a fixed summation order.
                            float lanes[8] = {};
                            int xx = x0;
                            for (; xx + 8 <= x1; xx += 8)
                                for (int u = 0; u < 8; ++u)
                                    lanes[u] += grow[xx + u] * irow[xx + u];
                            float rowacc = 0.0f;
                            for (; xx < x1; ++xx)
                                rowacc += grow[xx] * irow[xx];
                            rowacc += ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) +
                                      ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]));
                            wacc += rowacc;
                            if (dxp) {
                                float* drow =
                                    dxp + static_cast<size_t>(yy + dy) * x.w + dxk;
                                for (int xx = x0; xx < x1; ++xx)
                                    drow[xx] += wv * grow[xx];
                            }
                        }
                        gwp[ky * 3 + kx] += static_cast<float>(wacc);
                    }
                }
            }
        }
    } else {
        for (int oc = 0; oc < out_c; ++oc)
            for (int ic = 0; ic < in_c; ++ic) {
                const float* xp = x.plane(ic);
                const float* wp = &w[(static_cast<size_t>(oc) * in_c + ic) * 9];
                float* gwp = &gw[(static_cast<size_t>(oc) * in_c + ic) * 9];
                for (int oy = 0; oy < gy.h; ++oy)
                    for (int ox = 0; ox < gy.w; ++ox) {
                        float g = gy.at(oc, oy, ox);
                        if (g == 0.0f) continue;
                        for (int ky = 0; ky < 3; ++ky) {
                            int iy = oy * 2 + ky - 1;
                            if (iy < 0 || iy >= x.h) continue;
                            for (int kx = 0; kx < 3; ++kx) {
                                int ix = ox * 2 + kx - 1;
                                if (ix < 0 || ix >= x.w) continue;
                                gwp[ky * 3 + kx] += g * xp[iy * x.w + ix];
                                if (dx) dx->at(ic, iy, ix) += wp[ky * 3 + kx] * g;
                            }
                        }
                    }
            }
    }
}

void Conv3x3::collect(std::vector<ParamRef>& out) {
    out.push_back({w.data(), gw.data(), w.size()});
    if (has_bias) out.push_back({b.data(), gb.data(), b.size()});
}

Tensor leaky_relu(const Tensor& x) {
    Tensor y = x;
    for (float& v : y.v) v = v > 0.0f ? v : 0.1f * v;
    return y;
}

Tensor leaky_relu_backward(const Tensor& x, const Tensor& gy) {
    Tensor dx = gy;
    for (size_t i = 0; i < x.v.size(); ++i)
        if (x.v[i] <= 0.0f) dx.v[i] *= 0.1f;
    return dx;
}

std::vector<float> global_avg_pool(const Tensor& x) {
    std::vector<float> out(x.c);
    double inv = 1.0 / (static_cast<double>(x.h) * x.w);
    for (int c = 0; c < x.c; ++c) {
        const float* p = x.plane(c);
        double acc = 0;
        for (size_t i = 0, n = static_cast<size_t>(x.h) * x.w; i < n; ++i)
            acc += p[i];
        out[c] = static_cast<float>(acc * inv);
    }
    return out;
}

Tensor global_avg_pool_backward(const std::vector<float>& gy, int c, int h, int w) {
    Tensor dx(c, h, w);
    float inv = 1.0f / (static_cast<float>(h) * w);
    for (int ch = 0; ch < c; ++ch) {
        float g = gy[ch] * inv;
        float* p = dx.plane(ch);
        for (size_t i = 0, n = static_cast<size_t>(h) * w; i < n; ++i) p[i] = g;
    }
    return dx;
}

void Linear::init(int in, int out, Rng& rng) {
    in_n = in;
    out_n = out;
    w.assign(static_cast<size_t>(in) * out, 0.0f);
    gw.assign(w.size(), 0.0f);
    b.assign(out, 0.0f);
    gb.assign(out, 0.0f);
    float lim = init_limit(in);
    for (float& x : w) x = static_cast<float>((2.0 * rng.uniform01() - 1.0) * lim);
}

void Linear::init_zero(int in, int out) {
    in_n = in;
    out_n = out;
    w.assign(static_cast<size_t>(in) * out, 0.0f);
    gw.assign(w.size(), 0.0f);
    b.assign(out, 0.0f);
    gb.assign(out, 0.0f);
}

std::vector<float> Linear::forward(const std::vector<float>& x) const {
    std::vector<float> y(out_n);
    for (int o = 0; o < out_n; ++o) {
        double acc = b[o];
        const float* wp = &w[static_cast<size_t>(o) * in_n];
        for (int i = 0; i < in_n; ++i) acc += static_cast<double>(wp[i]) * x[i];
        y[o] = static_cast<float>(acc);
    }
    return y;
}

std::vector<float> Linear::backward(const std::vector<float>& x,
                                    const std::vector<float>& gy) {
    std::vector<float> dx(in_n, 0.0f);
    for (int o = 0; o < out_n; ++o) {
        gb[o] += gy[o];
        float* gwp = &gw[static_cast<size_t>(o) * in_n];
        const float* wp = &w[static_cast<size_t>(o) * in_n];
        for (int i = 0; i < in_n; ++i) {
            gwp[i] += gy[o] * x[i];
            dx[i] += wp[i] * gy[o];
        }
    }
    return dx;
}

void Linear::collect(std::vector<ParamRef>& out) {
    out.push_back({w.data(), gw.data(), w.size()});
    out.push_back({b.data(), gb.data(), b.size()});
}

Adam::Adam(std::vector<ParamRef> params, double lr, double beta1, double beta2,
           double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const ParamRef& p : params_) {
        m_.emplace_back(p.n, 0.0f);
        v_.emplace_back(p.n, 0.0f);
    }
}

void Adam::step() {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t k = 0; k < params_.size(); ++k) {
        ParamRef& p = params_[k];
        float* m = m_[k].data();
        float* v = v_[k].data();
        for (size_t i = 0; i < p.n; ++i) {
            double g = p.g[i];
            double mi = beta1_ * m[i] + (1.0 - beta1_) * g;
            double vi = beta2_ * v[i] + (1.0 - beta2_) * g * g;
            m[i] = static_cast<float>(mi);
            v[i] = static_cast<float>(vi);
            double mhat = mi / bc1;
            double vhat = vi / bc2;
            p.w[i] -= static_cast<float>(lr_ * mhat / (std::sqrt(vhat) + eps_));
        }
    }
}

void Adam::zero_grad() {
    for (ParamRef& p : params_)
        std::fill(p.g, p.g + p.n, 0.0f);
}

}  // namespace cryosr
