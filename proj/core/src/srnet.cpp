#include "cryosr/srnet.hpp"

#include <algorithm>
#include <cmath>

#include "cryosr/errors.hpp"

namespace cryosr {

namespace {

int next_pow2(int n) {
    int p = 1;
    while (p < n) p <<= 1;
    return p;
}

Tensor add_tensors(const Tensor& a, const Tensor& b) {
    Tensor y = a;
    for (size_t i = 0; i < y.v.size(); ++i) y.v[i] += b.v[i];
    return y;
}

}  // namespace

void ResBlock::init(int c, Rng& rng) {
    c1.init(c, c, 1, true, rng);
    c2.init(c, c, 1, true, rng);
}

Tensor ResBlock::forward(const Tensor& x, ResBlockCtx* ctx) const {
    Tensor a = c1.forward(x);
    Tensor r = leaky_relu(a);
    Tensor d = c2.forward(r);
    Tensor y = add_tensors(x, d);
    if (ctx) {
        ctx->x = x;
        ctx->a = std::move(a);
        ctx->r = std::move(r);
    }
    return y;
}

Tensor ResBlock::backward(const Tensor& gy, const ResBlockCtx& ctx, bool need_dx) {
    Tensor dr;
    c2.backward(ctx.r, gy, &dr);
    Tensor da = leaky_relu_backward(ctx.a, dr);
    Tensor dx1;
    c1.backward(ctx.x, da, need_dx ? &dx1 : nullptr);
    if (!need_dx) return Tensor();
    return add_tensors(gy, dx1);
}

void ResBlock::collect(std::vector<ParamRef>& out) {
    c1.collect(out);
    c2.collect(out);
}

SrModel SrModel::init(const SrHyper& hp, uint64_t seed) {
    if (hp.channels < 1 || hp.blocks < 0 || hp.scale != 2)
        throw config_error("unsupported SrModel hyperparameters");
    SrModel m;
    m.hp = hp;
    Rng rng(seed);
    m.enc1.init(2, hp.channels, 1, true, rng);
    m.enc2.init(hp.channels, hp.channels, 1, true, rng);
    m.enc_blocks.resize(hp.blocks);
    for (ResBlock& b : m.enc_blocks) b.init(hp.channels, rng);
    m.fuse1.init(2 * hp.channels, hp.channels, 1, false, rng);
    m.fuse2.init(hp.channels, hp.channels, 1, false, rng);
    m.dec1.init(hp.channels, rng);
    m.dec2.init(hp.channels, rng);
    m.head.init_zero(hp.channels, 1);
    return m;
}

Tensor SrModel::encode(const Tensor& x0, EncoderCtx* ctx) const {
    Tensor a1 = enc1.forward(x0);
    Tensor h1 = leaky_relu(a1);
    Tensor a2 = enc2.forward(h1);
    Tensor h2 = leaky_relu(a2);
    if (ctx) {
        ctx->x0 = x0;
        ctx->a1 = a1;
        ctx->h1 = h1;
        ctx->a2 = a2;
        ctx->h2 = h2;
        ctx->blocks.resize(enc_blocks.size());
    }
    Tensor x = std::move(h2);
    for (size_t i = 0; i < enc_blocks.size(); ++i)
        x = enc_blocks[i].forward(x, ctx ? &ctx->blocks[i] : nullptr);
    return x;
}

Tensor SrModel::encode_backward(const Tensor& gcode, EncoderCtx& ctx) {
    Tensor g = gcode;
    for (size_t i = enc_blocks.size(); i-- > 0;)
        g = enc_blocks[i].backward(g, ctx.blocks[i], true);
    Tensor da2 = leaky_relu_backward(ctx.a2, g);
    Tensor dh1;
    enc2.backward(ctx.h1, da2, &dh1);
    Tensor da1 = leaky_relu_backward(ctx.a1, dh1);
    enc1.backward(ctx.x0, da1, nullptr);
    return Tensor();
}

Tensor SrModel::fuse(const Tensor& a, const Tensor& b, FuseCtx* ctx) const {
    int c = a.c, h = a.h, w = a.w;
    Tensor u(2 * c, h, w);
    size_t plane = static_cast<size_t>(h) * w;
    for (int ch = 0; ch < c; ++ch) {
        const float* pa = a.plane(ch);
        const float* pb = b.plane(ch);
        float* ua = u.plane(ch);
        float* ub = u.plane(c + ch);
        for (size_t i = 0; i < plane; ++i) {
            float half_diff = 0.5f * (pa[i] - pb[i]);
            ua[i] = half_diff;
            ub[i] = -half_diff;
        }
    }
    Tensor t1 = fuse1.forward(u);
    Tensor r = leaky_relu(t1);
    Tensor hcode = fuse2.forward(r);
    Tensor out(c, h, w);
    for (size_t i = 0; i < out.v.size(); ++i)
        out.v[i] = 0.5f * (a.v[i] + b.v[i]) + hcode.v[i];
    if (ctx) {
        ctx->u = std::move(u);
        ctx->t1 = std::move(t1);
        ctx->r = std::move(r);
    }
    return out;
}

void SrModel::fuse_backward(const Tensor& gout, const FuseCtx& ctx, Tensor& da,
                            Tensor& db) {
    Tensor dr;
    fuse2.backward(ctx.r, gout, &dr);
    Tensor dt1 = leaky_relu_backward(ctx.t1, dr);
    Tensor du;
    fuse1.backward(ctx.u, dt1, &du);
    int c = gout.c, h = gout.h, w = gout.w;
    da = Tensor(c, h, w);
    db = Tensor(c, h, w);
    size_t plane = static_cast<size_t>(h) * w;
    for (int ch = 0; ch < c; ++ch) {
        const float* g = gout.plane(ch);
        const float* dua = du.plane(ch);
        const float* dub = du.plane(c + ch);
        float* pa = da.plane(ch);
        float* pb = db.plane(ch);
        for (size_t i = 0; i < plane; ++i) {
            float mean_part = 0.5f * g[i];
            float diff_part = 0.5f * (dua[i] - dub[i]);
            pa[i] = mean_part + diff_part;
            pb[i] = mean_part - diff_part;
        }
    }
}

Image2D SrModel::forward(const LrSet& lr_set, SrForwardCtx* ctx) const {
    lr_set.validate();
    const Image2D& m0 = lr_set.members.front();
    if (m0.width % 2 != 0 || m0.height % 2 != 0)
        throw config_error("sr_forward requires even member dimensions");
    int k = lr_set.member_count();
    int leaves = next_pow2(k);

    Image2D ref_up = bilinear_upsample(lr_set.reference_image, hp.scale);
    Tensor ref_t = image_to_tensor(ref_up);
    int hh = ref_t.h, ww = ref_t.w;

    if (ctx) {
        ctx->leaves.clear();
        ctx->leaves.resize(leaves);
        ctx->fusion_levels.clear();
        ctx->leaf_count = leaves;
    }

    std::vector<Tensor> codes;
    codes.reserve(leaves);
    for (int i = 0; i < leaves; ++i) {
        Tensor x0(2, hh, ww);
        if (i < k) {
            Image2D up = bilinear_upsample(lr_set.members[i], hp.scale);
            Tensor up_t = image_to_tensor(up);
            std::copy(up_t.v.begin(), up_t.v.end(), x0.plane(0));
        } else {
            std::copy(ref_t.v.begin(), ref_t.v.end(), x0.plane(0));
        }
        std::copy(ref_t.v.begin(), ref_t.v.end(), x0.plane(1));
        codes.push_back(encode(x0, ctx ? &ctx->leaves[i] : nullptr));
    }

    while (codes.size() > 1) {
        size_t n = codes.size() / 2;
        std::vector<FuseCtx>* level = nullptr;
        if (ctx) {
            ctx->fusion_levels.emplace_back(n);
            level = &ctx->fusion_levels.back();
        }
        std::vector<Tensor> merged;
        merged.reserve(n);
        for (size_t p = 0; p < n; ++p)
            merged.push_back(fuse(codes[2 * p], codes[2 * p + 1],
                                  level ? &(*level)[p] : nullptr));
        codes = std::move(merged);
    }

    Tensor t = dec1.forward(codes[0], ctx ? &ctx->decoder.b1 : nullptr);
    t = dec2.forward(t, ctx ? &ctx->decoder.b2 : nullptr);
    if (ctx) ctx->decoder.head_in = t;
    Tensor res = head.forward(t);

    Image2D out(ww, hh, m0.pixel_size / hp.scale);
    const float* rp = res.plane(0);
    for (size_t i = 0; i < out.size(); ++i)
        out.data[i] = static_cast<double>(rp[i]) + ref_up.data[i];
    return out;
}

void SrModel::backward(const Image2D& d_out, SrForwardCtx& ctx) {
    Tensor g = image_to_tensor(d_out);
    Tensor dt;
    head.backward(ctx.decoder.head_in, g, &dt);
    dt = dec2.backward(dt, ctx.decoder.b2, true);
    dt = dec1.backward(dt, ctx.decoder.b1, true);

    std::vector<Tensor> grads;
    grads.push_back(std::move(dt));
    for (size_t lvl = ctx.fusion_levels.size(); lvl-- > 0;) {
        std::vector<FuseCtx>& level = ctx.fusion_levels[lvl];
        std::vector<Tensor> prev(level.size() * 2);
        for (size_t p = 0; p < level.size(); ++p)
            fuse_backward(grads[p], level[p], prev[2 * p], prev[2 * p + 1]);
        grads = std::move(prev);
    }

    for (int i = 0; i < ctx.leaf_count; ++i)
        encode_backward(grads[i], ctx.leaves[i]);
}

void SrModel::collect_params(std::vector<ParamRef>& out) {
    enc1.collect(out);
    enc2.collect(out);
    for (ResBlock& b : enc_blocks) b.collect(out);
    fuse1.collect(out);
    fuse2.collect(out);
    dec1.collect(out);
    dec2.collect(out);
    head.collect(out);
}

void SrModel::zero_grad() {
    std::vector<ParamRef> refs;
    collect_params(refs);
    for (ParamRef& p : refs) std::fill(p.g, p.g + p.n, 0.0f);
}

size_t SrModel::param_count() {
    std::vector<ParamRef> refs;
    collect_params(refs);
    size_t n = 0;
    for (const ParamRef& p : refs) n += p.n;
    return n;
}

ShiftModel ShiftModel::init(int channels, double bound, uint64_t seed) {
    if (channels < 1 || bound <= 0)
        throw config_error("unsupported ShiftModel hyperparameters");
    ShiftModel m;
    m.channels = channels;
    m.bound = bound;
    Rng rng(seed);
    m.convs.resize(5);
    m.convs[0].init(2, channels, 2, true, rng);
    for (int i = 1; i < 5; ++i) m.convs[i].init(channels, channels, 2, true, rng);
    m.head.init_zero(channels, 2);
    return m;
}

std::pair<double, double> ShiftModel::forward(const Image2D& sr,
                                              const Image2D& hr,
                                              ShiftCtx* ctx) const {
    if (sr.width != hr.width || sr.height != hr.height)
        throw config_error("shift_forward requires equal dimensions");
    Tensor x(2, sr.height, sr.width);
    {
        float* p0 = x.plane(0);
        float* p1 = x.plane(1);
        for (size_t i = 0; i < sr.size(); ++i) {
            p0[i] = static_cast<float>(sr.data[i]);
            p1[i] = static_cast<float>(hr.data[i]);
        }
    }
    if (ctx) {
        ctx->conv_in.clear();
        ctx->conv_out.clear();
        ctx->sr_pixel_size = sr.pixel_size;
    }
    for (const Conv3x3& c : convs) {
        if (ctx) ctx->conv_in.push_back(x);
        Tensor a = c.forward(x);
        if (ctx) ctx->conv_out.push_back(a);
        x = leaky_relu(a);
    }
    if (ctx) ctx->conv_in.push_back(x);  // GAP input
    std::vector<float> pooled = global_avg_pool(x);
    std::vector<float> z = head.forward(pooled);
    if (ctx) {
        ctx->pooled = pooled;
        ctx->z = z;
    }
    return {bound * std::tanh(static_cast<double>(z[0])),
            bound * std::tanh(static_cast<double>(z[1]))};
}

void ShiftModel::backward(double ddx, double ddy, ShiftCtx& ctx, Image2D* d_sr) {
    double t0 = std::tanh(static_cast<double>(ctx.z[0]));
    double t1 = std::tanh(static_cast<double>(ctx.z[1]));
    std::vector<float> dz = {
        static_cast<float>(ddx * bound * (1.0 - t0 * t0)),
        static_cast<float>(ddy * bound * (1.0 - t1 * t1))};
    std::vector<float> dpool = head.backward(ctx.pooled, dz);
    const Tensor& gap_in = ctx.conv_in.back();
    Tensor g = global_avg_pool_backward(dpool, gap_in.c, gap_in.h, gap_in.w);
    for (size_t i = convs.size(); i-- > 0;) {
        Tensor ga = leaky_relu_backward(ctx.conv_out[i], g);
        Tensor dx;
        bool need = i > 0 || d_sr != nullptr;
        convs[i].backward(ctx.conv_in[i], ga, need ? &dx : nullptr);
        g = std::move(dx);
    }
    if (d_sr) {
        *d_sr = Image2D(g.w, g.h, ctx.sr_pixel_size);
        const float* p = g.plane(0);
        for (size_t i = 0; i < d_sr->size(); ++i) d_sr->data[i] = p[i];
    }
}

void ShiftModel::collect_params(std::vector<ParamRef>& out) {
    for (Conv3x3& c : convs) c.collect(out);
    head.collect(out);
}

void ShiftModel::zero_grad() {
    std::vector<ParamRef> refs;
    collect_params(refs);
    for (ParamRef& p : refs) std::fill(p.g, p.g + p.n, 0.0f);
}

size_t ShiftModel::param_count() {
    std::vector<ParamRef> refs;
    collect_params(refs);
    size_t n = 0;
    for (const ParamRef& p : refs) n += p.n;
    return n;
}

// ---------------------------------------------------------------------
// Registered loss and the differentiable Lanczos warp.

namespace {

constexpr double kTvEps = 1e-6;

struct Pass1D {
    int first = 0;       // tap offset relative to (coord - floor(shift))
    int shift_int = 0;   // floor(shift)
    int taps = 0;
    double w[6] = {};
    double dw[6] = {};   // d w / d shift
};

Pass1D make_pass(double shift, int a, bool with_deriv) {
    Pass1D p;
    p.taps = 2 * a;
    p.shift_int = static_cast<int>(std::floor(shift));
    double frac = shift - p.shift_int;
    double pos = -frac;
    int base = static_cast<int>(std::floor(pos));
    p.first = base - a + 1;
    double lv[6], dv[6];
    double s = 0, ds = 0;
    for (int i = 0; i < p.taps; ++i) {
        double t = pos - (p.first + i);
        lv[i] = lanczos_kernel(t, a);
        dv[i] = -lanczos_kernel_deriv(t, a);  // dt/dshift = -1
        s += lv[i];
        ds += dv[i];
    }
    for (int i = 0; i < p.taps; ++i) {
        p.w[i] = lv[i] / s;
        if (with_deriv) p.dw[i] = (dv[i] * s - lv[i] * ds) / (s * s);
    }
    return p;
}

enum class Axis { X, Y };

// out(x, y) = sum_i w[i] img(clamp(x - shift_int + first + i), y) along
// the chosen axis, using the pass's weight array (w or dw).
Image2D apply_pass(const Image2D& img, const Pass1D& p, Axis axis, bool deriv) {
    Image2D out(img.width, img.height, img.pixel_size, 0.0);
    const double* wv = deriv ? p.dw : p.w;
    int n = axis == Axis::X ? img.width : img.height;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            int coord = axis == Axis::X ? x : y;
            int src0 = coord - p.shift_int + p.first;
            double acc = 0;
            for (int i = 0; i < p.taps; ++i) {
                int s = std::clamp(src0 + i, 0, n - 1);
                acc += wv[i] * (axis == Axis::X ? img.at(s, y) : img.at(x, s));
            }
            out.at(x, y) = acc;
        }
    return out;
}

Image2D apply_pass_adjoint(const Image2D& g, const Pass1D& p, Axis axis) {
    Image2D out(g.width, g.height, g.pixel_size, 0.0);
    int n = axis == Axis::X ? g.width : g.height;
    for (int y = 0; y < g.height; ++y)
        for (int x = 0; x < g.width; ++x) {
            int coord = axis == Axis::X ? x : y;
            int src0 = coord - p.shift_int + p.first;
            double gv = g.at(x, y);
            for (int i = 0; i < p.taps; ++i) {
                int s = std::clamp(src0 + i, 0, n - 1);
                if (axis == Axis::X)
                    out.at(s, y) += p.w[i] * gv;
                else
                    out.at(x, s) += p.w[i] * gv;
            }
        }
    return out;
}

}  // namespace

Image2D lanczos_shift_adjoint(const Image2D& g, double dx, double dy, int a) {
    if (dx == 0.0 && dy == 0.0) return g;
    Pass1D px = make_pass(dx, a, false);
    Pass1D py = make_pass(dy, a, false);
    // Forward is Py(Px(img)); adjoint is Px^T(Py^T(g)).
    Image2D t = apply_pass_adjoint(g, py, Axis::Y);
    return apply_pass_adjoint(t, px, Axis::X);
}

Image2D lanczos_shift_ddx(const Image2D& img, double dx, double dy, int a) {
    Pass1D px = make_pass(dx, a, true);
    Pass1D py = make_pass(dy, a, false);
    Image2D t = apply_pass(img, px, Axis::X, true);
    return apply_pass(t, py, Axis::Y, false);
}

Image2D lanczos_shift_ddy(const Image2D& img, double dx, double dy, int a) {
    Pass1D px = make_pass(dx, a, false);
    Pass1D py = make_pass(dy, a, true);
    Image2D t = apply_pass(img, px, Axis::X, false);
    return apply_pass(t, py, Axis::Y, true);
}

RegisteredLoss registered_loss(const Image2D& sr, const Image2D& hr,
                               std::pair<double, double> shift,
                               double tv_weight) {
    if (sr.width != hr.width || sr.height != hr.height)
        throw config_error("registered_loss requires equal dimensions");
    if (tv_weight < 0) throw config_error("tv_weight must be >= 0");
    auto [dx, dy] = shift;

    Image2D shifted = lanczos_shift(sr, dx, dy);
    size_t n = sr.size();
    Image2D d_shifted(sr.width, sr.height, sr.pixel_size, 0.0);
    double mse = 0;
    for (size_t i = 0; i < n; ++i) {
        double r = shifted.data[i] - hr.data[i];
        mse += r * r;
        d_shifted.data[i] = 2.0 * r / static_cast<double>(n);
    }
    mse /= static_cast<double>(n);

    RegisteredLoss out;
    out.mse = mse;
    out.d_sr = lanczos_shift_adjoint(d_shifted, dx, dy);

    {
        Image2D gx = lanczos_shift_ddx(sr, dx, dy);
        Image2D gy = lanczos_shift_ddy(sr, dx, dy);
        double ax = 0, ay = 0;
        for (size_t i = 0; i < n; ++i) {
            ax += d_shifted.data[i] * gx.data[i];
            ay += d_shifted.data[i] * gy.data[i];
        }
        out.d_dx = ax;
        out.d_dy = ay;
    }

    double tv = 0;
    if (tv_weight > 0) {
        for (int y = 0; y < sr.height; ++y)
            for (int x = 0; x + 1 < sr.width; ++x) {
                double u = sr.at(x + 1, y) - sr.at(x, y);
                double s = std::sqrt(u * u + kTvEps * kTvEps);
                tv += s;
                double t = u / s / static_cast<double>(n);
                out.d_sr.at(x + 1, y) += tv_weight * t;
                out.d_sr.at(x, y) -= tv_weight * t;
            }
        for (int y = 0; y + 1 < sr.height; ++y)
            for (int x = 0; x < sr.width; ++x) {
                double u = sr.at(x, y + 1) - sr.at(x, y);
                double s = std::sqrt(u * u + kTvEps * kTvEps);
                tv += s;
                double t = u / s / static_cast<double>(n);
                out.d_sr.at(x, y + 1) += tv_weight * t;
                out.d_sr.at(x, y) -= tv_weight * t;
            }
        tv /= static_cast<double>(n);
    }
    out.tv = tv;
    out.loss = mse + tv_weight * tv;
    return out;
}

}  // namespace cryosr
