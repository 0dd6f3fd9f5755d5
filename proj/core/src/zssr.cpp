#include "cryosr/zssr.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "cryosr/errors.hpp"

namespace cryosr {

void TrainConfig::validate() const {
    if (crop_size < 4) throw config_error("crop_size must be >= 4");
    if (scale != 2) throw config_error("scale must be 2");
    if (crop_size % (2 * scale) != 0)
        throw config_error("crop_size must divide by twice the scale");
    if (k < 2) throw config_error("k must be >= 2");
    if (!(0 < final_lr && final_lr < initial_lr))
        throw config_error("learning rates must satisfy 0 < final_lr < initial_lr");
    if (max_epochs < 0) throw config_error("max_epochs must be >= 0");
    if (lambda_tv < 0) throw config_error("lambda_tv must be >= 0");
    if (lr_window < 2) throw config_error("lr_window must be >= 2");
    if (channels < 1 || blocks < 0)
        throw config_error("network size must be positive");
    if (shift_channels < 1 || shift_bound_px <= 0)
        throw config_error("shift network parameters must be positive");
}

std::pair<LrSet, Image2D> sample_training_pair(const LrSet& lr_set,
                                               const TrainConfig& cfg,
                                               Rng& rng) {
    lr_set.validate();
    const Image2D& m0 = lr_set.members.front();
    if (m0.width < cfg.crop_size || m0.height < cfg.crop_size)
        throw config_error("crop_size exceeds member dimensions");

    int x0 = static_cast<int>(rng.uniform_int(0, m0.width - cfg.crop_size));
    int y0 = static_cast<int>(rng.uniform_int(0, m0.height - cfg.crop_size));
    int chosen = static_cast<int>(rng.uniform_int(0, lr_set.member_count() - 1));
    int d = static_cast<int>(rng.uniform_int(0, 7));

    LrSet tmp;
    tmp.reference_indices = lr_set.reference_indices;
    Image2D hr;
    for (int i = 0; i < lr_set.member_count(); ++i) {
        Image2D patch = dihedral(
            extract_patch(lr_set.members[i], x0, y0, cfg.crop_size, cfg.crop_size),
            d);
        if (i == chosen) hr = patch;
        tmp.members.push_back(block_downsample(patch, cfg.scale));
    }
    tmp.reference_image = pixelwise_median(tmp.members);
    return {std::move(tmp), std::move(hr)};
}

namespace {

// Least-squares slope over the last n trace entries and its standard
// error; the plateau test asks whether the slope is indistinguishable
// from zero at one standard error.
bool loss_plateaued(const std::vector<double>& trace, int n) {
    int m = static_cast<int>(trace.size());
    if (m < n || n < 3) return false;
    const double* y = trace.data() + (m - n);
    double tbar = 0.5 * (n - 1);
    double ybar = 0;
    for (int i = 0; i < n; ++i) ybar += y[i];
    ybar /= n;
    double sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        sxx += (i - tbar) * (i - tbar);
        sxy += (i - tbar) * (y[i] - ybar);
    }
    double slope = sxy / sxx;
    double ssr = 0;
    for (int i = 0; i < n; ++i) {
        double fit = ybar + slope * (i - tbar);
        ssr += (y[i] - fit) * (y[i] - fit);
    }
    double se = std::sqrt(std::max(0.0, ssr / (n - 2)) / sxx);
    return std::abs(slope) <= se;
}

}  // namespace

TrainResult train(const LrSet& lr_set, const TrainConfig& cfg) {
    cfg.validate();
    lr_set.validate();

    SrHyper hp;
    hp.channels = cfg.channels;
    hp.blocks = cfg.blocks;
    hp.scale = cfg.scale;
    TrainResult out{
        SrModel::init(hp, cfg.seed),
        ShiftModel::init(cfg.shift_channels, cfg.shift_bound_px, cfg.seed + 1),
        {}};
    TrainReport& report = out.report;

    std::vector<ParamRef> params;
    out.model.collect_params(params);
    out.shift_model.collect_params(params);
    Adam opt(params, cfg.initial_lr);

    Rng rng(cfg.seed + 2);
    auto t0 = std::chrono::steady_clock::now();
    int max_steps = cfg.max_epochs * kStepsPerEpoch;
    double lr = cfg.initial_lr;
    int next_check = 2 * cfg.lr_window;
    report.stop_reason = "max_epochs";

    for (int step = 1; step <= max_steps; ++step) {
        auto [tmp_lr, tmp_hr] = sample_training_pair(lr_set, cfg, rng);

        out.model.zero_grad();
        out.shift_model.zero_grad();
        SrForwardCtx ctx;
        Image2D sr = out.model.forward(tmp_lr, &ctx);
        ShiftCtx sctx;
        std::pair<double, double> shift =
            out.shift_model.forward(sr, tmp_hr, &sctx);
        RegisteredLoss rl = registered_loss(sr, tmp_hr, shift, cfg.lambda_tv);
        if (!std::isfinite(rl.loss)) {
            std::ostringstream msg;
            msg << "non-finite loss at step " << step << " (lr " << lr << ")";
            throw numeric_error(msg.str());
        }
        report.loss_trace.push_back(rl.loss);

        Image2D d_shift_sr;
        out.shift_model.backward(rl.d_dx, rl.d_dy, sctx, &d_shift_sr);
        Image2D d_sr = rl.d_sr;
        for (size_t i = 0; i < d_sr.size(); ++i)
            d_sr.data[i] += d_shift_sr.data[i];
        out.model.backward(d_sr, ctx);
        opt.step();

        if (step >= next_check) {
            if (loss_plateaued(report.loss_trace, 2 * cfg.lr_window)) {
                lr /= 10.0;
                opt.set_lr(lr);
                report.lr_change_steps.push_back(step);
                next_check = step + 2 * cfg.lr_window;
                if (lr <= cfg.final_lr * 1.0000001) {
                    report.stop_reason = "lr_floor";
                    break;
                }
            } else {
                next_check = step + cfg.lr_window;
            }
        }
    }

    report.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    return out;
}

Image2D infer(const SrModel& model, const ShiftModel& /*shift_model*/,
              const LrSet& lr_set, int bp_iters) {
    lr_set.validate();
    std::vector<Image2D> outputs;
    outputs.reserve(kSelfEnsembleSize);
    for (int k = 0; k < kSelfEnsembleSize; ++k) {
        LrSet t;
        t.reference_indices = lr_set.reference_indices;
        for (const Image2D& m : lr_set.members) t.members.push_back(dihedral(m, k));
        t.reference_image = dihedral(lr_set.reference_image, k);
        Image2D sr = model.forward(t, nullptr);
        outputs.push_back(dihedral_inverse(sr, k));
    }
    Image2D median = pixelwise_median(outputs);
    Image2D target = pixelwise_mean(lr_set.members);
    return back_project(median, target, model.hp.scale, bp_iters);
}

Image2D back_project(const Image2D& sr, const Image2D& lr_target, int s,
                     int iters) {
    if (s < 1) throw config_error("back-projection scale must be >= 1");
    if (iters < 0) throw config_error("back-projection iters must be >= 0");
    if (sr.width != s * lr_target.width || sr.height != s * lr_target.height)
        throw config_error("sr dimensions must be scale times the LR target");

    Image2D cur = sr;
    double prev = -1.0;
    for (int it = 0; it < iters; ++it) {
        Image2D down = block_downsample(cur, s);
        Image2D r(lr_target.width, lr_target.height, lr_target.pixel_size);
        double res = 0;
        for (size_t i = 0; i < r.size(); ++i) {
            r.data[i] = lr_target.data[i] - down.data[i];
            res += r.data[i] * r.data[i];
        }
        if (res == 0.0) break;
        if (prev >= 0 && res > prev * (1.0 + 1e-9))
            throw numeric_error("back-projection residual increased");
        prev = res;

        Image2D d = bilinear_upsample(r, s);
        Image2D dd = block_downsample(d, s);
        double num = 0, den = 0;
        for (size_t i = 0; i < dd.size(); ++i) {
            num += dd.data[i] * r.data[i];
            den += dd.data[i] * dd.data[i];
        }
        if (den <= 0) break;
        double alpha = num / den;
        for (size_t i = 0; i < cur.size(); ++i)
            cur.data[i] += alpha * d.data[i];
    }
    return cur;
}

}  // namespace cryosr
