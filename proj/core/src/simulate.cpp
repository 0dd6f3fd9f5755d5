#include "cryosr/simulate.hpp"

#include <cmath>
#include <numbers>

#include "cryosr/errors.hpp"
#include "cryosr/fft.hpp"

namespace cryosr {

double Rng::gaussian() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1, u2;
    do {
        u1 = uniform01();
    } while (u1 <= 0.0);
    u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    have_spare_ = true;
    return r * std::cos(t);
}

std::vector<int> Rng::sample_without_replacement(int n, int k) {
    std::vector<int> pool(n);
    for (int i = 0; i < n; ++i) pool[i] = i;
    std::vector<int> out(k);
    for (int i = 0; i < k; ++i) {
        int j = static_cast<int>(uniform_int(i, n - 1));
        std::swap(pool[i], pool[j]);
        out[i] = pool[i];
    }
    return out;
}

void SimConfig::validate() const {
    if (frame_count < 1) throw config_error("frame_count must be >= 1");
    if (static_cast<int>(drift.size()) != frame_count)
        throw config_error("drift trajectory length must equal frame_count");
    if (noise_sigma < 0) throw config_error("noise_sigma must be >= 0");
    if (scale != 1 && scale != 2) throw config_error("scale must be 1 or 2");
}

std::vector<std::pair<double, double>> drift_walk(int frame_count,
                                                  double step_std_lr_px,
                                                  int scale, Rng& rng) {
    std::vector<std::pair<double, double>> out(frame_count);
    double x = 0, y = 0;
    double step = step_std_lr_px * scale;
    for (int j = 0; j < frame_count; ++j) {
        x += rng.gaussian() * step;
        y += rng.gaussian() * step;
        out[j] = {x, y};
    }
    return out;
}

Image2D make_phantom(int size, double pixel_size, double cutoff,
                     double rolloff, uint64_t seed) {
    if (size < 2 || size % 2 != 0) throw config_error("phantom size must be even and >= 2");
    Rng rng(seed);
    Image2D noise(size, size, pixel_size);
    for (double& v : noise.data) v = rng.gaussian();
    SpectrumImage spec = fft2(noise);
    for (int y = 0; y < size; ++y) {
        double fy = freq_index(y, size) / (size * pixel_size);
        for (int x = 0; x < size; ++x) {
            double fx = freq_index(x, size) / (size * pixel_size);
            double g = std::sqrt(fx * fx + fy * fy);
            double amp = g > cutoff
                             ? 0.0
                             : 1.0 / (1.0 + std::pow(g / (rolloff * cutoff), 1.5));
            spec.at(x, y) *= amp;
        }
    }
    Image2D out = ifft2(spec);
    double m = image_mean(out);
    for (double& v : out.data) v -= m;
    double sd = std::sqrt(image_variance(out));
    if (sd > 0)
        for (double& v : out.data) v /= sd;
    return out;
}

MovieStack simulate_movie(const Image2D& ground_truth, const CtfParams& params,
                          const SimConfig& cfg) {
    cfg.validate();
    params.validate();
    if (ground_truth.width % (2 * cfg.scale) != 0 ||
        ground_truth.height % (2 * cfg.scale) != 0)
        throw config_error("ground truth dimensions must divide by 2*scale");

    Rng rng(cfg.seed);
    MovieStack stack;
    stack.frames.reserve(cfg.frame_count);
    for (int j = 0; j < cfg.frame_count; ++j) {
        Image2D shifted = lanczos_shift(ground_truth, cfg.drift[j].first,
                                        cfg.drift[j].second);
        Image2D modulated = apply_ctf(shifted, params);
        Image2D frame = block_downsample(modulated, cfg.scale);
        if (cfg.noise_sigma > 0)
            for (double& v : frame.data) v += rng.gaussian() * cfg.noise_sigma;
        stack.frames.push_back(std::move(frame));
    }
    return stack;
}

double sigma_for_snr(const Image2D& ground_truth, const CtfParams& params,
                     int scale, double snr) {
    if (snr <= 0) throw config_error("snr must be positive");
    Image2D lr = block_downsample(apply_ctf(ground_truth, params), scale);
    return std::sqrt(image_variance(lr) / snr);
}

}  // namespace cryosr
