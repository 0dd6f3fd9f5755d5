#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "cryosr/ctf.hpp"
#include "cryosr/image.hpp"
#include "cryosr/rng.hpp"

namespace cryosr {

// Synthetic movie configuration. Drift entries are expressed in
// ground-truth pixels and applied verbatim to the ground truth before
// downsampling by s.
struct SimConfig {
    int frame_count = 16;
    std::vector<std::pair<double, double>> drift;  // (dx, dy) per frame
    double noise_sigma = 0.0;
    int scale = 2;  // s, in {1, 2}
    uint64_t seed = 1;

    void validate() const;
};

// Random-walk drift trajectory with per-frame step std of step_std_lr_px
// LR pixels, expressed in ground-truth pixels (scaled by s).
std::vector<std::pair<double, double>> drift_walk(int frame_count,
                                                  double step_std_lr_px,
                                                  int scale, Rng& rng);

// Band-limited random field: Gaussian white spectrum shaped by
// 1 / (1 + (g / (rolloff * cutoff))^1.5), hard cutoff at cutoff (1/A),
// normalized to zero mean and unit standard deviation.
Image2D make_phantom(int size, double pixel_size, double cutoff,
                     double rolloff, uint64_t seed);

// Forward model per frame: Lanczos drift shift, CTF, s x s block
// averaging, additive white Gaussian noise. Bit reproducible per seed.
MovieStack simulate_movie(const Image2D& ground_truth, const CtfParams& params,
                          const SimConfig& cfg);

// Standard deviation that makes noise power = signal power / snr for the
// noiseless LR frame of the given truth (frame 0 of a zero-drift run).
double sigma_for_snr(const Image2D& ground_truth, const CtfParams& params,
                     int scale, double snr);

}  // namespace cryosr
