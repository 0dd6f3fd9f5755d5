#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cryosr/image.hpp"
#include "cryosr/motion.hpp"
#include "cryosr/rng.hpp"
#include "cryosr/srnet.hpp"

namespace cryosr {

// Zero-shot training configuration. crop_size is measured at member
// resolution; each sampled pair pairs a crop with its s-fold downsample.
struct TrainConfig {
    int crop_size = 256;
    int scale = 2;
    int k = 16;
    double initial_lr = 1e-3;
    double final_lr = 1e-5;
    int max_epochs = 300;
    double lambda_tv = 1e-4;
    int lr_window = 60;  // plateau checks cover the last 2 windows
    uint64_t seed = 0;
    int channels = 32;
    int blocks = 4;
    int shift_channels = 16;
    double shift_bound_px = 8.0;

    void validate() const;
};

// One epoch is 16 sampled pairs.
constexpr int kStepsPerEpoch = 16;

// Inference averages (pixel-wise median) over all dihedral transforms.
constexpr int kSelfEnsembleSize = 8;

struct TrainReport {
    std::vector<double> loss_trace;     // one entry per step
    std::vector<int> lr_change_steps;   // 1-based step of each lr /= 10
    std::string stop_reason;            // "lr_floor" or "max_epochs"
    double wall_time_s = 0;
};

struct TrainResult {
    SrModel model;
    ShiftModel shift_model;
    TrainReport report;
};

// One random crop location applied identically across all members, a
// random dihedral element applied consistently, then an s-fold block
// downsample of every member. The HR side is the un-downsampled crop of
// one randomly chosen member, so downsampling it reproduces that
// member's LR crop bit for bit.
std::pair<LrSet, Image2D> sample_training_pair(const LrSet& lr_set,
                                               const TrainConfig& cfg,
                                               Rng& rng);

// Adam over the fusion and shift networks jointly. Every lr_window steps
// (rebased after each change) a line is fit to the last 2*lr_window
// losses; when the slope magnitude falls below its own standard error
// the learning rate divides by 10. Training stops when the rate reaches
// final_lr or the epoch budget runs out. Non-finite loss aborts with the
// step and learning rate in the diagnostic.
TrainResult train(const LrSet& lr_set, const TrainConfig& cfg);

// Geometric self-ensemble: the whole member set is transformed by each
// of the 8 dihedral elements jointly (preserving inter-member
// registration), super-resolved, transformed back, and reduced by a
// pixel-wise median; back-projection against the member mean follows.
Image2D infer(const SrModel& model, const ShiftModel& shift_model,
              const LrSet& lr_set, int bp_iters = 10);

// Iterative downsample-consistency correction with an exact line search
// along the upsampled residual, so the residual norm never increases.
Image2D back_project(const Image2D& sr, const Image2D& lr_target, int s,
                     int iters);

}  // namespace cryosr
