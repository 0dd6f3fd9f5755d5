#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cryosr/ctf.hpp"
#include "cryosr/motion.hpp"
#include "cryosr/zssr.hpp"

namespace cryosr {

// Resolved settings for a pipeline run. Serialized as a flat text file of
// `key = value` lines with `#` comments; unknown and duplicate keys are
// rejected. The seed has no default and must be supplied by the file or a
// command line flag.
struct PipelineConfig {
    TrainConfig train;  // k, scale, crop_size, rates, epochs, net shape
    CtfParams ctf;

    int frame_count = 16;
    double drift_std_px = 0.3;  // per-frame random walk step, LR pixels
    double snr = 0.1;
    int truth_size = 512;    // ground truth grid (HR pixels)
    double pixel_size = 1.0;  // LR pixel size in Angstrom
    int bp_iters = 10;
    long long seed = -1;  // required, non-negative
    std::string out_dir = "run";

    void validate() const;
};

// Parse a config file; `key = value`, blank lines and `#` comments.
PipelineConfig load_config(const std::string& path);
PipelineConfig parse_config(const std::string& text);

// Canonical serialization: fixed key order, full precision. Equal
// configs serialize identically, so the hash below is stable.
std::string serialize_config(const PipelineConfig& cfg);

// FNV-1a 64-bit hash of the canonical serialization, as 16 hex digits.
std::string config_hash(const PipelineConfig& cfg);

// Write <dir>/manifest.txt: the resolved config, with the stage name and
// config hash as comments. The manifest is itself a valid config file, so
// any stage can be replayed from it verbatim.
void write_manifest(const PipelineConfig& cfg, const std::string& stage,
                    const std::string& dir);

// Stage drivers. Fixed artifact names inside the run directory:
//   simulate: truth.mrc, stack.mrc
//   align:    lrset.mrc
//   train:    model.ckpt, train_report.csv
//   sr:       sr.mrc
//   eval:     eval/<variant>/{ctf_report.csv, frc.csv, spectrum.pgm}
//   report:   summary.csv
// Every stage also rewrites manifest.txt.
void run_simulate(const PipelineConfig& cfg, const std::string& dir);
void run_align(const PipelineConfig& cfg, const std::string& dir);
void run_train(const PipelineConfig& cfg, const std::string& dir);
void run_sr(const PipelineConfig& cfg, const std::string& dir);
void run_eval(const PipelineConfig& cfg, const std::string& dir);

// Collect eval metrics for every variant under <dir>/eval into a table,
// one row per variant in lexicographic order. Fewer than two variants is
// a contract violation. Missing metrics render as `absent`. Returns the
// text table; also writes <dir>/summary.csv.
std::string run_report(const PipelineConfig& cfg, const std::string& dir);

// Rebuild an LrSet from lrset.mrc: members in file order, reference image
// recomputed as the pixel-wise median.
LrSet load_lr_set(const std::string& path);

}  // namespace cryosr
