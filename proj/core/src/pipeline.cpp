#include "cryosr/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cryosr/errors.hpp"
#include "cryosr/evalctf.hpp"
#include "cryosr/mrc.hpp"
#include "cryosr/simulate.hpp"
#include "cryosr/srnet.hpp"

namespace fs = std::filesystem;

namespace cryosr {

namespace {

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

double parse_double(const std::string& key, const std::string& value) {
    size_t pos = 0;
    double v = 0;
    try {
        v = std::stod(value, &pos);
    } catch (const std::exception&) {
        throw config_error("bad numeric value for '" + key + "': " + value);
    }
    if (pos != value.size())
        throw config_error("bad numeric value for '" + key + "': " + value);
    return v;
}

long long parse_int(const std::string& key, const std::string& value) {
    size_t pos = 0;
    long long v = 0;
    try {
        v = std::stoll(value, &pos);
    } catch (const std::exception&) {
        throw config_error("bad integer value for '" + key + "': " + value);
    }
    if (pos != value.size())
        throw config_error("bad integer value for '" + key + "': " + value);
    return v;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void require_file(const std::string& path) {
    if (!fs::exists(path)) throw io_error("missing input: " + path);
}

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open " + path + " for writing");
    return os;
}

}  // namespace

void PipelineConfig::validate() const {
    if (seed < 0) throw config_error("config requires a non-negative seed");
    TrainConfig tc = train;
    tc.seed = static_cast<uint64_t>(seed);
    tc.validate();
    ctf.validate();
    if (frame_count < 2) throw config_error("frame_count must be at least 2");
    if (train.k > frame_count)
        throw config_error("k cannot exceed frame_count");
    if (drift_std_px < 0) throw config_error("drift_std_px must be >= 0");
    if (snr <= 0) throw config_error("snr must be positive");
    if (truth_size < 16 || truth_size % (2 * train.scale) != 0)
        throw config_error(
            "truth_size must be >= 16 and divisible by twice the scale");
    if (pixel_size <= 0) throw config_error("pixel_size must be positive");
    if (bp_iters < 0) throw config_error("bp_iters must be >= 0");
    if (out_dir.empty()) throw config_error("out_dir must not be empty");
}

PipelineConfig parse_config(const std::string& text) {
    PipelineConfig cfg;
    std::map<std::string, int> seen;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw config_error("line " + std::to_string(lineno) +
                               ": expected 'key = value'");
        std::string key = trim(s.substr(0, eq));
        std::string value = trim(s.substr(eq + 1));
        if (key.empty() || value.empty())
            throw config_error("line " + std::to_string(lineno) +
                               ": expected 'key = value'");
        if (seen[key]++)
            throw config_error("duplicate config key '" + key + "'");

        if (key == "k")
            cfg.train.k = static_cast<int>(parse_int(key, value));
        else if (key == "scale")
            cfg.train.scale = static_cast<int>(parse_int(key, value));
        else if (key == "crop_size")
            cfg.train.crop_size = static_cast<int>(parse_int(key, value));
        else if (key == "initial_lr")
            cfg.train.initial_lr = parse_double(key, value);
        else if (key == "final_lr")
            cfg.train.final_lr = parse_double(key, value);
        else if (key == "max_epochs")
            cfg.train.max_epochs = static_cast<int>(parse_int(key, value));
        else if (key == "lambda_tv")
            cfg.train.lambda_tv = parse_double(key, value);
        else if (key == "lr_window")
            cfg.train.lr_window = static_cast<int>(parse_int(key, value));
        else if (key == "channels")
            cfg.train.channels = static_cast<int>(parse_int(key, value));
        else if (key == "blocks")
            cfg.train.blocks = static_cast<int>(parse_int(key, value));
        else if (key == "shift_channels")
            cfg.train.shift_channels = static_cast<int>(parse_int(key, value));
        else if (key == "shift_bound_px")
            cfg.train.shift_bound_px = parse_double(key, value);
        else if (key == "voltage_kv")
            cfg.ctf.voltage_kv = parse_double(key, value);
        else if (key == "cs_mm")
            cfg.ctf.cs_mm = parse_double(key, value);
        else if (key == "amplitude_contrast")
            cfg.ctf.amplitude_contrast = parse_double(key, value);
        else if (key == "defocus_a")
            cfg.ctf.defocus_a = parse_double(key, value);
        else if (key == "phase_shift_rad")
            cfg.ctf.phase_shift_rad = parse_double(key, value);
        else if (key == "frame_count")
            cfg.frame_count = static_cast<int>(parse_int(key, value));
        else if (key == "drift_std_px")
            cfg.drift_std_px = parse_double(key, value);
        else if (key == "snr")
            cfg.snr = parse_double(key, value);
        else if (key == "truth_size")
            cfg.truth_size = static_cast<int>(parse_int(key, value));
        else if (key == "pixel_size")
            cfg.pixel_size = parse_double(key, value);
        else if (key == "bp_iters")
            cfg.bp_iters = static_cast<int>(parse_int(key, value));
        else if (key == "seed")
            cfg.seed = parse_int(key, value);
        else if (key == "out_dir")
            cfg.out_dir = value;
        else
            throw config_error("unknown config key '" + key + "'");
    }
    return cfg;
}

PipelineConfig load_config(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open config file " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

std::string serialize_config(const PipelineConfig& cfg) {
    std::ostringstream os;
    os << "k = " << cfg.train.k << "\n";
    os << "scale = " << cfg.train.scale << "\n";
    os << "crop_size = " << cfg.train.crop_size << "\n";
    os << "initial_lr = " << fmt(cfg.train.initial_lr) << "\n";
    os << "final_lr = " << fmt(cfg.train.final_lr) << "\n";
    os << "max_epochs = " << cfg.train.max_epochs << "\n";
    os << "lambda_tv = " << fmt(cfg.train.lambda_tv) << "\n";
    os << "lr_window = " << cfg.train.lr_window << "\n";
    os << "channels = " << cfg.train.channels << "\n";
    os << "blocks = " << cfg.train.blocks << "\n";
    os << "shift_channels = " << cfg.train.shift_channels << "\n";
    os << "shift_bound_px = " << fmt(cfg.train.shift_bound_px) << "\n";
    os << "voltage_kv = " << fmt(cfg.ctf.voltage_kv) << "\n";
    os << "cs_mm = " << fmt(cfg.ctf.cs_mm) << "\n";
    os << "amplitude_contrast = " << fmt(cfg.ctf.amplitude_contrast) << "\n";
    os << "defocus_a = " << fmt(cfg.ctf.defocus_a) << "\n";
    os << "phase_shift_rad = " << fmt(cfg.ctf.phase_shift_rad) << "\n";
    os << "frame_count = " << cfg.frame_count << "\n";
    os << "drift_std_px = " << fmt(cfg.drift_std_px) << "\n";
    os << "snr = " << fmt(cfg.snr) << "\n";
    os << "truth_size = " << cfg.truth_size << "\n";
    os << "pixel_size = " << fmt(cfg.pixel_size) << "\n";
    os << "bp_iters = " << cfg.bp_iters << "\n";
    os << "seed = " << cfg.seed << "\n";
    os << "out_dir = " << cfg.out_dir << "\n";
    return os.str();
}

std::string config_hash(const PipelineConfig& cfg) {
    std::string s = serialize_config(cfg);
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(h));
    return buf;
}

void write_manifest(const PipelineConfig& cfg, const std::string& stage,
                    const std::string& dir) {
    fs::create_directories(dir);
    std::ofstream os = open_out(dir + "/manifest.txt");
    os << "# stage: " << stage << "\n";
    os << "# config_hash: " << config_hash(cfg) << "\n";
    os << serialize_config(cfg);
    if (!os) throw io_error("failed writing manifest in " + dir);
}

LrSet load_lr_set(const std::string& path) {
    MovieStack stack = read_mrc(path);
    LrSet set;
    set.members = stack.frames;
    for (int i = 0; i < stack.frame_count(); ++i)
        set.reference_indices.push_back(i);
    if (set.members.size() < 2)
        throw config_error("lrset needs at least 2 members: " + path);
    set.reference_image = pixelwise_median(set.members);
    set.validate();
    return set;
}

void run_simulate(const PipelineConfig& cfg, const std::string& dir) {
    cfg.validate();
    fs::create_directories(dir);
    int s = cfg.train.scale;
    double lr_nyquist = 1.0 / (2.0 * cfg.pixel_size);
    // Signal extends past the LR Nyquist so there is something for SR to
    // recover. The knee sits far above the cutoff so the spectrum stays
    // nearly flat across the band; recovery then hinges on unfolding the
    // content aliased at the member Nyquist, which plain upsampling
    // cannot do.
    double cutoff = 1.4 * lr_nyquist;
    double knee = 2.857 * cutoff;
    Image2D truth =
        make_phantom(cfg.truth_size, cfg.pixel_size / s, cutoff, knee / cutoff,
                     static_cast<uint64_t>(cfg.seed));

    SimConfig sim;
    sim.frame_count = cfg.frame_count;
    sim.scale = s;
    sim.seed = static_cast<uint64_t>(cfg.seed);
    Rng rng(sim.seed);
    sim.drift = drift_walk(cfg.frame_count, cfg.drift_std_px, s, rng);
    sim.noise_sigma = sigma_for_snr(truth, cfg.ctf, s, cfg.snr);

    MovieStack stack = simulate_movie(truth, cfg.ctf, sim);
    write_mrc_image(truth, dir + "/truth.mrc");
    write_mrc(stack, dir + "/stack.mrc");
    write_manifest(cfg, "simulate", dir);
}

void run_align(const PipelineConfig& cfg, const std::string& dir) {
    cfg.validate();
    require_file(dir + "/stack.mrc");
    MovieStack stack = read_mrc(dir + "/stack.mrc");
    LrSet set =
        make_lr_set(stack, cfg.train.k, static_cast<uint64_t>(cfg.seed));
    MovieStack out;
    out.frames = set.members;
    write_mrc(out, dir + "/lrset.mrc");
    write_manifest(cfg, "align", dir);
}

void run_train(const PipelineConfig& cfg, const std::string& dir) {
    cfg.validate();
    require_file(dir + "/lrset.mrc");
    LrSet set = load_lr_set(dir + "/lrset.mrc");
    TrainConfig tc = cfg.train;
    tc.seed = static_cast<uint64_t>(cfg.seed);
    TrainResult result = train(set, tc);
    save_checkpoint(dir + "/model.ckpt", result.model, result.shift_model);

    std::ofstream os = open_out(dir + "/train_report.csv");
    os << "step,loss,lr\n";
    double lr = tc.initial_lr;
    size_t change = 0;
    const auto& changes = result.report.lr_change_steps;
    for (size_t i = 0; i < result.report.loss_trace.size(); ++i) {
        long step = static_cast<long>(i) + 1;
        while (change < changes.size() && changes[change] < step) {
            lr /= 10.0;
            ++change;
        }
        os << step << "," << fmt(result.report.loss_trace[i]) << "," << fmt(lr)
           << "\n";
    }
    if (!os) throw io_error("failed writing " + dir + "/train_report.csv");
    write_manifest(cfg, "train", dir);
}

void run_sr(const PipelineConfig& cfg, const std::string& dir) {
    cfg.validate();
    require_file(dir + "/lrset.mrc");
    require_file(dir + "/model.ckpt");
    LrSet set = load_lr_set(dir + "/lrset.mrc");
    auto [model, shift_model] = load_checkpoint(dir + "/model.ckpt");
    Image2D sr = infer(model, shift_model, set, cfg.bp_iters);
    write_mrc_image(sr, dir + "/sr.mrc");
    write_manifest(cfg, "sr", dir);
}

namespace {

int spectrum_tile(const Image2D& img) {
    int m = std::min(img.width, img.height);
    int tile = std::min(256, m);
    return tile - tile % 2;
}

// CTF fit, power spectrum raster and (when ground truth is present) an
// FRC after registering the variant onto the truth grid.
void eval_variant(const PipelineConfig& cfg, const std::string& dir,
                  const std::string& name, const Image2D& img,
                  const Image2D* truth) {
    std::string vdir = dir + "/eval/" + name;
    fs::create_directories(vdir);

    Image2D spec = power_spectrum(img, spectrum_tile(img));
    RadialProfile profile = radial_average(spec);
    double dz = cfg.ctf.defocus_a;
    double step = std::max(25.0, dz / 300.0);
    CtfFitReport fit = fit_ctf(profile, cfg.ctf, 0.5 * dz, 1.5 * dz, step);
    write_spectrum_pgm(vdir + "/spectrum.pgm", spec);

    bool with_frc = truth != nullptr && truth->width == img.width &&
                    truth->height == img.height;
    FrcCurve curve;
    if (with_frc) {
        // Variants sit on the truth grid up to residual drift, so a large
        // estimate is a spurious correlation peak, not a real offset.
        double sx = 0, sy = 0;
        double limit = std::min(img.width, img.height) / 8.0;
        try {
            std::tie(sx, sy) = estimate_shift(*truth, img);
        } catch (const numeric_error&) {
        }
        if (std::abs(sx) > limit || std::abs(sy) > limit) {
            sx = 0;
            sy = 0;
        }
        Image2D aligned = lanczos_shift(img, -sx, -sy);
        aligned.pixel_size = truth->pixel_size;
        curve = frc(*truth, aligned, 0.5);
        write_frc_csv(vdir + "/frc.csv", curve);
    }

    std::ofstream os = open_out(vdir + "/ctf_report.csv");
    os << "metric,value\n";
    os << "defocus_a," << fmt(fit.defocus_a) << "\n";
    os << "cc_score," << fmt(fit.cc_score) << "\n";
    os << "fit_resolution_a," << fmt(fit.fit_resolution_a) << "\n";
    if (with_frc) os << "frc_resolution_a," << fmt(curve.resolution_a) << "\n";
    if (!os) throw io_error("failed writing " + vdir + "/ctf_report.csv");
}

}  // namespace

void run_eval(const PipelineConfig& cfg, const std::string& dir) {
    cfg.validate();
    bool have_truth = fs::exists(dir + "/truth.mrc");
    bool have_lrset = fs::exists(dir + "/lrset.mrc");
    bool have_sr = fs::exists(dir + "/sr.mrc");
    if (!have_truth && !have_lrset && !have_sr)
        throw io_error("nothing to evaluate in " + dir);

    Image2D truth;
    if (have_truth) truth = read_mrc_image(dir + "/truth.mrc");
    const Image2D* truth_ptr = have_truth ? &truth : nullptr;

    if (have_lrset) {
        LrSet set = load_lr_set(dir + "/lrset.mrc");
        eval_variant(cfg, dir, "lr", set.reference_image, nullptr);
        Image2D up = bilinear_upsample(set.reference_image, cfg.train.scale);
        eval_variant(cfg, dir, "bilinear", up, truth_ptr);
    }
    if (have_truth) eval_variant(cfg, dir, "truth", truth, truth_ptr);
    if (have_sr) {
        Image2D sr = read_mrc_image(dir + "/sr.mrc");
        eval_variant(cfg, dir, "zssr", sr, truth_ptr);
    }
    write_manifest(cfg, "eval", dir);
}

std::string run_report(const PipelineConfig& cfg, const std::string& dir) {
    std::string eval_dir = dir + "/eval";
    if (!fs::exists(eval_dir)) throw io_error("missing eval directory: " + eval_dir);

    std::vector<std::string> variants;
    for (const auto& entry : fs::directory_iterator(eval_dir))
        if (entry.is_directory())
            variants.push_back(entry.path().filename().string());
    std::sort(variants.begin(), variants.end());
    if (variants.size() < 2)
        throw config_error("report requires eval artifacts for at least 2 variants");

    const std::vector<std::string> columns = {"cc_score", "fit_resolution_a",
                                              "frc_resolution_a"};
    std::ostringstream csv, text;
    csv << "variant,cc_score,fit_resolution_a,frc_resolution_a\n";
    text << "variant      cc_score     fit_resolution_a  frc_resolution_a\n";
    for (const std::string& v : variants) {
        std::map<std::string, std::string> metrics;
        std::ifstream is(eval_dir + "/" + v + "/ctf_report.csv");
        std::string line;
        if (is) {
            std::getline(is, line);  // header
            while (std::getline(is, line)) {
                size_t comma = line.find(',');
                if (comma == std::string::npos) continue;
                metrics[line.substr(0, comma)] = line.substr(comma + 1);
            }
        }
        csv << v;
        char row[256];
        std::string cells[3];
        for (size_t i = 0; i < columns.size(); ++i) {
            auto it = metrics.find(columns[i]);
            cells[i] = it == metrics.end() ? "absent" : it->second;
            csv << "," << cells[i];
        }
        csv << "\n";
        std::snprintf(row, sizeof(row), "%-12s %-12.12s %-17.17s %s\n",
                      v.c_str(), cells[0].c_str(), cells[1].c_str(),
                      cells[2].c_str());
        text << row;
    }

    std::ofstream os = open_out(dir + "/summary.csv");
    os << csv.str();
    if (!os) throw io_error("failed writing " + dir + "/summary.csv");
    write_manifest(cfg, "report", dir);
    return text.str();
}

}  // namespace cryosr
