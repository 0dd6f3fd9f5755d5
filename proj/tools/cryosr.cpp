// Batch front door for the pipeline: simulate -> align -> train -> sr ->
// eval -> report, each stage reading and writing fixed artifact names
// inside a run directory.

#include <atomic>
#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "cryosr/errors.hpp"
#include "cryosr/pipeline.hpp"

namespace {

constexpr const char* kUsage = R"(usage: cryosr <subcommand> [options]

subcommands:
  simulate   write truth.mrc and a drifting noisy movie stack.mrc
  align      read stack.mrc, write k aligned frame averages to lrset.mrc
  train      train on lrset.mrc, write model.ckpt and train_report.csv
  sr         apply model.ckpt to lrset.mrc, write sr.mrc
  eval       write eval/<variant>/{ctf_report.csv,frc.csv,spectrum.pgm}
  report     collect eval metrics into summary.csv and print the table

options:
  --config PATH  configuration file of `key = value` lines, # comments
  --seed INT     override the config seed
  --k INT        override the number of frame averages
  --scale INT    override the upsampling factor
  --jobs INT     worker threads across run directories (default 1)
  --out DIR      run directory; repeat for several independent runs
                 (directory i runs with seed + i)
)";

struct Args {
    std::string subcommand;
    std::string config_path;
    long long seed = -1;
    int k = 0;
    int scale = 0;
    int jobs = 1;
    std::vector<std::string> out_dirs;
};

long long arg_int(const std::string& flag, const std::string& value) {
    size_t pos = 0;
    long long v = 0;
    try {
        v = std::stoll(value, &pos);
    } catch (const std::exception&) {
        pos = std::string::npos;
    }
    if (pos != value.size())
        throw cryosr::config_error("bad integer for " + flag + ": " + value);
    return v;
}

Args parse_args(int argc, char** argv) {
    if (argc < 2) throw cryosr::config_error("missing subcommand");
    Args args;
    args.subcommand = argv[1];
    for (int i = 2; i < argc; ++i) {
        std::string flag = argv[i];
        if (i + 1 >= argc)
            throw cryosr::config_error("flag " + flag + " needs a value");
        std::string value = argv[++i];
        if (flag == "--config")
            args.config_path = value;
        else if (flag == "--seed")
            args.seed = arg_int(flag, value);
        else if (flag == "--k")
            args.k = static_cast<int>(arg_int(flag, value));
        else if (flag == "--scale")
            args.scale = static_cast<int>(arg_int(flag, value));
        else if (flag == "--jobs")
            args.jobs = static_cast<int>(arg_int(flag, value));
        else if (flag == "--out")
            args.out_dirs.push_back(value);
        else
            throw cryosr::config_error("unknown flag " + flag);
    }
    if (args.jobs < 1) throw cryosr::config_error("--jobs must be >= 1");
    return args;
}

void run_stage(const std::string& sub, const cryosr::PipelineConfig& cfg,
               const std::string& dir) {
    if (sub == "simulate")
        cryosr::run_simulate(cfg, dir);
    else if (sub == "align")
        cryosr::run_align(cfg, dir);
    else if (sub == "train")
        cryosr::run_train(cfg, dir);
    else if (sub == "sr")
        cryosr::run_sr(cfg, dir);
    else if (sub == "eval")
        cryosr::run_eval(cfg, dir);
    else if (sub == "report")
        std::cout << dir << ":\n" << cryosr::run_report(cfg, dir);
    else
        throw cryosr::config_error("unknown subcommand '" + sub + "'");
}

int run(int argc, char** argv) {
    Args args = parse_args(argc, argv);

    cryosr::PipelineConfig cfg;
    if (!args.config_path.empty()) cfg = cryosr::load_config(args.config_path);
    if (args.seed >= 0) cfg.seed = args.seed;
    if (args.k > 0) cfg.train.k = args.k;
    if (args.scale > 0) cfg.train.scale = args.scale;
    if (!args.out_dirs.empty()) cfg.out_dir = args.out_dirs.front();

    std::vector<std::string> dirs = args.out_dirs;
    if (dirs.empty()) dirs.push_back(cfg.out_dir);

    // Independent run directories are the only parallel axis; directory i
    // derives its own seed so runs stay distinct yet reproducible.
    std::vector<cryosr::PipelineConfig> configs;
    for (size_t i = 0; i < dirs.size(); ++i) {
        cryosr::PipelineConfig c = cfg;
        c.out_dir = dirs[i];
        if (c.seed >= 0) c.seed += static_cast<long long>(i);
        configs.push_back(c);
    }

    if (args.subcommand == "report" || dirs.size() == 1 || args.jobs == 1) {
        for (size_t i = 0; i < dirs.size(); ++i)
            run_stage(args.subcommand, configs[i], dirs[i]);
        return 0;
    }

    std::vector<std::exception_ptr> errors(dirs.size());
    std::atomic<size_t> next{0};
    auto worker = [&]() {
        for (size_t i = next.fetch_add(1); i < dirs.size();
             i = next.fetch_add(1)) {
            try {
                run_stage(args.subcommand, configs[i], dirs[i]);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    size_t n = std::min<size_t>(args.jobs, dirs.size());
    std::vector<std::thread> pool;
    for (size_t t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const cryosr::config_error& e) {
        std::cerr << "config_error: " << e.what() << "\n";
        if (argc < 2) std::cerr << kUsage;
        return 2;
    } catch (const cryosr::io_error& e) {
        std::cerr << "io_error: " << e.what() << "\n";
        return 3;
    } catch (const cryosr::numeric_error& e) {
        std::cerr << "numeric_error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
