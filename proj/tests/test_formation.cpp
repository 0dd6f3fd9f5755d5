#include <doctest.h>

#include <cmath>

#include "cryosr/ctf.hpp"
#include "cryosr/errors.hpp"
#include "cryosr/fft.hpp"
#include "cryosr/simulate.hpp"

using namespace cryosr;

namespace {

Image2D smooth_random(int n, double px, uint64_t seed) {
    return make_phantom(n, px, 0.25 / px, 0.5, seed);
}

// Root of chi(g) = target on the rising branch, located by bisection.
double bisect_chi(const CtfParams& p, double target, double lo, double hi) {
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        if (ctf_chi(p, mid) < target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("electron wavelength matches the closed form at 300 and 100 kV") {
    CHECK(electron_wavelength(300.0) == doctest::Approx(0.019687).epsilon(1e-3));
    CHECK(std::abs(electron_wavelength(300.0) - 0.0196869) < 1e-5);
    CHECK(std::abs(electron_wavelength(100.0) - 0.0370134) < 1e-5);
    CHECK(electron_wavelength(300.0) < electron_wavelength(200.0));
    CHECK(electron_wavelength(200.0) < electron_wavelength(100.0));
    CHECK_THROWS_AS(electron_wavelength(0.0), config_error);
}

TEST_CASE("ctf_eval at g=0 returns minus the amplitude contrast") {
    CtfParams p;
    p.amplitude_contrast = 0.07;
    CHECK(ctf_eval(p, 0.0) == doctest::Approx(-0.07).epsilon(1e-12));
}

TEST_CASE("ctf_eval first zero sits where chi reaches pi - asin(A)") {
    CtfParams p;  // 15000 A, 300 kV, 2.7 mm, A = 0.07
    double target = M_PI - std::asin(p.amplitude_contrast);
    double g0 = bisect_chi(p, target, 1e-5, 0.3);
    CHECK(std::abs(ctf_eval(p, g0)) < 1e-6);
}

TEST_CASE("ctf_eval is bounded by 1 in magnitude") {
    CtfParams p;
    p.phase_shift_rad = 0.3;
    for (int i = 0; i < 1000; ++i) {
        double g = 0.35 * i / 999.0;
        CHECK(std::abs(ctf_eval(p, g)) <= 1.0 + 1e-12);
    }
}

TEST_CASE("ctf_eval zero set for A=0 coincides with chi roots") {
    CtfParams p;
    p.amplitude_contrast = 0.0;
    for (int n = 1; n <= 4; ++n) {
        double g_chi = bisect_chi(p, n * M_PI, 1e-5, 0.35);
        // Locate the ctf_eval sign change around the predicted root.
        double lo = g_chi - 1e-3, hi = g_chi + 1e-3;
        for (int i = 0; i < 200; ++i) {
            double mid = 0.5 * (lo + hi);
            bool same_side = (ctf_eval(p, lo) > 0) == (ctf_eval(p, mid) > 0);
            if (same_side)
                lo = mid;
            else
                hi = mid;
        }
        CHECK(std::abs(0.5 * (lo + hi) - g_chi) < 1e-6);
    }
}

TEST_CASE("apply_ctf handles zero and constant images") {
    CtfParams p;
    Image2D zero(16, 16, 1.0, 0.0);
    Image2D out = apply_ctf(zero, p);
    for (double v : out.data) CHECK(std::abs(v) < 1e-12);

    Image2D c(16, 16, 1.0, 2.0);
    Image2D outc = apply_ctf(c, p);
    for (double v : outc.data)
        CHECK(v == doctest::Approx(2.0 * -p.amplitude_contrast).epsilon(1e-9));
}

TEST_CASE("apply_ctf twice equals spectral multiplication by CTF squared") {
    CtfParams p;
    Image2D img = smooth_random(32, 1.0, 21);
    Image2D twice = apply_ctf(apply_ctf(img, p), p);

    SpectrumImage spec = fft2(img);
    for (int y = 0; y < 32; ++y) {
        double fy = freq_index(y, 32) / (32 * img.pixel_size);
        for (int x = 0; x < 32; ++x) {
            double fx = freq_index(x, 32) / (32 * img.pixel_size);
            double h = ctf_eval(p, std::sqrt(fx * fx + fy * fy));
            spec.at(x, y) *= h * h;
        }
    }
    Image2D direct = ifft2(spec);
    for (size_t i = 0; i < img.size(); ++i)
        CHECK(twice.data[i] == doctest::Approx(direct.data[i]).epsilon(1e-9));
}

TEST_CASE("apply_ctf is linear") {
    CtfParams p;
    Image2D x = smooth_random(32, 1.0, 5);
    Image2D y = smooth_random(32, 1.0, 6);
    double alpha = 1.7, beta = -0.4;
    Image2D combo(32, 32, 1.0);
    for (size_t i = 0; i < combo.size(); ++i)
        combo.data[i] = alpha * x.data[i] + beta * y.data[i];
    Image2D lhs = apply_ctf(combo, p);
    Image2D ax = apply_ctf(x, p);
    Image2D by = apply_ctf(y, p);
    for (size_t i = 0; i < lhs.size(); ++i)
        CHECK(lhs.data[i] ==
              doctest::Approx(alpha * ax.data[i] + beta * by.data[i]).epsilon(1e-6));
}

TEST_CASE("simulate_movie with no noise, no drift, s=1 reproduces apply_ctf") {
    CtfParams p;
    Image2D truth = smooth_random(32, 1.0, 30);
    SimConfig cfg;
    cfg.frame_count = 3;
    cfg.drift.assign(3, {0.0, 0.0});
    cfg.noise_sigma = 0.0;
    cfg.scale = 1;
    MovieStack stack = simulate_movie(truth, p, cfg);
    Image2D expect = apply_ctf(truth, p);
    for (const Image2D& f : stack.frames)
        for (size_t i = 0; i < f.size(); ++i)
            CHECK(f.data[i] == doctest::Approx(expect.data[i]).epsilon(1e-10));
}

TEST_CASE("simulate_movie noise mean converges by the law of large numbers") {
    CtfParams p;
    Image2D truth = smooth_random(16, 1.0, 31);
    const int m = 10000;
    const double sigma = 0.5;
    SimConfig cfg;
    cfg.frame_count = m;
    cfg.drift.assign(m, {0.0, 0.0});
    cfg.noise_sigma = sigma;
    cfg.scale = 1;
    cfg.seed = 99;
    MovieStack stack = simulate_movie(truth, p, cfg);
    Image2D noiseless = apply_ctf(truth, p);
    Image2D mean(16, 16, 1.0, 0.0);
    for (const Image2D& f : stack.frames)
        for (size_t i = 0; i < mean.size(); ++i) mean.data[i] += f.data[i];
    for (double& v : mean.data) v /= m;
    double bound = 4.0 * sigma / std::sqrt(static_cast<double>(m));
    int ok = 0;
    for (size_t i = 0; i < mean.size(); ++i)
        if (std::abs(mean.data[i] - noiseless.data[i]) < bound) ++ok;
    CHECK(ok >= static_cast<int>(0.99 * mean.size()));
}

TEST_CASE("simulate_movie s=2 halves dimensions and doubles pixel size") {
    CtfParams p;
    Image2D truth = smooth_random(512, 1.5, 32);
    SimConfig cfg;
    cfg.frame_count = 1;
    cfg.drift.assign(1, {0.0, 0.0});
    cfg.scale = 2;
    MovieStack stack = simulate_movie(truth, p, cfg);
    CHECK(stack.frames[0].width == 256);
    CHECK(stack.frames[0].height == 256);
    CHECK(stack.frames[0].pixel_size == doctest::Approx(3.0));
}

TEST_CASE("simulate_movie is bit reproducible for a fixed seed") {
    CtfParams p;
    Image2D truth = smooth_random(32, 1.0, 33);
    Rng drift_rng(5);
    SimConfig cfg;
    cfg.frame_count = 4;
    cfg.drift = drift_walk(4, 0.3, 2, drift_rng);
    cfg.noise_sigma = 1.0;
    cfg.scale = 2;
    cfg.seed = 1234;
    MovieStack s1 = simulate_movie(truth, p, cfg);
    MovieStack s2 = simulate_movie(truth, p, cfg);
    for (int z = 0; z < 4; ++z) CHECK(s1.frames[z].data == s2.frames[z].data);
}

TEST_CASE("drift_walk scales LR-pixel steps by the downsample factor") {
    Rng r1(7), r2(7);
    auto d1 = drift_walk(64, 0.3, 1, r1);
    auto d2 = drift_walk(64, 0.3, 2, r2);
    for (int j = 0; j < 64; ++j) {
        CHECK(d2[j].first == doctest::Approx(2.0 * d1[j].first));
        CHECK(d2[j].second == doctest::Approx(2.0 * d1[j].second));
    }
}

TEST_CASE("simulate_movie validates dimensions and config") {
    CtfParams p;
    Image2D truth = smooth_random(18, 1.0, 35);  // 18 not divisible by 4
    SimConfig cfg;
    cfg.frame_count = 1;
    cfg.drift.assign(1, {0.0, 0.0});
    cfg.scale = 2;
    CHECK_THROWS_AS(simulate_movie(truth, p, cfg), config_error);

    SimConfig bad;
    bad.frame_count = 2;
    bad.drift.assign(1, {0.0, 0.0});
    CHECK_THROWS_AS(bad.validate(), config_error);
}
