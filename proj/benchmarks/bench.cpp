#include <benchmark/benchmark.h>

#include "cryosr/fft.hpp"
#include "cryosr/image.hpp"
#include "cryosr/motion.hpp"
#include "cryosr/rng.hpp"
#include "cryosr/srnet.hpp"
#include "cryosr/tensor.hpp"
#include "cryosr/zssr.hpp"

using namespace cryosr;

namespace {

Image2D noise_image(int n, uint64_t seed) {
    Rng rng(seed);
    Image2D img(n, n, 1.0);
    for (double& v : img.data) v = rng.gaussian();
    return img;
}

Tensor noise_tensor(int c, int h, int w, uint64_t seed) {
    Rng rng(seed);
    Tensor t(c, h, w);
    for (float& x : t.v) x = static_cast<float>(rng.gaussian());
    return t;
}

LrSet small_set(int n, int k) {
    LrSet set;
    for (int i = 0; i < k; ++i) {
        set.members.push_back(noise_image(n, 10 + i));
        set.reference_indices.push_back(i);
    }
    set.reference_image = pixelwise_median(set.members);
    return set;
}

}  // namespace

static void BM_Conv3x3Forward(benchmark::State& state) {
    Rng rng(1);
    Conv3x3 conv;
    conv.init(16, 16, 1, true, rng);
    Tensor x = noise_tensor(16, 64, 64, 2);
    for (auto _ : state) {
        Tensor y = conv.forward(x);
        benchmark::DoNotOptimize(y.v.data());
    }
}
BENCHMARK(BM_Conv3x3Forward);

static void BM_Conv3x3Backward(benchmark::State& state) {
    Rng rng(1);
    Conv3x3 conv;
    conv.init(16, 16, 1, true, rng);
    Tensor x = noise_tensor(16, 64, 64, 2);
    Tensor y = conv.forward(x);
    Tensor gy = noise_tensor(16, 64, 64, 3);
    Tensor dx(16, 64, 64);
    for (auto _ : state) {
        conv.backward(x, gy, &dx);
        benchmark::DoNotOptimize(dx.v.data());
    }
}
BENCHMARK(BM_Conv3x3Backward);

static void BM_Fft2(benchmark::State& state) {
    Image2D img = noise_image(static_cast<int>(state.range(0)), 4);
    for (auto _ : state) {
        SpectrumImage spec = fft2(img);
        benchmark::DoNotOptimize(spec.data.data());
    }
}
BENCHMARK(BM_Fft2)->Arg(256)->Arg(512);

static void BM_LanczosShift(benchmark::State& state) {
    Image2D img = noise_image(256, 5);
    for (auto _ : state) {
        Image2D out = lanczos_shift(img, 0.37, -1.21);
        benchmark::DoNotOptimize(out.data.data());
    }
}
BENCHMARK(BM_LanczosShift);

static void BM_SrForward(benchmark::State& state) {
    SrHyper hp;
    hp.channels = 12;
    hp.blocks = 2;
    SrModel model = SrModel::init(hp, 7);
    LrSet set = small_set(32, 8);
    for (auto _ : state) {
        Image2D sr = model.forward(set, nullptr);
        benchmark::DoNotOptimize(sr.data.data());
    }
}
BENCHMARK(BM_SrForward);

static void BM_BackProject(benchmark::State& state) {
    Image2D lr = noise_image(64, 8);
    Image2D sr = bilinear_upsample(lr, 2);
    for (auto _ : state) {
        Image2D out = back_project(sr, lr, 2, 10);
        benchmark::DoNotOptimize(out.data.data());
    }
}
BENCHMARK(BM_BackProject);

BENCHMARK_MAIN();
