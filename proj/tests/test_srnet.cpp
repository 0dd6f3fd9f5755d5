#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "cryosr/errors.hpp"
#include "cryosr/image.hpp"
#include "cryosr/rng.hpp"
#include "cryosr/srnet.hpp"

using namespace cryosr;

namespace {

Image2D random_image(int w, int h, uint64_t seed, double px = 1.0) {
    Rng rng(seed);
    Image2D img(w, h, px);
    for (double& v : img.data) v = rng.gaussian();
    return img;
}

LrSet make_set(const std::vector<Image2D>& members) {
    LrSet s;
    s.members = members;
    for (int i = 0; i < static_cast<int>(members.size()); ++i)
        s.reference_indices.push_back(i);
    s.reference_image = pixelwise_median(members);
    return s;
}

double dot(const Image2D& a, const Image2D& b) {
    double acc = 0;
    for (size_t i = 0; i < a.size(); ++i) acc += a.data[i] * b.data[i];
    return acc;
}

bool images_equal(const Image2D& a, const Image2D& b) {
    if (a.width != b.width || a.height != b.height) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (a.data[i] != b.data[i]) return false;
    return true;
}

std::vector<float> snapshot(std::vector<ParamRef>& refs) {
    std::vector<float> out;
    for (const ParamRef& p : refs) out.insert(out.end(), p.w, p.w + p.n);
    return out;
}

}  // namespace

TEST_CASE("lanczos_shift_adjoint is the exact transpose") {
    Image2D x = random_image(16, 16, 11);
    Image2D y = random_image(16, 16, 12);
    for (auto [dx, dy] : {std::pair<double, double>{2.3, -0.7},
                          {0.41, 0.0},
                          {-1.9, 3.2}}) {
        Image2D lx = lanczos_shift(x, dx, dy);
        Image2D aty = lanczos_shift_adjoint(y, dx, dy);
        double lhs = dot(lx, y);
        double rhs = dot(x, aty);
        CHECK(std::abs(lhs - rhs) < 1e-10 * (1.0 + std::abs(lhs)));
    }
}

TEST_CASE("lanczos_shift_ddx/ddy match finite differences of the warp") {
    Image2D img = random_image(16, 16, 21);
    double dx = 0.37, dy = -1.21, h = 1e-5;

    Image2D gx = lanczos_shift_ddx(img, dx, dy);
    Image2D gy = lanczos_shift_ddy(img, dx, dy);
    Image2D fxp = lanczos_shift(img, dx + h, dy);
    Image2D fxm = lanczos_shift(img, dx - h, dy);
    Image2D fyp = lanczos_shift(img, dx, dy + h);
    Image2D fym = lanczos_shift(img, dx, dy - h);
    for (size_t i = 0; i < img.size(); ++i) {
        double fdx = (fxp.data[i] - fxm.data[i]) / (2 * h);
        double fdy = (fyp.data[i] - fym.data[i]) / (2 * h);
        CHECK(std::abs(gx.data[i] - fdx) < 1e-5);
        CHECK(std::abs(gy.data[i] - fdy) < 1e-5);
    }
}

TEST_CASE("registered_loss gradient w.r.t. sr matches finite differences") {
    Image2D sr = random_image(8, 8, 31);
    Image2D hr = random_image(8, 8, 32);
    std::pair<double, double> shift{0.37, -1.21};
    double tvw = 0.1, h = 1e-4;

    RegisteredLoss rl = registered_loss(sr, hr, shift, tvw);
    REQUIRE(rl.d_sr.width == 8);
    CHECK(rl.loss == doctest::Approx(rl.mse + tvw * rl.tv).epsilon(1e-12));

    double max_rel = 0;
    for (size_t i = 0; i < sr.size(); ++i) {
        Image2D p = sr;
        p.data[i] += h;
        double lp = registered_loss(p, hr, shift, tvw).loss;
        p.data[i] -= 2 * h;
        double lm = registered_loss(p, hr, shift, tvw).loss;
        double fd = (lp - lm) / (2 * h);
        double g = rl.d_sr.data[i];
        double rel = std::abs(fd - g) / std::max(1e-8, std::abs(fd));
        max_rel = std::max(max_rel, rel);
    }
    CHECK(max_rel < 1e-4);
}

TEST_CASE("registered_loss gradient w.r.t. the shift matches finite differences") {
    Image2D sr = random_image(12, 12, 41);
    Image2D hr = random_image(12, 12, 42);
    double tvw = 0.05, h = 1e-5;

    for (auto [dx, dy] : {std::pair<double, double>{0.37, -1.21},
                          {-0.73, 0.52},
                          {0.0, 0.0}}) {
        RegisteredLoss rl = registered_loss(sr, hr, {dx, dy}, tvw);
        double lxp = registered_loss(sr, hr, {dx + h, dy}, tvw).loss;
        double lxm = registered_loss(sr, hr, {dx - h, dy}, tvw).loss;
        double lyp = registered_loss(sr, hr, {dx, dy + h}, tvw).loss;
        double lym = registered_loss(sr, hr, {dx, dy - h}, tvw).loss;
        double fdx = (lxp - lxm) / (2 * h);
        double fdy = (lyp - lym) / (2 * h);
        CHECK(rl.d_dx == doctest::Approx(fdx).epsilon(1e-4));
        CHECK(rl.d_dy == doctest::Approx(fdy).epsilon(1e-4));
    }
}

TEST_CASE("registered_loss is zero for identical aligned images") {
    Image2D sr = random_image(8, 8, 51);
    RegisteredLoss rl = registered_loss(sr, sr, {0.0, 0.0}, 0.0);
    CHECK(rl.loss == 0.0);
    CHECK(rl.mse == 0.0);
    CHECK(rl.d_dx == 0.0);
    CHECK(rl.d_dy == 0.0);
    for (double v : rl.d_sr.data) CHECK(v == 0.0);
}

TEST_CASE("untrained SrModel reproduces the bilinear upsampled reference") {
    SrHyper hp;
    hp.channels = 8;
    hp.blocks = 2;
    SrModel model = SrModel::init(hp, 7);

    std::vector<Image2D> members;
    for (int i = 0; i < 3; ++i) members.push_back(random_image(8, 8, 100 + i, 2.0));
    LrSet set = make_set(members);

    Image2D out = model.forward(set, nullptr);
    Image2D base = bilinear_upsample(set.reference_image, 2);
    CHECK(out.width == 16);
    CHECK(out.height == 16);
    CHECK(out.pixel_size == doctest::Approx(1.0));
    CHECK(images_equal(out, base));
}

TEST_CASE("duplicating every member leaves the SrModel output unchanged") {
    SrHyper hp;
    hp.channels = 6;
    hp.blocks = 1;
    SrModel model = SrModel::init(hp, 9);
    // Give the zero-initialized head nonzero weights so the test covers
    // the full decoder path, not just the baseline bypass.
    Rng rng(77);
    for (float& w : model.head.w) w = static_cast<float>(rng.gaussian() * 0.05);

    Image2D a = random_image(8, 8, 201);
    Image2D b = random_image(8, 8, 202);
    Image2D out2 = model.forward(make_set({a, b}), nullptr);
    Image2D out4 = model.forward(make_set({a, a, b, b}), nullptr);

    // The median reference differs between the two sets unless forced.
    LrSet s2 = make_set({a, b});
    LrSet s4 = make_set({a, a, b, b});
    s4.reference_image = s2.reference_image;
    out2 = model.forward(s2, nullptr);
    out4 = model.forward(s4, nullptr);
    CHECK(images_equal(out2, out4));
}

TEST_CASE("padding a non power of two set matches explicit reference members") {
    SrHyper hp;
    hp.channels = 6;
    hp.blocks = 1;
    SrModel model = SrModel::init(hp, 13);
    Rng rng(78);
    for (float& w : model.head.w) w = static_cast<float>(rng.gaussian() * 0.05);

    std::vector<Image2D> members;
    for (int i = 0; i < 3; ++i) members.push_back(random_image(8, 8, 300 + i));
    LrSet s3 = make_set(members);

    LrSet s4 = s3;
    s4.members.push_back(s3.reference_image);
    s4.reference_indices.push_back(3);

    Image2D out3 = model.forward(s3, nullptr);
    Image2D out4 = model.forward(s4, nullptr);
    CHECK(images_equal(out3, out4));
}

TEST_CASE("SrModel weight gradients match finite differences") {
    SrHyper hp;
    hp.channels = 4;
    hp.blocks = 1;
    SrModel model = SrModel::init(hp, 17);
    Rng rng(79);
    for (float& w : model.head.w) w = static_cast<float>(rng.gaussian() * 0.1);

    std::vector<Image2D> members;
    for (int i = 0; i < 2; ++i) members.push_back(random_image(8, 8, 400 + i));
    LrSet set = make_set(members);

    Image2D d = random_image(16, 16, 404);
    auto objective = [&]() {
        Image2D out = model.forward(set, nullptr);
        return dot(out, d);
    };

    model.zero_grad();
    SrForwardCtx ctx;
    Image2D out = model.forward(set, &ctx);
    model.backward(d, ctx);

    std::vector<ParamRef> refs;
    model.collect_params(refs);

    // Check the largest-magnitude gradient entry of every parameter
    // buffer. Float arithmetic and the rectifier kinks limit the
    // attainable agreement, so the step must stay small.
    double h = 1e-3;
    int checked = 0;
    for (ParamRef& p : refs) {
        size_t best = 0;
        for (size_t i = 1; i < p.n; ++i)
            if (std::abs(p.g[i]) > std::abs(p.g[best])) best = i;
        double g = p.g[best];
        if (std::abs(g) < 1e-3) continue;
        float saved = p.w[best];
        p.w[best] = saved + static_cast<float>(h);
        double jp = objective();
        p.w[best] = saved - static_cast<float>(h);
        double jm = objective();
        p.w[best] = saved;
        double fd = (jp - jm) / (2 * h);
        CHECK(std::abs(fd - g) < 5e-2 * std::max(std::abs(fd), std::abs(g)) + 1e-4);
        ++checked;
    }
    CHECK(checked >= 8);
}

TEST_CASE("SrModel init is deterministic in the seed") {
    SrHyper hp;
    hp.channels = 5;
    hp.blocks = 2;
    SrModel m1 = SrModel::init(hp, 23);
    SrModel m2 = SrModel::init(hp, 23);
    SrModel m3 = SrModel::init(hp, 24);
    std::vector<ParamRef> r1, r2, r3;
    m1.collect_params(r1);
    m2.collect_params(r2);
    m3.collect_params(r3);
    CHECK(snapshot(r1) == snapshot(r2));
    CHECK(snapshot(r1) != snapshot(r3));
}

TEST_CASE("untrained ShiftModel predicts zero shift") {
    ShiftModel m = ShiftModel::init(8, 4.0, 3);
    Image2D sr = random_image(32, 32, 61);
    Image2D hr = random_image(32, 32, 62);
    auto [dx, dy] = m.forward(sr, hr, nullptr);
    CHECK(dx == 0.0);
    CHECK(dy == 0.0);
}

TEST_CASE("ShiftModel output saturates at the bound") {
    ShiftModel m = ShiftModel::init(8, 4.0, 3);
    m.head.b[0] = 50.0f;
    m.head.b[1] = -50.0f;
    Image2D sr = random_image(32, 32, 63);
    Image2D hr = random_image(32, 32, 64);
    auto [dx, dy] = m.forward(sr, hr, nullptr);
    CHECK(dx <= 4.0);
    CHECK(dx > 3.99);
    CHECK(dy >= -4.0);
    CHECK(dy < -3.99);
}

TEST_CASE("ShiftModel gradients match finite differences") {
    ShiftModel m = ShiftModel::init(4, 4.0, 5);
    Rng rng(88);
    for (float& w : m.head.w) w = static_cast<float>(rng.gaussian() * 0.2);

    Image2D sr = random_image(16, 16, 71);
    Image2D hr = random_image(16, 16, 72);
    double a = 0.7, b = -0.3;
    auto objective = [&]() {
        auto [dx, dy] = m.forward(sr, hr, nullptr);
        return a * dx + b * dy;
    };

    m.zero_grad();
    ShiftCtx ctx;
    m.forward(sr, hr, &ctx);
    Image2D d_sr;
    m.backward(a, b, ctx, &d_sr);
    REQUIRE(d_sr.width == 16);
    REQUIRE(d_sr.height == 16);

    SUBCASE("input gradient") {
        double h = 1e-2;
        int checked = 0;
        for (size_t i = 0; i < sr.size(); i += 37) {
            double saved = sr.data[i];
            sr.data[i] = saved + h;
            double jp = objective();
            sr.data[i] = saved - h;
            double jm = objective();
            sr.data[i] = saved;
            double fd = (jp - jm) / (2 * h);
            double g = d_sr.data[i];
            CHECK(std::abs(fd - g) <
                  5e-2 * std::max(std::abs(fd), std::abs(g)) + 1e-5);
            ++checked;
        }
        CHECK(checked >= 5);
    }

    SUBCASE("weight gradients") {
        std::vector<ParamRef> refs;
        m.collect_params(refs);
        double h = 1e-2;
        int checked = 0;
        for (ParamRef& p : refs) {
            size_t best = 0;
            for (size_t i = 1; i < p.n; ++i)
                if (std::abs(p.g[i]) > std::abs(p.g[best])) best = i;
            double g = p.g[best];
            if (std::abs(g) < 1e-4) continue;
            float saved = p.w[best];
            p.w[best] = saved + static_cast<float>(h);
            double jp = objective();
            p.w[best] = saved - static_cast<float>(h);
            double jm = objective();
            p.w[best] = saved;
            double fd = (jp - jm) / (2 * h);
            CHECK(std::abs(fd - g) <
                  5e-2 * std::max(std::abs(fd), std::abs(g)) + 1e-5);
            ++checked;
        }
        CHECK(checked >= 4);
    }
}

TEST_CASE("checkpoint round trip preserves every parameter") {
    SrHyper hp;
    hp.channels = 6;
    hp.blocks = 2;
    SrModel sr = SrModel::init(hp, 31);
    ShiftModel shift = ShiftModel::init(8, 6.5, 32);
    Rng rng(90);
    for (float& w : sr.head.w) w = static_cast<float>(rng.gaussian());
    for (float& w : shift.head.w) w = static_cast<float>(rng.gaussian());

    std::string path = "ckpt_roundtrip.bin";
    save_checkpoint(path, sr, shift);
    auto [sr2, shift2] = load_checkpoint(path);

    CHECK(sr2.hp.channels == 6);
    CHECK(sr2.hp.blocks == 2);
    CHECK(sr2.hp.scale == 2);
    CHECK(shift2.channels == 8);
    CHECK(shift2.bound == 6.5);

    std::vector<ParamRef> a, b;
    sr.collect_params(a);
    sr2.collect_params(b);
    CHECK(snapshot(a) == snapshot(b));
    a.clear();
    b.clear();
    shift.collect_params(a);
    shift2.collect_params(b);
    CHECK(snapshot(a) == snapshot(b));

    // Loaded and saved models must produce identical outputs.
    std::vector<Image2D> members{random_image(8, 8, 91), random_image(8, 8, 92)};
    LrSet set = make_set(members);
    CHECK(images_equal(sr.forward(set, nullptr), sr2.forward(set, nullptr)));
    std::remove(path.c_str());
}

TEST_CASE("corrupt checkpoints are rejected") {
    std::string path = "ckpt_corrupt.bin";
    {
        std::ofstream os(path, std::ios::binary);
        os << "NOPE and some trailing bytes";
    }
    CHECK_THROWS_AS(load_checkpoint(path), io_error);

    SrHyper hp;
    hp.channels = 4;
    hp.blocks = 1;
    SrModel sr = SrModel::init(hp, 1);
    ShiftModel shift = ShiftModel::init(4, 4.0, 2);
    save_checkpoint(path, sr, shift);
    // Truncate the payload.
    {
        std::ifstream is(path, std::ios::binary);
        std::vector<char> bytes((std::istreambuf_iterator<char>(is)),
                                std::istreambuf_iterator<char>());
        bytes.resize(bytes.size() / 2);
        std::ofstream os(path, std::ios::binary);
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    CHECK_THROWS_AS(load_checkpoint(path), io_error);
    std::remove(path.c_str());
    CHECK_THROWS_AS(load_checkpoint("no_such_checkpoint.bin"), io_error);
}

TEST_CASE("SrModel rejects invalid hyperparameters and inputs") {
    SrHyper hp;
    hp.scale = 3;
    CHECK_THROWS_AS(SrModel::init(hp, 1), config_error);

    SrHyper ok;
    ok.channels = 4;
    ok.blocks = 1;
    SrModel m = SrModel::init(ok, 1);
    std::vector<Image2D> odd{random_image(7, 8, 1), random_image(7, 8, 2)};
    LrSet set = make_set(odd);
    CHECK_THROWS_AS(m.forward(set, nullptr), config_error);
}
