#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "cryosr/errors.hpp"
#include "cryosr/image.hpp"
#include "cryosr/rng.hpp"

using namespace cryosr;

namespace {

Image2D random_image(int w, int h, uint64_t seed, double px = 1.0) {
    Rng rng(seed);
    Image2D img(w, h, px);
    for (double& v : img.data) v = rng.gaussian();
    return img;
}

// Low-frequency separable cosine content; band limit well inside Nyquist.
Image2D smooth_image(int w, int h, double cycles, double px = 1.0) {
    Image2D img(w, h, px);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            img.at(x, y) = std::cos(2 * M_PI * cycles * x / w) *
                               std::sin(2 * M_PI * cycles * y / h) +
                           0.5 * std::cos(2 * M_PI * cycles * (x + 2.0 * y) / w);
    return img;
}

}  // namespace

TEST_CASE("Image2D validation rejects bad shapes and non-finite samples") {
    CHECK_THROWS_AS(Image2D(0, 4, 1.0), config_error);
    CHECK_THROWS_AS(Image2D(4, 4, 0.0), config_error);
    Image2D img(4, 4, 1.0);
    img.data[5] = std::nan("");
    CHECK_THROWS_AS(img.validate(), config_error);
}

TEST_CASE("dihedral k=0 is the identity") {
    Image2D img = random_image(16, 16, 7);
    Image2D out = dihedral(img, 0);
    CHECK(out.data == img.data);
}

TEST_CASE("dihedral inverse round trips bitwise for all k") {
    Image2D img = random_image(16, 16, 11);
    for (int k = 0; k < 8; ++k) {
        Image2D back = dihedral_inverse(dihedral(img, k), k);
        CHECK(back.data == img.data);
    }
}

TEST_CASE("dihedral rotation applied four times is the identity") {
    Image2D img = random_image(12, 20, 3);
    Image2D out = img;
    for (int i = 0; i < 4; ++i) out = dihedral(out, 1);
    CHECK(out.data == img.data);
}

TEST_CASE("dihedral group composition table holds") {
    // Every product of two elements must equal some single element.
    Image2D img = random_image(10, 10, 5);
    for (int k1 = 0; k1 < 8; ++k1)
        for (int k2 = 0; k2 < 8; ++k2) {
            Image2D ab = dihedral(dihedral(img, k1), k2);
            bool found = false;
            for (int k = 0; k < 8 && !found; ++k)
                if (dihedral(img, k).data == ab.data) found = true;
            CHECK(found);
        }
}

TEST_CASE("dihedral swaps dimensions for odd rotations of non-square input") {
    Image2D img = random_image(8, 6, 2);
    Image2D out = dihedral(img, 1);
    CHECK(out.width == 6);
    CHECK(out.height == 8);
}

TEST_CASE("extract_patch copies the rectangle and preserves pixel size") {
    Image2D img(8, 8, 1.5);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) img.at(x, y) = 10.0 * y + x;
    Image2D full = extract_patch(img, 0, 0, 8, 8);
    CHECK(full.data == img.data);

    Image2D p = extract_patch(img, 0, 0, 2, 2);
    CHECK(p.at(0, 0) == 0.0);
    CHECK(p.at(1, 0) == 1.0);
    CHECK(p.at(0, 1) == 10.0);
    CHECK(p.at(1, 1) == 11.0);
    CHECK(p.pixel_size == 1.5);

    CHECK_THROWS_AS(extract_patch(img, 4, 4, 8, 8), std::out_of_range);
}

TEST_CASE("extract_patch at 256 from a 512 image matches the training crop") {
    Image2D img = random_image(512, 512, 1);
    Image2D p = extract_patch(img, 101, 37, 256, 256);
    CHECK(p.width == 256);
    CHECK(p.height == 256);
}

TEST_CASE("bilinear_upsample constants, s=1 identity, scale bookkeeping") {
    Image2D img(4, 4, 2.0, 3.25);
    Image2D up = bilinear_upsample(img, 2);
    CHECK(up.width == 8);
    CHECK(up.height == 8);
    CHECK(up.pixel_size == doctest::Approx(1.0));
    for (double v : up.data) CHECK(v == doctest::Approx(3.25));

    Image2D same = bilinear_upsample(img, 1);
    CHECK(same.data == img.data);
    CHECK_THROWS_AS(bilinear_upsample(img, 0), config_error);
}

TEST_CASE("bilinear_upsample of a linear ramp stays linear at half slope") {
    Image2D img(8, 8, 1.0);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) img.at(x, y) = 2.0 * x;
    Image2D up = bilinear_upsample(img, 2);
    // Interior columns: successive differences must equal half the input
    // per-pixel slope.
    for (int y = 2; y < 14; ++y)
        for (int x = 2; x < 13; ++x)
            CHECK(up.at(x + 1, y) - up.at(x, y) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("block_downsample averages blocks and doubles pixel size") {
    Image2D img(4, 2, 1.0);
    img.data = {1, 3, 5, 7,
                2, 4, 6, 8};
    Image2D down = block_downsample(img, 2);
    CHECK(down.width == 2);
    CHECK(down.height == 1);
    CHECK(down.pixel_size == doctest::Approx(2.0));
    CHECK(down.at(0, 0) == doctest::Approx(2.5));
    CHECK(down.at(1, 0) == doctest::Approx(6.5));
}

TEST_CASE("lanczos_shift zero shift is the identity") {
    Image2D img = random_image(32, 32, 13);
    Image2D out = lanczos_shift(img, 0.0, 0.0);
    CHECK(out.data == img.data);
}

TEST_CASE("lanczos_shift integer shift equals index-shifted input in the interior") {
    Image2D img = random_image(32, 32, 17);
    Image2D out = lanczos_shift(img, 3.0, 0.0);
    for (int y = 4; y < 28; ++y)
        for (int x = 4; x < 28; ++x)
            CHECK(out.at(x, y) == doctest::Approx(img.at(x - 3, y)).epsilon(1e-12));

    Image2D out2 = lanczos_shift(img, -2.0, 5.0);
    for (int y = 7; y < 26; ++y)
        for (int x = 7; x < 26; ++x)
            CHECK(out2.at(x, y) == doctest::Approx(img.at(x + 2, y - 5)).epsilon(1e-12));
}

TEST_CASE("lanczos_shift half-pixel round trip stays close on smooth input") {
    Image2D img = smooth_image(64, 64, 4.0);
    Image2D fwd = lanczos_shift(img, 0.5, 0.0);
    Image2D back = lanczos_shift(fwd, -0.5, 0.0);
    double rms_img = image_rms(img);
    double acc = 0;
    int n = 0;
    for (int y = 8; y < 56; ++y)
        for (int x = 8; x < 56; ++x) {
            double d = back.at(x, y) - img.at(x, y);
            acc += d * d;
            ++n;
        }
    double rms_dev = std::sqrt(acc / n);
    CHECK(rms_dev < 1e-2 * rms_img);
}

TEST_CASE("lanczos_shift rejects out-of-range shifts and bad tap counts") {
    Image2D img = random_image(16, 16, 19);
    CHECK_THROWS_AS(lanczos_shift(img, 4.0, 0.0), std::out_of_range);
    CHECK_THROWS_AS(lanczos_shift(img, 0.5, 0.5, 4), config_error);
    CHECK_NOTHROW(lanczos_shift(img, 0.5, 0.5, 2));
}

TEST_CASE("lanczos kernel derivative matches finite differences") {
    for (int a : {2, 3}) {
        for (double t : {-2.4, -1.3, -0.6, -1e-6, 0.2, 0.9, 1.7, 2.9}) {
            if (std::abs(t) >= a) continue;
            double h = 1e-6;
            double fd = (lanczos_kernel(t + h, a) - lanczos_kernel(t - h, a)) / (2 * h);
            CHECK(lanczos_kernel_deriv(t, a) == doctest::Approx(fd).epsilon(1e-4));
        }
    }
}
