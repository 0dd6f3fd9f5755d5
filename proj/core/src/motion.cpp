#include "cryosr/motion.hpp"

#include <algorithm>
#include <cmath>

#include "cryosr/errors.hpp"
#include "cryosr/fft.hpp"
#include "cryosr/rng.hpp"

namespace cryosr {

void LrSet::validate() const {
    if (member_count() < 2) throw config_error("LrSet requires K >= 2 members");
    if (static_cast<int>(reference_indices.size()) != member_count())
        throw config_error("reference index count must equal member count");
    const Image2D& m0 = members.front();
    for (const Image2D& m : members) {
        if (m.width != m0.width || m.height != m0.height ||
            m.pixel_size != m0.pixel_size)
            throw config_error("LrSet members differ in shape or pixel size");
    }
    if (reference_image.width != m0.width || reference_image.height != m0.height)
        throw config_error("reference image shape does not match members");
    std::vector<int> sorted = reference_indices;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw config_error("reference indices must be distinct");
}

namespace {

// Correlation surface value with wrapped indexing.
double corr_at(const Image2D& c, int x, int y) {
    int w = c.width, h = c.height;
    return c.at(((x % w) + w) % w, ((y % h) + h) % h);
}

double subpixel_offset(double cm, double c0, double cp) {
    double denom = cm - 2.0 * c0 + cp;
    if (denom >= 0) return 0.0;  // not a local maximum along this axis
    double d = 0.5 * (cm - cp) / denom;
    return std::clamp(d, -0.5, 0.5);
}

}  // namespace

std::pair<double, double> estimate_shift(const Image2D& a, const Image2D& b) {
    if (a.width != b.width || a.height != b.height)
        throw config_error("estimate_shift requires equal dimensions");
    if (image_variance(a) == 0.0 || image_variance(b) == 0.0)
        throw numeric_error("degenerate correlation: flat input image");

    SpectrumImage fa = fft2(a);
    SpectrumImage fb = fft2(b);
    int w = a.width, h = a.height;
    double nyq = 0.5;  // cycles per pixel
    double keep = 0.85 * nyq;
    SpectrumImage cross;
    cross.width = w;
    cross.height = h;
    cross.pixel_size = a.pixel_size;
    cross.data.assign(fa.data.size(), {0.0, 0.0});
    for (int y = 0; y < h; ++y) {
        double fy = static_cast<double>(freq_index(y, h)) / h;
        for (int x = 0; x < w; ++x) {
            double fx = static_cast<double>(freq_index(x, w)) / w;
            double f = std::sqrt(fx * fx + fy * fy);
            if (f == 0.0 || f > keep) continue;
            cross.at(x, y) = std::conj(fa.at(x, y)) * fb.at(x, y);
        }
    }
    Image2D c = ifft2(cross);

    int best = 0;
    for (size_t i = 1; i < c.size(); ++i)
        if (c.data[i] > c.data[best]) best = static_cast<int>(i);
    int bx = best % w, by = best / w;

    double fx = subpixel_offset(corr_at(c, bx - 1, by), corr_at(c, bx, by),
                                corr_at(c, bx + 1, by));
    double fy = subpixel_offset(corr_at(c, bx, by - 1), corr_at(c, bx, by),
                                corr_at(c, bx, by + 1));

    // The correlation peak sits at b's displacement; wrap to signed range.
    double dx = bx + fx;
    double dy = by + fy;
    if (dx > w / 2.0) dx -= w;
    if (dy > h / 2.0) dy -= h;
    return {dx, dy};
}

Image2D align_and_average(const MovieStack& stack, int j) {
    stack.validate();
    if (j < 0 || j >= stack.frame_count())
        throw config_error("reference frame index out of range");
    const Image2D& ref = stack.frames[j];
    Image2D acc(ref.width, ref.height, ref.pixel_size, 0.0);
    for (int i = 0; i < stack.frame_count(); ++i) {
        Image2D aligned;
        if (i == j) {
            aligned = stack.frames[i];
        } else {
            auto [dx, dy] = estimate_shift(ref, stack.frames[i]);
            aligned = lanczos_shift(stack.frames[i], -dx, -dy);
        }
        for (size_t p = 0; p < acc.size(); ++p) acc.data[p] += aligned.data[p];
    }
    double inv = 1.0 / stack.frame_count();
    for (double& v : acc.data) v *= inv;
    return acc;
}

LrSet make_lr_set(const MovieStack& stack, int k, uint64_t seed) {
    stack.validate();
    int m = stack.frame_count();
    if (k < 2) throw config_error("K must be >= 2");
    if (k > m) throw config_error("K must not exceed the frame count");
    Rng rng(seed);
    LrSet set;
    set.reference_indices = rng.sample_without_replacement(m, k);
    set.members.reserve(k);
    for (int idx : set.reference_indices)
        set.members.push_back(align_and_average(stack, idx));
    set.reference_image = pixelwise_median(set.members);
    set.validate();
    return set;
}

Image2D pixelwise_median(const std::vector<Image2D>& images) {
    if (images.empty()) throw config_error("median of zero images");
    const Image2D& i0 = images.front();
    Image2D out(i0.width, i0.height, i0.pixel_size);
    size_t n = images.size();
    std::vector<double> vals(n);
    for (size_t p = 0; p < out.size(); ++p) {
        for (size_t i = 0; i < n; ++i) vals[i] = images[i].data[p];
        std::sort(vals.begin(), vals.end());
        out.data[p] = n % 2 == 1 ? vals[n / 2]
                                 : 0.5 * (vals[n / 2 - 1] + vals[n / 2]);
    }
    return out;
}

Image2D pixelwise_mean(const std::vector<Image2D>& images) {
    if (images.empty()) throw config_error("mean of zero images");
    const Image2D& i0 = images.front();
    for (const Image2D& img : images)
        if (img.width != i0.width || img.height != i0.height)
            throw config_error("pixelwise mean requires identical shapes");
    Image2D out(i0.width, i0.height, i0.pixel_size);
    double inv = 1.0 / static_cast<double>(images.size());
    for (size_t p = 0; p < out.size(); ++p) {
        double acc = 0;
        for (const Image2D& img : images) acc += img.data[p];
        out.data[p] = acc * inv;
    }
    return out;
}

}  // namespace cryosr
