#include "cryosr/image.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "cryosr/errors.hpp"

namespace cryosr {

Image2D::Image2D(int w, int h, double px, double fill)
    : width(w), height(h), pixel_size(px),
      data(static_cast<size_t>(w) * static_cast<size_t>(h), fill) {
    if (w <= 0 || h <= 0) throw config_error("image dimensions must be positive");
    if (px <= 0) throw config_error("pixel_size must be positive");
}

void Image2D::validate() const {
    if (width <= 0 || height <= 0)
        throw config_error("image dimensions must be positive");
    if (pixel_size <= 0) throw config_error("pixel_size must be positive");
    if (data.size() != static_cast<size_t>(width) * height)
        throw config_error("image data length does not match dimensions");
    for (double v : data)
        if (!std::isfinite(v)) throw config_error("image contains non-finite samples");
}

void MovieStack::validate() const {
    if (frames.empty()) throw config_error("movie stack must contain at least one frame");
    const Image2D& f0 = frames.front();
    for (const Image2D& f : frames) {
        f.validate();
        if (f.width != f0.width || f.height != f0.height)
            throw config_error("movie frames differ in dimensions");
        if (f.pixel_size != f0.pixel_size)
            throw config_error("movie frames differ in pixel size");
    }
}

namespace {

// Maps output coordinates to input coordinates for dihedral element k.
// r counterclockwise quarter turns follow an optional mirror in x.
void dihedral_source(int k, int w_in, int h_in, int x, int y, int& sx, int& sy) {
    int r = k & 3;
    bool f = k >= 4;
    // Invert the rotation: the output pixel (x, y) of a r-quarter-turn
    // image comes from rotating back by r.
    int ix = 0, iy = 0;
    switch (r) {
        case 0: ix = x; iy = y; break;
        case 1: ix = w_in - 1 - y; iy = x; break;      // out = rot90ccw(in)
        case 2: ix = w_in - 1 - x; iy = h_in - 1 - y; break;
        case 3: ix = y; iy = h_in - 1 - x; break;
        default: break;
    }
    if (f) ix = w_in - 1 - ix;
    sx = ix;
    sy = iy;
}

}  // namespace

Image2D dihedral(const Image2D& img, int k) {
    if (k < 0 || k > 7) throw config_error("dihedral index must be in [0,7]");
    bool swap = (k & 1) != 0;
    int ow = swap ? img.height : img.width;
    int oh = swap ? img.width : img.height;
    Image2D out(ow, oh, img.pixel_size);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            int sx, sy;
            dihedral_source(k, img.width, img.height, x, y, sx, sy);
            out.at(x, y) = img.at(sx, sy);
        }
    return out;
}

Image2D dihedral_inverse(const Image2D& img, int k) {
    if (k < 0 || k > 7) throw config_error("dihedral index must be in [0,7]");
    // (mirror then rotate r)^-1 = rotate -r then mirror.
    // In the k = r + 4f enumeration: inverse of k<4 is (4-r)&3; elements
    // with a mirror are involutions up to rotation bookkeeping, handled
    // by finding the element that undoes k on index maps.
    static const int inverse_k[8] = {0, 3, 2, 1, 4, 5, 6, 7};
    return dihedral(img, inverse_k[k]);
}

Image2D extract_patch(const Image2D& img, int x0, int y0, int w, int h) {
    if (w <= 0 || h <= 0) throw config_error("patch dimensions must be positive");
    if (x0 < 0 || y0 < 0 || x0 + w > img.width || y0 + h > img.height)
        throw std::out_of_range("patch rectangle exceeds image bounds");
    Image2D out(w, h, img.pixel_size);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(x, y) = img.at(x0 + x, y0 + y);
    return out;
}

Image2D bilinear_upsample(const Image2D& img, int s) {
    if (s < 1) throw config_error("upsample factor must be >= 1");
    if (s == 1) return img;
    int ow = img.width * s, oh = img.height * s;
    Image2D out(ow, oh, img.pixel_size / s);
    for (int y = 0; y < oh; ++y) {
        double v = (y + 0.5) / s - 0.5;
        int y0 = static_cast<int>(std::floor(v));
        double fy = v - y0;
        int ya = std::clamp(y0, 0, img.height - 1);
        int yb = std::clamp(y0 + 1, 0, img.height - 1);
        for (int x = 0; x < ow; ++x) {
            double u = (x + 0.5) / s - 0.5;
            int x0 = static_cast<int>(std::floor(u));
            double fx = u - x0;
            int xa = std::clamp(x0, 0, img.width - 1);
            int xb = std::clamp(x0 + 1, 0, img.width - 1);
            double top = img.at(xa, ya) * (1 - fx) + img.at(xb, ya) * fx;
            double bot = img.at(xa, yb) * (1 - fx) + img.at(xb, yb) * fx;
            out.at(x, y) = top * (1 - fy) + bot * fy;
        }
    }
    return out;
}

Image2D block_downsample(const Image2D& img, int s) {
    if (s < 1) throw config_error("downsample factor must be >= 1");
    if (s == 1) return img;
    if (img.width % s != 0 || img.height % s != 0)
        throw config_error("image dimensions must divide by the downsample factor");
    int ow = img.width / s, oh = img.height / s;
    Image2D out(ow, oh, img.pixel_size * s);
    double inv = 1.0 / (s * s);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0;
            for (int j = 0; j < s; ++j)
                for (int i = 0; i < s; ++i) acc += img.at(x * s + i, y * s + j);
            out.at(x, y) = acc * inv;
        }
    return out;
}

double lanczos_kernel(double t, int a) {
    double at = std::abs(t);
    if (at >= a) return 0.0;
    if (at < 1e-8) return 1.0;
    double pt = std::numbers::pi * t;
    return a * std::sin(pt) * std::sin(pt / a) / (pt * pt);
}

double lanczos_kernel_deriv(double t, int a) {
    double at = std::abs(t);
    if (at >= a) return 0.0;
    const double pi = std::numbers::pi;
    if (at < 1e-5) {
        // Series around 0: L(t) = 1 - (pi^2 t^2 / 6)(1 + 1/a^2) + O(t^4).
        return -pi * pi * t / 3.0 * (1.0 + 1.0 / (a * a));
    }
    double pt = pi * t;
    double s1 = std::sin(pt), c1 = std::cos(pt);
    double s2 = std::sin(pt / a), c2 = std::cos(pt / a);
    // d/dt [ a sin(pi t) sin(pi t / a) / (pi^2 t^2) ]
    double num = a * (pi * c1 * s2 + (pi / a) * s1 * c2);
    double g = pi * pi * t * t;
    double dg = 2.0 * pi * pi * t;
    double f = a * s1 * s2;
    return (num * g - f * dg) / (g * g);
}

namespace {

struct Taps {
    int first;                    // first source index before clamping
    double w[6];                  // weights, kernel-sum normalized
};

Taps make_taps(double pos, int a) {
    Taps t;
    int base = static_cast<int>(std::floor(pos));
    t.first = base - a + 1;
    double sum = 0;
    for (int i = 0; i < 2 * a; ++i) {
        double x = pos - (t.first + i);
        t.w[i] = lanczos_kernel(x, a);
        sum += t.w[i];
    }
    for (int i = 0; i < 2 * a; ++i) t.w[i] /= sum;
    return t;
}

}  // namespace

Image2D lanczos_shift(const Image2D& img, double dx, double dy, int a) {
    if (a != 2 && a != 3) throw config_error("lanczos tap count must be 2 or 3");
    double bound = std::min(img.width, img.height) / 4.0;
    if (std::abs(dx) >= bound || std::abs(dy) >= bound)
        throw std::out_of_range("shift exceeds min(width,height)/4");
    if (dx == 0.0 && dy == 0.0) return img;

    int w = img.width, h = img.height;
    Image2D tmp(w, h, img.pixel_size);
    // Horizontal pass: tmp(x, y) = sum_i wx_i img(clamp(x0+i), y).
    {
        double frac = dx - std::floor(dx);
        Taps t = make_taps(-frac, a);  // weights shared by every column
        int shift_int = static_cast<int>(std::floor(dx));
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                int src0 = x - shift_int + t.first;
                double acc = 0;
                for (int i = 0; i < 2 * a; ++i) {
                    int sx = std::clamp(src0 + i, 0, w - 1);
                    acc += t.w[i] * img.at(sx, y);
                }
                tmp.at(x, y) = acc;
            }
    }
    Image2D out(w, h, img.pixel_size);
    {
        double frac = dy - std::floor(dy);
        Taps t = make_taps(-frac, a);
        int shift_int = static_cast<int>(std::floor(dy));
        for (int y = 0; y < h; ++y) {
            int src0 = y - shift_int + t.first;
            for (int x = 0; x < w; ++x) {
                double acc = 0;
                for (int j = 0; j < 2 * a; ++j) {
                    int sy = std::clamp(src0 + j, 0, h - 1);
                    acc += t.w[j] * tmp.at(x, sy);
                }
                out.at(x, y) = acc;
            }
        }
    }
    return out;
}

double image_mean(const Image2D& img) {
    double acc = 0;
    for (double v : img.data) acc += v;
    return acc / img.size();
}

double image_variance(const Image2D& img) {
    double m = image_mean(img);
    double acc = 0;
    for (double v : img.data) acc += (v - m) * (v - m);
    return acc / img.size();
}

double image_rms(const Image2D& img) {
    double acc = 0;
    for (double v : img.data) acc += v * v;
    return std::sqrt(acc / img.size());
}

}  // namespace cryosr
