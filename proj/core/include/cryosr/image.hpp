#pragma once

#include <cstddef>
#include <vector>

namespace cryosr {

// Real-valued 2D image, row major, double precision samples.
// pixel_size is the physical sample spacing in Angstrom per pixel.
struct Image2D {
    int width = 0;
    int height = 0;
    double pixel_size = 1.0;
    std::vector<double> data;

    Image2D() = default;
    Image2D(int w, int h, double px, double fill = 0.0);

    double& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
    double at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }
    size_t size() const { return data.size(); }

    // Throws config_error if dimensions, pixel size or sample finiteness
    // are violated.
    void validate() const;
};

// Ordered list of raw movie frames, all with identical dimensions and
// pixel size.
struct MovieStack {
    std::vector<Image2D> frames;

    int frame_count() const { return static_cast<int>(frames.size()); }
    void validate() const;
};

// Trigonometric-free exact transforms: k in [0,7] enumerates the dihedral
// group of the square as k = r + 4*f, r quarter turns counterclockwise
// after an optional horizontal mirror (f = k/4).
Image2D dihedral(const Image2D& img, int k);
Image2D dihedral_inverse(const Image2D& img, int k);

Image2D extract_patch(const Image2D& img, int x0, int y0, int w, int h);

Image2D bilinear_upsample(const Image2D& img, int s);

// Mean over non-overlapping s x s blocks; dimensions must divide by s.
Image2D block_downsample(const Image2D& img, int s);

// Translate by (dx, dy) pixels with Lanczos-a interpolation so that
// out(x, y) = img(x - dx, y - dy); borders are edge replicated.
// a must be 2 or 3; |dx|, |dy| must stay below min(w, h)/4.
Image2D lanczos_shift(const Image2D& img, double dx, double dy, int a = 3);

// Lanczos kernel and its derivative for one axis offset t, |t| < a.
double lanczos_kernel(double t, int a);
double lanczos_kernel_deriv(double t, int a);

// Basic reductions used throughout the tests and metrics.
double image_mean(const Image2D& img);
double image_variance(const Image2D& img);
double image_rms(const Image2D& img);

}  // namespace cryosr
