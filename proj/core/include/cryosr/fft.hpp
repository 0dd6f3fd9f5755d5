#pragma once

#include <complex>
#include <vector>

#include "cryosr/image.hpp"

namespace cryosr {

// Complex Fourier coefficients of an Image2D; DC at index (0, 0),
// standard unshifted layout. source pixel_size is carried so frequency
// axes can be reconstructed.
struct SpectrumImage {
    int width = 0;
    int height = 0;
    double pixel_size = 1.0;
    std::vector<std::complex<double>> data;

    std::complex<double>& at(int x, int y) {
        return data[static_cast<size_t>(y) * width + x];
    }
    std::complex<double> at(int x, int y) const {
        return data[static_cast<size_t>(y) * width + x];
    }
};

// Forward transform, unnormalized: X(k) = sum_n x(n) exp(-2 pi i k n / N).
SpectrumImage fft2(const Image2D& img);

// Inverse transform scaled by 1/N; returns the real part and reports the
// relative imaginary residue of the result through *imag_residue when given.
Image2D ifft2(const SpectrumImage& spec, double* imag_residue = nullptr);

// Signed frequency index for bin i of an n-point axis: i <= n/2 maps to i,
// above maps to i - n.
inline int freq_index(int i, int n) { return i <= n / 2 ? i : i - n; }

}  // namespace cryosr
