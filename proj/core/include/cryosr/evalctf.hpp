#pragma once

#include <string>
#include <vector>

#include "cryosr/ctf.hpp"
#include "cryosr/image.hpp"

namespace cryosr {

// Rotationally averaged spectral power. Frequencies are annulus centers
// in 1/Angstrom, strictly increasing from DC.
struct RadialProfile {
    std::vector<double> freq;
    std::vector<double> power;

    int bin_count() const { return static_cast<int>(freq.size()); }
};

struct CtfFitReport {
    double defocus_a = 0;       // grid-search argmax
    double cc_score = 0;        // in [-1, 1]
    double fit_resolution_a = 0;  // never finer than 2x pixel size
};

// Per-ring correlation between two images' spectra. crossings holds the
// frequency of every downward threshold crossing; resolution_a is the
// reciprocal of the first one, bounded by Nyquist when none exists.
struct FrcCurve {
    std::vector<double> freq;
    std::vector<double> corr;
    std::vector<double> crossings;
    double resolution_a = 0;
};

// Average of |FFT|^2 over half-overlapping tiles, each mean-subtracted
// and Hann-windowed; the result is tile x tile with DC at the center and
// carries the source pixel size. tile must be even and fit the image.
Image2D power_spectrum(const Image2D& image, int tile = 256);

// Mean over integer-radius annuli of a DC-centered square spectrum,
// radii 0..n/2; frequency axis derives from the spectrum's pixel size.
RadialProfile radial_average(const Image2D& spectrum);

// Grid search over defocus maximizing the Pearson correlation between
// the background-subtracted profile and ctf_eval^2 inside the fit band
// [band_lo, band_hi_frac x Nyquist]. The background is an order-4
// polynomial fit to the log profile. fit_resolution reads the center of
// the first 7-bin window whose local correlation at the best defocus
// drops below 0.5.
CtfFitReport fit_ctf(const RadialProfile& profile, const CtfParams& base,
                     double defocus_lo, double defocus_hi, double defocus_step,
                     double band_lo = 1.0 / 30.0, double band_hi_frac = 0.9);

// Fourier ring correlation over integer-radius rings 1..n/2 of two
// equally shaped square images.
FrcCurve frc(const Image2D& a, const Image2D& b, double threshold = 0.5);

// Two-column CSV (header: frequency_invA,value).
void write_profile_csv(const std::string& path, const RadialProfile& profile);
void write_frc_csv(const std::string& path, const FrcCurve& curve);

// 16-bit binary PGM of log(1 + power), full-range normalized.
void write_spectrum_pgm(const std::string& path, const Image2D& spectrum);

}  // namespace cryosr
