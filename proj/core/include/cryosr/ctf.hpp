#pragma once

#include "cryosr/image.hpp"

namespace cryosr {

// Microscope and optics parameters defining the contrast transfer
// function. Underfocus is positive.
struct CtfParams {
    double voltage_kv = 300.0;
    double cs_mm = 2.7;
    double amplitude_contrast = 0.07;  // fraction in [0, 1]
    double defocus_a = 15000.0;        // Angstrom
    double phase_shift_rad = 0.0;

    void validate() const;
};

// Relativistic electron wavelength in Angstrom for an accelerating
// voltage in kV.
double electron_wavelength(double voltage_kv);

// Phase aberration chi(g) in radians at spatial frequency g (1/Angstrom).
double ctf_chi(const CtfParams& p, double freq);

// CTF(g) = -[ sqrt(1 - A^2) sin(chi) + A cos(chi) ], in [-1, 1].
double ctf_eval(const CtfParams& p, double freq);

// Multiplies the image spectrum by ctf_eval(|g|); |g| is derived from the
// integer frequency indices and the pixel size.
Image2D apply_ctf(const Image2D& img, const CtfParams& p);

}  // namespace cryosr
