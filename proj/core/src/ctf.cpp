#include "cryosr/ctf.hpp"

#include <cmath>
#include <string>

#include "cryosr/errors.hpp"
#include "cryosr/fft.hpp"

namespace cryosr {

void CtfParams::validate() const {
    if (voltage_kv <= 0) throw config_error("voltage must be positive");
    if (cs_mm < 0) throw config_error("spherical aberration must be >= 0");
    if (amplitude_contrast < 0 || amplitude_contrast > 1)
        throw config_error("amplitude contrast must lie in [0,1]");
}

double electron_wavelength(double voltage_kv) {
    if (voltage_kv <= 0) throw config_error("voltage must be positive");
    double v = voltage_kv * 1000.0;
    return 12.2639 / std::sqrt(v + 0.97845e-6 * v * v);
}

double ctf_chi(const CtfParams& p, double freq) {
    double lambda = electron_wavelength(p.voltage_kv);
    double cs_a = p.cs_mm * 1e7;
    double g2 = freq * freq;
    return M_PI * lambda * g2 * p.defocus_a -
           0.5 * M_PI * cs_a * lambda * lambda * lambda * g2 * g2 +
           p.phase_shift_rad;
}

double ctf_eval(const CtfParams& p, double freq) {
    double chi = ctf_chi(p, freq);
    double a = p.amplitude_contrast;
    return -(std::sqrt(1.0 - a * a) * std::sin(chi) + a * std::cos(chi));
}

Image2D apply_ctf(const Image2D& img, const CtfParams& p) {
    p.validate();
    if (img.pixel_size <= 0) throw config_error("apply_ctf requires a pixel size");
    if (img.width % 2 != 0 || img.height % 2 != 0)
        throw config_error("apply_ctf requires even dimensions");

    SpectrumImage spec = fft2(img);
    int w = img.width, h = img.height;
    for (int y = 0; y < h; ++y) {
        double fy = freq_index(y, h) / (h * img.pixel_size);
        for (int x = 0; x < w; ++x) {
            double fx = freq_index(x, w) / (w * img.pixel_size);
            double g = std::sqrt(fx * fx + fy * fy);
            spec.at(x, y) *= ctf_eval(p, g);
        }
    }
    double residue = 0;
    Image2D out = ifft2(spec, &residue);
    if (residue > 1e-6)
        throw numeric_error("apply_ctf produced imaginary residue " +
                            std::to_string(residue));
    return out;
}

}  // namespace cryosr
