#include "cryosr/evalctf.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "cryosr/errors.hpp"
#include "cryosr/fft.hpp"

namespace cryosr {

Image2D power_spectrum(const Image2D& image, int tile) {
    if (tile < 4 || tile % 2 != 0) throw config_error("tile must be even and >= 4");
    if (tile > image.width || tile > image.height)
        throw config_error("tile exceeds image dimensions");

    std::vector<double> window(tile);
    for (int i = 0; i < tile; ++i)
        window[i] =
            0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * (i + 0.5) / tile));

    Image2D accum(tile, tile, image.pixel_size, 0.0);
    Image2D patch(tile, tile, image.pixel_size);
    int count = 0;
    for (int y0 = 0; y0 + tile <= image.height; y0 += tile / 2)
        for (int x0 = 0; x0 + tile <= image.width; x0 += tile / 2) {
            double mean = 0;
            for (int y = 0; y < tile; ++y)
                for (int x = 0; x < tile; ++x) mean += image.at(x0 + x, y0 + y);
            mean /= static_cast<double>(tile) * tile;
            for (int y = 0; y < tile; ++y)
                for (int x = 0; x < tile; ++x)
                    patch.at(x, y) =
                        (image.at(x0 + x, y0 + y) - mean) * window[x] * window[y];
            SpectrumImage spec = fft2(patch);
            for (int y = 0; y < tile; ++y)
                for (int x = 0; x < tile; ++x)
                    accum.at(x, y) += std::norm(spec.at(x, y));
            ++count;
        }

    // Shift DC to the center and normalize by the tile count.
    Image2D out(tile, tile, image.pixel_size);
    int half = tile / 2;
    for (int y = 0; y < tile; ++y)
        for (int x = 0; x < tile; ++x)
            out.at(x, y) = accum.at((x + half) % tile, (y + half) % tile) / count;
    return out;
}

RadialProfile radial_average(const Image2D& spectrum) {
    if (spectrum.width != spectrum.height)
        throw config_error("radial average requires a square spectrum");
    int n = spectrum.width;
    int cx = n / 2, cy = n / 2;
    int rmax = n / 2;

    std::vector<double> sum(rmax + 1, 0.0);
    std::vector<int> cnt(rmax + 1, 0);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            double r = std::hypot(x - cx, y - cy);
            int bin = static_cast<int>(std::lround(r));
            if (bin > rmax) continue;
            sum[bin] += spectrum.at(x, y);
            cnt[bin] += 1;
        }

    RadialProfile p;
    for (int r = 0; r <= rmax; ++r) {
        if (cnt[r] == 0) continue;
        p.freq.push_back(r / (n * spectrum.pixel_size));
        p.power.push_back(sum[r] / cnt[r]);
    }
    return p;
}

namespace {

double pearson(const double* u, const double* v, int n) {
    double um = 0, vm = 0;
    for (int i = 0; i < n; ++i) {
        um += u[i];
        vm += v[i];
    }
    um /= n;
    vm /= n;
    double suv = 0, suu = 0, svv = 0;
    for (int i = 0; i < n; ++i) {
        suv += (u[i] - um) * (v[i] - vm);
        suu += (u[i] - um) * (u[i] - um);
        svv += (v[i] - vm) * (v[i] - vm);
    }
    if (suu <= 0 || svv <= 0) return 0.0;
    return suv / std::sqrt(suu * svv);
}

// Least-squares polynomial of degree 4 through (x, y), solved by normal
// equations with Gaussian elimination; x is expected pre-normalized.
std::array<double, 5> fit_poly4(const std::vector<double>& x,
                                const std::vector<double>& y) {
    constexpr int kTerms = 5;
    double ata[kTerms][kTerms] = {};
    double atb[kTerms] = {};
    for (size_t i = 0; i < x.size(); ++i) {
        double pw[kTerms];
        pw[0] = 1;
        for (int t = 1; t < kTerms; ++t) pw[t] = pw[t - 1] * x[i];
        for (int r = 0; r < kTerms; ++r) {
            for (int c = 0; c < kTerms; ++c) ata[r][c] += pw[r] * pw[c];
            atb[r] += pw[r] * y[i];
        }
    }
    for (int col = 0; col < kTerms; ++col) {
        int piv = col;
        for (int r = col + 1; r < kTerms; ++r)
            if (std::abs(ata[r][col]) > std::abs(ata[piv][col])) piv = r;
        std::swap(ata[col], ata[piv]);
        std::swap(atb[col], atb[piv]);
        if (ata[col][col] == 0.0) throw numeric_error("degenerate background fit");
        for (int r = 0; r < kTerms; ++r) {
            if (r == col) continue;
            double f = ata[r][col] / ata[col][col];
            for (int c = col; c < kTerms; ++c) ata[r][c] -= f * ata[col][c];
            atb[r] -= f * atb[col];
        }
    }
    std::array<double, 5> coef;
    for (int t = 0; t < kTerms; ++t) coef[t] = atb[t] / ata[t][t];
    return coef;
}

double poly_eval(const std::array<double, 5>& c, double x) {
    return c[0] + x * (c[1] + x * (c[2] + x * (c[3] + x * c[4])));
}

}  // namespace

CtfFitReport fit_ctf(const RadialProfile& profile, const CtfParams& base,
                     double defocus_lo, double defocus_hi, double defocus_step,
                     double band_lo, double band_hi_frac) {
    if (defocus_step <= 0 || defocus_hi < defocus_lo)
        throw config_error("defocus search range is empty");
    if (profile.freq.empty()) throw config_error("empty profile");

    double nyquist = profile.freq.back();
    double band_hi = band_hi_frac * nyquist;
    std::vector<int> band;
    for (int i = 0; i < profile.bin_count(); ++i)
        if (profile.freq[i] >= band_lo && profile.freq[i] <= band_hi)
            band.push_back(i);
    if (static_cast<int>(band.size()) < 8)
        throw config_error("fit band covers fewer than 8 profile bins");

    int nb = static_cast<int>(band.size());
    std::vector<double> bx(nb), by(nb), bf(nb), bp(nb);
    double f0 = profile.freq[band.front()], f1 = profile.freq[band.back()];
    for (int i = 0; i < nb; ++i) {
        bf[i] = profile.freq[band[i]];
        bp[i] = profile.power[band[i]];
        bx[i] = 2.0 * (bf[i] - f0) / (f1 - f0) - 1.0;
        by[i] = std::log(std::max(bp[i], 1e-300));
    }
    std::array<double, 5> bg = fit_poly4(bx, by);
    std::vector<double> signal(nb);
    for (int i = 0; i < nb; ++i) signal[i] = bp[i] - std::exp(poly_eval(bg, bx[i]));

    CtfFitReport report;
    report.cc_score = -2.0;
    std::vector<double> model(nb);
    CtfParams p = base;
    for (double dz = defocus_lo; dz <= defocus_hi + 1e-9; dz += defocus_step) {
        p.defocus_a = dz;
        for (int i = 0; i < nb; ++i) {
            double c = ctf_eval(p, bf[i]);
            model[i] = c * c;
        }
        double cc = pearson(signal.data(), model.data(), nb);
        if (cc > report.cc_score) {
            report.cc_score = cc;
            report.defocus_a = dz;
        }
    }

    p.defocus_a = report.defocus_a;
    for (int i = 0; i < nb; ++i) {
        double c = ctf_eval(p, bf[i]);
        model[i] = c * c;
    }
    constexpr int kWin = 7;
    int last_center = nb - 1 - kWin / 2;
    double res_freq = bf[last_center];
    for (int j = kWin / 2; j <= last_center; ++j) {
        double wcc = pearson(signal.data() + j - kWin / 2,
                             model.data() + j - kWin / 2, kWin);
        if (wcc < 0.5) {
            res_freq = bf[j];
            break;
        }
    }
    report.fit_resolution_a = 1.0 / res_freq;
    return report;
}

FrcCurve frc(const Image2D& a, const Image2D& b, double threshold) {
    if (a.width != b.width || a.height != b.height)
        throw config_error("frc requires equal dimensions");
    if (a.width != a.height) throw config_error("frc requires square images");
    if (a.pixel_size != b.pixel_size)
        throw config_error("frc requires equal pixel sizes");

    int n = a.width;
    int rings = n / 2;
    SpectrumImage fa = fft2(a);
    SpectrumImage fb = fft2(b);

    std::vector<std::complex<double>> num(rings + 1, 0.0);
    std::vector<double> pa(rings + 1, 0.0), pb(rings + 1, 0.0);
    for (int y = 0; y < n; ++y) {
        int fy = freq_index(y, n);
        for (int x = 0; x < n; ++x) {
            int fx = freq_index(x, n);
            int r = static_cast<int>(std::lround(std::hypot(fx, fy)));
            if (r < 1 || r > rings) continue;
            std::complex<double> va = fa.at(x, y);
            std::complex<double> vb = fb.at(x, y);
            num[r] += va * std::conj(vb);
            pa[r] += std::norm(va);
            pb[r] += std::norm(vb);
        }
    }

    FrcCurve curve;
    for (int r = 1; r <= rings; ++r) {
        curve.freq.push_back(r / (n * a.pixel_size));
        double den = std::sqrt(pa[r] * pb[r]);
        double c = den > 0 ? num[r].real() / den : 0.0;
        curve.corr.push_back(std::clamp(c, -1.0, 1.0));
    }

    if (!curve.corr.empty() && curve.corr.front() < threshold)
        curve.crossings.push_back(curve.freq.front());
    for (size_t i = 1; i < curve.corr.size(); ++i)
        if (curve.corr[i - 1] >= threshold && curve.corr[i] < threshold) {
            double f = curve.freq[i - 1] +
                       (curve.freq[i] - curve.freq[i - 1]) *
                           (curve.corr[i - 1] - threshold) /
                           (curve.corr[i - 1] - curve.corr[i]);
            curve.crossings.push_back(f);
        }
    curve.resolution_a = curve.crossings.empty() ? 1.0 / curve.freq.back()
                                                 : 1.0 / curve.crossings.front();
    return curve;
}

namespace {

void write_two_column_csv(const std::string& path,
                          const std::vector<double>& freq,
                          const std::vector<double>& value) {
    std::ofstream os(path);
    if (!os) throw io_error("cannot open " + path + " for writing");
    os << "frequency_invA,value\n" << std::setprecision(17);
    for (size_t i = 0; i < freq.size(); ++i)
        os << freq[i] << ',' << value[i] << '\n';
    if (!os) throw io_error("write failed for " + path);
}

}  // namespace

void write_profile_csv(const std::string& path, const RadialProfile& profile) {
    write_two_column_csv(path, profile.freq, profile.power);
}

void write_frc_csv(const std::string& path, const FrcCurve& curve) {
    write_two_column_csv(path, curve.freq, curve.corr);
}

void write_spectrum_pgm(const std::string& path, const Image2D& spectrum) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open " + path + " for writing");
    double lo = 0, hi = 0;
    std::vector<double> mapped(spectrum.size());
    for (size_t i = 0; i < spectrum.size(); ++i) {
        mapped[i] = std::log1p(std::max(0.0, spectrum.data[i]));
        if (i == 0) {
            lo = hi = mapped[0];
        } else {
            lo = std::min(lo, mapped[i]);
            hi = std::max(hi, mapped[i]);
        }
    }
    double scale = hi > lo ? 65535.0 / (hi - lo) : 0.0;
    os << "P5\n" << spectrum.width << ' ' << spectrum.height << "\n65535\n";
    for (double m : mapped) {
        int v = static_cast<int>(std::lround((m - lo) * scale));
        unsigned char hi_byte = static_cast<unsigned char>((v >> 8) & 0xFF);
        unsigned char lo_byte = static_cast<unsigned char>(v & 0xFF);
        os.put(static_cast<char>(hi_byte));
        os.put(static_cast<char>(lo_byte));
    }
    if (!os) throw io_error("write failed for " + path);
}

}  // namespace cryosr
