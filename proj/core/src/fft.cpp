#include "cryosr/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>

#include "cryosr/errors.hpp"

namespace cryosr {

namespace {

// FFTW plan creation is not thread safe; executing a plan on new arrays is.
// Plans are cached per (width, height, sign) and created with
// FFTW_ESTIMATE | FFTW_UNALIGNED so results are deterministic and any
// buffer qualifies for new-array execution.
class PlanCache {
public:
    fftw_plan get(int w, int h, int sign) {
        std::scoped_lock lock(mu_);
        auto key = std::tuple(w, h, sign);
        auto it = plans_.find(key);
        if (it != plans_.end()) return it->second;
        std::vector<std::complex<double>> dummy(static_cast<size_t>(w) * h);
        auto* p = reinterpret_cast<fftw_complex*>(dummy.data());
        fftw_plan plan = fftw_plan_dft_2d(h, w, p, p, sign,
                                          FFTW_ESTIMATE | FFTW_UNALIGNED);
        plans_.emplace(key, plan);
        return plan;
    }

private:
    std::mutex mu_;
    std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

PlanCache& cache() {
    static PlanCache c;
    return c;
}

}  // namespace

SpectrumImage fft2(const Image2D& img) {
    if (img.width < 2 || img.height < 2)
        throw config_error("fft2 requires dimensions >= 2 in each axis");
    SpectrumImage spec;
    spec.width = img.width;
    spec.height = img.height;
    spec.pixel_size = img.pixel_size;
    spec.data.assign(img.size(), {0.0, 0.0});
    for (size_t i = 0; i < img.size(); ++i) spec.data[i] = {img.data[i], 0.0};
    fftw_plan plan = cache().get(img.width, img.height, FFTW_FORWARD);
    auto* p = reinterpret_cast<fftw_complex*>(spec.data.data());
    fftw_execute_dft(plan, p, p);
    return spec;
}

Image2D ifft2(const SpectrumImage& spec, double* imag_residue) {
    if (spec.width < 2 || spec.height < 2)
        throw config_error("ifft2 requires dimensions >= 2 in each axis");
    std::vector<std::complex<double>> buf = spec.data;
    fftw_plan plan = cache().get(spec.width, spec.height, FFTW_BACKWARD);
    auto* p = reinterpret_cast<fftw_complex*>(buf.data());
    fftw_execute_dft(plan, p, p);
    Image2D out(spec.width, spec.height, spec.pixel_size);
    double scale = 1.0 / (static_cast<double>(spec.width) * spec.height);
    double re2 = 0, im2 = 0;
    for (size_t i = 0; i < buf.size(); ++i) {
        double re = buf[i].real() * scale;
        double im = buf[i].imag() * scale;
        out.data[i] = re;
        re2 += re * re;
        im2 += im * im;
    }
    if (imag_residue)
        *imag_residue = re2 > 0 ? std::sqrt(im2 / re2) : std::sqrt(im2);
    return out;
}

}  // namespace cryosr
