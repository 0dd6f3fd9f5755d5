#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "cryosr/image.hpp"

namespace cryosr {

// K frame averages, each aligned to a distinct reference frame, plus the
// pixel-wise median of the members that serves as the network reference.
struct LrSet {
    std::vector<Image2D> members;
    std::vector<int> reference_indices;
    Image2D reference_image;

    int member_count() const { return static_cast<int>(members.size()); }
    void validate() const;
};

// Displacement of b relative to a, sub-pixel: if b's content sits at
// (dx, dy) from a's (b = lanczos_shift(a, dx, dy)), returns (dx, dy).
// Aligning b onto a therefore means shifting b by the negated result.
// Phase correlation with band-pass prefilter (DC and the top 15% of the
// Nyquist band removed), integer argmax, separable 3-point quadratic
// refinement. Throws numeric_error on flat input.
std::pair<double, double> estimate_shift(const Image2D& a, const Image2D& b);

// Mean of all frames after aligning each to frame j.
Image2D align_and_average(const MovieStack& stack, int j);

// K distinct reference indices sampled without replacement (seeded),
// one aligned average per index, reference_image = pixel-wise median.
LrSet make_lr_set(const MovieStack& stack, int k, uint64_t seed);

// Pixel-wise median across images of identical shape; an even count
// averages the two central order statistics.
Image2D pixelwise_median(const std::vector<Image2D>& images);

// Pixel-wise mean across images of identical shape.
Image2D pixelwise_mean(const std::vector<Image2D>& images);

}  // namespace cryosr
