#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vlaudit/types.hpp"

// Distribution-shift measurements between two image subsets: frequency-band
// features of single images, sliced Wasserstein distances between vector
// sets, and the Wasserstein ratio (WiRED) across embedding spaces.
namespace vlaudit::shift {

using Rows = std::vector<std::vector<double>>;

/// Centered DFT magnitude: the zero-frequency bin sits at (H/2, W/2), rounded down.
struct Spectrum {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> magnitude;  // row-major

    double at(std::size_t u, std::size_t v) const { return magnitude[u * width + v]; }
};

/// Separable evaluation of the DFT definition, O(HW(H+W)), any size.
Spectrum dft_magnitude(const GrayImage& image);
/// Radix-2 FFT; both dimensions must be powers of two.
Spectrum dft_magnitude_fast(const GrayImage& image);
bool is_power_of_two(std::size_t n);

/// Band index of every spectrum bin for a K-band split by axis-normalised
/// radius; bins at the largest radius fall in band K-1.
std::vector<std::size_t> band_assignment(std::size_t height, std::size_t width, std::size_t bands);

/// Mean magnitude per concentric band; empty bands give 0.
std::vector<double> band_energies(const Spectrum& spectrum, std::size_t bands);
/// Uses the FFT when both sides are powers of two, the direct DFT otherwise.
std::vector<double> band_energies(const GrayImage& image, std::size_t bands);

/// Band energies of many images as an embedding space named "freq".
EmbeddingSpace frequency_space(std::span<const std::string> ids, std::span<const GrayImage> images,
                               std::size_t bands);

/// Exact 1D optimal transport between equal-size samples (sorted pairing).
double wasserstein_1d(std::span<const double> xs, std::span<const double> ys, double q);

/// Average 1D W_q over `n_proj` random unit directions drawn from `seed`.
double sliced_wasserstein(const Rows& a, const Rows& b, std::size_t n_proj, double q, std::uint64_t seed);

/// Unit direction number `index` of the projection set for `seed`.
std::vector<double> projection_direction(std::size_t dim, std::uint64_t seed, std::size_t index);

struct WiredParams {
    std::size_t n_proj = 128;
    double q = 2.0;
    std::size_t repeats = 10;
    std::uint64_t seed = 0;
};

struct SpaceRatio {
    std::string name;
    double ratio = 0.0;        // mean over repeats
    double numerator = 0.0;    // mean SWD(S11, S2')
    double denominator = 0.0;  // mean SWD(S11, S12)
    std::size_t subset_size = 0;
    std::size_t repeats = 0;
    std::vector<double> per_repeat;
};

struct WiredReport {
    std::vector<SpaceRatio> per_space;
    double final_score = 0.0;
    WiredParams params;
};

/// Ratio of the cross-set SWD to the within-S1 SWD, averaged over repeats
/// of fresh disjoint subsets. Throws DataError when S1 has no internal
/// variation.
SpaceRatio wired_space(const Rows& s1, const Rows& s2, const WiredParams& params);

struct SpacePair {
    std::string name;
    Rows s1;
    Rows s2;
};

/// Per-space ratios and their maximum.
WiredReport wired(const std::vector<SpacePair>& spaces, const WiredParams& params);

/// Serial references for the parallel kernels above.
namespace serial {
Spectrum dft_magnitude(const GrayImage& image);
double sliced_wasserstein(const Rows& a, const Rows& b, std::size_t n_proj, double q, std::uint64_t seed);
SpaceRatio wired_space(const Rows& s1, const Rows& s2, const WiredParams& params);
EmbeddingSpace frequency_space(std::span<const std::string> ids, std::span<const GrayImage> images,
                               std::size_t bands);
}  // namespace serial

}  // namespace vlaudit::shift
