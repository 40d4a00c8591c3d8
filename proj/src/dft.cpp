#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "vlaudit/shift.hpp"

namespace vlaudit::shift {

namespace {

using cplx = std::complex<double>;

// tw[k] = exp(-2 pi i k / n); indexing by (u*x) mod n keeps every phase exact.
std::vector<cplx> twiddles(std::size_t n) {
    std::vector<cplx> tw(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double phase = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
        tw[k] = {std::cos(phase), std::sin(phase)};
    }
    return tw;
}

Spectrum centered(std::size_t h, std::size_t w, const std::vector<cplx>& f) {
    Spectrum s{h, w, std::vector<double>(h * w)};
    const std::size_t cu = h / 2, cv = w / 2;
    for (std::size_t u = 0; u < h; ++u)
        for (std::size_t v = 0; v < w; ++v)
            s.magnitude[((u + cu) % h) * w + (v + cv) % w] = std::abs(f[u * w + v]);
    return s;
}

void check_image(const GrayImage& image) {
    if (image.height == 0 || image.width == 0 || image.pixels.size() != image.height * image.width)
        throw DataError("invalid image dimensions");
}

template <bool Parallel>
Spectrum direct_dft(const GrayImage& image) {
    check_image(image);
    const std::size_t h = image.height, w = image.width;
    const auto tw_w = twiddles(w);
    const auto tw_h = twiddles(h);
    std::vector<cplx> rows(h * w), out(h * w);

    // Along each row: rows(x, v) = sum_y I(x, y) e^{-2 pi i v y / W}
#pragma omp parallel for schedule(static) if (Parallel)
    for (std::ptrdiff_t xi = 0; xi < static_cast<std::ptrdiff_t>(h); ++xi) {
        const std::size_t x = static_cast<std::size_t>(xi);
        for (std::size_t v = 0; v < w; ++v) {
            cplx acc{};
            for (std::size_t y = 0; y < w; ++y) acc += image.pixels[x * w + y] * tw_w[(v * y) % w];
            rows[x * w + v] = acc;
        }
    }
    // Along each column: out(u, v) = sum_x rows(x, v) e^{-2 pi i u x / H}
#pragma omp parallel for schedule(static) if (Parallel)
    for (std::ptrdiff_t vi = 0; vi < static_cast<std::ptrdiff_t>(w); ++vi) {
        const std::size_t v = static_cast<std::size_t>(vi);
        for (std::size_t u = 0; u < h; ++u) {
            cplx acc{};
            for (std::size_t x = 0; x < h; ++x) acc += rows[x * w + v] * tw_h[(u * x) % h];
            out[u * w + v] = acc;
        }
    }
    return centered(h, w, out);
}

// In-place iterative radix-2 FFT over `n` elements spaced `stride` apart.
void fft_strided(cplx* data, std::size_t n, std::size_t stride, const std::vector<cplx>& tw) {
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(data[i * stride], data[j * stride]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t step = n / len;
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t k = 0; k < len / 2; ++k) {
                const cplx a = data[(i + k) * stride];
                const cplx b = data[(i + k + len / 2) * stride] * tw[k * step];
                data[(i + k) * stride] = a + b;
                data[(i + k + len / 2) * stride] = a - b;
            }
        }
    }
}

}  // namespace

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

Spectrum dft_magnitude(const GrayImage& image) { return direct_dft<true>(image); }

Spectrum serial::dft_magnitude(const GrayImage& image) { return direct_dft<false>(image); }

Spectrum dft_magnitude_fast(const GrayImage& image) {
    check_image(image);
    const std::size_t h = image.height, w = image.width;
    if (!is_power_of_two(h) || !is_power_of_two(w))
        throw ParameterError("fast DFT needs power-of-two dimensions");
    std::vector<cplx> f(image.pixels.begin(), image.pixels.end());
    const auto tw_w = twiddles(w);
    const auto tw_h = twiddles(h);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t x = 0; x < static_cast<std::ptrdiff_t>(h); ++x)
        fft_strided(f.data() + static_cast<std::size_t>(x) * w, w, 1, tw_w);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t v = 0; v < static_cast<std::ptrdiff_t>(w); ++v)
        fft_strided(f.data() + static_cast<std::size_t>(v), h, w, tw_h);
    return centered(h, w, f);
}

std::vector<std::size_t> band_assignment(std::size_t height, std::size_t width, std::size_t bands) {
    if (bands == 0) throw ParameterError("band count must be >= 1");
    const double cu = static_cast<double>(height / 2), cv = static_cast<double>(width / 2);
    const double hu = static_cast<double>(height) / 2.0, hv = static_cast<double>(width) / 2.0;
    std::vector<double> radius(height * width);
    double rmax = 0.0;
    for (std::size_t u = 0; u < height; ++u) {
        for (std::size_t v = 0; v < width; ++v) {
            const double du = (static_cast<double>(u) - cu) / hu;
            const double dv = (static_cast<double>(v) - cv) / hv;
            radius[u * width + v] = std::sqrt(du * du + dv * dv);
            rmax = std::max(rmax, radius[u * width + v]);
        }
    }
    std::vector<std::size_t> band(height * width, 0);
    if (rmax == 0.0) return band;
    const double k = static_cast<double>(bands);
    for (std::size_t i = 0; i < band.size(); ++i)
        band[i] = std::min(bands - 1, static_cast<std::size_t>(std::floor(k * radius[i] / rmax)));
    return band;
}

std::vector<double> band_energies(const Spectrum& spectrum, std::size_t bands) {
    const auto assign = band_assignment(spectrum.height, spectrum.width, bands);
    std::vector<double> sum(bands, 0.0);
    std::vector<std::size_t> count(bands, 0);
    for (std::size_t i = 0; i < assign.size(); ++i) {
        sum[assign[i]] += spectrum.magnitude[i];
        ++count[assign[i]];
    }
    for (std::size_t b = 0; b < bands; ++b) sum[b] = count[b] ? sum[b] / static_cast<double>(count[b]) : 0.0;
    return sum;
}

std::vector<double> band_energies(const GrayImage& image, std::size_t bands) {
    if (bands == 0) throw ParameterError("band count must be >= 1");
    const bool fast = is_power_of_two(image.height) && is_power_of_two(image.width);
    return band_energies(fast ? dft_magnitude_fast(image) : dft_magnitude(image), bands);
}

namespace {

template <bool Parallel>
EmbeddingSpace frequency_space_impl(std::span<const std::string> ids, std::span<const GrayImage> images,
                                    std::size_t bands) {
    if (ids.size() != images.size()) throw ParameterError("ids and images differ in length");
    if (bands == 0) throw ParameterError("band count must be >= 1");
    std::vector<std::vector<double>> rows(images.size());
    std::vector<std::string> errors(images.size());
#pragma omp parallel for schedule(dynamic) if (Parallel)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(images.size()); ++i) {
        try {
            rows[static_cast<std::size_t>(i)] = band_energies(images[static_cast<std::size_t>(i)], bands);
        } catch (const std::exception& e) {
            errors[static_cast<std::size_t>(i)] = e.what();
        }
    }
    EmbeddingSpace space("freq", bands);
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (!errors[i].empty()) throw DataError("image " + ids[i] + ": " + errors[i]);
        space.add(ids[i], std::move(rows[i]));
    }
    return space;
}

}  // namespace

EmbeddingSpace frequency_space(std::span<const std::string> ids, std::span<const GrayImage> images,
                               std::size_t bands) {
    return frequency_space_impl<true>(ids, images, bands);
}

EmbeddingSpace serial::frequency_space(std::span<const std::string> ids, std::span<const GrayImage> images,
                                       std::size_t bands) {
    return frequency_space_impl<false>(ids, images, bands);
}

}  // namespace vlaudit::shift
