#include <cmath>
#include <complex>
#include <numbers>

#include "doctest.h"
#include "test_util.hpp"
#include "vlaudit/parallel.hpp"
#include "vlaudit/shift.hpp"
#include "vlaudit/synth.hpp"

using namespace vlaudit;
using namespace vlaudit::shift;

namespace {

// Textbook O(H^2 W^2) DFT of the definition, then the centring shift.
std::vector<double> naive_centered_dft(const GrayImage& img) {
    const std::size_t h = img.height, w = img.width;
    std::vector<double> out(h * w);
    for (std::size_t u = 0; u < h; ++u)
        for (std::size_t v = 0; v < w; ++v) {
            std::complex<double> s = 0.0;
            for (std::size_t x = 0; x < h; ++x)
                for (std::size_t y = 0; y < w; ++y) {
                    const double ang = -2.0 * std::numbers::pi *
                                       (static_cast<double>(u * x) / static_cast<double>(h) +
                                        static_cast<double>(v * y) / static_cast<double>(w));
                    s += img.at(x, y) * std::polar(1.0, ang);
                }
            const std::size_t cu = (u + h / 2) % h, cv = (v + w / 2) % w;
            out[cu * w + cv] = std::abs(s);
        }
    return out;
}

GrayImage random_image(std::mt19937_64& rng, std::size_t h, std::size_t w) {
    std::uniform_real_distribution<double> u(0.0, 255.0);
    GrayImage img(h, w);
    for (auto& p : img.pixels) p = u(rng);
    return img;
}

}  // namespace

TEST_SUITE("shift_metrics") {

TEST_CASE("constant image has a DC-only spectrum") {
    for (auto [h, w] : {std::pair<std::size_t, std::size_t>{4, 4}, {5, 3}, {8, 16}}) {
        const double c = 37.0;
        GrayImage img(h, w, c);
        for (const auto& spec : {dft_magnitude(img), serial::dft_magnitude(img)}) {
            for (std::size_t u = 0; u < h; ++u)
                for (std::size_t v = 0; v < w; ++v) {
                    if (u == h / 2 && v == w / 2)
                        CHECK(spec.at(u, v) == doctest::Approx(static_cast<double>(h * w) * c));
                    else
                        CHECK(spec.at(u, v) < 1e-9 * static_cast<double>(h * w) * c);
                }
        }
    }
}

TEST_CASE("1x1 image") {
    GrayImage img(1, 1, 5.0);
    const auto s = dft_magnitude(img);
    CHECK(s.height == 1);
    CHECK(s.at(0, 0) == 5.0);
    CHECK(dft_magnitude_fast(img).at(0, 0) == 5.0);
}

TEST_CASE("2x2 checkerboard puts its energy at DC and the Nyquist corner") {
    GrayImage img(2, 2);
    img.pixels = {0, 255, 255, 0};
    const auto s = dft_magnitude(img);
    // Centre (1,1) is DC; (0,0) is the (1,1) Nyquist frequency.
    CHECK(s.at(1, 1) == doctest::Approx(510.0));
    CHECK(s.at(0, 0) == doctest::Approx(510.0));
    CHECK(s.at(0, 1) == doctest::Approx(0.0));
    CHECK(s.at(1, 0) == doctest::Approx(0.0));
}

TEST_CASE("direct DFT matches the textbook definition") {
    std::mt19937_64 rng(2);
    for (auto [h, w] : {std::pair<std::size_t, std::size_t>{3, 5}, {6, 4}, {7, 7}, {1, 9}}) {
        const auto img = random_image(rng, h, w);
        const auto ref = naive_centered_dft(img);
        const auto got = dft_magnitude(img);
        for (std::size_t i = 0; i < ref.size(); ++i) CHECK(got.magnitude[i] == doctest::Approx(ref[i]).epsilon(1e-9));
    }
}

TEST_CASE("fast path agrees with the direct DFT") {
    std::mt19937_64 rng(8);
    for (auto [h, w] : {std::pair<std::size_t, std::size_t>{2, 2}, {8, 4}, {16, 32}, {32, 32}}) {
        const auto img = random_image(rng, h, w);
        const auto a = dft_magnitude(img), b = dft_magnitude_fast(img);
        double scale = 0.0;
        for (double m : a.magnitude) scale = std::max(scale, m);
        for (std::size_t i = 0; i < a.magnitude.size(); ++i) CHECK(std::abs(a.magnitude[i] - b.magnitude[i]) <= 1e-9 * scale);
    }
    CHECK_THROWS_AS(dft_magnitude_fast(GrayImage(6, 4)), ParameterError);
    CHECK(is_power_of_two(1));
    CHECK_FALSE(is_power_of_two(0));
    CHECK_FALSE(is_power_of_two(12));
}

TEST_CASE("band energies") {
    GrayImage flat(16, 16, 100.0);
    const auto e = band_energies(flat, 10);
    REQUIRE(e.size() == 10);
    CHECK(e[0] > 0.0);
    for (std::size_t i = 1; i < 10; ++i) CHECK(e[i] < 1e-9 * 256 * 100.0);

    std::mt19937_64 rng(4);
    const auto img = random_image(rng, 12, 10);
    const auto spec = dft_magnitude(img);
    double mean = 0.0;
    for (double m : spec.magnitude) mean += m;
    mean /= static_cast<double>(spec.magnitude.size());
    const auto one = band_energies(img, 1);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == doctest::Approx(mean));
    CHECK_THROWS_AS(band_energies(img, 0), ParameterError);
}

TEST_CASE("band assignment is isotropic and covers every band index") {
    const auto a = band_assignment(8, 16, 4);
    // Centre is band 0; corners are the outermost band.
    CHECK(a[4 * 16 + 8] == 0);
    CHECK(a[0] == 3);
    // Axis-normalised radius: the edge midpoints of both axes share a band.
    CHECK(a[0 * 16 + 8] == a[4 * 16 + 0]);
    for (std::size_t b : a) CHECK(b < 4);
    // More bands than distinct radii leaves some bands empty with energy 0.
    const auto e = band_energies(GrayImage(2, 2, 1.0), 50);
    CHECK(e.size() == 50);
    for (double v : e) CHECK(v >= 0.0);
}

TEST_CASE("blurring lowers the top band energy") {
    std::size_t strictly_smaller = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        auto rng = task_rng(seed, 0, 0);
        std::uniform_int_distribution<int> u(0, 255);
        GrayImage img(32, 32);
        for (auto& p : img.pixels) p = u(rng);
        const auto blurred = synth::box_blur(img, 2);
        strictly_smaller += band_energies(blurred, 10)[9] < band_energies(img, 10)[9];
    }
    CHECK(strictly_smaller == 100);
}

TEST_CASE("wasserstein_1d") {
    const std::vector<double> a = {3.0, -1.0, 2.0};
    CHECK(wasserstein_1d(a, a, 2.0) == 0.0);
    CHECK(wasserstein_1d(std::vector<double>{0, 1}, std::vector<double>{2, 1}, 1.0) == 1.0);
    CHECK(wasserstein_1d(std::vector<double>{0}, std::vector<double>{3}, 2.0) == doctest::Approx(3.0));
    CHECK_THROWS_AS(wasserstein_1d(std::vector<double>{0, 1}, std::vector<double>{0}, 2.0), DataError);
    CHECK_THROWS_AS(wasserstein_1d(a, a, 0.5), ParameterError);
}

TEST_CASE("sliced_wasserstein basics") {
    std::mt19937_64 rng(6);
    const auto a = testutil::normal_rows(rng, 40, 5);
    CHECK(sliced_wasserstein(a, a, 32, 2.0, 1) == 0.0);
    CHECK(sliced_wasserstein(Rows{{0.0}}, Rows{{1.0}}, 7, 2.0, 3) == doctest::Approx(1.0));

    const double c = 1.5;
    std::vector<std::vector<double>> a2 = testutil::normal_rows(rng, 40, 2), b2 = a2;
    for (auto& r : b2) r[0] += c;
    const double d = sliced_wasserstein(a2, b2, 64, 2.0, 9);
    CHECK(d > 0.0);
    CHECK(d <= c + 1e-12);

    const auto b = testutil::normal_rows(rng, 40, 5, 0.7);
    for (std::uint64_t seed : {0u, 1u, 2u}) {
        CHECK(std::abs(sliced_wasserstein(a, b, 50, 2.0, seed) - sliced_wasserstein(b, a, 50, 2.0, seed)) <= 1e-9);
        CHECK(sliced_wasserstein(a, b, 50, 2.0, seed) >= 0.0);
    }
    CHECK_THROWS_AS(sliced_wasserstein(a, testutil::normal_rows(rng, 40, 4), 8, 2.0, 0), DataError);
    CHECK_THROWS_AS(sliced_wasserstein(a, testutil::normal_rows(rng, 39, 5), 8, 2.0, 0), DataError);
}

TEST_CASE("projection directions are unit vectors") {
    for (std::size_t j = 0; j < 20; ++j) {
        const auto th = projection_direction(7, 123, j);
        double n = 0.0;
        for (double x : th) n += x * x;
        CHECK(n == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("sliced_wasserstein in one dimension is exact") {
    std::mt19937_64 rng(10);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t n = 1 + static_cast<std::size_t>(rep % 17);
        const auto a = testutil::normal_rows(rng, n, 1), b = testutil::normal_rows(rng, n, 1, 0.5);
        std::vector<double> xa, xb;
        for (auto& r : a) xa.push_back(r[0]);
        for (auto& r : b) xb.push_back(r[0]);
        const double q = rep % 2 ? 1.0 : 2.0;
        CHECK(std::abs(sliced_wasserstein(a, b, 1 + rep % 9, q, static_cast<std::uint64_t>(rep)) - wasserstein_1d(xa, xb, q)) <=
              1e-9);
    }
}

TEST_CASE("wired on i.i.d. and shifted sets") {
    std::mt19937_64 rng(12);
    WiredParams p;
    const auto s1 = testutil::normal_rows(rng, 300, 16);
    const auto same = testutil::normal_rows(rng, 150, 16);
    const auto shifted = testutil::normal_rows(rng, 150, 16, 3.0);
    const auto iid = wired_space(s1, same, p);
    CHECK(iid.ratio >= 0.8);
    CHECK(iid.ratio <= 1.3);
    CHECK(iid.subset_size == 150);
    CHECK(iid.per_repeat.size() == 10);
    CHECK(wired_space(s1, shifted, p).ratio > 2.0);

    // S2 drawn from S1 itself; shared points pull the numerator down.
    const Rows self(s1.begin(), s1.begin() + 150);
    const auto r = wired_space(s1, self, p).ratio;
    CHECK(r > 0.5);
    CHECK(r < 1.3);
}

TEST_CASE("wired errors and report") {
    WiredParams p;
    p.repeats = 3;
    CHECK_THROWS_AS(wired_space(Rows(3, {0.0}), Rows(3, {1.0}), p), DataError);
    CHECK_THROWS_AS(wired_space(Rows(4, {0.0}), Rows(1, {1.0}), p), DataError);
    try {
        wired_space(Rows(6, {2.0, 2.0}), Rows(3, {1.0, 0.0}), p);
        FAIL("expected error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()) == "degenerate internal variation");
    }

    std::mt19937_64 rng(1);
    const auto a = testutil::normal_rows(rng, 60, 3);
    const auto b = testutil::normal_rows(rng, 30, 3, 4.0);
    const auto c = testutil::normal_rows(rng, 30, 3);
    const auto one = wired({{"only", a, b}}, p);
    CHECK(one.final_score == one.per_space[0].ratio);
    const auto two = wired({{"near", a, c}, {"far", a, b}}, p);
    CHECK(two.final_score == std::max(two.per_space[0].ratio, two.per_space[1].ratio));
    CHECK(two.final_score == two.per_space[1].ratio);
    CHECK_THROWS_AS(wired({}, p), ParameterError);
}

TEST_CASE("wired is stable under a common rotation") {
    double diff = 0.0;
    const int seeds = 20;
    for (int s = 0; s < seeds; ++s) {
        auto rng = task_rng(static_cast<std::uint64_t>(s), 5, 0);
        const auto s1 = testutil::normal_rows(rng, 120, 4);
        const auto s2 = testutil::normal_rows(rng, 60, 4, 1.0);
        // Rotation by 90 degrees in the first plane.
        auto rot = [](Rows r) {
            for (auto& v : r) {
                const double x = v[0], y = v[1];
                v[0] = -y;
                v[1] = x;
            }
            return r;
        };
        WiredParams p;
        p.seed = static_cast<std::uint64_t>(s);
        diff += wired_space(rot(s1), rot(s2), p).ratio - wired_space(s1, s2, p).ratio;
    }
    CHECK(std::abs(diff / seeds) < 0.1);
}

TEST_CASE("frequency space") {
    std::mt19937_64 rng(3);
    std::vector<GrayImage> imgs = {random_image(rng, 8, 8), GrayImage(8, 8, 10.0), random_image(rng, 6, 10)};
    const std::vector<std::string> ids = {"a", "b", "c"};
    const auto space = frequency_space(ids, imgs, 4);
    CHECK(space.name() == "freq");
    CHECK(space.dim() == 4);
    CHECK(space.ids() == ids);
    CHECK(space.row(1)[0] > 0.0);
    CHECK(space.row(1)[3] < 1e-6);
}

}  // TEST_SUITE
