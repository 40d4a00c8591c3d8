#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "vlaudit/parallel.hpp"
#include "vlaudit/shift.hpp"

namespace vlaudit::shift {

namespace {

constexpr std::uint64_t kProjectionStream = 1;
constexpr std::uint64_t kSubsetStream = 2;
constexpr std::uint64_t kRepeatSeedStream = 3;

std::size_t common_dim(const Rows& a, const Rows& b) {
    if (a.empty() || b.empty()) throw DataError("empty sample set");
    const std::size_t d = a.front().size();
    if (d == 0) throw DataError("zero-dimensional vectors");
    for (const auto* set : {&a, &b})
        for (const auto& r : *set)
            if (r.size() != d) throw DataError("dimension mismatch");
    return d;
}

double projected_distance(const Rows& a, const Rows& b, const std::vector<double>& theta, double q,
                          std::vector<double>& pa, std::vector<double>& pb) {
    for (std::size_t i = 0; i < a.size(); ++i) pa[i] = std::inner_product(theta.begin(), theta.end(), a[i].begin(), 0.0);
    for (std::size_t i = 0; i < b.size(); ++i) pb[i] = std::inner_product(theta.begin(), theta.end(), b[i].begin(), 0.0);
    return wasserstein_1d(pa, pb, q);
}

template <bool Parallel>
double swd_impl(const Rows& a, const Rows& b, std::size_t n_proj, double q, std::uint64_t seed) {
    if (a.size() != b.size()) throw DataError("size mismatch");
    const std::size_t d = common_dim(a, b);
    if (n_proj == 0) throw ParameterError("n_proj must be >= 1");
    if (!(q >= 1.0)) throw ParameterError("q must be >= 1");

    std::vector<double> dist(n_proj);
#pragma omp parallel if (Parallel)
    {
        std::vector<double> pa(a.size()), pb(b.size());
#pragma omp for schedule(static)
        for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(n_proj); ++j) {
            const auto theta = projection_direction(d, seed, static_cast<std::size_t>(j));
            dist[static_cast<std::size_t>(j)] = projected_distance(a, b, theta, q, pa, pb);
        }
    }
    // Fixed summation order keeps the result independent of the thread count.
    double sum = 0.0;
    for (double v : dist) sum += v;
    return sum / static_cast<double>(n_proj);
}

Rows pick(const Rows& src, const std::vector<std::size_t>& idx, std::size_t from, std::size_t n) {
    Rows out;
    out.reserve(n);
    for (std::size_t i = from; i < from + n; ++i) out.push_back(src[idx[i]]);
    return out;
}

struct RepeatResult {
    double numerator = 0.0;
    double denominator = 0.0;
};

RepeatResult wired_repeat(const Rows& s1, const Rows& s2, std::size_t n, const WiredParams& p, std::size_t r) {
    auto rng = task_rng(p.seed, kSubsetStream, r);
    std::vector<std::size_t> i1(s1.size()), i2(s2.size());
    std::iota(i1.begin(), i1.end(), 0);
    std::iota(i2.begin(), i2.end(), 0);
    std::shuffle(i1.begin(), i1.end(), rng);
    std::shuffle(i2.begin(), i2.end(), rng);
    const Rows s11 = pick(s1, i1, 0, n);
    const Rows s12 = pick(s1, i1, n, n);
    const Rows s2p = pick(s2, i2, 0, n);
    // Numerator and denominator share one projection set.
    const std::uint64_t swd_seed = derive_seed(p.seed, kRepeatSeedStream, r);
    return {swd_impl<false>(s11, s2p, p.n_proj, p.q, swd_seed), swd_impl<false>(s11, s12, p.n_proj, p.q, swd_seed)};
}

template <bool Parallel>
SpaceRatio wired_space_impl(const Rows& s1, const Rows& s2, const WiredParams& p) {
    if (s1.size() < 4) throw DataError("S1 needs at least 4 samples");
    if (s2.size() < 2) throw DataError("S2 needs at least 2 samples");
    common_dim(s1, s2);
    if (p.repeats == 0) throw ParameterError("repeats must be >= 1");
    if (p.n_proj == 0) throw ParameterError("n_proj must be >= 1");
    if (!(p.q >= 1.0)) throw ParameterError("q must be >= 1");

    const std::size_t n = std::min(s1.size() / 2, s2.size());
    std::vector<RepeatResult> runs(p.repeats);
#pragma omp parallel for schedule(static) if (Parallel)
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(p.repeats); ++r)
        runs[static_cast<std::size_t>(r)] = wired_repeat(s1, s2, n, p, static_cast<std::size_t>(r));

    SpaceRatio out;
    out.subset_size = n;
    out.repeats = p.repeats;
    for (const auto& run : runs) {
        if (!(run.denominator > 0.0)) throw DataError("degenerate internal variation");
        out.per_repeat.push_back(run.numerator / run.denominator);
        out.ratio += out.per_repeat.back();
        out.numerator += run.numerator;
        out.denominator += run.denominator;
    }
    const double reps = static_cast<double>(p.repeats);
    out.ratio /= reps;
    out.numerator /= reps;
    out.denominator /= reps;
    return out;
}

}  // namespace

double wasserstein_1d(std::span<const double> xs, std::span<const double> ys, double q) {
    if (xs.size() != ys.size()) throw DataError("size mismatch");
    if (xs.empty()) throw DataError("empty sample");
    if (!(q >= 1.0)) throw ParameterError("q must be >= 1");
    std::vector<double> a(xs.begin(), xs.end()), b(ys.begin(), ys.end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double gap = std::abs(a[i] - b[i]);
        sum += q == 1.0 ? gap : q == 2.0 ? gap * gap : std::pow(gap, q);
    }
    const double mean = sum / static_cast<double>(a.size());
    return q == 1.0 ? mean : q == 2.0 ? std::sqrt(mean) : std::pow(mean, 1.0 / q);
}

std::vector<double> projection_direction(std::size_t dim, std::uint64_t seed, std::size_t index) {
    auto rng = task_rng(seed, kProjectionStream, index);
    std::normal_distribution<double> normal;
    std::vector<double> theta(dim);
    double norm = 0.0;
    do {
        norm = 0.0;
        for (auto& t : theta) {
            t = normal(rng);
            norm += t * t;
        }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (auto& t : theta) t /= norm;
    return theta;
}

double sliced_wasserstein(const Rows& a, const Rows& b, std::size_t n_proj, double q, std::uint64_t seed) {
    return swd_impl<true>(a, b, n_proj, q, seed);
}

double serial::sliced_wasserstein(const Rows& a, const Rows& b, std::size_t n_proj, double q, std::uint64_t seed) {
    return swd_impl<false>(a, b, n_proj, q, seed);
}

SpaceRatio wired_space(const Rows& s1, const Rows& s2, const WiredParams& params) {
    return wired_space_impl<true>(s1, s2, params);
}

SpaceRatio serial::wired_space(const Rows& s1, const Rows& s2, const WiredParams& params) {
    return wired_space_impl<false>(s1, s2, params);
}

WiredReport wired(const std::vector<SpacePair>& spaces, const WiredParams& params) {
    if (spaces.empty()) throw ParameterError("wired needs at least one embedding space");
    WiredReport report;
    report.params = params;
    for (const auto& sp : spaces) {
        SpaceRatio r;
        try {
            r = wired_space(sp.s1, sp.s2, params);
        } catch (const Error& e) {
            throw DataError("space " + sp.name + ": " + e.what());
        }
        r.name = sp.name;
        report.per_space.push_back(std::move(r));
    }
    report.final_score = std::max_element(report.per_space.begin(), report.per_space.end(),
                                          [](const SpaceRatio& a, const SpaceRatio& b) { return a.ratio < b.ratio; })
                             ->ratio;
    return report;
}

}  // namespace vlaudit::shift
