#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "test_util.hpp"
#include "vlaudit/ber.hpp"
#include "vlaudit/parallel.hpp"

using namespace vlaudit;
using namespace vlaudit::ber;

namespace {

struct Fixture {
    Rows x;
    std::vector<int> y;
};

Fixture gaussians(std::uint64_t seed, std::size_t n, double gap) {
    auto rng = task_rng(seed, 50, 0);
    std::normal_distribution<double> g;
    Fixture f;
    for (std::size_t i = 0; i < n; ++i) {
        const int l = static_cast<int>(i % 2);
        f.x.push_back({g(rng) + (l ? gap / 2 : -gap / 2)});
        f.y.push_back(l);
    }
    return f;
}

Fixture coin(std::uint64_t seed, std::size_t n) {
    auto rng = task_rng(seed, 51, 0);
    std::normal_distribution<double> g;
    std::bernoulli_distribution c(0.5);
    Fixture f;
    for (std::size_t i = 0; i < n; ++i) {
        f.x.push_back({g(rng), g(rng)});
        f.y.push_back(c(rng));
    }
    return f;
}

Fixture blobs(std::uint64_t seed, std::size_t n) {
    auto rng = task_rng(seed, 52, 0);
    std::normal_distribution<double> g;
    Fixture f;
    for (std::size_t i = 0; i < n; ++i) {
        const int l = static_cast<int>(i % 2);
        f.x.push_back({g(rng) + (l ? 5.0 : -5.0), g(rng)});
        f.y.push_back(l);
    }
    return f;
}

bool has_edge(const NeighborGraph& g, std::size_t i, std::size_t j) {
    return std::any_of(g.adjacency[i].begin(), g.adjacency[i].end(), [&](const Edge& e) { return e.to == j; });
}

}  // namespace

TEST_SUITE("ber") {

TEST_CASE("kNN graph on three collinear points") {
    const auto g = build_graph(Rows{{0.0}, {1.0}, {10.0}}, 1);
    CHECK(g.edge_count() == 2);
    CHECK(has_edge(g, 0, 1));
    CHECK(has_edge(g, 1, 2));
    CHECK(has_edge(g, 2, 1));
    CHECK_FALSE(has_edge(g, 0, 2));
}

TEST_CASE("duplicate points give weight 1") {
    const auto g = build_graph(Rows{{2.0, 2.0}, {2.0, 2.0}}, 1);
    REQUIRE(g.edge_count() == 1);
    CHECK(g.adjacency[0][0].weight == 1.0);
    CHECK(g.sigma == 1e-12);
}

TEST_CASE("graph parameter errors") {
    CHECK_THROWS_AS(build_graph(Rows{{0.0}, {1.0}}, 2), ParameterError);
    CHECK_THROWS_AS(build_graph(Rows{{0.0}, {1.0}}, 0), ParameterError);
    CHECK_THROWS_AS(build_graph(Rows{{0.0}}, 1), ParameterError);
}

TEST_CASE("graph invariants") {
    std::mt19937_64 rng(2);
    const auto x = testutil::normal_rows(rng, 120, 3);
    const auto g = build_graph(x, 5);
    for (std::size_t i = 0; i < g.size(); ++i) {
        CHECK(g.adjacency[i].size() >= 5);
        for (const auto& e : g.adjacency[i]) {
            CHECK(e.to != i);
            CHECK(e.weight > 0.0);
            CHECK(e.weight <= 1.0);
            CHECK(has_edge(g, e.to, i));
        }
    }
    // Bandwidth is the median edge length.
    std::vector<double> lengths;
    for (std::size_t i = 0; i < g.size(); ++i)
        for (const auto& e : g.adjacency[i])
            if (i < e.to) lengths.push_back(e.distance);
    std::sort(lengths.begin(), lengths.end());
    const std::size_t m = lengths.size();
    const double median = m % 2 ? lengths[m / 2] : 0.5 * (lengths[m / 2 - 1] + lengths[m / 2]);
    CHECK(g.sigma == doctest::Approx(median));
}

TEST_CASE("confident partition") {
    const auto f = blobs(1, 60);
    const auto g = build_graph(f.x, 5);
    CHECK(confident_partition(g, f.y, 3).uncertain.empty());
    CHECK(confident_partition(g, f.y, 3, ConfidenceRule::SameLabelComponents).uncertain.empty());

    // One point placed inside the opposite cluster with the wrong label.
    auto x = f.x;
    auto y = f.y;
    x.push_back({5.0, 0.0});
    y.push_back(0);
    const auto g2 = build_graph(x, 5);
    const std::size_t bad = x.size() - 1;
    for (auto rule : {ConfidenceRule::PureNeighborhood, ConfidenceRule::SameLabelComponents}) {
        const auto p = confident_partition(g2, y, 3, rule);
        CHECK(std::find(p.uncertain.begin(), p.uncertain.end(), bad) != p.uncertain.end());
        CHECK_FALSE(p.confident[bad]);
    }
    // Under the literal rule, min_size = 1 makes every node confident.
    const auto c = coin(3, 300);
    const auto gc = build_graph(c.x, 10);
    CHECK(confident_partition(gc, c.y, 1, ConfidenceRule::SameLabelComponents).uncertain.empty());
    // Pure neighbourhoods are rare under random labels.
    CHECK(confident_partition(gc, c.y, 1, ConfidenceRule::PureNeighborhood).uncertain.size() > 250);
    CHECK(confidence_rule_from_string(to_string(ConfidenceRule::SameLabelComponents)) ==
          ConfidenceRule::SameLabelComponents);
}

TEST_CASE("component sizes are sorted and cover the confident set") {
    const auto f = gaussians(4, 400, 2.0);
    const auto g = build_graph(f.x, 10);
    const auto p = confident_partition(g, f.y, 3);
    CHECK(std::is_sorted(p.component_sizes.rbegin(), p.component_sizes.rend()));
    const auto total = std::accumulate(p.component_sizes.begin(), p.component_sizes.end(), std::size_t{0});
    CHECK(total + p.uncertain.size() == f.x.size());
    for (auto s : p.component_sizes) CHECK(s >= 3);
}

TEST_CASE("label spreading") {
    // All nodes seeded: predictions equal the seeds.
    const auto f = blobs(2, 40);
    const auto g = build_graph(f.x, 4);
    const auto all = label_spread(g, f.y, 0.9, 1000, 1e-6);
    CHECK(all.predictions == f.y);
    CHECK(all.converged);
    CHECK(all.last_change < 1e-6);

    // Unseeded centre attached only to class-1 seeds.
    const auto star = graph_from_edges(4, {{0, 1, 1.0}, {0, 2, 0.5}, {0, 3, 0.8}});
    const std::vector<int> seeds = {-1, 1, 1, 1};
    CHECK(label_spread(star, seeds, 0.9, 1000, 1e-9).predictions[0] == 1);

    // Symmetric tie between one seed of each class goes to class 0.
    const auto path = graph_from_edges(3, {{0, 1, 0.7}, {1, 2, 0.7}});
    const std::vector<int> tie = {0, -1, 1};
    const auto r = label_spread(path, tie, 0.9, 1000, 1e-12);
    CHECK(r.predictions[1] == 0);
    CHECK(r.converged);

    // Fewer than two seeded classes: majority seed class everywhere.
    const std::vector<int> only_one = {-1, 1, -1};
    CHECK(label_spread(path, only_one, 0.9, 1000, 1e-9).predictions == std::vector<int>{1, 1, 1});
    CHECK_THROWS_AS(label_spread(path, tie, 1.0, 10, 1e-6), ParameterError);
}

TEST_CASE("separable blobs have near-zero error") {
    const auto f = blobs(7, 1000);
    const auto r = estimate_ber(f.x, f.y);
    CHECK(r.ber <= 0.01);
    CHECK(r.n == 1000);
}

TEST_CASE("overlapping Gaussians match the analytic Bayes error") {
    const double truth = gaussian_bayes_error(2.0, 1.0);
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto f = gaussians(seed, 2000, 2.0);
        const auto r = estimate_ber(f.x, f.y);
        CHECK(std::abs(r.ber - truth) <= 0.05);
        CHECK(r.spread_converged);
        CHECK(r.uncertain_count <= r.n);
        CHECK(r.ber == doctest::Approx(static_cast<double>(r.incorrect) / static_cast<double>(r.n)));
    }
}

TEST_CASE("coin-flip labels give chance-level error") {
    const auto f = coin(1, 2000);
    const auto r = estimate_ber(f.x, f.y);
    CHECK(r.ber >= 0.40);
    CHECK(r.ber <= 0.55);
}

TEST_CASE("estimated error falls as the gap grows") {
    std::vector<double> means;
    for (double gap : {0.0, 1.0, 2.0, 4.0}) {
        double s = 0.0;
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const auto f = gaussians(100 + seed, 300, gap);
            s += estimate_ber(f.x, f.y).ber;
        }
        means.push_back(s / 20.0);
    }
    for (std::size_t i = 1; i < means.size(); ++i) CHECK(means[i] < means[i - 1]);
    for (double m : means) CHECK(m <= 0.55);
}

TEST_CASE("permuting samples leaves the estimate unchanged") {
    const auto f = gaussians(5, 500, 2.0);
    std::vector<std::size_t> perm(f.x.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(1);
    std::shuffle(perm.begin(), perm.end(), rng);
    Fixture p;
    for (auto i : perm) {
        p.x.push_back(f.x[i]);
        p.y.push_back(f.y[i]);
    }
    const auto a = estimate_ber(f.x, f.y), b = estimate_ber(p.x, p.y);
    CHECK(a.incorrect == b.incorrect);
    CHECK(a.uncertain_count == b.uncertain_count);
    CHECK(a.component_sizes == b.component_sizes);
    CHECK(a.sigma == b.sigma);
}

TEST_CASE("estimate errors") {
    CHECK_THROWS_AS(estimate_ber(Rows{{0.0}, {1.0}, {2.0}}, std::vector<int>{1, 1, 1}), DataError);
    CHECK_THROWS_AS(estimate_ber(Rows{{0.0}, {1.0}}, std::vector<int>{1}), ParameterError);
}

TEST_CASE("gaussian Bayes error") {
    CHECK(gaussian_bayes_error(0.0, 1.0) == 0.5);
    CHECK(gaussian_bayes_error(2.0, 1.0) == doctest::Approx(0.158655).epsilon(1e-5));
    CHECK(gaussian_bayes_error(80.0, 1.0) < 1e-100);
    CHECK_THROWS_AS(gaussian_bayes_error(1.0, 0.0), ParameterError);
    CHECK(normal_cdf(0.0) == 0.5);
}

TEST_CASE("parallel kernels match their serial references") {
    const auto f = gaussians(9, 800, 1.0);
    const auto ref = serial::build_graph(f.x, 10);
    std::vector<int> seeds(f.y);
    for (std::size_t i = 0; i < seeds.size(); i += 3) seeds[i] = -1;
    const auto sref = serial::label_spread(ref, seeds, 0.9, 1000, 1e-6);
    for (int threads : {1, 3, 8}) {
        set_thread_count(threads);
        const auto g = build_graph(f.x, 10);
        CHECK(g.sigma == ref.sigma);
        for (std::size_t i = 0; i < g.size(); ++i) {
            REQUIRE(g.adjacency[i].size() == ref.adjacency[i].size());
            for (std::size_t j = 0; j < g.adjacency[i].size(); ++j) {
                CHECK(g.adjacency[i][j].to == ref.adjacency[i][j].to);
                CHECK(g.adjacency[i][j].weight == ref.adjacency[i][j].weight);
            }
        }
        const auto s = label_spread(g, seeds, 0.9, 1000, 1e-6);
        CHECK(s.predictions == sref.predictions);
        CHECK(s.iterations == sref.iterations);
    }
    set_thread_count(0);
}

}  // TEST_SUITE
