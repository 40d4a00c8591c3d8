#include "vlaudit/ber.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <tuple>

namespace vlaudit::ber {

namespace {

struct Candidate {
    double dist2;
    std::size_t j;
    bool operator<(const Candidate& o) const { return dist2 < o.dist2 || (dist2 == o.dist2 && j < o.j); }
};

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t t = 0; t < a.size(); ++t) {
        const double d = a[t] - b[t];
        s += d * d;
    }
    return s;
}

std::vector<Candidate> nearest(const Rows& x, std::size_t i, std::size_t k) {
    std::vector<Candidate> c;
    c.reserve(x.size() - 1);
    for (std::size_t j = 0; j < x.size(); ++j)
        if (j != i) c.push_back({squared_distance(x[i], x[j]), j});
    std::partial_sort(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(k), c.end());
    c.resize(k);
    return c;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

NeighborGraph assemble(std::size_t n, std::size_t k, const std::vector<std::vector<Candidate>>& knn) {
    // Undirected edge set keyed by (min, max).
    std::vector<std::tuple<std::size_t, std::size_t, double>> edges;
    for (std::size_t i = 0; i < n; ++i)
        for (const auto& c : knn[i]) edges.emplace_back(std::min(i, c.j), std::max(i, c.j), std::sqrt(c.dist2));
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end(),
                            [](const auto& a, const auto& b) {
                                return std::get<0>(a) == std::get<0>(b) && std::get<1>(a) == std::get<1>(b);
                            }),
                edges.end());

    std::vector<double> lengths;
    lengths.reserve(edges.size());
    for (const auto& e : edges) lengths.push_back(std::get<2>(e));

    NeighborGraph g;
    g.k = k;
    g.sigma = std::max(median(lengths), 1e-12);
    g.adjacency.assign(n, {});
    const double s2 = g.sigma * g.sigma;
    for (const auto& [i, j, d] : edges) {
        const double w = std::exp(-d * d / s2);
        g.adjacency[i].push_back({j, d, w});
        g.adjacency[j].push_back({i, d, w});
    }
    for (auto& row : g.adjacency)
        std::sort(row.begin(), row.end(), [](const Edge& a, const Edge& b) { return a.to < b.to; });
    return g;
}

template <bool Parallel>
NeighborGraph build_graph_impl(const Rows& x, std::size_t k) {
    const std::size_t n = x.size();
    if (n < 2) throw ParameterError("graph needs at least 2 points");
    if (k == 0 || k >= n) throw ParameterError("k must satisfy 1 <= k < n");
    const std::size_t d = x.front().size();
    for (const auto& r : x)
        if (r.size() != d) throw DataError("dimension mismatch");

    std::vector<std::vector<Candidate>> knn(n);
#pragma omp parallel for schedule(dynamic, 16) if (Parallel)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
        knn[static_cast<std::size_t>(i)] = nearest(x, static_cast<std::size_t>(i), k);
    return assemble(n, k, knn);
}

template <bool Parallel>
SpreadResult spread_impl(const NeighborGraph& g, std::span<const int> seeds, double alpha, std::size_t max_iter,
                         double tol) {
    const std::size_t n = g.size();
    if (seeds.size() != n) throw ParameterError("seed vector length differs from graph size");
    if (!(alpha >= 0.0 && alpha < 1.0)) throw ParameterError("spreading alpha must be in [0, 1)");

    std::size_t count[2] = {0, 0};
    for (int s : seeds) {
        if (s < -1 || s > 1) throw ParameterError("seed labels must be -1, 0 or 1");
        if (s >= 0) ++count[s];
    }
    SpreadResult out;
    if (count[0] == 0 || count[1] == 0) {
        out.predictions.assign(n, count[1] > count[0] ? 1 : 0);
        out.converged = true;
        return out;
    }

    std::vector<double> deg(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (const auto& e : g.adjacency[i]) deg[i] += e.weight;
    std::vector<double> inv_sqrt(n);
    for (std::size_t i = 0; i < n; ++i) inv_sqrt[i] = deg[i] > 0.0 ? 1.0 / std::sqrt(deg[i]) : 0.0;

    // Two classes: columns interleaved as f[2i], f[2i+1].
    std::vector<double> y(2 * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        if (seeds[i] >= 0) y[2 * i + static_cast<std::size_t>(seeds[i])] = 1.0;
    std::vector<double> f = y, next(2 * n), change(n);

    while (out.iterations < max_iter) {
#pragma omp parallel for schedule(static) if (Parallel)
        for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            double a0 = 0.0, a1 = 0.0;
            for (const auto& e : g.adjacency[i]) {
                const double s = e.weight * inv_sqrt[i] * inv_sqrt[e.to];
                a0 += s * f[2 * e.to];
                a1 += s * f[2 * e.to + 1];
            }
            next[2 * i] = alpha * a0 + (1.0 - alpha) * y[2 * i];
            next[2 * i + 1] = alpha * a1 + (1.0 - alpha) * y[2 * i + 1];
            change[i] = std::max(std::abs(next[2 * i] - f[2 * i]), std::abs(next[2 * i + 1] - f[2 * i + 1]));
        }
        f.swap(next);
        ++out.iterations;
        out.last_change = *std::max_element(change.begin(), change.end());
        if (out.last_change < tol) {
            out.converged = true;
            break;
        }
    }

    out.predictions.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.predictions[i] = f[2 * i + 1] > f[2 * i] ? 1 : 0;
    return out;
}

}  // namespace

std::size_t NeighborGraph::edge_count() const {
    std::size_t twice = 0;
    for (const auto& row : adjacency) twice += row.size();
    return twice / 2;
}

NeighborGraph build_graph(const Rows& features, std::size_t k) { return build_graph_impl<true>(features, k); }
NeighborGraph serial::build_graph(const Rows& features, std::size_t k) { return build_graph_impl<false>(features, k); }

NeighborGraph graph_from_edges(std::size_t n, const std::vector<std::tuple<std::size_t, std::size_t, double>>& edges) {
    NeighborGraph g;
    g.adjacency.assign(n, {});
    for (const auto& [i, j, w] : edges) {
        if (i >= n || j >= n || i == j) throw ParameterError("bad edge");
        if (!(w > 0.0 && w <= 1.0)) throw ParameterError("edge weight must be in (0, 1]");
        g.adjacency[i].push_back({j, 0.0, w});
        g.adjacency[j].push_back({i, 0.0, w});
    }
    for (auto& row : g.adjacency)
        std::sort(row.begin(), row.end(), [](const Edge& a, const Edge& b) { return a.to < b.to; });
    return g;
}

std::string to_string(ConfidenceRule r) {
    return r == ConfidenceRule::PureNeighborhood ? "pure_neighborhood" : "same_label_components";
}

ConfidenceRule confidence_rule_from_string(const std::string& s) {
    if (s == "pure_neighborhood") return ConfidenceRule::PureNeighborhood;
    if (s == "same_label_components") return ConfidenceRule::SameLabelComponents;
    throw ParameterError("unknown confidence rule '" + s + "'");
}

Partition confident_partition(const NeighborGraph& graph, std::span<const int> labels, std::size_t min_size,
                              ConfidenceRule rule) {
    const std::size_t n = graph.size();
    if (labels.size() != n) throw ParameterError("label vector length differs from graph size");
    for (int l : labels)
        if (l != 0 && l != 1) throw DataError("labels must be 0 or 1");

    std::vector<char> eligible(n, 1);
    if (rule == ConfidenceRule::PureNeighborhood) {
        for (std::size_t i = 0; i < n; ++i)
            for (const auto& e : graph.adjacency[i])
                if (labels[e.to] != labels[i]) eligible[i] = 0;
    }

    Partition p;
    p.confident.assign(n, 0);
    std::vector<char> seen(n, 0);
    std::vector<std::size_t> component;
    for (std::size_t start = 0; start < n; ++start) {
        if (seen[start] || !eligible[start]) continue;
        component.clear();
        std::queue<std::size_t> frontier;
        frontier.push(start);
        seen[start] = 1;
        while (!frontier.empty()) {
            const std::size_t i = frontier.front();
            frontier.pop();
            component.push_back(i);
            for (const auto& e : graph.adjacency[i]) {
                if (seen[e.to] || !eligible[e.to] || labels[e.to] != labels[i]) continue;
                seen[e.to] = 1;
                frontier.push(e.to);
            }
        }
        if (component.size() >= min_size) {
            for (std::size_t i : component) p.confident[i] = 1;
            p.component_sizes.push_back(component.size());
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        if (!p.confident[i]) p.uncertain.push_back(i);
    std::sort(p.component_sizes.rbegin(), p.component_sizes.rend());
    return p;
}

SpreadResult label_spread(const NeighborGraph& graph, std::span<const int> seeds, double alpha, std::size_t max_iter,
                          double tol) {
    return spread_impl<true>(graph, seeds, alpha, max_iter, tol);
}

SpreadResult serial::label_spread(const NeighborGraph& graph, std::span<const int> seeds, double alpha,
                                  std::size_t max_iter, double tol) {
    return spread_impl<false>(graph, seeds, alpha, max_iter, tol);
}

BerReport estimate_ber(const Rows& features, std::span<const int> labels, const BerParams& params) {
    if (features.size() != labels.size()) throw ParameterError("features and labels differ in length");
    bool has[2] = {false, false};
    for (int l : labels) {
        if (l != 0 && l != 1) throw DataError("labels must be 0 or 1");
        has[l] = true;
    }
    if (!has[0] || !has[1]) throw DataError("both classes must be present");
    if (params.min_size == 0) throw ParameterError("min_size must be >= 1");

    const auto graph = build_graph(features, params.k);
    const auto part = confident_partition(graph, labels, params.min_size, params.rule);

    std::vector<int> seeds(labels.size(), -1);
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (part.confident[i]) seeds[i] = labels[i];

    BerReport r;
    r.params = params;
    r.n = labels.size();
    r.sigma = graph.sigma;
    r.component_sizes = part.component_sizes;
    r.uncertain_count = part.uncertain.size();
    if (!part.uncertain.empty()) {
        const auto spread = label_spread(graph, seeds, params.alpha, params.max_iter, params.tol);
        r.spread_iterations = spread.iterations;
        r.spread_converged = spread.converged;
        for (std::size_t i : part.uncertain) r.incorrect += spread.predictions[i] != labels[i];
    }
    r.ber = static_cast<double>(r.incorrect) / static_cast<double>(r.n);
    r.ber_uncertain = r.uncertain_count ? static_cast<double>(r.incorrect) / static_cast<double>(r.uncertain_count) : 0.0;
    return r;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double gaussian_bayes_error(double gap, double sigma) {
    if (!(sigma > 0.0)) throw ParameterError("sigma must be positive");
    return normal_cdf(-std::abs(gap) / (2.0 * sigma));
}

}  // namespace vlaudit::ber
