#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "vlaudit/types.hpp"

// Graph-based Bayes error estimate: a symmetric kNN graph, confident regions
// found by breadth-first search over same-label edges, label spreading from
// the confident nodes, and the error rate on the remaining (uncertain) nodes
// divided by n.
namespace vlaudit::ber {

using Rows = std::vector<std::vector<double>>;

struct Edge {
    std::size_t to = 0;
    double distance = 0.0;
    double weight = 0.0;  // exp(-d^2 / sigma^2)
};

struct NeighborGraph {
    std::size_t k = 0;
    double sigma = 0.0;
    std::vector<std::vector<Edge>> adjacency;  // sorted by neighbor index

    std::size_t size() const noexcept { return adjacency.size(); }
    std::size_t edge_count() const;
};

/// Symmetric kNN graph: i~j if either lists the other among its k nearest
/// (ties by index). Bandwidth is the median retained edge length, floored at 1e-12.
NeighborGraph build_graph(const Rows& features, std::size_t k);

/// Graph from explicit undirected edges (i, j, weight); used for hand-built fixtures.
NeighborGraph graph_from_edges(std::size_t n, const std::vector<std::tuple<std::size_t, std::size_t, double>>& edges);

enum class ConfidenceRule {
    /// Same-label components over nodes whose whole neighbourhood shares their label.
    PureNeighborhood,
    /// Same-label components over every node.
    SameLabelComponents,
};
std::string to_string(ConfidenceRule r);
ConfidenceRule confidence_rule_from_string(const std::string& s);

struct Partition {
    std::vector<char> confident;             // per node
    std::vector<std::size_t> uncertain;      // ascending node ids
    std::vector<std::size_t> component_sizes;  // confident components, descending
};

Partition confident_partition(const NeighborGraph& graph, std::span<const int> labels, std::size_t min_size,
                              ConfidenceRule rule = ConfidenceRule::PureNeighborhood);

struct SpreadResult {
    std::vector<int> predictions;
    std::size_t iterations = 0;
    double last_change = 0.0;
    bool converged = false;
};

/// F <- alpha*S*F + (1-alpha)*Y with S = D^-1/2 W D^-1/2; seeds are 0/1,
/// unseeded nodes -1. Argmax ties go to class 0. With fewer than two seeded
/// classes every node gets the majority seed class (0 when none).
SpreadResult label_spread(const NeighborGraph& graph, std::span<const int> seeds, double alpha,
                          std::size_t max_iter, double tol);

struct BerParams {
    std::size_t k = 10;
    std::size_t min_size = 3;
    double alpha = 0.9;
    std::size_t max_iter = 1000;
    double tol = 1e-6;
    ConfidenceRule rule = ConfidenceRule::PureNeighborhood;
};

struct BerReport {
    double ber = 0.0;              // incorrect uncertain / n
    double ber_uncertain = 0.0;    // incorrect uncertain / |U| (0 when U is empty)
    std::size_t n = 0;
    std::size_t uncertain_count = 0;
    std::size_t incorrect = 0;
    std::vector<std::size_t> component_sizes;
    double sigma = 0.0;
    std::size_t spread_iterations = 0;
    bool spread_converged = true;
    BerParams params;
};

BerReport estimate_ber(const Rows& features, std::span<const int> labels, const BerParams& params = {});

/// Standard normal CDF.
double normal_cdf(double x);

/// Bayes error of two equal-prior 1D Gaussians with means `gap` apart and
/// common standard deviation `sigma`: Phi(-gap / (2 sigma)).
double gaussian_bayes_error(double gap, double sigma);

namespace serial {
NeighborGraph build_graph(const Rows& features, std::size_t k);
SpreadResult label_spread(const NeighborGraph& graph, std::span<const int> seeds, double alpha,
                          std::size_t max_iter, double tol);
}  // namespace serial

}  // namespace vlaudit::ber
