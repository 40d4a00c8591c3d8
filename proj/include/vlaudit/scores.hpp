#pragma once

#include <span>
#include <string>
#include <vector>

#include "vlaudit/types.hpp"

// Per-sample membership-inference statistics computed from generation traces.
//
// Every method is a symmetric function of the (segment-filtered) steps, so
// scores do not depend on step order. Top/bottom-m selections take
// m = max(1, ceil(k * T / 100)) for T filtered steps and break ties by a
// stable sort on (value, step index).
namespace vlaudit::mi {

enum class MethodKind { Perplexity, MinK, MinKpp, MaxProbGap, MaxRenyiK, ModRenyi, ImageOnlyConsistency };

std::string method_name(MethodKind kind);
MethodKind method_from_string(const std::string& name);
Orientation orientation_of(MethodKind kind);
bool uses_k(MethodKind kind);
bool uses_alpha(MethodKind kind);

struct MethodSpec {
    MethodKind kind = MethodKind::Perplexity;
    double k_percent = 0.0;  // MinK, MinKpp, MaxRenyiK
    double alpha = 2.0;      // MaxRenyiK, ModRenyi
    SegmentFilter filter = SegmentFilter::Both;
    bool shannon = false;    // permits alpha == 1

    /// Throws ParameterError when k or alpha are out of range for the kind.
    void validate() const;
};

/// Smallest Min-K% percentage used when a sweep asks for K = 0: it selects
/// exactly one step, the right limit of the selection rule at k -> 0.
inline constexpr double kSweepZeroLimit = 1e-9;

/// Number of steps selected by a K% rule over `steps` steps.
std::size_t selection_count(double k_percent, std::size_t steps);

/// Rényi entropy of a probability vector; alpha = 1 gives Shannon entropy and
/// alpha = +inf the min-entropy. Zero-probability entries are ignored.
double renyi_entropy(std::span<const double> p, double alpha);

double perplexity(const GenerationTrace& trace, SegmentFilter filter);
double min_k(const GenerationTrace& trace, double k_percent, SegmentFilter filter);
double min_k_pp(const GenerationTrace& trace, double k_percent, SegmentFilter filter);
double max_prob_gap(const GenerationTrace& trace, SegmentFilter filter);
double max_renyi_k(const GenerationTrace& trace, double alpha, double k_percent, SegmentFilter filter);
double mod_renyi(const GenerationTrace& trace, double alpha, SegmentFilter filter);

/// Mean pairwise cosine similarity of chosen-token count vectors over the
/// Description steps of several samples for one image.
double image_only_consistency(std::span<const GenerationTrace> traces);

/// Image key of a trace id: the text before the first '#', or the whole id.
/// Traces `img7#0`, `img7#1` are two sampled descriptions of image `img7`.
std::string image_key(const std::string& trace_id);

/// One score per trace, or one per image for ImageOnlyConsistency.
/// Traces are scored in parallel; the table follows input order.
ScoreTable score_dataset(const std::vector<GenerationTrace>& traces, const MethodSpec& spec);

/// Labels for the rows `score_dataset` would produce. Traces grouped under
/// one image must agree on their label; unlabeled traces are skipped.
LabeledDataset labels_for(const std::vector<GenerationTrace>& traces, const MethodSpec& spec);

namespace serial {
ScoreTable score_dataset(const std::vector<GenerationTrace>& traces, const MethodSpec& spec);
}

}  // namespace vlaudit::mi
