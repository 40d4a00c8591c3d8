#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "vlaudit/types.hpp"

// Threshold-free evaluation of membership scores and bootstrap set inference.
// Member is the positive class. Raw score arrays here are always "higher is
// member"; ScoreTable overloads apply the table's orientation first.
namespace vlaudit::eval {

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
};

struct RocResult {
    double auc = 0.0;
    std::map<double, double> tpr_at_fpr;  // target FPR -> TPR
    std::vector<RocPoint> curve;
    std::size_t n_pos = 0;
    std::size_t n_neg = 0;
};

/// Member and non-member scores of a table, oriented so higher means member.
struct SplitScores {
    std::vector<double> members;
    std::vector<double> nonmembers;
};

/// Joins a table with labels by id. Every scored id must be labeled and
/// both classes must be present.
SplitScores split_by_label(const ScoreTable& table, const LabeledDataset& labels);

/// Mann-Whitney AUC with midranks for ties.
double roc_auc(std::span<const double> members, std::span<const double> nonmembers);
double roc_auc(const ScoreTable& table, const LabeledDataset& labels);

/// Largest TPR whose FPR stays within `target`, over thresholds at the
/// observed scores plus -inf; a sample is positive iff score > threshold.
double tpr_at_fpr(std::span<const double> members, std::span<const double> nonmembers, double target = 0.05);

/// ROC curve from (0,0) to (1,1), one point per distinct score.
std::vector<RocPoint> roc_curve(std::span<const double> members, std::span<const double> nonmembers);

RocResult evaluate(std::span<const double> members, std::span<const double> nonmembers,
                   const std::vector<double>& fpr_targets = {0.05});
RocResult evaluate(const ScoreTable& table, const LabeledDataset& labels,
                   const std::vector<double>& fpr_targets = {0.05});

enum class Aggregator { Mean, Median, TrimmedMean };
std::string to_string(Aggregator a);
Aggregator aggregator_from_string(const std::string& s);

/// AUC of set scores: `n_sets` sets of size `set_size` drawn with replacement
/// from each pool independently, each reduced by `agg`.
double bootstrap_set_auc(std::span<const double> members, std::span<const double> nonmembers,
                         std::size_t set_size, std::size_t n_sets, std::uint64_t seed,
                         Aggregator agg = Aggregator::Mean);

struct SetInferenceCurve {
    std::vector<std::size_t> set_sizes;
    std::vector<double> auc_per_size;
    std::size_t n_sets = 0;
    std::uint64_t seed = 0;
    Aggregator aggregator = Aggregator::Mean;
};

inline const std::vector<std::size_t> kDefaultSetSizes = {1, 2, 5, 10, 20, 50, 100};

SetInferenceCurve sweep_set_sizes(std::span<const double> members, std::span<const double> nonmembers,
                                  const std::vector<std::size_t>& sizes, std::size_t n_sets, std::uint64_t seed,
                                  Aggregator agg = Aggregator::Mean);

namespace serial {
double bootstrap_set_auc(std::span<const double> members, std::span<const double> nonmembers,
                         std::size_t set_size, std::size_t n_sets, std::uint64_t seed,
                         Aggregator agg = Aggregator::Mean);
}

}  // namespace vlaudit::eval
