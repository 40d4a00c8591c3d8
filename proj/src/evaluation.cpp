#include "vlaudit/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "vlaudit/parallel.hpp"

namespace vlaudit::eval {

namespace {

constexpr std::uint64_t kMemberStream = 11;
constexpr std::uint64_t kNonMemberStream = 12;

void check_pools(std::span<const double> members, std::span<const double> nonmembers) {
    if (members.empty() || nonmembers.empty()) throw DataError("both classes must be present");
    for (auto pool : {members, nonmembers})
        for (double v : pool)
            if (std::isnan(v)) throw DataError("NaN score");
}

struct Scored {
    double score;
    bool member;
};

// All samples, highest score first.
std::vector<Scored> ranked(std::span<const double> members, std::span<const double> nonmembers) {
    std::vector<Scored> all;
    all.reserve(members.size() + nonmembers.size());
    for (double s : members) all.push_back({s, true});
    for (double s : nonmembers) all.push_back({s, false});
    std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) { return a.score > b.score; });
    return all;
}

// Visits each group of tied scores in descending order with the running
// (true positive, false positive) counts after the group.
template <class F>
void sweep_groups(const std::vector<Scored>& all, F&& visit) {
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < all.size();) {
        std::size_t j = i;
        while (j < all.size() && all[j].score == all[i].score) {
            (all[j].member ? tp : fp) += 1;
            ++j;
        }
        visit(tp, fp);
        i = j;
    }
}

double aggregate(std::vector<double>& v, Aggregator agg) {
    switch (agg) {
        case Aggregator::Mean: break;
        case Aggregator::Median: {
            const std::size_t mid = v.size() / 2;
            std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
            const double hi = v[mid];
            if (v.size() % 2) return hi;
            const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
            return 0.5 * (lo + hi);
        }
        case Aggregator::TrimmedMean: {
            // 10% cut from each tail
            std::sort(v.begin(), v.end());
            const std::size_t cut = v.size() / 10;
            double s = 0.0;
            for (std::size_t i = cut; i < v.size() - cut; ++i) s += v[i];
            return s / static_cast<double>(v.size() - 2 * cut);
        }
    }
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double draw_set(std::span<const double> pool, std::size_t m, std::mt19937_64 rng, Aggregator agg) {
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    std::vector<double> set(m);
    for (auto& v : set) v = pool[pick(rng)];
    return aggregate(set, agg);
}

template <bool Parallel>
double bootstrap_impl(std::span<const double> members, std::span<const double> nonmembers, std::size_t m,
                      std::size_t n_sets, std::uint64_t seed, Aggregator agg) {
    check_pools(members, nonmembers);
    if (m == 0) throw ParameterError("set size must be >= 1");
    if (n_sets == 0) throw ParameterError("n_sets must be >= 1");
    std::vector<double> mem(n_sets), non(n_sets);
#pragma omp parallel for schedule(static) if (Parallel)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n_sets); ++i) {
        const auto r = static_cast<std::size_t>(i);
        mem[r] = draw_set(members, m, task_rng(seed, kMemberStream, r), agg);
        non[r] = draw_set(nonmembers, m, task_rng(seed, kNonMemberStream, r), agg);
    }
    return roc_auc(mem, non);
}

}  // namespace

SplitScores split_by_label(const ScoreTable& table, const LabeledDataset& labels) {
    SplitScores out;
    const double sign = table.orientation == Orientation::LowerIsMember ? -1.0 : 1.0;
    for (std::size_t i = 0; i < table.size(); ++i) {
        const double s = sign * table.scores[i];
        (labels.at(table.ids[i]) == 1 ? out.members : out.nonmembers).push_back(s);
    }
    check_pools(out.members, out.nonmembers);
    return out;
}

double roc_auc(std::span<const double> members, std::span<const double> nonmembers) {
    check_pools(members, nonmembers);
    // Ascending order; twice the midrank of a tie group [i, j) is i + j + 1.
    auto all = ranked(members, nonmembers);
    std::reverse(all.begin(), all.end());
    double twice_rank_sum = 0.0;
    for (std::size_t i = 0; i < all.size();) {
        std::size_t j = i;
        std::size_t pos = 0;
        while (j < all.size() && all[j].score == all[i].score) pos += all[j++].member;
        twice_rank_sum += static_cast<double>(pos) * static_cast<double>(i + j + 1);
        i = j;
    }
    const double n1 = static_cast<double>(members.size());
    const double n0 = static_cast<double>(nonmembers.size());
    const double twice_u = twice_rank_sum - n1 * (n1 + 1.0);
    return twice_u / (2.0 * n1 * n0);
}

double roc_auc(const ScoreTable& table, const LabeledDataset& labels) {
    const auto s = split_by_label(table, labels);
    return roc_auc(s.members, s.nonmembers);
}

double tpr_at_fpr(std::span<const double> members, std::span<const double> nonmembers, double target) {
    check_pools(members, nonmembers);
    if (!(target >= 0.0 && target <= 1.0)) throw ParameterError("target FPR must be in [0, 1]");
    const double n1 = static_cast<double>(members.size());
    const double n0 = static_cast<double>(nonmembers.size());
    // Threshold at the highest score: nothing positive.
    double best = 0.0;
    sweep_groups(ranked(members, nonmembers), [&](std::size_t tp, std::size_t fp) {
        // These counts belong to the threshold just below this group, i.e.
        // the next distinct score (or -inf after the last group).
        if (static_cast<double>(fp) / n0 <= target) best = std::max(best, static_cast<double>(tp) / n1);
    });
    return best;
}

std::vector<RocPoint> roc_curve(std::span<const double> members, std::span<const double> nonmembers) {
    check_pools(members, nonmembers);
    const double n1 = static_cast<double>(members.size());
    const double n0 = static_cast<double>(nonmembers.size());
    std::vector<RocPoint> curve{{0.0, 0.0}};
    sweep_groups(ranked(members, nonmembers), [&](std::size_t tp, std::size_t fp) {
        curve.push_back({static_cast<double>(fp) / n0, static_cast<double>(tp) / n1});
    });
    return curve;
}

RocResult evaluate(std::span<const double> members, std::span<const double> nonmembers,
                   const std::vector<double>& fpr_targets) {
    RocResult r;
    r.auc = roc_auc(members, nonmembers);
    for (double t : fpr_targets) r.tpr_at_fpr[t] = tpr_at_fpr(members, nonmembers, t);
    r.curve = roc_curve(members, nonmembers);
    r.n_pos = members.size();
    r.n_neg = nonmembers.size();
    return r;
}

RocResult evaluate(const ScoreTable& table, const LabeledDataset& labels, const std::vector<double>& fpr_targets) {
    const auto s = split_by_label(table, labels);
    return evaluate(s.members, s.nonmembers, fpr_targets);
}

std::string to_string(Aggregator a) {
    switch (a) {
        case Aggregator::Mean: return "mean";
        case Aggregator::Median: return "median";
        case Aggregator::TrimmedMean: return "trimmed_mean";
    }
    return "mean";
}

Aggregator aggregator_from_string(const std::string& s) {
    if (s == "mean") return Aggregator::Mean;
    if (s == "median") return Aggregator::Median;
    if (s == "trimmed_mean") return Aggregator::TrimmedMean;
    throw ParameterError("unknown aggregator '" + s + "'");
}

double bootstrap_set_auc(std::span<const double> members, std::span<const double> nonmembers, std::size_t set_size,
                         std::size_t n_sets, std::uint64_t seed, Aggregator agg) {
    return bootstrap_impl<true>(members, nonmembers, set_size, n_sets, seed, agg);
}

double serial::bootstrap_set_auc(std::span<const double> members, std::span<const double> nonmembers,
                                 std::size_t set_size, std::size_t n_sets, std::uint64_t seed, Aggregator agg) {
    return bootstrap_impl<false>(members, nonmembers, set_size, n_sets, seed, agg);
}

SetInferenceCurve sweep_set_sizes(std::span<const double> members, std::span<const double> nonmembers,
                                  const std::vector<std::size_t>& sizes, std::size_t n_sets, std::uint64_t seed,
                                  Aggregator agg) {
    if (sizes.empty()) throw ParameterError("at least one set size required");
    SetInferenceCurve c;
    c.set_sizes = sizes;
    c.n_sets = n_sets;
    c.seed = seed;
    c.aggregator = agg;
    for (std::size_t m : sizes) c.auc_per_size.push_back(bootstrap_set_auc(members, nonmembers, m, n_sets, seed, agg));
    return c;
}

}  // namespace vlaudit::eval
