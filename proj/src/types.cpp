#include "vlaudit/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vlaudit/scores.hpp"

namespace vlaudit {

const char* to_string(Segment s) {
    return s == Segment::Instruction ? "inst" : "desp";
}

const char* to_string(SegmentFilter f) {
    switch (f) {
        case SegmentFilter::Instruction: return "inst";
        case SegmentFilter::Description: return "desp";
        case SegmentFilter::Both: return "both";
    }
    return "both";
}

Segment segment_from_string(const std::string& s) {
    if (s == "inst") return Segment::Instruction;
    if (s == "desp") return Segment::Description;
    throw ParseError("unknown segment '" + s + "' (expected inst|desp)");
}

SegmentFilter segment_filter_from_string(const std::string& s) {
    if (s == "inst") return SegmentFilter::Instruction;
    if (s == "desp") return SegmentFilter::Description;
    if (s == "both") return SegmentFilter::Both;
    throw ParameterError("unknown segment filter '" + s + "' (expected inst|desp|both)");
}

const char* to_string(Orientation o) {
    return o == Orientation::HigherIsMember ? "higher_is_member" : "lower_is_member";
}

Orientation orientation_from_string(const std::string& s) {
    if (s == "higher_is_member") return Orientation::HigherIsMember;
    if (s == "lower_is_member") return Orientation::LowerIsMember;
    throw ParseError("unknown orientation '" + s + "'");
}

std::vector<double> TokenStep::probabilities() const {
    std::vector<double> p(logprobs.size());
    std::transform(logprobs.begin(), logprobs.end(), p.begin(), [](double l) { return std::exp(l); });
    return p;
}

std::optional<double> TokenStep::renyi_at(double alpha) const {
    if (mode == StepMode::Full) return mi::renyi_entropy(probabilities(), alpha);
    auto it = renyi.find(alpha);
    if (it == renyi.end()) return std::nullopt;
    return it->second;
}

void derive_summary(TokenStep& step) {
    if (step.mode != StepMode::Full) throw DataError("derive_summary needs a full-distribution step");
    const auto& lp = step.logprobs;
    if (lp.size() < 2) throw DataError("full distribution needs at least 2 vocabulary entries");
    if (step.chosen_index >= lp.size()) throw DataError("chosen index out of range");

    double total = 0.0;
    for (double l : lp) {
        if (std::isnan(l) || l > 0.0) throw DataError("log-probability must be <= 0");
        total += std::exp(l);
    }
    if (std::abs(total - 1.0) > 1e-4) throw DataError("distribution not normalized");

    double first = -std::numeric_limits<double>::infinity();
    double second = first;
    for (double l : lp) {
        if (l > first) {
            second = first;
            first = l;
        } else if (l > second) {
            second = l;
        }
    }

    double mean = 0.0;
    for (double l : lp)
        if (std::isfinite(l)) mean += std::exp(l) * l;
    double var = 0.0;
    for (double l : lp)
        if (std::isfinite(l)) var += std::exp(l) * (l - mean) * (l - mean);

    step.chosen_logprob = lp[step.chosen_index];
    step.max_logprob = first;
    step.second_logprob = second;
    step.mean_logprob = mean;
    step.std_logprob = std::sqrt(var);

    const auto p = step.probabilities();
    step.renyi.clear();
    for (double a : kDefaultRenyiOrders) step.renyi[a] = mi::renyi_entropy(p, a);
}

TokenStep to_summary(const TokenStep& full) {
    TokenStep s = full;
    derive_summary(s);
    s.mode = StepMode::Summary;
    s.logprobs.clear();
    s.chosen_index = 0;
    return s;
}

void EmbeddingSpace::add(std::string id, std::vector<double> row) {
    if (row.size() != dim_)
        throw DataError("row '" + id + "' has " + std::to_string(row.size()) + " values, expected " +
                        std::to_string(dim_));
    for (double v : row)
        if (!std::isfinite(v)) throw DataError("non-finite value in row '" + id + "'");
    if (index_.count(id)) throw DataError("duplicate id " + id);
    index_.emplace(id, ids_.size());
    ids_.push_back(std::move(id));
    rows_.push_back(std::move(row));
}

const std::vector<double>* EmbeddingSpace::find(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &rows_[it->second];
}

void LabeledDataset::add(const std::string& id, int label) {
    if (label != 0 && label != 1) throw DataError("label for '" + id + "' must be 0 or 1");
    if (!labels.emplace(id, label).second) throw DataError("duplicate id " + id);
    ids.push_back(id);
}

int LabeledDataset::at(const std::string& id) const {
    auto it = labels.find(id);
    if (it == labels.end()) throw DataError("no label for id " + id);
    return it->second;
}

}  // namespace vlaudit
