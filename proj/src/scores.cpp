#include "vlaudit/scores.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <unordered_map>

#include "vlaudit/io.hpp"

namespace vlaudit::mi {

namespace {

struct MethodInfo {
    MethodKind kind;
    const char* name;
    Orientation orientation;
    bool k;
    bool alpha;
};

constexpr MethodInfo kMethods[] = {
    {MethodKind::Perplexity, "perplexity", Orientation::LowerIsMember, false, false},
    {MethodKind::MinK, "min_k", Orientation::HigherIsMember, true, false},
    {MethodKind::MinKpp, "min_kpp", Orientation::HigherIsMember, true, false},
    {MethodKind::MaxProbGap, "max_prob_gap", Orientation::HigherIsMember, false, false},
    {MethodKind::MaxRenyiK, "max_renyi_k", Orientation::HigherIsMember, true, true},
    {MethodKind::ModRenyi, "mod_renyi", Orientation::HigherIsMember, false, true},
    {MethodKind::ImageOnlyConsistency, "image_only", Orientation::HigherIsMember, false, false},
};

const MethodInfo& info(MethodKind kind) {
    for (const auto& m : kMethods)
        if (m.kind == kind) return m;
    throw ParameterError("unknown method kind");
}

bool keep(const TokenStep& s, SegmentFilter f) {
    switch (f) {
        case SegmentFilter::Instruction: return s.segment == Segment::Instruction;
        case SegmentFilter::Description: return s.segment == Segment::Description;
        case SegmentFilter::Both: return true;
    }
    return true;
}

std::vector<const TokenStep*> filtered(const GenerationTrace& trace, SegmentFilter f) {
    std::vector<const TokenStep*> out;
    out.reserve(trace.steps.size());
    for (const auto& s : trace.steps)
        if (keep(s, f)) out.push_back(&s);
    if (out.empty()) throw DataError(std::string("empty filtered trace (segment ") + to_string(f) + ")");
    return out;
}

void check_k(double k_percent) {
    if (!(k_percent > 0.0 && k_percent <= 100.0))
        throw ParameterError("k must be in (0, 100], got " + io::format_double(k_percent));
}

// Mean of the m smallest (ascending) or largest (descending) values.
double mean_of_extreme(std::vector<double> values, std::size_t m, bool largest) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return largest ? values[a] > values[b] : values[a] < values[b];
    });
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) sum += values[order[i]];
    return sum / static_cast<double>(m);
}

double require(const std::optional<double>& v, const char* field) {
    if (!v) throw DataError(std::string("missing ") + field);
    return *v;
}

double entropy_at(const TokenStep& s, double alpha) {
    auto h = s.renyi_at(alpha);
    if (!h) throw DataError("missing renyi[\"" + (std::isinf(alpha) ? std::string("inf") : io::format_double(alpha)) + "\"]");
    return *h;
}

}  // namespace

std::string method_name(MethodKind kind) { return info(kind).name; }

MethodKind method_from_string(const std::string& name) {
    for (const auto& m : kMethods)
        if (name == m.name) return m.kind;
    throw ParameterError("unknown method '" + name + "'");
}

Orientation orientation_of(MethodKind kind) { return info(kind).orientation; }
bool uses_k(MethodKind kind) { return info(kind).k; }
bool uses_alpha(MethodKind kind) { return info(kind).alpha; }

void MethodSpec::validate() const {
    if (uses_k(kind)) check_k(k_percent);
    if (uses_alpha(kind)) {
        if (!(alpha > 0.0)) throw ParameterError("alpha must be positive");
        if (alpha == 1.0 && !shannon)
            throw ParameterError("alpha = 1 is the Shannon limit; request it explicitly");
    }
}

std::size_t selection_count(double k_percent, std::size_t steps) {
    const double m = std::ceil(k_percent * static_cast<double>(steps) / 100.0);
    return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(m, 1.0)), 1, steps);
}

double renyi_entropy(std::span<const double> p, double alpha) {
    if (!(alpha > 0.0)) throw ParameterError("renyi order must be positive");
    if (std::isinf(alpha)) {
        const double pmax = *std::max_element(p.begin(), p.end());
        return pmax >= 1.0 ? 0.0 : -std::log(pmax);
    }
    if (alpha == 1.0) {
        double h = 0.0;
        for (double v : p)
            if (v > 0.0) h -= v * std::log(v);
        return std::max(h, 0.0);
    }
    // log sum p^alpha, evaluated in log space around the largest term
    double lmax = -std::numeric_limits<double>::infinity();
    for (double v : p)
        if (v > 0.0) lmax = std::max(lmax, alpha * std::log(v));
    double acc = 0.0;
    for (double v : p)
        if (v > 0.0) acc += std::exp(alpha * std::log(v) - lmax);
    const double h = (lmax + std::log(acc)) / (1.0 - alpha);
    return std::max(h, 0.0);
}

double perplexity(const GenerationTrace& trace, SegmentFilter filter) {
    const auto steps = filtered(trace, filter);
    double sum = 0.0;
    for (const auto* s : steps) sum += s->chosen_logprob;
    return std::exp(-sum / static_cast<double>(steps.size()));
}

double min_k(const GenerationTrace& trace, double k_percent, SegmentFilter filter) {
    check_k(k_percent);
    const auto steps = filtered(trace, filter);
    std::vector<double> l;
    l.reserve(steps.size());
    for (const auto* s : steps) l.push_back(s->chosen_logprob);
    return mean_of_extreme(std::move(l), selection_count(k_percent, steps.size()), false);
}

double min_k_pp(const GenerationTrace& trace, double k_percent, SegmentFilter filter) {
    check_k(k_percent);
    const auto steps = filtered(trace, filter);
    std::vector<double> z;
    z.reserve(steps.size());
    for (const auto* s : steps) {
        const double sd = require(s->std_logprob, "std_logprob");
        const double mu = require(s->mean_logprob, "mean_logprob");
        z.push_back((s->chosen_logprob - mu) / std::max(sd, 1e-6));
    }
    return mean_of_extreme(std::move(z), selection_count(k_percent, steps.size()), false);
}

double max_prob_gap(const GenerationTrace& trace, SegmentFilter filter) {
    const auto steps = filtered(trace, filter);
    double sum = 0.0;
    for (const auto* s : steps)
        sum += std::exp(require(s->max_logprob, "max_logprob")) - std::exp(require(s->second_logprob, "second_logprob"));
    return sum / static_cast<double>(steps.size());
}

double max_renyi_k(const GenerationTrace& trace, double alpha, double k_percent, SegmentFilter filter) {
    check_k(k_percent);
    const auto steps = filtered(trace, filter);
    std::vector<double> h;
    h.reserve(steps.size());
    for (const auto* s : steps) h.push_back(entropy_at(*s, alpha));
    return -mean_of_extreme(std::move(h), selection_count(k_percent, steps.size()), true);
}

double mod_renyi(const GenerationTrace& trace, double alpha, SegmentFilter filter) {
    const auto steps = filtered(trace, filter);
    double sum = 0.0;
    for (const auto* s : steps) sum += s->chosen_logprob + entropy_at(*s, alpha);
    return sum / static_cast<double>(steps.size());
}

double image_only_consistency(std::span<const GenerationTrace> traces) {
    if (traces.size() < 2) throw DataError("image-only consistency needs at least 2 traces per image");
    std::vector<std::map<std::size_t, double>> counts(traces.size());
    bool any = false;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        for (const auto& s : traces[i].steps) {
            if (s.segment != Segment::Description) continue;
            if (s.mode != StepMode::Full)
                throw DataError("image-only consistency needs full-distribution steps (trace " + traces[i].id + ")");
            counts[i][s.chosen_index] += 1.0;
            any = true;
        }
    }
    if (!any) throw DataError("all description segments are empty");

    auto cosine = [](const std::map<std::size_t, double>& a, const std::map<std::size_t, double>& b) {
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (const auto& [tok, c] : a) {
            na += c * c;
            if (auto it = b.find(tok); it != b.end()) dot += c * it->second;
        }
        for (const auto& [tok, c] : b) nb += c * c;
        if (na == 0.0 || nb == 0.0) return 0.0;
        return dot / (std::sqrt(na) * std::sqrt(nb));
    };

    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < counts.size(); ++i)
        for (std::size_t j = i + 1; j < counts.size(); ++j, ++pairs) sum += cosine(counts[i], counts[j]);
    return sum / static_cast<double>(pairs);
}

std::string image_key(const std::string& trace_id) {
    return trace_id.substr(0, trace_id.find('#'));
}

namespace {

double score_one(const GenerationTrace& t, const MethodSpec& spec) {
    switch (spec.kind) {
        case MethodKind::Perplexity: return perplexity(t, spec.filter);
        case MethodKind::MinK: return min_k(t, spec.k_percent, spec.filter);
        case MethodKind::MinKpp: return min_k_pp(t, spec.k_percent, spec.filter);
        case MethodKind::MaxProbGap: return max_prob_gap(t, spec.filter);
        case MethodKind::MaxRenyiK: return max_renyi_k(t, spec.alpha, spec.k_percent, spec.filter);
        case MethodKind::ModRenyi: return mod_renyi(t, spec.alpha, spec.filter);
        case MethodKind::ImageOnlyConsistency: break;
    }
    throw ParameterError("method needs grouped traces");
}

// Units of work: one trace each, or all traces of one image.
struct Groups {
    std::vector<std::string> keys;
    std::vector<std::vector<GenerationTrace>> members;
};

Groups group_by_image(const std::vector<GenerationTrace>& traces) {
    Groups g;
    std::unordered_map<std::string, std::size_t> index;
    for (const auto& t : traces) {
        const auto key = image_key(t.id);
        auto [it, inserted] = index.emplace(key, g.keys.size());
        if (inserted) {
            g.keys.push_back(key);
            g.members.emplace_back();
        }
        g.members[it->second].push_back(t);
    }
    return g;
}

ScoreTable empty_table(const MethodSpec& spec) {
    spec.validate();
    ScoreTable table;
    table.method = method_name(spec.kind);
    table.orientation = orientation_of(spec.kind);
    table.params["segment"] = to_string(spec.filter);
    if (uses_k(spec.kind)) table.params["k"] = io::format_double(spec.k_percent);
    if (uses_alpha(spec.kind)) table.params["alpha"] = io::format_double(spec.alpha);
    return table;
}

template <bool Parallel>
ScoreTable score_impl(const std::vector<GenerationTrace>& traces, const MethodSpec& spec) {
    ScoreTable table = empty_table(spec);
    const bool grouped = spec.kind == MethodKind::ImageOnlyConsistency;
    Groups groups;
    if (grouped) groups = group_by_image(traces);
    const std::size_t n = grouped ? groups.keys.size() : traces.size();

    std::vector<double> scores(n);
    std::vector<std::string> errors(n);
    const auto run = [&](std::size_t i) {
        try {
            scores[i] = grouped ? image_only_consistency(groups.members[i]) : score_one(traces[i], spec);
            if (std::isnan(scores[i])) errors[i] = "NaN score";
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    };
    if constexpr (Parallel) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) run(static_cast<std::size_t>(i));
    } else {
        for (std::size_t i = 0; i < n; ++i) run(i);
    }

    // First failure in input order, independent of scheduling.
    for (std::size_t i = 0; i < n; ++i)
        if (!errors[i].empty())
            throw DataError((grouped ? "image " + groups.keys[i] : "trace " + traces[i].id) + ": " + errors[i]);

    table.scores = std::move(scores);
    table.ids.reserve(n);
    for (std::size_t i = 0; i < n; ++i) table.ids.push_back(grouped ? groups.keys[i] : traces[i].id);
    return table;
}

}  // namespace

ScoreTable score_dataset(const std::vector<GenerationTrace>& traces, const MethodSpec& spec) {
    return score_impl<true>(traces, spec);
}

ScoreTable serial::score_dataset(const std::vector<GenerationTrace>& traces, const MethodSpec& spec) {
    return score_impl<false>(traces, spec);
}

LabeledDataset labels_for(const std::vector<GenerationTrace>& traces, const MethodSpec& spec) {
    LabeledDataset out;
    if (spec.kind != MethodKind::ImageOnlyConsistency) {
        for (const auto& t : traces)
            if (t.label) out.add(t.id, static_cast<int>(*t.label));
        return out;
    }
    const auto groups = group_by_image(traces);
    for (std::size_t g = 0; g < groups.keys.size(); ++g) {
        std::optional<Label> label;
        for (const auto& t : groups.members[g]) {
            if (!t.label) continue;
            if (label && *label != *t.label) throw DataError("image " + groups.keys[g] + " has conflicting labels");
            label = t.label;
        }
        if (label) out.add(groups.keys[g], static_cast<int>(*label));
    }
    return out;
}

}  // namespace vlaudit::mi
