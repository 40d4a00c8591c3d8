#include "vlaudit/probes.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <unordered_set>

#include "json.hpp"
#include "vlaudit/evaluation.hpp"
#include "vlaudit/parallel.hpp"

namespace vlaudit::probe {

using nlohmann::json;

namespace {

constexpr std::uint64_t kInitStream = 21;
constexpr std::uint64_t kShuffleStream = 22;
constexpr std::uint64_t kSplitStream = 23;

double dot(std::span<const double> a, std::span<const double> b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// log(1 + e^z) - y z, stable for large |z|.
double bce_from_logit(double z, int y) {
    return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

void check_sequence(const ProbeModel& m, const TokenFeatureSequence& seq) {
    if (seq.tokens.empty()) throw DataError("sequence " + seq.id + " has no tokens");
    for (const auto& t : seq.tokens)
        if (t.size() != m.input_dim) throw DataError("sequence " + seq.id + " dimension mismatch");
}

// Applies the model's standardisation, if any.
TokenFeatureSequence standardized(const ProbeModel& m, const TokenFeatureSequence& seq) {
    TokenFeatureSequence out = seq;
    for (auto& t : out.tokens)
        for (std::size_t j = 0; j < t.size(); ++j) t[j] = (t[j] - m.feature_mean[j]) / m.feature_scale[j];
    return out;
}

// Intermediate values of one forward pass.
struct Forward {
    std::vector<double> pooled;
    std::vector<double> attention;  // AttentionPool
    std::vector<double> pre;        // Mlp hidden pre-activation
    std::vector<double> act;        // Mlp hidden activation
    double logit = 0.0;
};

Forward forward(const ProbeModel& m, const TokenFeatureSequence& seq) {
    Forward f;
    switch (m.kind) {
        case ProbeKind::Linear:
            f.pooled = mean_pool(seq);
            f.logit = dot(m.w, f.pooled) + m.b;
            break;
        case ProbeKind::AttentionPool: {
            auto ap = attention_pool(seq, m.query);
            f.pooled = std::move(ap.pooled);
            f.attention = std::move(ap.weights);
            f.logit = dot(m.w, f.pooled) + m.b;
            break;
        }
        case ProbeKind::Mlp: {
            f.pooled = mean_pool(seq);
            const std::size_t d = m.input_dim;
            f.pre.resize(m.hidden);
            f.act.resize(m.hidden);
            for (std::size_t h = 0; h < m.hidden; ++h) {
                f.pre[h] = dot(std::span(m.hidden_w).subspan(h * d, d), f.pooled) + m.hidden_b[h];
                f.act[h] = std::max(f.pre[h], 0.0);
            }
            f.logit = dot(m.w, f.act) + m.b;
            break;
        }
    }
    return f;
}

double raw_loss_and_gradient(const ProbeModel& m, const TokenFeatureSequence& seq, int label,
                             std::vector<double>* grad) {
    const Forward f = forward(m, seq);
    const double loss = bce_from_logit(f.logit, label);
    if (!grad) return loss;

    const double dz = sigmoid(f.logit) - label;
    grad->assign(m.parameter_count(), 0.0);
    auto& g = *grad;
    const std::size_t d = m.input_dim;

    switch (m.kind) {
        case ProbeKind::Linear:
            for (std::size_t j = 0; j < d; ++j) g[j] = dz * f.pooled[j];
            g[d] = dz;
            break;
        case ProbeKind::AttentionPool: {
            // d logit / d s_j = alpha_j (w.h_j - w.hbar), d s_j / d q = h_j
            const double wbar = dot(m.w, f.pooled);
            for (std::size_t t = 0; t < seq.tokens.size(); ++t) {
                const double coef = dz * f.attention[t] * (dot(m.w, seq.tokens[t]) - wbar);
                for (std::size_t j = 0; j < d; ++j) g[j] += coef * seq.tokens[t][j];
            }
            for (std::size_t j = 0; j < d; ++j) g[d + j] = dz * f.pooled[j];
            g[2 * d] = dz;
            break;
        }
        case ProbeKind::Mlp: {
            const std::size_t hw = m.hidden * d;
            for (std::size_t h = 0; h < m.hidden; ++h) {
                const double da = f.pre[h] > 0.0 ? dz * m.w[h] : 0.0;
                for (std::size_t j = 0; j < d; ++j) g[h * d + j] = da * f.pooled[j];
                g[hw + h] = da;
                g[hw + m.hidden + h] = dz * f.act[h];
            }
            g[hw + 2 * m.hidden] = dz;
            break;
        }
    }
    return loss;
}

double mean_loss(const ProbeModel& m, const Dataset& data) {
    double s = 0.0;
    for (const auto& seq : data) s += raw_loss_and_gradient(m, seq, *seq.label, nullptr);
    return s / static_cast<double>(data.size());
}

double auc_of(const ProbeModel& m, const Dataset& data) {
    std::vector<double> pos, neg;
    for (const auto& seq : data) (*seq.label ? pos : neg).push_back(probe_logit(m, seq));
    return eval::roc_auc(pos, neg);
}

void require_labels(const Dataset& data, const char* what) {
    bool has[2] = {false, false};
    for (const auto& s : data) {
        if (!s.label) throw DataError(std::string(what) + " sequence " + s.id + " has no label");
        has[*s.label] = true;
    }
    if (!has[0] || !has[1]) throw DataError(std::string(what) + " set needs both classes");
}

}  // namespace

std::string to_string(ProbeKind k) {
    switch (k) {
        case ProbeKind::Linear: return "linear";
        case ProbeKind::Mlp: return "mlp";
        case ProbeKind::AttentionPool: return "attention";
    }
    return "linear";
}

ProbeKind probe_kind_from_string(const std::string& s) {
    if (s == "linear") return ProbeKind::Linear;
    if (s == "mlp") return ProbeKind::Mlp;
    if (s == "attention") return ProbeKind::AttentionPool;
    throw ParameterError("unknown probe kind '" + s + "'");
}

std::size_t ProbeModel::parameter_count() const {
    switch (kind) {
        case ProbeKind::Linear: return input_dim + 1;
        case ProbeKind::AttentionPool: return 2 * input_dim + 1;
        case ProbeKind::Mlp: return hidden * input_dim + 2 * hidden + 1;
    }
    return 0;
}

std::vector<double> ProbeModel::flat() const {
    std::vector<double> p;
    p.reserve(parameter_count());
    if (kind == ProbeKind::Mlp) {
        p.insert(p.end(), hidden_w.begin(), hidden_w.end());
        p.insert(p.end(), hidden_b.begin(), hidden_b.end());
    }
    if (kind == ProbeKind::AttentionPool) p.insert(p.end(), query.begin(), query.end());
    p.insert(p.end(), w.begin(), w.end());
    p.push_back(b);
    return p;
}

void ProbeModel::set_flat(std::span<const double> p) {
    if (p.size() != parameter_count()) throw ParameterError("parameter vector has wrong length");
    auto it = p.begin();
    auto take = [&](std::vector<double>& dst, std::size_t n) {
        dst.assign(it, it + static_cast<std::ptrdiff_t>(n));
        it += static_cast<std::ptrdiff_t>(n);
    };
    if (kind == ProbeKind::Mlp) {
        take(hidden_w, hidden * input_dim);
        take(hidden_b, hidden);
        take(w, hidden);
    } else {
        if (kind == ProbeKind::AttentionPool) take(query, input_dim);
        take(w, input_dim);
    }
    b = *it;
}

void ProbeModel::validate() const {
    if (input_dim == 0) throw DataError("probe input dimension must be >= 1");
    const std::size_t out_dim = kind == ProbeKind::Mlp ? hidden : input_dim;
    if (w.size() != out_dim) throw DataError("probe weight has wrong length");
    if (kind == ProbeKind::Mlp && (hidden == 0 || hidden_w.size() != hidden * input_dim || hidden_b.size() != hidden))
        throw DataError("mlp hidden layer has wrong shape");
    if (kind == ProbeKind::AttentionPool && query.size() != input_dim) throw DataError("query has wrong length");
    if (!feature_mean.empty() || !feature_scale.empty()) {
        if (feature_mean.size() != input_dim || feature_scale.size() != input_dim)
            throw DataError("standardisation vectors have wrong length");
        for (double s : feature_scale)
            if (!(s > 0.0)) throw DataError("feature scale must be positive");
    }
    for (double v : flat())
        if (!std::isfinite(v)) throw DataError("non-finite probe parameter");
}

ProbeModel init_model(ProbeKind kind, std::size_t input_dim, std::size_t hidden, std::uint64_t seed) {
    if (input_dim == 0) throw ParameterError("input dimension must be >= 1");
    if (kind == ProbeKind::Mlp && hidden == 0) throw ParameterError("mlp hidden width must be >= 1");
    ProbeModel m;
    m.kind = kind;
    m.input_dim = input_dim;
    m.hidden = kind == ProbeKind::Mlp ? hidden : 0;
    auto rng = task_rng(seed, kInitStream, 0);
    auto fill = [&](std::vector<double>& v, std::size_t n, std::size_t fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> u(-bound, bound);
        v.resize(n);
        for (auto& x : v) x = u(rng);
    };
    std::vector<double> bias;
    if (kind == ProbeKind::Mlp) {
        fill(m.hidden_w, hidden * input_dim, input_dim);
        fill(m.hidden_b, hidden, input_dim);
        fill(m.w, hidden, hidden);
        fill(bias, 1, hidden);
    } else {
        fill(m.w, input_dim, input_dim);
        fill(bias, 1, input_dim);
        if (kind == ProbeKind::AttentionPool) m.query.assign(input_dim, 0.0);
    }
    m.b = bias[0];
    return m;
}

std::vector<double> mean_pool(const TokenFeatureSequence& seq) {
    if (seq.tokens.empty()) throw DataError("sequence " + seq.id + " has no tokens");
    const std::size_t d = seq.dim();
    std::vector<double> out(d, 0.0);
    for (const auto& t : seq.tokens) {
        if (t.size() != d) throw DataError("sequence " + seq.id + " has ragged tokens");
        for (std::size_t j = 0; j < d; ++j) out[j] += t[j];
    }
    const double n = static_cast<double>(seq.tokens.size());
    for (auto& v : out) v /= n;
    return out;
}

AttentionPooling attention_pool(const TokenFeatureSequence& seq, std::span<const double> query) {
    if (seq.tokens.empty()) throw DataError("sequence " + seq.id + " has no tokens");
    const std::size_t d = seq.dim();
    if (query.size() != d) throw DataError("query dimension mismatch");
    AttentionPooling out;
    out.weights.resize(seq.tokens.size());
    for (std::size_t t = 0; t < seq.tokens.size(); ++t) out.weights[t] = dot(query, seq.tokens[t]);
    const double top = *std::max_element(out.weights.begin(), out.weights.end());
    double z = 0.0;
    for (auto& a : out.weights) {
        a = std::exp(a - top);
        z += a;
    }
    for (auto& a : out.weights) a /= z;
    out.pooled.assign(d, 0.0);
    for (std::size_t t = 0; t < seq.tokens.size(); ++t)
        for (std::size_t j = 0; j < d; ++j) out.pooled[j] += out.weights[t] * seq.tokens[t][j];
    return out;
}

double probe_logit(const ProbeModel& model, const TokenFeatureSequence& seq) {
    check_sequence(model, seq);
    if (model.feature_scale.empty()) return forward(model, seq).logit;
    return forward(model, standardized(model, seq)).logit;
}

double probe_forward(const ProbeModel& model, const TokenFeatureSequence& seq) {
    return sigmoid(probe_logit(model, seq));
}

double loss_and_gradient(const ProbeModel& model, const TokenFeatureSequence& seq, int label,
                         std::vector<double>* grad) {
    check_sequence(model, seq);
    if (label != 0 && label != 1) throw DataError("label must be 0 or 1");
    if (model.feature_scale.empty()) return raw_loss_and_gradient(model, seq, label, grad);
    return raw_loss_and_gradient(model, standardized(model, seq), label, grad);
}

GradCheckResult grad_check(const ProbeModel& model, const TokenFeatureSequence& seq, int label, double eps) {
    if (!(eps >= 1e-6 && eps <= 1e-3)) throw ParameterError("eps must be in [1e-6, 1e-3]");
    std::vector<double> analytic;
    loss_and_gradient(model, seq, label, &analytic);
    ProbeModel probe = model;
    std::vector<double> p = model.flat();
    GradCheckResult r;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double keep = p[i];
        p[i] = keep + eps;
        probe.set_flat(p);
        const double up = loss_and_gradient(probe, seq, label, nullptr);
        p[i] = keep - eps;
        probe.set_flat(p);
        const double down = loss_and_gradient(probe, seq, label, nullptr);
        p[i] = keep;
        const double numeric = (up - down) / (2.0 * eps);
        const double abs_err = std::abs(analytic[i] - numeric);
        const double scale = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
        r.max_absolute_error = std::max(r.max_absolute_error, abs_err);
        r.max_relative_error = std::max(r.max_relative_error, abs_err / scale);
    }
    return r;
}

std::pair<ProbeModel, TrainReport> train_probe(const Dataset& train, const Dataset& validation, ProbeKind kind,
                                               const Hyperparams& hp, std::uint64_t seed) {
    require_labels(train, "training");
    require_labels(validation, "validation");
    if (hp.batch_size == 0) throw ParameterError("batch size must be >= 1");
    if (hp.max_epochs == 0) throw ParameterError("max_epochs must be >= 1");
    if (!(hp.learning_rate > 0.0)) throw ParameterError("learning rate must be positive");
    const std::size_t d = train.front().dim();
    for (const auto* set : {&train, &validation})
        for (const auto& s : *set) {
            if (s.tokens.empty()) throw DataError("sequence " + s.id + " has no tokens");
            for (const auto& t : s.tokens)
                if (t.size() != d) throw DataError("sequence " + s.id + " dimension mismatch");
        }

    ProbeModel model = init_model(kind, d, hp.hidden, seed);

    // Standardise once up front; the statistics travel with the returned model.
    Dataset tr = train, va = validation;
    std::vector<double> mean, scale;
    if (hp.standardize) {
        mean.assign(d, 0.0);
        std::vector<double> sq(d, 0.0);
        std::size_t count = 0;
        for (const auto& s : train)
            for (const auto& t : s.tokens) {
                ++count;
                for (std::size_t j = 0; j < d; ++j) mean[j] += t[j];
            }
        for (auto& v : mean) v /= static_cast<double>(count);
        for (const auto& s : train)
            for (const auto& t : s.tokens)
                for (std::size_t j = 0; j < d; ++j) sq[j] += (t[j] - mean[j]) * (t[j] - mean[j]);
        scale.resize(d);
        for (std::size_t j = 0; j < d; ++j) {
            const double sd = std::sqrt(sq[j] / static_cast<double>(count));
            scale[j] = sd > 1e-12 ? sd : 1.0;
        }
        for (auto* set : {&tr, &va})
            for (auto& s : *set)
                for (auto& t : s.tokens)
                    for (std::size_t j = 0; j < d; ++j) t[j] = (t[j] - mean[j]) / scale[j];
    }

    TrainReport report;
    report.kind = kind;
    report.seed = seed;
    report.hyperparams = hp;

    const std::size_t np = model.parameter_count();
    const std::size_t query_params = kind == ProbeKind::AttentionPool ? d : 0;
    std::vector<double> params = model.flat(), m1(np, 0.0), m2(np, 0.0), grad, batch_grad(np);
    std::size_t step = 0;

    ProbeModel best = model;
    double best_auc = -1.0;
    std::size_t since_best = 0;
    std::vector<std::size_t> order(tr.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 1; epoch <= hp.max_epochs; ++epoch) {
        auto rng = task_rng(seed, kShuffleStream, epoch);
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0, batch = 0; start < order.size(); start += hp.batch_size, ++batch) {
            const std::size_t end = std::min(start + hp.batch_size, order.size());
            std::fill(batch_grad.begin(), batch_grad.end(), 0.0);
            double batch_loss = 0.0;
            for (std::size_t i = start; i < end; ++i) {
                const auto& s = tr[order[i]];
                batch_loss += raw_loss_and_gradient(model, s, *s.label, &grad);
                for (std::size_t p = 0; p < np; ++p) batch_grad[p] += grad[p];
            }
            if (!std::isfinite(batch_loss))
                throw DataError("NaN loss at epoch " + std::to_string(epoch) + " batch " + std::to_string(batch));
            const double inv = 1.0 / static_cast<double>(end - start);
            ++step;
            const double c1 = 1.0 - std::pow(hp.beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(hp.beta2, static_cast<double>(step));
            for (std::size_t p = hp.freeze_query ? query_params : 0; p < np; ++p) {
                const double g = batch_grad[p] * inv;
                m1[p] = hp.beta1 * m1[p] + (1.0 - hp.beta1) * g;
                m2[p] = hp.beta2 * m2[p] + (1.0 - hp.beta2) * g * g;
                params[p] -= hp.learning_rate * (m1[p] / c1) / (std::sqrt(m2[p] / c2) + hp.adam_eps);
            }
            model.set_flat(params);
        }

        EpochStats st;
        st.epoch = epoch;
        st.train_loss = mean_loss(model, tr);
        st.validation_loss = mean_loss(model, va);
        if (!std::isfinite(st.train_loss) || !std::isfinite(st.validation_loss))
            throw DataError("NaN loss at epoch " + std::to_string(epoch));
        st.train_auc = auc_of(model, tr);
        st.validation_auc = auc_of(model, va);
        report.epochs.push_back(st);

        if (st.validation_auc > best_auc) {
            best_auc = st.validation_auc;
            best = model;
            report.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= hp.patience) {
            break;
        }
    }
    report.best_validation_auc = best_auc;
    best.feature_mean = std::move(mean);
    best.feature_scale = std::move(scale);
    return {std::move(best), std::move(report)};
}

std::pair<Dataset, Dataset> split_train_validation(const Dataset& data, double validation_fraction,
                                                   std::uint64_t seed) {
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
        throw ParameterError("validation fraction must be in (0, 1)");
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!data[i].label) throw DataError("sequence " + data[i].id + " has no label");
        by_class[*data[i].label].push_back(i);
    }
    Dataset train, val;
    for (int c = 0; c < 2; ++c) {
        auto& idx = by_class[c];
        auto rng = task_rng(seed, kSplitStream, static_cast<std::uint64_t>(c));
        std::shuffle(idx.begin(), idx.end(), rng);
        std::size_t n_val = static_cast<std::size_t>(std::round(validation_fraction * static_cast<double>(idx.size())));
        if (idx.size() >= 2) n_val = std::clamp<std::size_t>(n_val, 1, idx.size() - 1);
        for (std::size_t i = 0; i < idx.size(); ++i) (i < n_val ? val : train).push_back(data[idx[i]]);
    }
    return {std::move(train), std::move(val)};
}

namespace {
template <bool Parallel>
std::vector<double> predict_impl(const ProbeModel& model, const Dataset& data) {
    model.validate();
    std::vector<double> out(data.size());
    std::vector<std::string> errors(data.size());
#pragma omp parallel for schedule(static) if (Parallel)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(data.size()); ++i) {
        const auto k = static_cast<std::size_t>(i);
        try {
            out[k] = probe_forward(model, data[k]);
        } catch (const std::exception& e) {
            errors[k] = e.what();
        }
    }
    for (const auto& e : errors)
        if (!e.empty()) throw DataError(e);
    return out;
}
}  // namespace

std::vector<double> predict(const ProbeModel& model, const Dataset& data) { return predict_impl<true>(model, data); }
std::vector<double> serial::predict(const ProbeModel& model, const Dataset& data) {
    return predict_impl<false>(model, data);
}

Dataset from_embeddings(const EmbeddingSpace& space, const LabeledDataset& labels) {
    Dataset out;
    for (std::size_t i = 0; i < space.size(); ++i) {
        const auto& id = space.ids()[i];
        if (!labels.contains(id)) continue;
        out.push_back({id, {space.row(i)}, labels.at(id)});
    }
    return out;
}

Dataset parse_sequences(std::istream& in) {
    Dataset out;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        try {
            const json js = json::parse(line);
            TokenFeatureSequence s;
            s.id = js.at("id").get<std::string>();
            if (auto it = js.find("label"); it != js.end() && !it->is_null()) {
                const int l = it->get<int>();
                if (l != 0 && l != 1) throw ParseError("label must be 0, 1 or null");
                s.label = l;
            }
            s.tokens = js.at("tokens").get<std::vector<std::vector<double>>>();
            if (s.tokens.empty()) throw ParseError("sequence needs at least one token");
            for (const auto& t : s.tokens) {
                if (t.size() != s.tokens.front().size() || t.empty()) throw ParseError("ragged token features");
                for (double v : t)
                    if (!std::isfinite(v)) throw ParseError("non-finite token feature");
            }
            if (!out.empty() && s.dim() != out.front().dim()) throw ParseError("dimension differs from first record");
            if (!seen.insert(s.id).second) throw ParseError("duplicate id " + s.id);
            out.push_back(std::move(s));
        } catch (const json::exception& e) {
            throw ParseError(std::string("bad sequence record: ") + e.what(), lineno);
        } catch (const ParseError& e) {
            throw ParseError(e.what(), lineno);
        }
    }
    return out;
}

void write_sequences(std::ostream& out, const Dataset& data) {
    for (const auto& s : data) {
        json js;
        js["id"] = s.id;
        js["label"] = s.label ? json(*s.label) : json(nullptr);
        js["tokens"] = s.tokens;
        out << js.dump() << '\n';
    }
}

}  // namespace vlaudit::probe
