#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vlaudit/types.hpp"

namespace vlaudit::probe {

/// Token-wise features of one sample, h_1..h_n, all of one dimension.
struct TokenFeatureSequence {
    std::string id;
    std::vector<std::vector<double>> tokens;
    std::optional<int> label;

    std::size_t dim() const { return tokens.empty() ? 0 : tokens.front().size(); }
};

using Dataset = std::vector<TokenFeatureSequence>;

enum class ProbeKind { Linear, Mlp, AttentionPool };
std::string to_string(ProbeKind k);
ProbeKind probe_kind_from_string(const std::string& s);

/// Binary membership probe.
///
/// Linear and Mlp read the mean-pooled sequence; AttentionPool pools with
/// softmax(q . h_j) weights and applies its own (w, b). Flat parameter
/// order: Linear [w, b]; Mlp [hidden_w (row-major hidden x d), hidden_b, w, b];
/// AttentionPool [q, w, b].
struct ProbeModel {
    ProbeKind kind = ProbeKind::Linear;
    std::size_t input_dim = 0;
    std::size_t hidden = 0;

    std::vector<double> w;
    double b = 0.0;
    std::vector<double> hidden_w;
    std::vector<double> hidden_b;
    std::vector<double> query;

    // Optional per-feature standardisation applied to every token first.
    std::vector<double> feature_mean;
    std::vector<double> feature_scale;

    std::size_t parameter_count() const;
    std::vector<double> flat() const;
    void set_flat(std::span<const double> params);
    /// Throws DataError on inconsistent shapes or non-finite values.
    void validate() const;
};

/// Weights and biases uniform in +-1/sqrt(fan_in); the query starts at 0,
/// so an attention probe begins as mean pooling.
ProbeModel init_model(ProbeKind kind, std::size_t input_dim, std::size_t hidden, std::uint64_t seed);

std::vector<double> mean_pool(const TokenFeatureSequence& seq);

struct AttentionPooling {
    std::vector<double> pooled;
    std::vector<double> weights;
};

/// Softmax over q . h_j (max-logit subtracted), then the weighted token sum.
AttentionPooling attention_pool(const TokenFeatureSequence& seq, std::span<const double> query);

double probe_logit(const ProbeModel& model, const TokenFeatureSequence& seq);
/// Membership probability sigmoid(logit).
double probe_forward(const ProbeModel& model, const TokenFeatureSequence& seq);

/// Binary cross-entropy of one labelled sequence; fills the gradient with
/// respect to the flat parameters when `grad` is non-null.
double loss_and_gradient(const ProbeModel& model, const TokenFeatureSequence& seq, int label,
                         std::vector<double>* grad);

struct GradCheckResult {
    double max_relative_error = 0.0;  // |a - n| / max(|a|, |n|, 1e-6)
    double max_absolute_error = 0.0;
};

/// Analytic gradient against central differences with step `eps`.
GradCheckResult grad_check(const ProbeModel& model, const TokenFeatureSequence& seq, int label, double eps);

struct Hyperparams {
    std::size_t hidden = 128;
    double learning_rate = 1e-3;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 100;
    std::size_t patience = 10;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    bool freeze_query = false;
    bool standardize = false;
};

struct EpochStats {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double validation_loss = 0.0;
    double train_auc = 0.0;
    double validation_auc = 0.0;
};

struct TrainReport {
    ProbeKind kind = ProbeKind::Linear;
    std::uint64_t seed = 0;
    Hyperparams hyperparams;
    std::vector<EpochStats> epochs;
    std::size_t best_epoch = 0;
    double best_validation_auc = 0.0;
};

/// Mini-batch Adam on mean cross-entropy. Returns the checkpoint with the
/// best validation AUC; stops after `patience` epochs without improvement.
/// Both sets need both classes.
std::pair<ProbeModel, TrainReport> train_probe(const Dataset& train, const Dataset& validation, ProbeKind kind,
                                               const Hyperparams& hp, std::uint64_t seed);

/// Stratified seeded split; `validation_fraction` of each class goes to the
/// second set (at least one sample per class when possible).
std::pair<Dataset, Dataset> split_train_validation(const Dataset& data, double validation_fraction,
                                                   std::uint64_t seed);

/// Membership probabilities for every sequence, in order.
std::vector<double> predict(const ProbeModel& model, const Dataset& data);

/// Labelled one-token sequences from an embedding space; rows without a
/// label are dropped.
Dataset from_embeddings(const EmbeddingSpace& space, const LabeledDataset& labels);

/// JSONL: {"id": str, "label": 0|1|null, "tokens": [[...], ...]} per line.
Dataset parse_sequences(std::istream& in);
void write_sequences(std::ostream& out, const Dataset& data);

namespace serial {
std::vector<double> predict(const ProbeModel& model, const Dataset& data);
}

}  // namespace vlaudit::probe
