#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace vlaudit {

// Errors ----------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "error"; }
};

/// Malformed input. `line()` is 1-based, 0 when the error is not tied to a line.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& msg, std::size_t line = 0)
        : Error(line ? "line " + std::to_string(line) + ": " + msg : msg), line_(line) {}
    std::size_t line() const noexcept { return line_; }
    const char* kind() const noexcept override { return "parse"; }

private:
    std::size_t line_;
};

class ParameterError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "parameter"; }
};

/// Well-formed input that cannot be processed (missing fields, single class, degenerate data).
class DataError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "data"; }
};

// Traces ----------------------------------------------------------------------

enum class StepMode { Full, Summary };
enum class Segment { Instruction, Description };
enum class SegmentFilter { Instruction, Description, Both };
enum class Label : int { NonMember = 0, Member = 1 };

const char* to_string(Segment s);
const char* to_string(SegmentFilter f);
Segment segment_from_string(const std::string& s);
SegmentFilter segment_filter_from_string(const std::string& s);

/// One generated (or teacher-forced) token position.
///
/// Full steps carry the whole next-token log-distribution and every summary
/// statistic is derived from it. Summary steps carry only the statistics;
/// any of them may be absent and methods that need a missing one fail.
struct TokenStep {
    StepMode mode = StepMode::Summary;
    Segment segment = Segment::Description;

    std::size_t chosen_index = 0;  // Full only
    std::vector<double> logprobs;  // Full only, natural log; -inf marks p = 0

    double chosen_logprob = 0.0;
    std::optional<double> max_logprob;
    std::optional<double> second_logprob;
    std::optional<double> mean_logprob;  // sum_v p_v log p_v
    std::optional<double> std_logprob;
    std::map<double, double> renyi;      // order -> entropy

    /// Entropy of order `alpha`. Full steps compute it for any order;
    /// Summary steps look it up and return nullopt when absent.
    std::optional<double> renyi_at(double alpha) const;

    /// Probabilities exp(logprobs). Full only.
    std::vector<double> probabilities() const;
};

/// Rényi orders stored by default when summarising Full steps.
inline constexpr double kDefaultRenyiOrders[] = {0.5, 1.0, 2.0};

/// Fills max/second/mean/std and the default Rényi orders from `logprobs`.
/// Idempotent. Throws DataError if the step is not Full or not normalised.
void derive_summary(TokenStep& step);

/// Summary-mode copy of a Full step (chosen_index and logprobs dropped).
TokenStep to_summary(const TokenStep& full);

struct GenerationTrace {
    std::string id;
    std::vector<TokenStep> steps;
    std::optional<Label> label;
};

// Embeddings and images -------------------------------------------------------

/// Named set of fixed-dimension vectors. Row order is the file order.
class EmbeddingSpace {
public:
    EmbeddingSpace() = default;
    EmbeddingSpace(std::string name, std::size_t dim) : name_(std::move(name)), dim_(dim) {}

    const std::string& name() const noexcept { return name_; }
    void set_name(std::string n) { name_ = std::move(n); }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return ids_.size(); }
    bool empty() const noexcept { return ids_.empty(); }

    /// Throws DataError on duplicate id, wrong length or non-finite value.
    void add(std::string id, std::vector<double> row);

    const std::vector<std::string>& ids() const noexcept { return ids_; }
    const std::vector<std::vector<double>>& rows() const noexcept { return rows_; }
    const std::vector<double>& row(std::size_t i) const { return rows_.at(i); }
    const std::vector<double>* find(const std::string& id) const;

private:
    std::string name_;
    std::size_t dim_ = 0;
    std::vector<std::string> ids_;
    std::vector<std::vector<double>> rows_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Row-major grayscale image, intensities in [0, 255].
struct GrayImage {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> pixels;

    GrayImage() = default;
    GrayImage(std::size_t h, std::size_t w, double fill = 0.0) : height(h), width(w), pixels(h * w, fill) {}

    double& at(std::size_t y, std::size_t x) { return pixels[y * width + x]; }
    double at(std::size_t y, std::size_t x) const { return pixels[y * width + x]; }
};

// Scores and labels -----------------------------------------------------------

enum class Orientation { HigherIsMember, LowerIsMember };
const char* to_string(Orientation o);
Orientation orientation_from_string(const std::string& s);

struct ScoreTable {
    std::string method;
    std::map<std::string, std::string> params;
    Orientation orientation = Orientation::HigherIsMember;
    std::vector<std::string> ids;  // output order
    std::vector<double> scores;    // parallel to ids

    std::size_t size() const noexcept { return ids.size(); }
};

struct LabeledDataset {
    std::vector<std::string> ids;
    std::unordered_map<std::string, int> labels;  // id -> {0,1}

    void add(const std::string& id, int label);
    int at(const std::string& id) const;
    bool contains(const std::string& id) const { return labels.count(id) != 0; }
};

}  // namespace vlaudit
