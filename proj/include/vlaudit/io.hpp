#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "vlaudit/types.hpp"

namespace vlaudit::io {

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

/// Strict full-string conversion; throws ParseError naming `what` otherwise.
double parse_double(std::string_view text, std::string_view what = "value");

// Traces: one JSON object per line. Blank lines are skipped. Parsing stops at
// the first bad line and the error carries its 1-based line number.
std::vector<GenerationTrace> parse_traces(std::istream& in);
std::vector<GenerationTrace> read_traces(const std::filesystem::path& path);
void write_traces(std::ostream& out, const std::vector<GenerationTrace>& traces);

// Embeddings CSV: header `id,f1,...,fd`, one row per sample.
EmbeddingSpace parse_embeddings(std::istream& in, std::string name = {});
/// The space is named after the file stem unless `name` is given.
EmbeddingSpace read_embeddings(const std::filesystem::path& path, std::string name = {});
void write_embeddings(std::ostream& out, const EmbeddingSpace& space);

// Portable graymap, P2 or P5. Intensities are rescaled by 255/maxval.
GrayImage parse_pgm(std::string_view bytes);
GrayImage read_pgm(const std::filesystem::path& path);
/// Binary P5, maxval 255; intensities are rounded and clamped to [0, 255].
void write_pgm(std::ostream& out, const GrayImage& image);

// Labels CSV: header `id,label`, label in {0,1}.
LabeledDataset parse_labels(std::istream& in);
LabeledDataset read_labels(const std::filesystem::path& path);
void write_labels(std::ostream& out, const LabeledDataset& labels);

// Score tables: `id,score` CSV plus a JSON sidecar {method, params, orientation}.
void write_scores(std::ostream& csv, std::ostream& meta, const ScoreTable& table);
ScoreTable parse_scores(std::istream& csv, std::istream& meta);
/// Reads `<stem>.csv` and the sidecar `<stem>.meta.json` next to it.
ScoreTable read_scores(const std::filesystem::path& csv_path);

/// Whole file as bytes. Throws Error if the file cannot be opened.
std::string read_file(const std::filesystem::path& path);

}  // namespace vlaudit::io
