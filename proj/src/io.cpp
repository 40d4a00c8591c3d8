#include "vlaudit/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

namespace vlaudit::io {

using nlohmann::json;

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

double parse_double(std::string_view text, std::string_view what) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || text.empty())
        throw ParseError("non-numeric " + std::string(what) + " '" + std::string(text) + "'");
    return v;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

std::ifstream open_text(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    return in;
}

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

// --- trace records -----------------------------------------------------------

double json_number(const json& obj, const char* key) {
    const auto& v = obj.at(key);
    if (!v.is_number()) throw ParseError(std::string("field '") + key + "' must be a number");
    return v.get<double>();
}

std::optional<double> json_optional_number(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_number()) throw ParseError(std::string("field '") + key + "' must be a number");
    return it->get<double>();
}

double parse_renyi_order(const std::string& key) {
    if (key == "inf") return std::numeric_limits<double>::infinity();
    double a = parse_double(key, "renyi order");
    if (!(a > 0.0)) throw ParseError("renyi order must be positive, got " + key);
    return a;
}

void check_close(const char* field, std::optional<double> stored, double derived) {
    if (stored && std::abs(*stored - derived) > 1e-9)
        throw ParseError(std::string("stored ") + field + " disagrees with full distribution");
}

TokenStep parse_step(const json& js) {
    if (!js.is_object()) throw ParseError("step must be an object");
    TokenStep step;
    step.segment = segment_from_string(js.at("segment").get<std::string>());

    if (js.contains("logprobs")) {
        step.mode = StepMode::Full;
        const auto& arr = js.at("logprobs");
        if (!arr.is_array()) throw ParseError("logprobs must be an array");
        step.logprobs.reserve(arr.size());
        for (const auto& v : arr) {
            if (v.is_null())
                step.logprobs.push_back(-std::numeric_limits<double>::infinity());
            else if (v.is_number())
                step.logprobs.push_back(v.get<double>());
            else
                throw ParseError("logprobs entries must be numbers or null");
        }
        const auto& chosen = js.at("chosen");
        if (!chosen.is_number_integer() || chosen.get<long long>() < 0)
            throw ParseError("chosen must be a non-negative integer");
        step.chosen_index = chosen.get<std::size_t>();
        if (step.chosen_index >= step.logprobs.size()) throw ParseError("chosen index out of range");

        // Optional stored statistics must agree with the distribution.
        const auto stored_chosen = json_optional_number(js, "chosen_logprob");
        const auto stored_max = json_optional_number(js, "max_logprob");
        const auto stored_second = json_optional_number(js, "second_logprob");
        const auto stored_mean = json_optional_number(js, "mean_logprob");
        const auto stored_std = json_optional_number(js, "std_logprob");
        try {
            derive_summary(step);
        } catch (const DataError& e) {
            throw ParseError(e.what());
        }
        check_close("chosen_logprob", stored_chosen, step.chosen_logprob);
        check_close("max_logprob", stored_max, *step.max_logprob);
        check_close("second_logprob", stored_second, *step.second_logprob);
        check_close("mean_logprob", stored_mean, *step.mean_logprob);
        check_close("std_logprob", stored_std, *step.std_logprob);
        if (auto it = js.find("renyi"); it != js.end() && it->is_object()) {
            for (const auto& [k, v] : it->items()) {
                const double a = parse_renyi_order(k);
                check_close("renyi", v.get<double>(), *step.renyi_at(a));
            }
        }
        return step;
    }

    step.mode = StepMode::Summary;
    if (!js.contains("chosen_logprob")) throw ParseError("summary step needs chosen_logprob or logprobs");
    step.chosen_logprob = json_number(js, "chosen_logprob");
    step.max_logprob = json_optional_number(js, "max_logprob");
    step.second_logprob = json_optional_number(js, "second_logprob");
    step.mean_logprob = json_optional_number(js, "mean_logprob");
    step.std_logprob = json_optional_number(js, "std_logprob");
    if (auto it = js.find("renyi"); it != js.end() && !it->is_null()) {
        if (!it->is_object()) throw ParseError("renyi must be an object");
        for (const auto& [k, v] : it->items()) {
            if (!v.is_number()) throw ParseError("renyi values must be numbers");
            const double h = v.get<double>();
            if (h < 0.0) throw ParseError("negative renyi entropy");
            step.renyi[parse_renyi_order(k)] = h;
        }
    }

    if (step.chosen_logprob > 0.0) throw ParseError("chosen_logprob must be <= 0");
    if (step.max_logprob) {
        if (*step.max_logprob > 0.0) throw ParseError("max_logprob must be <= 0");
        if (step.chosen_logprob > *step.max_logprob) throw ParseError("chosen_logprob exceeds max_logprob");
        if (step.second_logprob && *step.second_logprob > *step.max_logprob)
            throw ParseError("second_logprob exceeds max_logprob");
    }
    if (step.std_logprob && *step.std_logprob < 0.0) throw ParseError("negative std");
    return step;
}

GenerationTrace parse_trace_line(const std::string& line) {
    json js;
    try {
        js = json::parse(line);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what());
    }
    if (!js.is_object()) throw ParseError("record must be a JSON object");
    try {
        GenerationTrace t;
        const auto& id = js.at("id");
        if (!id.is_string()) throw ParseError("id must be a string");
        t.id = id.get<std::string>();
        if (auto it = js.find("label"); it != js.end() && !it->is_null()) {
            if (!it->is_number_integer()) throw ParseError("label must be 0, 1 or null");
            const auto v = it->get<long long>();
            if (v != 0 && v != 1) throw ParseError("label must be 0, 1 or null");
            t.label = static_cast<Label>(v);
        }
        const auto& steps = js.at("steps");
        if (!steps.is_array() || steps.empty()) throw ParseError("trace needs at least one step");
        t.steps.reserve(steps.size());
        for (const auto& s : steps) t.steps.push_back(parse_step(s));
        return t;
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad record: ") + e.what());
    }
}

std::string renyi_key(double alpha) {
    return std::isinf(alpha) ? "inf" : format_double(alpha);
}

json step_to_json(const TokenStep& s) {
    json js;
    js["segment"] = to_string(s.segment);
    if (s.mode == StepMode::Full) {
        js["chosen"] = s.chosen_index;
        json arr = json::array();
        for (double l : s.logprobs) {
            if (std::isfinite(l))
                arr.push_back(l);
            else
                arr.push_back(nullptr);
        }
        js["logprobs"] = std::move(arr);
        return js;
    }
    js["chosen_logprob"] = s.chosen_logprob;
    if (s.max_logprob) js["max_logprob"] = *s.max_logprob;
    if (s.second_logprob && std::isfinite(*s.second_logprob)) js["second_logprob"] = *s.second_logprob;
    if (s.mean_logprob) js["mean_logprob"] = *s.mean_logprob;
    if (s.std_logprob) js["std_logprob"] = *s.std_logprob;
    if (!s.renyi.empty()) {
        json r = json::object();
        for (const auto& [a, h] : s.renyi) r[renyi_key(a)] = h;
        js["renyi"] = std::move(r);
    }
    return js;
}

}  // namespace

std::vector<GenerationTrace> parse_traces(std::istream& in) {
    std::vector<GenerationTrace> out;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        strip_cr(line);
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        try {
            auto t = parse_trace_line(line);
            if (!seen.insert(t.id).second) throw ParseError("duplicate id " + t.id);
            out.push_back(std::move(t));
        } catch (const ParseError& e) {
            throw ParseError(e.what(), lineno);
        }
    }
    return out;
}

std::vector<GenerationTrace> read_traces(const std::filesystem::path& path) {
    auto in = open_text(path);
    return parse_traces(in);
}

void write_traces(std::ostream& out, const std::vector<GenerationTrace>& traces) {
    for (const auto& t : traces) {
        json js;
        js["id"] = t.id;
        if (t.label)
            js["label"] = static_cast<int>(*t.label);
        else
            js["label"] = nullptr;
        json steps = json::array();
        for (const auto& s : t.steps) steps.push_back(step_to_json(s));
        js["steps"] = std::move(steps);
        out << js.dump() << '\n';
    }
}

// --- embeddings --------------------------------------------------------------

EmbeddingSpace parse_embeddings(std::istream& in, std::string name) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty space");
    strip_cr(line);
    const auto header = split_csv(line);
    if (header.empty() || header[0] != "id") throw ParseError("header must start with 'id'", 1);
    if (header.size() < 2) throw ParseError("empty space", 1);
    const std::size_t dim = header.size() - 1;

    EmbeddingSpace space(std::move(name), dim);
    std::size_t lineno = 1;
    std::vector<double> row;
    while (std::getline(in, line)) {
        ++lineno;
        strip_cr(line);
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() != header.size())
            throw ParseError("ragged row: " + std::to_string(cells.size()) + " cells, header has " +
                                 std::to_string(header.size()),
                             lineno);
        row.assign(dim, 0.0);
        try {
            for (std::size_t j = 0; j < dim; ++j) row[j] = parse_double(cells[j + 1], "cell");
            space.add(std::string(cells[0]), row);
        } catch (const Error& e) {
            throw ParseError(e.what(), lineno);
        }
    }
    if (space.empty()) throw ParseError("empty space");
    return space;
}

EmbeddingSpace read_embeddings(const std::filesystem::path& path, std::string name) {
    auto in = open_text(path);
    return parse_embeddings(in, name.empty() ? path.stem().string() : std::move(name));
}

void write_embeddings(std::ostream& out, const EmbeddingSpace& space) {
    out << "id";
    for (std::size_t j = 0; j < space.dim(); ++j) out << ",f" << (j + 1);
    out << '\n';
    for (std::size_t i = 0; i < space.size(); ++i) {
        out << space.ids()[i];
        for (double v : space.row(i)) out << ',' << format_double(v);
        out << '\n';
    }
}

// --- PGM ---------------------------------------------------------------------

namespace {

class PgmReader {
public:
    explicit PgmReader(std::string_view bytes) : b_(bytes) {}

    void skip_space_and_comments() {
        while (pos_ < b_.size()) {
            const char c = b_[pos_];
            if (c == '#') {
                while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else {
                return;
            }
        }
    }

    std::optional<unsigned long> next_uint() {
        skip_space_and_comments();
        if (pos_ >= b_.size()) return std::nullopt;
        unsigned long v = 0;
        auto [ptr, ec] = std::from_chars(b_.data() + pos_, b_.data() + b_.size(), v);
        if (ec != std::errc()) throw ParseError("bad PGM integer");
        pos_ = static_cast<std::size_t>(ptr - b_.data());
        return v;
    }

    std::size_t pos() const { return pos_; }
    void advance(std::size_t n) { pos_ += n; }
    std::string_view rest() const { return b_.substr(std::min(pos_, b_.size())); }

private:
    std::string_view b_;
    std::size_t pos_ = 0;
};

}  // namespace

GrayImage parse_pgm(std::string_view bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '2' && bytes[1] != '5'))
        throw ParseError("bad magic (expected P2 or P5)");
    const bool binary = bytes[1] == '5';
    PgmReader r(bytes);
    r.advance(2);
    const auto w = r.next_uint();
    const auto h = r.next_uint();
    const auto maxval = r.next_uint();
    if (!w || !h || !maxval) throw ParseError("truncated header");
    if (*w == 0 || *h == 0) throw ParseError("image dimensions must be positive");
    if (*maxval == 0 || *maxval > 65535) throw ParseError("maxval must be in 1..65535");

    GrayImage img(*h, *w);
    const double maxv = static_cast<double>(*maxval);
    const std::size_t n = img.pixels.size();

    if (binary) {
        // Exactly one whitespace byte separates the header from the raster.
        if (r.rest().empty()) throw ParseError("truncated");
        r.advance(1);
        const std::size_t bpp = *maxval > 255 ? 2 : 1;
        const auto raster = r.rest();
        if (raster.size() < n * bpp) throw ParseError("truncated");
        for (std::size_t i = 0; i < n; ++i) {
            unsigned long v = static_cast<unsigned char>(raster[i * bpp]);
            if (bpp == 2) v = (v << 8) | static_cast<unsigned char>(raster[i * bpp + 1]);
            if (v > *maxval) throw ParseError("pixel exceeds maxval");
            img.pixels[i] = static_cast<double>(v) * 255.0 / maxv;
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const auto v = r.next_uint();
            if (!v) throw ParseError("truncated");
            if (*v > *maxval) throw ParseError("pixel exceeds maxval");
            img.pixels[i] = static_cast<double>(*v) * 255.0 / maxv;
        }
    }
    return img;
}

GrayImage read_pgm(const std::filesystem::path& path) {
    try {
        return parse_pgm(read_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void write_pgm(std::ostream& out, const GrayImage& image) {
    out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
    std::string raster(image.pixels.size(), '\0');
    for (std::size_t i = 0; i < image.pixels.size(); ++i) {
        const double v = std::clamp(std::round(image.pixels[i]), 0.0, 255.0);
        raster[i] = static_cast<char>(static_cast<unsigned char>(v));
    }
    out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
}

// --- labels and scores -------------------------------------------------------

LabeledDataset parse_labels(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty labels file");
    strip_cr(line);
    if (line != "id,label") throw ParseError("labels header must be 'id,label'", 1);
    LabeledDataset ds;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        strip_cr(line);
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() != 2) throw ParseError("expected 2 cells", lineno);
        if (cells[1] != "0" && cells[1] != "1") throw ParseError("label must be 0 or 1", lineno);
        try {
            ds.add(std::string(cells[0]), cells[1] == "1" ? 1 : 0);
        } catch (const Error& e) {
            throw ParseError(e.what(), lineno);
        }
    }
    return ds;
}

LabeledDataset read_labels(const std::filesystem::path& path) {
    auto in = open_text(path);
    return parse_labels(in);
}

void write_labels(std::ostream& out, const LabeledDataset& labels) {
    out << "id,label\n";
    for (const auto& id : labels.ids) out << id << ',' << labels.at(id) << '\n';
}

void write_scores(std::ostream& csv, std::ostream& meta, const ScoreTable& table) {
    csv << "id,score\n";
    for (std::size_t i = 0; i < table.size(); ++i)
        csv << table.ids[i] << ',' << format_double(table.scores[i]) << '\n';
    json m;
    m["method"] = table.method;
    m["params"] = table.params;
    m["orientation"] = to_string(table.orientation);
    meta << m.dump(2) << '\n';
}

ScoreTable parse_scores(std::istream& csv, std::istream& meta) {
    ScoreTable t;
    try {
        const json m = json::parse(meta);
        t.method = m.at("method").get<std::string>();
        t.orientation = orientation_from_string(m.at("orientation").get<std::string>());
        if (auto it = m.find("params"); it != m.end())
            for (const auto& [k, v] : it->items()) t.params[k] = v.is_string() ? v.get<std::string>() : v.dump();
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad score metadata: ") + e.what());
    }

    std::string line;
    if (!std::getline(csv, line)) throw ParseError("empty score table");
    strip_cr(line);
    if (line != "id,score") throw ParseError("score header must be 'id,score'", 1);
    std::unordered_set<std::string> seen;
    std::size_t lineno = 1;
    while (std::getline(csv, line)) {
        ++lineno;
        strip_cr(line);
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() != 2) throw ParseError("expected 2 cells", lineno);
        std::string id(cells[0]);
        if (!seen.insert(id).second) throw ParseError("duplicate id " + id, lineno);
        double v = 0.0;
        try {
            v = parse_double(cells[1], "score");
        } catch (const ParseError& e) {
            throw ParseError(e.what(), lineno);
        }
        if (std::isnan(v)) throw ParseError("NaN score", lineno);
        t.ids.push_back(std::move(id));
        t.scores.push_back(v);
    }
    return t;
}

ScoreTable read_scores(const std::filesystem::path& csv_path) {
    auto meta_path = csv_path;
    meta_path.replace_extension(".meta.json");
    auto csv = open_text(csv_path);
    auto meta = open_text(meta_path);
    return parse_scores(csv, meta);
}

}  // namespace vlaudit::io
