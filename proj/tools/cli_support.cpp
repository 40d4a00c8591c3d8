#include "cli_support.hpp"

#include <fnmatch.h>
#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "vlaudit/io.hpp"
#include "vlaudit/types.hpp"

#ifndef VLAUDIT_VERSION
#define VLAUDIT_VERSION "0.0.0"
#endif

namespace vlaudit::cli {

namespace fs = std::filesystem;

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 15]);
    }
    return out;
}

namespace {

std::string flag_name(std::string key) {
    std::replace(key.begin(), key.end(), '_', '-');
    return key;
}

std::string scalar_text(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_float()) return io::format_double(v.get<double>());
    if (v.is_number()) return v.dump();
    throw CLI::ConfigError("config values must be scalars or arrays of scalars");
}

void flatten(const json& obj, std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& out) {
    for (const auto& [key, value] : obj.items()) {
        if (value.is_object()) {
            parents.push_back(key);
            flatten(value, parents, out);
            parents.pop_back();
            continue;
        }
        CLI::ConfigItem item;
        item.parents = parents;
        item.name = flag_name(key);
        if (value.is_array())
            for (const auto& v : value) item.inputs.push_back(scalar_text(v));
        else
            item.inputs.push_back(scalar_text(value));
        out.push_back(std::move(item));
    }
}

}  // namespace

std::string JsonConfig::to_config(const CLI::App* app, bool default_also, bool, std::string) const {
    json out = json::object();
    for (const CLI::Option* opt : app->get_options()) {
        if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
        std::string value = opt->as<std::string>();
        if (value.empty() && default_also) value = opt->get_default_str();
        if (!value.empty()) out[opt->get_lnames().front()] = value;
    }
    return out.dump(2);
}

std::vector<CLI::ConfigItem> JsonConfig::from_config(std::istream& input) const {
    json doc;
    try {
        input >> doc;
    } catch (const json::exception& e) {
        throw CLI::ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw CLI::ConfigError("config must be a JSON object");
    std::vector<CLI::ConfigItem> items;
    std::vector<std::string> parents;
    flatten(doc, parents, items);
    return items;
}

RunOutputs::RunOutputs(fs::path dir, std::string subcommand) : dir_(std::move(dir)), subcommand_(std::move(subcommand)) {}

void RunOutputs::add_parameter(const std::string& key, json value) { parameters_[key] = std::move(value); }

void RunOutputs::add_input(const fs::path& path) {
    inputs_.push_back({{"path", path.generic_string()}, {"sha256", sha256_hex(io::read_file(path))}});
}

void RunOutputs::add_file(const std::string& name, std::string content) {
    files_.emplace_back(name, std::move(content));
}

void RunOutputs::commit(std::uint64_t seed) const {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error("cannot create output directory " + dir_.string() + ": " + ec.message());

    json outputs = json::array();
    auto write = [&](const std::string& name, const std::string& content) {
        const fs::path path = dir_ / name;
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.close();
        if (!out) throw Error("cannot write " + path.string());
    };
    for (const auto& [name, content] : files_) {
        write(name, content);
        outputs.push_back({{"path", name}, {"sha256", sha256_hex(content)}});
    }
    const json manifest = {{"tool", "vlaudit"},
                           {"version", VLAUDIT_VERSION},
                           {"subcommand", subcommand_},
                           {"seed", seed},
                           {"parameters", parameters_},
                           {"inputs", inputs_},
                           {"outputs", outputs}};
    write("manifest.json", manifest.dump(2) + "\n");
}

std::vector<fs::path> glob_files(const std::string& pattern) {
    const fs::path p(pattern);
    fs::path dir = p.parent_path();
    const std::string leaf = p.filename().string();
    if (dir.string().find_first_of("*?[") != std::string::npos)
        throw ParameterError("wildcards are only supported in the file name: " + pattern);
    if (dir.empty()) dir = ".";
    std::vector<fs::path> out;
    std::error_code ec;
    for (fs::directory_iterator it(dir, ec), end; !ec && it != end; it.increment(ec)) {
        if (!it->is_regular_file()) continue;
        if (fnmatch(leaf.c_str(), it->path().filename().c_str(), 0) == 0) out.push_back(it->path());
    }
    if (ec) throw Error("cannot list " + dir.string() + ": " + ec.message());
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<double> parse_range(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
    if (parts.size() != 3) throw ParameterError("range must look like start:stop:step");
    const double a = io::parse_double(parts[0], "range start");
    const double b = io::parse_double(parts[1], "range stop");
    const double step = io::parse_double(parts[2], "range step");
    if (!(step > 0.0) || !(a <= b)) throw ParameterError("range needs start <= stop and step > 0");
    std::vector<double> out;
    const auto count = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9));
    for (std::size_t i = 0; i <= count; ++i) out.push_back(a + static_cast<double>(i) * step);
    return out;
}

}  // namespace vlaudit::cli
