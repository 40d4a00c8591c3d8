#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

namespace vlaudit::cli {

using nlohmann::json;

std::string sha256_hex(const std::string& bytes);

/// Reads `--config` JSON files. Nested objects address subcommands
/// ({"score": {"k": 10}}); underscores in keys match dashes in flag names.
class JsonConfig : public CLI::Config {
public:
    std::string to_config(const CLI::App* app, bool default_also, bool write_description,
                          std::string prefix) const override;
    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override;
};

/// Collects a run's outputs in memory and writes them, plus manifest.json,
/// under one directory.
class RunOutputs {
public:
    RunOutputs(std::filesystem::path dir, std::string subcommand);

    void add_parameter(const std::string& key, json value);
    /// Records the content digest of an input file.
    void add_input(const std::filesystem::path& path);
    void add_file(const std::string& name, std::string content);

    /// Writes every file, then the manifest. Throws Error if any write fails.
    void commit(std::uint64_t seed) const;

private:
    std::filesystem::path dir_;
    std::string subcommand_;
    json parameters_ = json::object();
    json inputs_ = json::array();
    std::vector<std::pair<std::string, std::string>> files_;
};

/// Files matching a shell pattern whose wildcards are confined to the last
/// path component, sorted by path.
std::vector<std::filesystem::path> glob_files(const std::string& pattern);

/// "a:b:step" -> a, a+step, ... <= b.
std::vector<double> parse_range(const std::string& text);

}  // namespace vlaudit::cli
