#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <variant>

#include "tabforge/llm.hpp"
#include "tabforge/table.hpp"

namespace tabforge {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using TomlValue = std::variant<std::string, std::int64_t, double, bool>;
/// Flat view keyed "section.key" (top-level keys have no prefix).
using TomlTable = std::map<std::string, TomlValue>;

/// Reads the subset of TOML the pipeline config uses: [section] headers,
/// key = value lines with basic strings, integers, floats and booleans, and
/// # comments. Anything else is a ConfigError naming the line.
TomlTable parse_toml_subset(std::string_view text);

struct PipelineConfig {
    std::uint64_t master_seed = 42;
    std::size_t n_tables = 50;
    std::size_t seeds_per_table = 2;
    std::size_t n_rounds = 2;
    std::size_t children_per_direction = 1;
    int weakness_threshold = 3;
    bool retain_all_seeds = true;
    bool safety_screen = true;
    int judge_reasks = 2;

    std::size_t subtopics_per_topic = 3;
    std::size_t titles_per_subtopic = 5;

    TableLimits limits;
    double formula_probability = 0.3;
    int retry_budget = 3;

    BackendConfig teacher;
    BackendConfig target;
    BackendConfig judge;

    std::string run_root = "run";
    std::string run_id = "default";
    bool cache = true;
    /// Optional directory of prompt overrides.
    std::string prompts_dir;

    PipelineConfig();

    std::filesystem::path run_dir() const { return std::filesystem::path(run_root) / run_id; }
};

/// Range and consistency checks; throws ConfigError.
void check_config(const PipelineConfig& cfg);

PipelineConfig config_from_toml(const TomlTable& table);
PipelineConfig load_config(const std::filesystem::path& path);
/// Every key with its effective value, in the same syntax load_config reads.
std::string to_toml(const PipelineConfig& cfg);

}  // namespace tabforge
