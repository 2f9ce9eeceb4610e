#pragma once

#include <cstddef>
#include <initializer_list>
#include <string_view>
#include <optional>
#include <string>

#include "json.hpp"
#include "tabforge/formats.hpp"
#include "tabforge/prompts.hpp"
#include "tabforge/registry.hpp"

namespace tabforge {

struct Lineage {
    std::size_t round = 0;
    std::optional<std::string> parent_id;
    std::optional<Direction> direction;
    std::optional<Strategy> strategy;
    std::optional<std::string> origin_task;

    bool operator==(const Lineage&) const = default;
};

/// round 0 iff no parent iff no direction; a strategy belongs to the direction.
bool lineage_consistent(const Lineage& lineage);

/// One (instruction, table, response) triple plus provenance.
struct InstructionSample {
    std::string id;
    std::string table_id;
    TableFormat table_format = TableFormat::Markdown;
    std::string instruction;
    /// Teacher reference response; this is the training label.
    std::string response;
    Lineage lineage;
    std::optional<int> judge_score;

    bool operator==(const InstructionSample&) const = default;
};

nlohmann::json to_json(const Lineage& lineage);
Lineage lineage_from_json(const nlohmann::json& j);
nlohmann::json to_json(const InstructionSample& sample);
InstructionSample sample_from_json(const nlohmann::json& j);

/// Short stable id: `prefix` + 12 hex chars of SHA-256 over the parts.
std::string content_id(std::string_view prefix, std::initializer_list<std::string_view> parts);

/// {table_title, table_format, table_text, instruction} for prompts that
/// show a table and an instruction.
PromptVars sample_vars(const Table& table, TableFormat fmt, std::string_view instruction);

}  // namespace tabforge
