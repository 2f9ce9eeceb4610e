#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "tabforge/formats.hpp"
#include "tabforge/llm.hpp"
#include "tabforge/prompts.hpp"
#include "tabforge/registry.hpp"
#include "tabforge/sample.hpp"
#include "tabforge/table.hpp"

namespace tabforge {

enum class SynthesisErrc { ParseFailure, GenerationExhausted };

class SynthesisError : public std::runtime_error {
public:
    SynthesisError(SynthesisErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    SynthesisErrc code() const { return code_; }

private:
    SynthesisErrc code_;
};

// ---------------------------------------------------------------- topics

struct Subtopic {
    std::string name;
    std::vector<std::string> titles;
    bool operator==(const Subtopic&) const = default;
};

struct TopicNode {
    std::string topic;
    std::vector<Subtopic> subtopics;
    bool operator==(const TopicNode&) const = default;
};

nlohmann::json to_json(const TopicNode& node);
TopicNode topic_from_json(const nlohmann::json& j);

struct TopicRequest {
    std::size_t n_topics = 4;
    std::size_t subtopics_per_topic = 3;
    std::size_t titles_per_subtopic = 5;
    /// Extra attempts after a reply that yields no usable topic.
    int retries = 2;
};

/// Reads the first JSON array in `reply`. Subtopics without titles and topics
/// without subtopics are dropped. Throws ParseFailure if nothing usable remains.
std::vector<TopicNode> parse_topic_tree(std::string_view reply);

std::vector<TopicNode> generate_topic_tree(const TopicRequest& request, const RoleClient& teacher,
                                           const PromptLibrary& prompts, std::uint64_t seed);

/// One table to synthesize.
struct TitleSlot {
    std::string topic;
    std::string subtopic;
    std::string title;
};

/// Every title in tree order.
std::vector<TitleSlot> title_slots(const std::vector<TopicNode>& topics);

// ---------------------------------------------------------------- attributes

struct TableAttributes {
    TableType table_type = TableType::Flat;
    std::size_t n_rows = 4;
    std::size_t n_cols = 4;
    HeaderSpec header_spec;
    TableFormat target_format = TableFormat::Markdown;
    bool wants_formulas = false;

    bool operator==(const TableAttributes&) const = default;
};

struct AttributeOptions {
    TableLimits limits;
    double formula_probability = 0.3;
};

/// Type uniform over the three variants, rows and cols uniform inside the
/// limits, hierarchical header levels uniform over {1,2,3} x {1,2}.
TableAttributes sample_attributes(std::mt19937_64& rng, const AttributeOptions& options = {});

PromptVars table_prompt_vars(const TableAttributes& attrs, const TitleSlot& slot);
std::string build_table_prompt(const PromptLibrary& prompts, const TableAttributes& attrs, const TitleSlot& slot);

// ---------------------------------------------------------------- tables

/// Parse, evaluate and validate one teacher reply. On failure `table` is
/// empty and `problem` says why.
struct TableCheck {
    std::optional<Table> table;
    std::string problem;
};

TableCheck table_from_reply(std::string_view reply, const TableAttributes& attrs, const TitleSlot& slot,
                            const TableLimits& limits);

struct SynthesisOptions {
    AttributeOptions attributes;
    /// Generations per slot before giving up.
    int retry_budget = 3;
};

struct SlotResult {
    std::size_t slot = 0;
    std::optional<Table> table;
    std::optional<TableAttributes> attributes;
    std::vector<std::string> failures;
};

/// One slot with its own rng. Each retry draws fresh attributes. Throws
/// GenerationExhausted once the budget is spent.
SlotResult synthesize_table(const TitleSlot& slot, std::mt19937_64& rng, const RoleClient& teacher,
                            const PromptLibrary& prompts, const SynthesisOptions& options = {});

/// All slots, each attempt round dispatched as one batch. Slot i uses an rng
/// derived from (master_seed, i) and, on success, gets table id counter i+1.
/// Exhausted slots come back without a table.
std::vector<SlotResult> synthesize_tables(const std::vector<TitleSlot>& slots, std::uint64_t master_seed,
                                          const RoleClient& teacher, const PromptLibrary& prompts,
                                          const SynthesisOptions& options = {});

// ---------------------------------------------------------------- seeds

/// Non-empty "instruction" string from the last JSON object carrying it.
std::optional<std::string> parse_instruction_reply(std::string_view reply);

struct SeedReport {
    std::vector<std::string> dropped;  // one line per item that failed
};

/// k tasks drawn without replacement from `tasks`; one instruction and one
/// reference response each. Items whose replies do not parse are dropped.
std::vector<InstructionSample> generate_seed_instructions(const Table& table, std::span<const SeedTask> tasks,
                                                          std::size_t k, std::mt19937_64& rng,
                                                          const RoleClient& teacher, const PromptLibrary& prompts,
                                                          SeedReport* report = nullptr);

/// Batched over many tables; table i uses an rng derived from
/// (master_seed, table id).
std::vector<InstructionSample> generate_seed_instructions(const std::vector<Table>& tables, std::size_t k,
                                                          std::uint64_t master_seed, const RoleClient& teacher,
                                                          const PromptLibrary& prompts, SeedReport* report = nullptr);

/// Reference-response requests for (table, instruction) pairs.
ChatRequest answer_request(const RoleClient& client, const PromptLibrary& prompts, const Table& table,
                           TableFormat fmt, std::string_view instruction, std::string purpose,
                           std::optional<std::int64_t> seed);

}  // namespace tabforge
