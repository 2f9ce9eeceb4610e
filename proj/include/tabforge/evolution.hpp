#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "tabforge/formats.hpp"
#include "tabforge/llm.hpp"
#include "tabforge/prompts.hpp"
#include "tabforge/registry.hpp"
#include "tabforge/sample.hpp"
#include "tabforge/table.hpp"

namespace tabforge {

enum class EvolutionErrc { ParseFailure, InvalidEvolvedTable, StrategyMismatch };

std::string_view to_string(EvolutionErrc code);

class EvolutionError : public std::runtime_error {
public:
    EvolutionError(EvolutionErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    EvolutionErrc code() const { return code_; }

private:
    EvolutionErrc code_;
};

/// Prompt template for a direction.
std::string_view direction_template(Direction d);

struct Candidate {
    InstructionSample sample;
    /// Set for table generalization: the new table the sample refers to.
    std::optional<Table> new_table;
};

/// One evolution job: a parent sample (with its table) and the strategy to apply.
struct EvolutionJob {
    const InstructionSample* parent = nullptr;
    const Table* table = nullptr;
    Direction direction = Direction::InstructionComplication;
    Strategy strategy = Strategy::AddConstraints;
    /// Disambiguates several children of the same parent, direction and strategy.
    std::size_t ordinal = 0;
    std::int64_t seed = 0;
};

/// A job that produced nothing, with the reason.
struct EvolutionDrop {
    std::size_t job = 0;
    EvolutionErrc code = EvolutionErrc::ParseFailure;
    std::string reason;
};

struct EvolutionResult {
    /// In job order; at most one per job.
    std::vector<Candidate> candidates;
    std::vector<EvolutionDrop> dropped;
};

struct EvolveOptions {
    TableLimits limits;
};

/// Target format for a ChangeFormat job: uniform over the formats other than
/// the parent's.
TableFormat pick_new_format(TableFormat current, std::mt19937_64& rng);

/// Runs every job through the teacher in one batch, then asks the teacher for
/// a fresh reference response per surviving candidate in a second batch.
/// Candidate ids derive from (parent id, direction, strategy, ordinal); new
/// tables get ids from `next_table_counter` upward, in job order.
EvolutionResult evolve(const std::vector<EvolutionJob>& jobs, const RoleClient& teacher, const PromptLibrary& prompts,
                       std::size_t next_table_counter, const EvolveOptions& options = {});

/// Single-sample form.
EvolutionResult evolve(const InstructionSample& sample, const Table& table, Direction direction, Strategy strategy,
                       const RoleClient& teacher, const PromptLibrary& prompts, std::int64_t seed = 0,
                       std::size_t next_table_counter = 1);

/// Result of a mechanical table change: the table and the format it should
/// be shown in.
struct Perturbed {
    Table table;
    TableFormat format = TableFormat::Markdown;
};

/// Row and column orders of the data region, as block indices into
/// row_blocks() / col_blocks(); merged regions move as one block.
struct Permutation {
    std::vector<std::size_t> row_blocks;  // new order of data row blocks
    std::vector<std::size_t> col_blocks;  // new order of data col blocks
};

/// Data row / column blocks that can move independently (merges never cross
/// a block boundary), as [first, last] index pairs.
std::vector<std::pair<std::size_t, std::size_t>> row_blocks(const Table& table);
std::vector<std::pair<std::size_t, std::size_t>> col_blocks(const Table& table);

/// Reorders data blocks. `perm.row_blocks[i]` is the index of the original
/// block that moves to position i. Headers stay attached to their rows and
/// columns; formulas are materialized first.
Table apply_permutation(const Table& table, const Permutation& perm);
Permutation inverse(const Permutation& perm);
Permutation random_permutation(const Table& table, std::mt19937_64& rng);

/// ChangeFormat picks another format and keeps the table; OrderPermutation
/// shuffles data rows and columns. Other strategies are rejected.
Perturbed deterministic_perturb(const Table& table, Strategy strategy, TableFormat current, std::mt19937_64& rng);

/// Non-empty instruction and response, valid table, instruction differs
/// from the parent's. Order preserved.
/// Tables of instruction-direction candidates are looked up by table_id.
std::vector<Candidate> filter_candidates(const std::vector<Candidate>& candidates,
                                         const std::map<std::string, InstructionSample>& parents,
                                         const std::map<std::string, Table>& tables, const TableLimits& limits = {});

}  // namespace tabforge
