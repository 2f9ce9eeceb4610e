#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tabforge/config.hpp"
#include "tabforge/llm.hpp"
#include "tabforge/prompts.hpp"
#include "tabforge/sample.hpp"
#include "tabforge/synthesis.hpp"
#include "tabforge/table.hpp"

namespace tabforge {

struct Backends {
    std::shared_ptr<ChatBackend> teacher;
    std::shared_ptr<ChatBackend> target;
    std::shared_ptr<ChatBackend> judge;
};

/// Backends from the role configs, each behind the run's response cache
/// when caching is on.
Backends make_backends(const PipelineConfig& cfg);

/// Wraps each backend in a CachingBackend rooted at `cache_dir`.
Backends with_cache(const Backends& inner, const std::filesystem::path& cache_dir);

struct RoundState {
    std::size_t round = 0;
    std::vector<std::string> input_seeds;
    std::vector<std::string> candidates;  // kept after filtering
    std::vector<std::string> judged;      // scored by the judge
    std::vector<std::string> weakness;    // score below threshold, not flagged
    bool completed = false;

    std::size_t jobs = 0;
    std::size_t evolution_dropped = 0;
    std::size_t filter_dropped = 0;
    std::size_t target_failed = 0;
    std::size_t unscorable = 0;
    std::size_t flagged = 0;
};

nlohmann::json to_json(const RoundState& s);
RoundState round_state_from_json(const nlohmann::json& j);

struct Dataset {
    std::vector<InstructionSample> samples;  // sorted by (round, id)
    std::map<std::string, Table> tables;     // every table a sample refers to
};

/// Stage names, in run order: topics, tables, seeds, [seeds.judge,]
/// round<k>.evolve, round<k>.judge ..., export.
std::vector<std::string> stage_names(const PipelineConfig& cfg);

/// Drives one run directory:
///   config.snapshot, state.json, topics.jsonl, tables.jsonl, seeds.jsonl,
///   round<k>/{candidates,tables,judgments,weakness}.jsonl, export.jsonl.
/// Each finished stage is recorded in state.json; a later run over the same
/// directory loads finished stages from disk instead of calling a model.
class Pipeline {
public:
    Pipeline(PipelineConfig cfg, Backends backends, PromptLibrary prompts = PromptLibrary::builtin());

    /// Runs every unfinished stage, stopping after `stop_after` if given.
    /// Returns true when the export stage is done.
    bool run(const std::optional<std::string>& stop_after = std::nullopt);

    /// Runs unfinished stages up to and including `stage`.
    void run_until(const std::string& stage);

    const PipelineConfig& config() const { return cfg_; }
    std::filesystem::path dir() const { return cfg_.run_dir(); }
    std::filesystem::path export_path() const { return dir() / "export.jsonl"; }

    bool done(const std::string& stage) const;
    const std::vector<RoundState>& rounds() const { return rounds_; }
    /// Set when a round had no weakness samples and iteration stopped early.
    const std::optional<std::string>& halt_note() const { return halt_note_; }

    /// Final dataset from the current state (seeds plus every round's weakness).
    Dataset dataset() const;

private:
    void load_state();
    void save_state() const;
    void mark_done(const std::string& stage);
    void run_stage(const std::string& stage);

    void stage_topics();
    void stage_tables();
    void stage_seeds();
    void stage_seed_judge();
    void stage_evolve(std::size_t round);
    void stage_judge(std::size_t round);
    void stage_export();

    /// Judges samples (target answer, judge, safety) and returns the round's
    /// judgments; `weak` receives weakness samples in input order.
    std::vector<nlohmann::json> judge_samples(const std::vector<InstructionSample>& samples, std::size_t round,
                                              std::vector<InstructionSample>& judged,
                                              std::vector<InstructionSample>& weak, RoundState& state);

    std::vector<InstructionSample> round_inputs(std::size_t round) const;
    std::size_t next_table_counter() const;
    void load_outputs();

    PipelineConfig cfg_;
    Backends backends_;
    PromptLibrary prompts_;

    std::vector<std::string> completed_;
    std::vector<RoundState> rounds_;
    std::optional<std::string> halt_note_;

    std::vector<TopicNode> topics_;
    std::map<std::string, Table> tables_;
    std::vector<std::string> table_order_;
    std::vector<InstructionSample> seeds_;
    std::vector<InstructionSample> seed_weakness_;
    std::map<std::size_t, std::vector<InstructionSample>> candidates_;
    std::map<std::size_t, std::vector<InstructionSample>> weakness_;
};

// ---------------------------------------------------------------- export

/// One export line: the sample plus the table text it should be shown with.
struct ExportRecord {
    InstructionSample sample;
    std::string table_title;
    std::string table_text;
};

nlohmann::json to_json(const ExportRecord& r);
ExportRecord export_record_from_json(const nlohmann::json& j);

/// Writes one JSONL record per sample, sorted by (round, id). Throws
/// std::runtime_error when the file cannot be written.
void export_dataset(const Dataset& dataset, const std::filesystem::path& path);
std::vector<ExportRecord> read_export(const std::filesystem::path& path);

/// Problems with parent chains and table references in an export (empty
/// when the export is consistent).
std::vector<std::string> check_lineage(const std::vector<ExportRecord>& records);

// ---------------------------------------------------------------- stats

struct MetricStats {
    double median = 0;
    double mean = 0;
    double min = 0;
    double max = 0;
};

/// Table metrics are per distinct table, word counts per sample.
struct DatasetStats {
    std::size_t n_samples = 0;
    std::size_t n_tables = 0;
    MetricStats rows;
    MetricStats cols;
    MetricStats cells;
    MetricStats instruction_words;
    MetricStats output_words;
    double avg_instructions_per_table = 0;
};

MetricStats summarize(std::vector<double> values);
DatasetStats compute_stats(const std::vector<ExportRecord>& records);
nlohmann::json to_json(const DatasetStats& s);
std::string format_stats(const DatasetStats& s);

// ---------------------------------------------------------------- jsonl

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
/// Writes through a temporary file and a rename.
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& lines);
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace tabforge
