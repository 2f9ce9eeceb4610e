#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tabforge/formats.hpp"
#include "tabforge/llm.hpp"
#include "tabforge/prompts.hpp"
#include "tabforge/table.hpp"

namespace tabforge {

enum class TaskType { TQA, TFV, T2T };

std::string_view to_string(TaskType t);
TaskType task_type_from_string(std::string_view name);

class EvalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct BenchmarkRecord {
    std::string id;
    std::string benchmark;
    Table table;
    std::string title;
    std::string question;
    std::vector<std::string> gold;  // one element unless the gold is a list
    TaskType task_type = TaskType::TQA;
};

/// Accepts {"id", "benchmark", "task_type", "question", "gold", "title"?}
/// plus the table as "table_html" (raw markup) or "table" (array of rows, or
/// a serialized Table object). Throws EvalError on schema problems, including
/// a TFV gold that is not entailed/refuted after normalization.
BenchmarkRecord benchmark_from_json(const nlohmann::json& j);
std::vector<BenchmarkRecord> load_benchmark(const std::filesystem::path& path);

struct EvalConfig {
    std::vector<std::string> template_ids{"t1", "t2", "t3"};
    std::vector<TableFormat> formats{TableFormat::Html, TableFormat::Markdown, TableFormat::Csv, TableFormat::Tsv};
    double temperature = 0.01;
    int max_tokens = 1024;
    int t2t_reasks = 2;
    /// Benchmarks expected in the report; one without records is listed with
    /// n = 0 and left out of the macro average.
    std::vector<std::string> benchmarks;
};

/// Renders template "eval_<template_id>" with the table in `fmt`. TQA and TFV
/// prompts end with the matching answer clause, T2T prompts have none.
/// Throws PromptError(MissingTemplate) for an unknown template id.
std::string assemble_prompt(const BenchmarkRecord& rec, std::string_view template_id, TableFormat fmt,
                            const PromptLibrary& prompts = PromptLibrary::builtin());

/// Normalized answer; a scalar is a one-element list.
using Answer = std::vector<std::string>;

/// Trim, lowercase, collapse spaces, strip surrounding quotes and periods,
/// canonical numbers ("5.0" -> "5", "1,200" -> "1200"). Idempotent.
std::string normalize_text(std::string_view s);
/// entailed/refuted for the usual yes/no spellings, else unchanged.
std::string normalize_verdict(std::string_view normalized);

/// Value of the last JSON object carrying "answer", normalized. Nothing when
/// no such object exists or the value is null.
std::optional<Answer> extract_answer(std::string_view response);

Answer normalize_gold(const BenchmarkRecord& rec);

/// 1 when the two answers hold the same set of strings.
int exact_match(const Answer& pred, const Answer& gold);

/// Binary verdict from the judge's last non-empty line ("correct" or
/// "incorrect"). Unparseable replies are re-asked `reasks` times, then
/// scored 0 and logged.
struct T2TVerdict {
    int correct = 0;
    int attempts = 0;
    bool unscorable = false;
};
T2TVerdict judge_t2t(const BenchmarkRecord& rec, std::string_view response, const RoleClient& judge,
                     const PromptLibrary& prompts = PromptLibrary::builtin(), int reasks = 2);

/// One model response for one (record, template, format) cell.
struct EvalItem {
    std::size_t record = 0;
    std::string template_id;
    TableFormat format = TableFormat::Markdown;
    std::string response;
};

struct ScoredItem {
    EvalItem item;
    std::optional<Answer> prediction;
    int correct = 0;
    bool unscorable = false;
};

struct BenchmarkScore {
    std::string benchmark;
    std::size_t n = 0;
    std::size_t correct = 0;
    double accuracy = 0;
};

struct EvalReport {
    std::vector<BenchmarkScore> benchmarks;  // sorted by name
    /// Mean accuracy over benchmarks with at least one item.
    std::optional<double> macro_average;
    /// Accuracy per "<template>/<format>" cell, for comparing prompt variants.
    std::map<std::string, double> by_variant;
    std::vector<ScoredItem> items;
};

/// Pure fold over responses; the judge is needed only for T2T records.
EvalReport score_run(const std::vector<BenchmarkRecord>& records, const std::vector<EvalItem>& items,
                     const EvalConfig& cfg = {}, const RoleClient* judge = nullptr,
                     const PromptLibrary& prompts = PromptLibrary::builtin());

/// Queries the model for every (record, template, format) cell in one batch,
/// then scores. Failed model calls count as empty responses.
EvalReport run_eval(const std::vector<BenchmarkRecord>& records, const EvalConfig& cfg, const RoleClient& model,
                    const RoleClient* judge = nullptr, const PromptLibrary& prompts = PromptLibrary::builtin());

nlohmann::json to_json(const BenchmarkScore& s);
std::string format_report(const EvalReport& report);
/// report.jsonl ({benchmark, n, correct, accuracy} per line), report.txt and
/// responses.jsonl under `dir`.
void write_report(const EvalReport& report, const std::vector<BenchmarkRecord>& records,
                  const std::filesystem::path& dir);

}  // namespace tabforge
