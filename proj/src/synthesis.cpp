#include "tabforge/synthesis.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/spdlog.h>

#include "tabforge/formula.hpp"
#include "tabforge/hashing.hpp"
#include "tabforge/json_extract.hpp"
#include "text_util.hpp"

namespace tabforge {

using nlohmann::json;

namespace {

std::int64_t draw_seed(std::mt19937_64& rng) { return static_cast<std::int64_t>(rng() >> 1); }

std::string outcome_problem(const ChatOutcome& o) {
    return fmt::format("llm {}: {}", to_string(o.error_code), o.error);
}

}  // namespace

// ---------------------------------------------------------------- topics

json to_json(const TopicNode& node) {
    json subs = json::array();
    for (const auto& s : node.subtopics) subs.push_back({{"name", s.name}, {"titles", s.titles}});
    return {{"topic", node.topic}, {"subtopics", subs}};
}

TopicNode topic_from_json(const json& j) {
    TopicNode node;
    node.topic = j.at("topic").get<std::string>();
    for (const auto& s : j.at("subtopics")) {
        node.subtopics.push_back({s.at("name").get<std::string>(), s.at("titles").get<std::vector<std::string>>()});
    }
    return node;
}

std::vector<TopicNode> parse_topic_tree(std::string_view reply) {
    auto array = first_json_array(reply);
    if (!array) throw SynthesisError(SynthesisErrc::ParseFailure, "topic reply holds no JSON array");
    std::vector<TopicNode> out;
    for (const auto& item : *array) {
        if (!item.is_object() || !item.contains("topic") || !item["topic"].is_string()) continue;
        TopicNode node;
        node.topic = detail::trim(item["topic"].get<std::string>());
        if (node.topic.empty() || !item.contains("subtopics") || !item["subtopics"].is_array()) continue;
        for (const auto& sub : item["subtopics"]) {
            if (!sub.is_object() || !sub.contains("name") || !sub["name"].is_string()) continue;
            Subtopic s;
            s.name = detail::trim(sub["name"].get<std::string>());
            if (sub.contains("titles") && sub["titles"].is_array()) {
                for (const auto& title : sub["titles"]) {
                    if (!title.is_string()) continue;
                    auto text = detail::trim(title.get<std::string>());
                    if (!text.empty()) s.titles.push_back(std::move(text));
                }
            }
            if (s.name.empty() || s.titles.empty()) {
                spdlog::debug("dropping subtopic '{}' of '{}': no titles", s.name, node.topic);
                continue;
            }
            node.subtopics.push_back(std::move(s));
        }
        if (!node.subtopics.empty()) out.push_back(std::move(node));
    }
    if (out.empty()) throw SynthesisError(SynthesisErrc::ParseFailure, "topic reply holds no usable topic");
    return out;
}

std::vector<TopicNode> generate_topic_tree(const TopicRequest& request, const RoleClient& teacher,
                                           const PromptLibrary& prompts, std::uint64_t seed) {
    const std::string prompt = prompts.render("topics", {{"n_topics", std::to_string(request.n_topics)},
                                                         {"n_subtopics", std::to_string(request.subtopics_per_topic)},
                                                         {"n_titles", std::to_string(request.titles_per_subtopic)}});
    std::string last_problem;
    for (int attempt = 0; attempt <= request.retries; ++attempt) {
        const auto sampling_seed = static_cast<std::int64_t>(derive_seed(seed, {"topics", std::to_string(attempt)}) >> 1);
        try {
            auto reply = teacher.backend->complete(teacher.request(prompt, "topics", sampling_seed));
            auto topics = parse_topic_tree(reply.text);
            if (topics.size() > request.n_topics) topics.resize(request.n_topics);
            return topics;
        } catch (const SynthesisError& e) {
            last_problem = e.what();
            spdlog::warn("topic generation attempt {} failed: {}", attempt + 1, last_problem);
        }
    }
    throw SynthesisError(SynthesisErrc::ParseFailure,
                         fmt::format("no usable topic tree after {} attempts: {}", request.retries + 1, last_problem));
}

std::vector<TitleSlot> title_slots(const std::vector<TopicNode>& topics) {
    std::vector<TitleSlot> out;
    for (const auto& t : topics) {
        for (const auto& s : t.subtopics) {
            for (const auto& title : s.titles) out.push_back({t.topic, s.name, title});
        }
    }
    return out;
}

// ---------------------------------------------------------------- attributes

TableAttributes sample_attributes(std::mt19937_64& rng, const AttributeOptions& options) {
    const auto& lim = options.limits;
    std::uniform_int_distribution<int> type_pick(0, 2);
    std::uniform_int_distribution<std::size_t> rows(lim.min_rows, lim.max_rows);
    std::uniform_int_distribution<std::size_t> cols(lim.min_cols, lim.max_cols);
    std::uniform_int_distribution<std::size_t> col_levels(1, 3);
    std::uniform_int_distribution<std::size_t> row_levels(1, 2);
    std::bernoulli_distribution formulas(options.formula_probability);

    TableAttributes a;
    a.table_type = static_cast<TableType>(type_pick(rng));
    a.n_rows = rows(rng);
    a.n_cols = cols(rng);
    a.header_spec = canonical_header(a.table_type);
    if (a.table_type == TableType::Hierarchical) {
        a.header_spec.column_header_levels = col_levels(rng);
        a.header_spec.row_header_levels = row_levels(rng);
    }
    a.target_format = native_format(a.table_type);
    a.wants_formulas = formulas(rng);
    return a;
}

PromptVars table_prompt_vars(const TableAttributes& attrs, const TitleSlot& slot) {
    std::string type_description;
    std::string header_structure;
    switch (attrs.table_type) {
        case TableType::Flat:
            type_description =
                "The first row holds the column headers and every other row is one record. There are no row headers "
                "and no merged cells.";
            header_structure = "a single header row at the top.";
            break;
        case TableType::Horizontal:
            type_description =
                "The first column holds the field names and every further column is one record. There is no "
                "header row.";
            header_structure = "a single header column on the left; the first row is ordinary data.";
            break;
        case TableType::Hierarchical:
            type_description =
                "Headers are nested on both axes, and upper-level headers are merged cells spanning the "
                "lower-level headers they group.";
            header_structure = fmt::format(
                "{} level(s) of column headers at the top and {} level(s) of row headers on the left. The top-left "
                "corner above the row headers may be one merged cell.",
                attrs.header_spec.column_header_levels, attrs.header_spec.row_header_levels);
            break;
    }

    const std::string formula_instruction =
        attrs.wants_formulas
            ? "where a value follows from other cells (a total, a difference, an average), write a formula in that "
              "cell instead of the number. A formula starts with = and may use 1-based references R<row>C<col> "
              "counted over the whole grid including header rows, the operators + - * / with parentheses, and "
              "SUM, AVG, MIN or MAX over a range such as R2C3:R9C3. Examples: =R4C2-R5C2, =SUM(R2C3:R9C3). "
              "Referenced cells must hold plain numbers."
            : "write plain values only; do not use formulas.";

    const std::string format_instruction =
        attrs.target_format == TableFormat::Html
            ? "Output the table as one HTML <table> inside a ```html code block. Put the column header rows in "
              "<thead>, use <th> for every header cell and <td> for data cells, express merged cells with rowspan "
              "and colspan, and do not add any styling."
            : "Output the table as a Markdown pipe table inside a ```markdown code block. Every row starts and ends "
              "with |, and a separator row of dashes follows the first row.";

    return {{"topic", slot.topic},
            {"subtopic", slot.subtopic},
            {"title", slot.title},
            {"table_type", std::string(to_string(attrs.table_type))},
            {"table_type_description", type_description},
            {"n_rows", std::to_string(attrs.n_rows)},
            {"n_cols", std::to_string(attrs.n_cols)},
            {"column_header_levels", std::to_string(attrs.header_spec.column_header_levels)},
            {"row_header_levels", std::to_string(attrs.header_spec.row_header_levels)},
            {"formulas", attrs.wants_formulas ? "yes" : "no"},
            {"header_structure", header_structure},
            {"formula_instruction", formula_instruction},
            {"table_format", std::string(display_name(attrs.target_format))},
            {"format_instruction", format_instruction}};
}

std::string build_table_prompt(const PromptLibrary& prompts, const TableAttributes& attrs, const TitleSlot& slot) {
    return prompts.render("table_synthesis", table_prompt_vars(attrs, slot));
}

// ---------------------------------------------------------------- tables

TableCheck table_from_reply(std::string_view reply, const TableAttributes& attrs, const TitleSlot& slot,
                            const TableLimits& limits) {
    TableCheck out;
    Table t;
    try {
        t = parse(reply, attrs.target_format, ParseHints{attrs.table_type, attrs.header_spec});
    } catch (const FormatError& e) {
        out.problem = fmt::format("parse: {}", e.what());
        return out;
    }
    t.title = slot.title;
    t.topic = slot.topic;
    t.subtopic = slot.subtopic;
    if (has_formulas(t)) {
        // Formulas are only legal once the grid itself is sound.
        auto shape = validate(t, {.limits = limits, .check_size = true, .require_resolved = false});
        if (!shape.ok) {
            out.problem = fmt::format("invalid: {}", to_string(shape.violations.front()));
            return out;
        }
        try {
            t = evaluate_table(t);
        } catch (const FormulaError& e) {
            out.problem = fmt::format("formula {}: {}", to_string(e.code()), e.what());
            return out;
        }
    }
    auto report = validate(t, {.limits = limits, .check_size = true, .require_resolved = true});
    if (!report.ok) {
        std::vector<std::string> names;
        for (auto v : report.violations) names.emplace_back(to_string(v));
        out.problem = fmt::format("invalid: {}", fmt::join(names, ", "));
        return out;
    }
    out.table = std::move(t);
    return out;
}

namespace {

struct SlotJob {
    const TitleSlot* slot;
    std::mt19937_64* rng;
    SlotResult result;
};

void run_slot_jobs(std::vector<SlotJob>& jobs, const RoleClient& teacher, const PromptLibrary& prompts,
                   const SynthesisOptions& options) {
    for (int attempt = 0; attempt < options.retry_budget; ++attempt) {
        std::vector<std::size_t> pending;
        std::vector<ChatRequest> requests;
        std::vector<TableAttributes> drawn;
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            if (jobs[i].result.table) continue;
            auto attrs = sample_attributes(*jobs[i].rng, options.attributes);
            requests.push_back(
                teacher.request(build_table_prompt(prompts, attrs, *jobs[i].slot), "table", draw_seed(*jobs[i].rng)));
            drawn.push_back(attrs);
            pending.push_back(i);
        }
        if (pending.empty()) return;
        auto outcomes = teacher.backend->complete_batch(requests);
        for (std::size_t n = 0; n < pending.size(); ++n) {
            SlotJob& job = jobs[pending[n]];
            std::string problem;
            if (!outcomes[n].ok()) {
                problem = outcome_problem(outcomes[n]);
            } else {
                auto check = table_from_reply(outcomes[n].response->text, drawn[n], *job.slot, options.attributes.limits);
                if (check.table) {
                    job.result.table = std::move(check.table);
                    job.result.attributes = drawn[n];
                    continue;
                }
                problem = check.problem;
            }
            spdlog::debug("table slot {} attempt {} rejected: {}", job.result.slot, attempt + 1, problem);
            job.result.failures.push_back(std::move(problem));
        }
    }
}

}  // namespace

SlotResult synthesize_table(const TitleSlot& slot, std::mt19937_64& rng, const RoleClient& teacher,
                            const PromptLibrary& prompts, const SynthesisOptions& options) {
    std::vector<SlotJob> jobs{{&slot, &rng, {}}};
    run_slot_jobs(jobs, teacher, prompts, options);
    auto& result = jobs.front().result;
    if (!result.table) {
        throw SynthesisError(SynthesisErrc::GenerationExhausted,
                             fmt::format("'{}': {} generations failed, last: {}", slot.title, options.retry_budget,
                                         result.failures.empty() ? "none" : result.failures.back()));
    }
    result.table->id = make_table_id(*result.table, 1);
    return std::move(result);
}

std::vector<SlotResult> synthesize_tables(const std::vector<TitleSlot>& slots, std::uint64_t master_seed,
                                          const RoleClient& teacher, const PromptLibrary& prompts,
                                          const SynthesisOptions& options) {
    std::vector<std::mt19937_64> rngs;
    rngs.reserve(slots.size());
    std::vector<SlotJob> jobs;
    jobs.reserve(slots.size());
    for (std::size_t i = 0; i < slots.size(); ++i) {
        rngs.emplace_back(derive_seed(master_seed, {"table-slot", std::to_string(i)}));
    }
    for (std::size_t i = 0; i < slots.size(); ++i) {
        jobs.push_back({&slots[i], &rngs[i], {}});
        jobs.back().result.slot = i;
    }
    run_slot_jobs(jobs, teacher, prompts, options);

    std::vector<SlotResult> out;
    out.reserve(jobs.size());
    for (auto& job : jobs) {
        if (job.result.table) {
            job.result.table->id = make_table_id(*job.result.table, job.result.slot + 1);
        } else {
            spdlog::warn("table slot {} ('{}') exhausted after {} generations: {}", job.result.slot, job.slot->title,
                         options.retry_budget, job.result.failures.empty() ? "" : job.result.failures.back());
        }
        out.push_back(std::move(job.result));
    }
    return out;
}

// ---------------------------------------------------------------- seeds

std::optional<std::string> parse_instruction_reply(std::string_view reply) {
    auto obj = last_json_object_with(reply, "instruction");
    if (!obj || !(*obj)["instruction"].is_string()) return std::nullopt;
    auto text = detail::trim((*obj)["instruction"].get<std::string>());
    if (text.empty()) return std::nullopt;
    return text;
}

ChatRequest answer_request(const RoleClient& client, const PromptLibrary& prompts, const Table& table,
                           TableFormat fmt, std::string_view instruction, std::string purpose,
                           std::optional<std::int64_t> seed) {
    return client.request(prompts.render("answer", sample_vars(table, fmt, instruction)), std::move(purpose), seed);
}

namespace {

struct SeedJob {
    const Table* table;
    const SeedTask* task;
    std::int64_t instruction_seed;
    std::int64_t answer_seed;
    std::string instruction;
};

std::vector<SeedJob> plan_seed_jobs(const Table& table, std::span<const SeedTask> tasks, std::size_t k,
                                    std::mt19937_64& rng) {
    if (k == 0) throw std::invalid_argument("seeds per table must be >= 1");
    if (tasks.empty()) throw std::invalid_argument("seed task pool is empty");
    k = std::min(k, tasks.size());
    std::vector<std::size_t> order(tasks.size());
    std::iota(order.begin(), order.end(), 0);
    // Partial Fisher-Yates: the first k entries are a uniform k-subset.
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
        std::swap(order[i], order[pick(rng)]);
    }
    std::vector<SeedJob> jobs;
    for (std::size_t i = 0; i < k; ++i) {
        SeedJob job{&table, &tasks[order[i]], 0, 0, {}};
        job.instruction_seed = draw_seed(rng);
        job.answer_seed = draw_seed(rng);
        jobs.push_back(job);
    }
    return jobs;
}

std::vector<InstructionSample> run_seed_jobs(std::vector<SeedJob>& jobs, const RoleClient& teacher,
                                             const PromptLibrary& prompts, SeedReport* report) {
    auto drop = [&](const SeedJob& job, std::string why) {
        spdlog::debug("seed '{}' on {} dropped: {}", job.task->name, job.table->id, why);
        if (report) report->dropped.push_back(fmt::format("{} / {}: {}", job.table->id, job.task->name, why));
    };

    std::vector<ChatRequest> requests;
    for (const auto& job : jobs) {
        const TableFormat fmt = native_format(job.table->table_type);
        PromptVars vars = sample_vars(*job.table, fmt, "");
        vars.erase("instruction");
        vars["task_category"] = std::string(to_string(job.task->category));
        vars["task_name"] = std::string(job.task->name);
        vars["task_description"] = std::string(job.task->description);
        requests.push_back(teacher.request(prompts.render("seed_instruction", vars), "seed_instruction",
                                           job.instruction_seed));
    }
    auto outcomes = teacher.backend->complete_batch(requests);

    std::vector<SeedJob*> parsed;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (!outcomes[i].ok()) {
            drop(jobs[i], outcome_problem(outcomes[i]));
            continue;
        }
        auto instruction = parse_instruction_reply(outcomes[i].response->text);
        if (!instruction) {
            drop(jobs[i], "ParseFailure: no instruction in reply");
            continue;
        }
        jobs[i].instruction = std::move(*instruction);
        parsed.push_back(&jobs[i]);
    }

    std::vector<ChatRequest> answers;
    for (const SeedJob* job : parsed) {
        answers.push_back(answer_request(teacher, prompts, *job->table, native_format(job->table->table_type),
                                         job->instruction, "reference_answer", job->answer_seed));
    }
    auto answer_outcomes = teacher.backend->complete_batch(answers);

    std::vector<InstructionSample> out;
    for (std::size_t i = 0; i < parsed.size(); ++i) {
        const SeedJob& job = *parsed[i];
        if (!answer_outcomes[i].ok()) {
            drop(job, outcome_problem(answer_outcomes[i]));
            continue;
        }
        auto response = detail::trim(answer_outcomes[i].response->text);
        if (response.empty()) {
            drop(job, "empty reference response");
            continue;
        }
        InstructionSample s;
        s.id = content_id("r0-", {job.table->id, job.task->name});
        s.table_id = job.table->id;
        s.table_format = native_format(job.table->table_type);
        s.instruction = job.instruction;
        s.response = std::move(response);
        s.lineage.round = 0;
        s.lineage.origin_task = std::string(job.task->name);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace

std::vector<InstructionSample> generate_seed_instructions(const Table& table, std::span<const SeedTask> tasks,
                                                          std::size_t k, std::mt19937_64& rng,
                                                          const RoleClient& teacher, const PromptLibrary& prompts,
                                                          SeedReport* report) {
    auto jobs = plan_seed_jobs(table, tasks, k, rng);
    return run_seed_jobs(jobs, teacher, prompts, report);
}

std::vector<InstructionSample> generate_seed_instructions(const std::vector<Table>& tables, std::size_t k,
                                                          std::uint64_t master_seed, const RoleClient& teacher,
                                                          const PromptLibrary& prompts, SeedReport* report) {
    std::vector<SeedJob> jobs;
    for (const auto& table : tables) {
        std::mt19937_64 rng(derive_seed(master_seed, {"seed-instructions", table.id}));
        auto planned = plan_seed_jobs(table, seed_tasks(), k, rng);
        jobs.insert(jobs.end(), planned.begin(), planned.end());
    }
    return run_seed_jobs(jobs, teacher, prompts, report);
}

}  // namespace tabforge
