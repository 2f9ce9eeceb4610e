#include "tabforge/evolution.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "tabforge/formula.hpp"
#include "tabforge/hashing.hpp"
#include "tabforge/json_extract.hpp"
#include "tabforge/synthesis.hpp"
#include "text_util.hpp"

namespace tabforge {

std::string_view to_string(EvolutionErrc code) {
    switch (code) {
        case EvolutionErrc::ParseFailure: return "ParseFailure";
        case EvolutionErrc::InvalidEvolvedTable: return "InvalidEvolvedTable";
        case EvolutionErrc::StrategyMismatch: return "StrategyMismatch";
    }
    return "ParseFailure";
}

std::string_view direction_template(Direction d) {
    switch (d) {
        case Direction::InstructionComplication: return "evolve_complication";
        case Direction::InstructionGeneralization: return "evolve_generalization";
        case Direction::TableGeneralization: return "evolve_table";
    }
    return "evolve_complication";
}

TableFormat pick_new_format(TableFormat current, std::mt19937_64& rng) {
    std::vector<TableFormat> others;
    for (TableFormat f : kAllFormats) {
        if (f != current) others.push_back(f);
    }
    std::uniform_int_distribution<std::size_t> pick(0, others.size() - 1);
    return others[pick(rng)];
}

// ---------------------------------------------------------------- llm path

namespace {

struct Planned {
    std::size_t job;
    TableFormat format;
    ChatRequest request;
};

ParseHints hints_from(const Table& t) { return {t.table_type, t.header_spec}; }

std::int64_t answer_seed(std::int64_t seed) {
    return static_cast<std::int64_t>(derive_seed(static_cast<std::uint64_t>(seed), {"reference"}) >> 1);
}

}  // namespace

EvolutionResult evolve(const std::vector<EvolutionJob>& jobs, const RoleClient& teacher, const PromptLibrary& prompts,
                       std::size_t next_table_counter, const EvolveOptions& options) {
    EvolutionResult result;
    std::vector<Planned> planned;
    planned.reserve(jobs.size());
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const auto& job = jobs[i];
        if (info(job.strategy).direction != job.direction) {
            throw EvolutionError(EvolutionErrc::StrategyMismatch,
                                 fmt::format("strategy {} does not belong to {}", to_string(job.strategy),
                                             to_string(job.direction)));
        }
        const InstructionSample& parent = *job.parent;
        TableFormat target = parent.table_format;
        if (job.strategy == Strategy::ChangeFormat) {
            std::mt19937_64 rng(static_cast<std::uint64_t>(job.seed));
            target = pick_new_format(parent.table_format, rng);
        }
        PromptVars vars = sample_vars(*job.table, parent.table_format, parent.instruction);
        vars["strategy_name"] = std::string(info(job.strategy).name);
        vars["strategy_description"] = std::string(info(job.strategy).description);
        vars["target_format"] = std::string(display_name(target));
        const std::string_view tmpl = direction_template(job.direction);
        planned.push_back({i, target, teacher.request(prompts.render(tmpl, vars), std::string(tmpl), job.seed)});
    }

    std::vector<ChatRequest> requests;
    for (const auto& p : planned) requests.push_back(p.request);
    auto outcomes = teacher.backend->complete_batch(requests);

    auto drop = [&](std::size_t job, EvolutionErrc code, std::string reason) {
        spdlog::debug("evolution job {} dropped: {} {}", job, to_string(code), reason);
        result.dropped.push_back({job, code, std::move(reason)});
    };

    std::vector<std::size_t> candidate_job;
    for (std::size_t n = 0; n < planned.size(); ++n) {
        const auto& job = jobs[planned[n].job];
        const InstructionSample& parent = *job.parent;
        if (!outcomes[n].ok()) {
            drop(planned[n].job, EvolutionErrc::ParseFailure, fmt::format("llm: {}", outcomes[n].error));
            continue;
        }
        const std::string& text = outcomes[n].response->text;
        auto instruction = parse_instruction_reply(text);
        if (!instruction) {
            drop(planned[n].job, EvolutionErrc::ParseFailure, "no instruction in reply");
            continue;
        }

        Candidate cand;
        InstructionSample& s = cand.sample;
        s.lineage.round = parent.lineage.round + 1;
        s.lineage.parent_id = parent.id;
        s.lineage.direction = job.direction;
        s.lineage.strategy = job.strategy;
        s.lineage.origin_task = parent.lineage.origin_task;
        s.id = content_id(fmt::format("r{}-", s.lineage.round),
                          {parent.id, to_string(job.direction), to_string(job.strategy), std::to_string(job.ordinal)});
        s.instruction = std::move(*instruction);
        s.table_id = parent.table_id;
        s.table_format = parent.table_format;

        if (job.direction == Direction::TableGeneralization) {
            Table t;
            try {
                t = parse(text, planned[n].format, hints_from(*job.table));
                if (has_formulas(t)) t = evaluate_table(t);
            } catch (const std::exception& e) {
                drop(planned[n].job, EvolutionErrc::InvalidEvolvedTable, e.what());
                continue;
            }
            t.topic = job.table->topic;
            t.subtopic = job.table->subtopic;
            t.title = job.table->title;
            if (auto meta = last_json_object_with(text, "title"); meta && (*meta)["title"].is_string()) {
                auto title = detail::trim((*meta)["title"].get<std::string>());
                if (!title.empty()) t.title = std::move(title);
            }
            auto report = validate(t, {.limits = options.limits, .check_size = true, .require_resolved = true});
            if (!report.ok) {
                drop(planned[n].job, EvolutionErrc::InvalidEvolvedTable,
                     fmt::format("evolved table invalid: {}", to_string(report.violations.front())));
                continue;
            }
            t.id = make_table_id(t, next_table_counter++);
            s.table_id = t.id;
            s.table_format = planned[n].format;
            cand.new_table = std::move(t);
        }
        result.candidates.push_back(std::move(cand));
        candidate_job.push_back(planned[n].job);
    }

    // Fresh reference response for every candidate.
    std::vector<ChatRequest> answers;
    for (std::size_t i = 0; i < result.candidates.size(); ++i) {
        const auto& cand = result.candidates[i];
        const Table& table = cand.new_table ? *cand.new_table : *jobs[candidate_job[i]].table;
        answers.push_back(answer_request(teacher, prompts, table, cand.sample.table_format, cand.sample.instruction,
                                         "reference_answer", answer_seed(jobs[candidate_job[i]].seed)));
    }
    auto answer_outcomes = teacher.backend->complete_batch(answers);
    for (std::size_t i = 0; i < result.candidates.size(); ++i) {
        if (answer_outcomes[i].ok()) {
            result.candidates[i].sample.response = detail::trim(answer_outcomes[i].response->text);
        } else {
            spdlog::debug("reference answer for {} failed: {}", result.candidates[i].sample.id,
                          answer_outcomes[i].error);
        }
    }
    return result;
}

EvolutionResult evolve(const InstructionSample& sample, const Table& table, Direction direction, Strategy strategy,
                       const RoleClient& teacher, const PromptLibrary& prompts, std::int64_t seed,
                       std::size_t next_table_counter) {
    EvolutionJob job{&sample, &table, direction, strategy, 0, seed};
    return evolve(std::vector<EvolutionJob>{job}, teacher, prompts, next_table_counter);
}

// ---------------------------------------------------------------- permutation

namespace {

// Blocks of [first, last] along one axis. `spans(m)` gives a merge's extent
// on that axis. Positions before `first` are pinned: a merge reaching from
// the headers into the data pins the data slots it covers.
template <class Spans>
std::vector<std::pair<std::size_t, std::size_t>> blocks_along(const Table& t, std::size_t first, std::size_t last,
                                                              Spans spans) {
    auto joined = [&](std::size_t a) {  // is the boundary between a and a+1 inside some merge?
        for (const auto& m : t.merged_regions) {
            auto [lo, hi] = spans(m);
            if (lo <= a && hi >= a + 1) return true;
        }
        return false;
    };
    while (first <= last && first > 0 && joined(first - 1)) ++first;
    std::vector<std::pair<std::size_t, std::size_t>> out;
    if (first > last) return out;
    std::size_t start = first;
    for (std::size_t a = first; a < last; ++a) {
        if (!joined(a)) {
            out.emplace_back(start, a);
            start = a + 1;
        }
    }
    out.emplace_back(start, last);
    return out;
}

// Old index -> new index along one axis.
std::vector<std::size_t> axis_map(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& blocks,
                                  const std::vector<std::size_t>& order) {
    std::vector<std::size_t> map(n);
    std::iota(map.begin(), map.end(), 0);
    if (blocks.empty()) return map;
    std::size_t pos = blocks.front().first;
    for (std::size_t b : order) {
        for (std::size_t i = blocks[b].first; i <= blocks[b].second; ++i) map[i] = pos++;
    }
    return map;
}

void check_order(const std::vector<std::size_t>& order, std::size_t n, const char* axis) {
    std::vector<std::size_t> sorted = order;
    std::sort(sorted.begin(), sorted.end());
    bool ok = sorted.size() == n;
    for (std::size_t i = 0; ok && i < n; ++i) ok = sorted[i] == i;
    if (!ok) throw std::invalid_argument(fmt::format("{} permutation is not a permutation of {} blocks", axis, n));
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> row_blocks(const Table& table) {
    const Rect d = data_region(table);
    return blocks_along(table, d.first_row, d.last_row, [](const MergedRegion& m) {
        return std::pair{m.top_row, m.top_row + m.row_span - 1};
    });
}

std::vector<std::pair<std::size_t, std::size_t>> col_blocks(const Table& table) {
    const Rect d = data_region(table);
    return blocks_along(table, d.first_col, d.last_col, [](const MergedRegion& m) {
        return std::pair{m.left_col, m.left_col + m.col_span - 1};
    });
}

Table apply_permutation(const Table& table, const Permutation& perm) {
    const auto rb = row_blocks(table);
    const auto cb = col_blocks(table);
    check_order(perm.row_blocks, rb.size(), "row");
    check_order(perm.col_blocks, cb.size(), "column");
    const auto row_map = axis_map(table.n_rows, rb, perm.row_blocks);
    const auto col_map = axis_map(table.n_cols, cb, perm.col_blocks);

    const Table src = has_formulas(table) ? materialize(table) : table;
    Table out = src;
    for (std::size_t r = 0; r < src.n_rows; ++r) {
        for (std::size_t c = 0; c < src.n_cols; ++c) out.cells[row_map[r]][col_map[c]] = src.cells[r][c];
    }
    for (auto& m : out.merged_regions) {
        m.top_row = row_map[m.top_row];
        m.left_col = col_map[m.left_col];
    }
    return out;
}

Permutation inverse(const Permutation& perm) {
    Permutation inv;
    inv.row_blocks.resize(perm.row_blocks.size());
    inv.col_blocks.resize(perm.col_blocks.size());
    for (std::size_t i = 0; i < perm.row_blocks.size(); ++i) inv.row_blocks[perm.row_blocks[i]] = i;
    for (std::size_t i = 0; i < perm.col_blocks.size(); ++i) inv.col_blocks[perm.col_blocks[i]] = i;
    return inv;
}

Permutation random_permutation(const Table& table, std::mt19937_64& rng) {
    Permutation p;
    p.row_blocks.resize(row_blocks(table).size());
    p.col_blocks.resize(col_blocks(table).size());
    std::iota(p.row_blocks.begin(), p.row_blocks.end(), 0);
    std::iota(p.col_blocks.begin(), p.col_blocks.end(), 0);
    // Fisher-Yates by hand: std::shuffle's draw pattern is library-specific.
    auto shuffle = [&](std::vector<std::size_t>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::uniform_int_distribution<std::size_t> pick(0, i - 1);
            std::swap(v[i - 1], v[pick(rng)]);
        }
    };
    shuffle(p.row_blocks);
    shuffle(p.col_blocks);
    return p;
}

Perturbed deterministic_perturb(const Table& table, Strategy strategy, TableFormat current, std::mt19937_64& rng) {
    switch (strategy) {
        case Strategy::ChangeFormat: return {table, pick_new_format(current, rng)};
        case Strategy::OrderPermutation: return {apply_permutation(table, random_permutation(table, rng)), current};
        default:
            throw EvolutionError(EvolutionErrc::StrategyMismatch,
                                 fmt::format("{} has no mechanical form", to_string(strategy)));
    }
}

// ---------------------------------------------------------------- filter

std::vector<Candidate> filter_candidates(const std::vector<Candidate>& candidates,
                                         const std::map<std::string, InstructionSample>& parents,
                                         const std::map<std::string, Table>& tables, const TableLimits& limits) {
    std::vector<Candidate> kept;
    for (const auto& cand : candidates) {
        const auto& s = cand.sample;
        auto why = [&]() -> std::string {
            if (detail::trim(s.instruction).empty()) return "empty instruction";
            if (detail::trim(s.response).empty()) return "empty response";
            const Table* table = nullptr;
            if (cand.new_table) {
                table = &*cand.new_table;
            } else if (auto it = tables.find(s.table_id); it != tables.end()) {
                table = &it->second;
            }
            if (!table) return "unknown table";
            if (!validate(*table, {.limits = limits, .check_size = true, .require_resolved = true}).ok) {
                return "invalid table";
            }
            if (s.lineage.parent_id) {
                auto p = parents.find(*s.lineage.parent_id);
                if (p != parents.end() && detail::trim(p->second.instruction) == detail::trim(s.instruction)) {
                    return "instruction unchanged";
                }
            }
            return {};
        }();
        if (why.empty()) {
            kept.push_back(cand);
        } else {
            spdlog::debug("candidate {} filtered: {}", s.id, why);
        }
    }
    return kept;
}

}  // namespace tabforge
