#include "tabforge/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "tabforge/evolution.hpp"
#include "tabforge/formats.hpp"
#include "tabforge/hashing.hpp"
#include "tabforge/judging.hpp"
#include "tabforge/offline.hpp"
#include "tabforge/registry.hpp"
#include "text_util.hpp"

namespace tabforge {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------- jsonl

std::vector<json> read_jsonl(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(fmt::format("cannot read {}", path.string()));
    std::vector<json> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (detail::trim(line).empty()) continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::parse_error& e) {
            throw std::runtime_error(fmt::format("{}:{}: {}", path.string(), n, e.what()));
        }
    }
    return out;
}

void write_text_atomic(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error(fmt::format("cannot write {}", tmp.string()));
        out << text;
        if (!out) throw std::runtime_error(fmt::format("write failed for {}", tmp.string()));
    }
    fs::rename(tmp, path);
}

void write_jsonl(const fs::path& path, const std::vector<json>& lines) {
    std::string text;
    for (const auto& j : lines) {
        text += j.dump();
        text.push_back('\n');
    }
    write_text_atomic(path, text);
}

// ---------------------------------------------------------------- backends

Backends with_cache(const Backends& inner, const fs::path& cache_dir) {
    return {std::make_shared<CachingBackend>(inner.teacher, cache_dir),
            std::make_shared<CachingBackend>(inner.target, cache_dir),
            std::make_shared<CachingBackend>(inner.judge, cache_dir)};
}

Backends make_backends(const PipelineConfig& cfg) {
    Backends b{make_backend(cfg.teacher), make_backend(cfg.target), make_backend(cfg.judge)};
    return cfg.cache ? with_cache(b, cfg.run_dir() / "cache") : b;
}

// ---------------------------------------------------------------- round state

json to_json(const RoundState& s) {
    return {{"round", s.round},
            {"input_seeds", s.input_seeds},
            {"candidates", s.candidates},
            {"judged", s.judged},
            {"weakness", s.weakness},
            {"completed", s.completed},
            {"jobs", s.jobs},
            {"evolution_dropped", s.evolution_dropped},
            {"filter_dropped", s.filter_dropped},
            {"target_failed", s.target_failed},
            {"unscorable", s.unscorable},
            {"flagged", s.flagged}};
}

RoundState round_state_from_json(const json& j) {
    RoundState s;
    s.round = j.at("round").get<std::size_t>();
    s.input_seeds = j.at("input_seeds").get<std::vector<std::string>>();
    s.candidates = j.at("candidates").get<std::vector<std::string>>();
    s.judged = j.at("judged").get<std::vector<std::string>>();
    s.weakness = j.at("weakness").get<std::vector<std::string>>();
    s.completed = j.at("completed").get<bool>();
    s.jobs = j.value("jobs", std::size_t{0});
    s.evolution_dropped = j.value("evolution_dropped", std::size_t{0});
    s.filter_dropped = j.value("filter_dropped", std::size_t{0});
    s.target_failed = j.value("target_failed", std::size_t{0});
    s.unscorable = j.value("unscorable", std::size_t{0});
    s.flagged = j.value("flagged", std::size_t{0});
    return s;
}

std::vector<std::string> stage_names(const PipelineConfig& cfg) {
    std::vector<std::string> out{"topics", "tables", "seeds"};
    if (!cfg.retain_all_seeds) out.emplace_back("seeds.judge");
    for (std::size_t k = 1; k <= cfg.n_rounds; ++k) {
        out.push_back(fmt::format("round{}.evolve", k));
        out.push_back(fmt::format("round{}.judge", k));
    }
    out.emplace_back("export");
    return out;
}

// ---------------------------------------------------------------- pipeline

namespace {

std::vector<json> samples_json(const std::vector<InstructionSample>& samples) {
    std::vector<json> out;
    for (const auto& s : samples) out.push_back(to_json(s));
    return out;
}

std::vector<InstructionSample> samples_from(const fs::path& path) {
    std::vector<InstructionSample> out;
    for (const auto& j : read_jsonl(path)) out.push_back(sample_from_json(j));
    return out;
}

std::vector<std::string> ids_of(const std::vector<InstructionSample>& samples) {
    std::vector<std::string> out;
    for (const auto& s : samples) out.push_back(s.id);
    return out;
}

fs::path round_dir(const fs::path& run, std::size_t round) { return run / fmt::format("round{}", round); }

bool sample_less(const InstructionSample& a, const InstructionSample& b) {
    return std::tie(a.lineage.round, a.id) < std::tie(b.lineage.round, b.id);
}

}  // namespace

Pipeline::Pipeline(PipelineConfig cfg, Backends backends, PromptLibrary prompts)
    : cfg_(std::move(cfg)), backends_(std::move(backends)), prompts_(std::move(prompts)) {
    check_config(cfg_);
    fs::create_directories(dir());
    const fs::path snapshot = dir() / "config.snapshot";
    const std::string text = to_toml(cfg_);
    if (fs::exists(dir() / "state.json")) {
        std::ifstream in(snapshot, std::ios::binary);
        std::stringstream old;
        old << in.rdbuf();
        if (old.str() != text) {
            throw ConfigError(fmt::format("{} was started with a different config; resume it with its own snapshot",
                                          dir().string()));
        }
        load_state();
        load_outputs();
    } else {
        write_text_atomic(snapshot, text);
        save_state();
    }
}

bool Pipeline::done(const std::string& stage) const {
    return std::find(completed_.begin(), completed_.end(), stage) != completed_.end();
}

void Pipeline::load_state() {
    std::ifstream in(dir() / "state.json", std::ios::binary);
    const json j = json::parse(in);
    completed_ = j.at("completed").get<std::vector<std::string>>();
    rounds_.clear();
    for (const auto& r : j.at("rounds")) rounds_.push_back(round_state_from_json(r));
    if (j.contains("halt_note") && !j["halt_note"].is_null()) halt_note_ = j["halt_note"].get<std::string>();
}

void Pipeline::save_state() const {
    json rounds = json::array();
    for (const auto& r : rounds_) rounds.push_back(to_json(r));
    const json j{{"completed", completed_},
                 {"rounds", rounds},
                 {"halt_note", halt_note_ ? json(*halt_note_) : json(nullptr)}};
    write_text_atomic(dir() / "state.json", j.dump(2) + "\n");
}

void Pipeline::mark_done(const std::string& stage) {
    completed_.push_back(stage);
    save_state();
}

void Pipeline::load_outputs() {
    const fs::path d = dir();
    if (done("topics")) {
        for (const auto& j : read_jsonl(d / "topics.jsonl")) topics_.push_back(topic_from_json(j));
    }
    auto add_tables = [&](const fs::path& path) {
        for (const auto& j : read_jsonl(path)) {
            Table t = table_from_json(j);
            table_order_.push_back(t.id);
            tables_.emplace(t.id, std::move(t));
        }
    };
    if (done("tables")) add_tables(d / "tables.jsonl");
    if (done("seeds")) seeds_ = samples_from(d / "seeds.jsonl");
    if (done("seeds.judge")) seed_weakness_ = samples_from(round_dir(d, 0) / "weakness.jsonl");
    for (std::size_t k = 1; k <= cfg_.n_rounds; ++k) {
        const fs::path rd = round_dir(d, k);
        if (done(fmt::format("round{}.evolve", k)) && fs::exists(rd / "candidates.jsonl")) {
            add_tables(rd / "tables.jsonl");
            candidates_[k] = samples_from(rd / "candidates.jsonl");
        }
        if (done(fmt::format("round{}.judge", k)) && fs::exists(rd / "weakness.jsonl")) {
            weakness_[k] = samples_from(rd / "weakness.jsonl");
        }
    }
}

bool Pipeline::run(const std::optional<std::string>& stop_after) {
    const auto stages = stage_names(cfg_);
    if (stop_after && std::find(stages.begin(), stages.end(), *stop_after) == stages.end()) {
        throw std::invalid_argument(fmt::format("unknown stage '{}'", *stop_after));
    }
    for (const auto& stage : stages) {
        if (!done(stage)) {
            spdlog::info("stage {}", stage);
            run_stage(stage);
            mark_done(stage);
        }
        if (stop_after && stage == *stop_after) break;
    }
    return done("export");
}

void Pipeline::run_until(const std::string& stage) { run(stage); }

void Pipeline::run_stage(const std::string& stage) {
    if (stage == "topics") return stage_topics();
    if (stage == "tables") return stage_tables();
    if (stage == "seeds") return stage_seeds();
    if (stage == "seeds.judge") return stage_seed_judge();
    if (stage == "export") return stage_export();
    std::size_t k = 0;
    char kind[16] = {};
    if (std::sscanf(stage.c_str(), "round%zu.%15s", &k, kind) == 2) {
        if (halt_note_) {
            spdlog::info("skipping {}: {}", stage, *halt_note_);
            return;
        }
        if (std::string_view(kind) == "evolve") return stage_evolve(k);
        if (std::string_view(kind) == "judge") return stage_judge(k);
    }
    throw std::invalid_argument(fmt::format("unknown stage '{}'", stage));
}

void Pipeline::stage_topics() {
    TopicRequest req;
    req.subtopics_per_topic = cfg_.subtopics_per_topic;
    req.titles_per_subtopic = cfg_.titles_per_subtopic;
    const std::size_t per_topic = req.subtopics_per_topic * req.titles_per_subtopic;
    req.n_topics = (cfg_.n_tables + per_topic - 1) / per_topic;
    RoleClient teacher{backends_.teacher, RoleTag::Teacher, cfg_.teacher.model, cfg_.teacher.temperature,
                       cfg_.teacher.max_tokens};
    topics_ = generate_topic_tree(req, teacher, prompts_, derive_seed(cfg_.master_seed, {"topics"}));
    std::vector<json> lines;
    for (const auto& t : topics_) lines.push_back(to_json(t));
    write_jsonl(dir() / "topics.jsonl", lines);
}

void Pipeline::stage_tables() {
    auto slots = title_slots(topics_);
    if (slots.size() < cfg_.n_tables) {
        spdlog::warn("topic tree holds {} titles, fewer than the {} tables requested", slots.size(), cfg_.n_tables);
    }
    if (slots.size() > cfg_.n_tables) slots.resize(cfg_.n_tables);
    RoleClient teacher{backends_.teacher, RoleTag::Teacher, cfg_.teacher.model, cfg_.teacher.temperature,
                       cfg_.teacher.max_tokens};
    SynthesisOptions opts;
    opts.attributes.limits = cfg_.limits;
    opts.attributes.formula_probability = cfg_.formula_probability;
    opts.retry_budget = cfg_.retry_budget;
    auto results = synthesize_tables(slots, derive_seed(cfg_.master_seed, {"tables"}), teacher, prompts_, opts);

    std::vector<json> lines, failures;
    for (auto& r : results) {
        if (!r.failures.empty()) {
            failures.push_back({{"slot", r.slot}, {"title", slots[r.slot].title}, {"failures", r.failures},
                                {"exhausted", !r.table.has_value()}});
        }
        if (!r.table) continue;
        lines.push_back(to_json(*r.table));
        table_order_.push_back(r.table->id);
        tables_.emplace(r.table->id, std::move(*r.table));
    }
    write_jsonl(dir() / "table_failures.jsonl", failures);
    write_jsonl(dir() / "tables.jsonl", lines);
    spdlog::info("{} of {} table slots produced a valid table", lines.size(), slots.size());
}

void Pipeline::stage_seeds() {
    std::vector<Table> tables;
    for (const auto& id : table_order_) tables.push_back(tables_.at(id));
    RoleClient teacher{backends_.teacher, RoleTag::Teacher, cfg_.teacher.model, cfg_.teacher.temperature,
                       cfg_.teacher.max_tokens};
    SeedReport report;
    seeds_ = generate_seed_instructions(tables, cfg_.seeds_per_table, derive_seed(cfg_.master_seed, {"seeds"}),
                                        teacher, prompts_, &report);
    for (const auto& line : report.dropped) spdlog::debug("seed dropped: {}", line);

    // Retained seeds skip the judge, so they are screened here.
    std::vector<json> flagged;
    if (cfg_.retain_all_seeds && cfg_.safety_screen) {
        RoleClient judge{backends_.judge, RoleTag::Judge, cfg_.judge.model, cfg_.judge.temperature,
                         cfg_.judge.max_tokens};
        std::vector<std::pair<const InstructionSample*, const Table*>> items;
        for (const auto& s : seeds_) items.emplace_back(&s, &tables_.at(s.table_id));
        auto verdicts = safety_screen(items, judge, prompts_);
        std::vector<InstructionSample> kept;
        for (std::size_t i = 0; i < seeds_.size(); ++i) {
            if (verdicts[i].flagged) {
                flagged.push_back({{"sample_id", seeds_[i].id}, {"reason", *verdicts[i].reason}});
            } else {
                kept.push_back(seeds_[i]);
            }
        }
        seeds_ = std::move(kept);
    }
    write_jsonl(dir() / "seeds_flagged.jsonl", flagged);
    write_jsonl(dir() / "seeds.jsonl", samples_json(seeds_));
    spdlog::info("{} seed samples over {} tables ({} dropped, {} flagged)", seeds_.size(), tables_.size(),
                 report.dropped.size(), flagged.size());
}

void Pipeline::stage_seed_judge() {
    RoundState state;
    state.round = 0;
    state.input_seeds = ids_of(seeds_);
    state.candidates = state.input_seeds;
    std::vector<InstructionSample> judged;
    auto records = judge_samples(seeds_, 0, judged, seed_weakness_, state);
    state.judged = ids_of(judged);
    state.weakness = ids_of(seed_weakness_);
    state.completed = true;
    const fs::path rd = round_dir(dir(), 0);
    write_jsonl(rd / "judgments.jsonl", records);
    write_jsonl(rd / "weakness.jsonl", samples_json(seed_weakness_));
    if (seed_weakness_.empty()) halt_note_ = "EmptyWeaknessSet: no seed sample scored below the threshold";
}

std::vector<InstructionSample> Pipeline::round_inputs(std::size_t round) const {
    if (round == 1) return cfg_.retain_all_seeds ? seeds_ : seed_weakness_;
    auto it = weakness_.find(round - 1);
    return it == weakness_.end() ? std::vector<InstructionSample>{} : it->second;
}

std::size_t Pipeline::next_table_counter() const {
    std::size_t max_counter = 0;
    for (const auto& [id, t] : tables_) {
        std::size_t n = 0;
        if (std::sscanf(id.c_str(), "T%zu-", &n) == 1) max_counter = std::max(max_counter, n);
    }
    return max_counter + 1;
}

void Pipeline::stage_evolve(std::size_t round) {
    const auto inputs = round_inputs(round);
    RoundState state;
    state.round = round;
    state.input_seeds = ids_of(inputs);
    if (inputs.empty()) {
        halt_note_ = fmt::format("EmptyWeaknessSet: round {} has no seed samples", round);
        spdlog::warn("{}", *halt_note_);
        rounds_.push_back(state);
        return;
    }

    std::vector<EvolutionJob> jobs;
    for (const auto& seed : inputs) {
        const Table& table = tables_.at(seed.table_id);
        for (Direction d : kAllDirections) {
            for (std::size_t ordinal = 0; ordinal < cfg_.children_per_direction; ++ordinal) {
                std::mt19937_64 rng(derive_seed(cfg_.master_seed, {"evolve", std::to_string(round), seed.id,
                                                                  to_string(d), std::to_string(ordinal)}));
                const Strategy s = sample_strategy(d, rng);
                jobs.push_back({&seed, &table, d, s, ordinal, static_cast<std::int64_t>(rng() >> 1)});
            }
        }
    }
    RoleClient teacher{backends_.teacher, RoleTag::Teacher, cfg_.teacher.model, cfg_.teacher.temperature,
                       cfg_.teacher.max_tokens};
    auto result = evolve(jobs, teacher, prompts_, next_table_counter(), {cfg_.limits});

    std::map<std::string, InstructionSample> parents;
    for (const auto& s : inputs) parents.emplace(s.id, s);
    auto kept = filter_candidates(result.candidates, parents, tables_, cfg_.limits);

    std::vector<InstructionSample> samples;
    std::vector<json> new_tables;
    for (auto& c : kept) {
        if (c.new_table) {
            new_tables.push_back(to_json(*c.new_table));
            table_order_.push_back(c.new_table->id);
            tables_.emplace(c.new_table->id, *c.new_table);
        }
        samples.push_back(c.sample);
    }
    state.jobs = jobs.size();
    state.evolution_dropped = result.dropped.size();
    state.filter_dropped = result.candidates.size() - kept.size();
    state.candidates = ids_of(samples);

    std::vector<json> drops;
    for (const auto& d : result.dropped) {
        drops.push_back({{"parent_id", jobs[d.job].parent->id}, {"direction", to_string(jobs[d.job].direction)},
                         {"strategy", to_string(jobs[d.job].strategy)}, {"error", to_string(d.code)},
                         {"reason", d.reason}});
    }
    const fs::path rd = round_dir(dir(), round);
    write_jsonl(rd / "evolution_drops.jsonl", drops);
    write_jsonl(rd / "tables.jsonl", new_tables);
    write_jsonl(rd / "candidates.jsonl", samples_json(samples));
    candidates_[round] = std::move(samples);
    rounds_.push_back(state);
    spdlog::info("round {}: {} jobs, {} candidates kept, {} dropped by evolution, {} by the filter", round,
                 state.jobs, state.candidates.size(), state.evolution_dropped, state.filter_dropped);
}

std::vector<json> Pipeline::judge_samples(const std::vector<InstructionSample>& samples, std::size_t round,
                                          std::vector<InstructionSample>& judged,
                                          std::vector<InstructionSample>& weak, RoundState& state) {
    RoleClient target{backends_.target, RoleTag::Target, cfg_.target.model, cfg_.target.temperature,
                      cfg_.target.max_tokens};
    RoleClient judge{backends_.judge, RoleTag::Judge, cfg_.judge.model, cfg_.judge.temperature,
                     cfg_.judge.max_tokens};

    std::vector<ChatRequest> requests;
    for (const auto& s : samples) requests.push_back(target_request(target, prompts_, s, tables_.at(s.table_id)));
    auto answers = target.backend->complete_batch(requests);

    std::vector<JudgmentRecord> records(samples.size());
    std::vector<JudgeJob> jobs;
    std::vector<std::size_t> job_sample;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        records[i].sample_id = samples[i].id;
        if (!answers[i].ok() || detail::trim(answers[i].response->text).empty()) {
            records[i].error = answers[i].ok() ? "empty target response" : "target: " + answers[i].error;
            ++state.target_failed;
            continue;
        }
        records[i].target_response = answers[i].response->text;
        jobs.push_back({&samples[i], &tables_.at(samples[i].table_id), answers[i].response->text});
        job_sample.push_back(i);
    }
    auto verdicts = judge_batch(jobs, judge, prompts_, cfg_.judge_reasks, cfg_.weakness_threshold);

    for (std::size_t n = 0; n < jobs.size(); ++n) {
        const std::size_t i = job_sample[n];
        records[i].attempts = verdicts[n].attempts;
        if (!verdicts[n].verdict) {
            records[i].error = verdicts[n].error;
            ++state.unscorable;
            continue;
        }
        records[i].score = verdicts[n].verdict->score;
        records[i].rationale = verdicts[n].verdict->rationale;
        InstructionSample s = samples[i];
        s.judge_score = verdicts[n].verdict->score;
        judged.push_back(std::move(s));
    }

    auto parts = partition(judged, cfg_.weakness_threshold);
    std::map<std::string, std::string> flagged;
    if (cfg_.safety_screen && !parts.weakness.empty()) {
        std::vector<std::pair<const InstructionSample*, const Table*>> items;
        for (const auto& s : parts.weakness) items.emplace_back(&s, &tables_.at(s.table_id));
        auto screens = safety_screen(items, judge, prompts_);
        for (std::size_t i = 0; i < screens.size(); ++i) {
            if (screens[i].flagged) flagged.emplace(parts.weakness[i].id, *screens[i].reason);
        }
    }
    for (auto& s : parts.weakness) {
        if (!flagged.count(s.id)) weak.push_back(std::move(s));
    }
    state.flagged = flagged.size();

    std::vector<json> lines;
    for (const auto& r : records) {
        json j = to_json(r);
        j["round"] = round;
        if (auto f = flagged.find(r.sample_id); f != flagged.end()) j["flagged"] = f->second;
        lines.push_back(std::move(j));
    }
    return lines;
}

void Pipeline::stage_judge(std::size_t round) {
    auto& state = rounds_.back();
    if (state.round != round) throw std::logic_error("round state out of order");
    std::vector<InstructionSample> judged, weak;
    auto records = judge_samples(candidates_[round], round, judged, weak, state);
    state.judged = ids_of(judged);
    state.weakness = ids_of(weak);
    state.completed = true;
    const fs::path rd = round_dir(dir(), round);
    write_jsonl(rd / "judgments.jsonl", records);
    write_jsonl(rd / "weakness.jsonl", samples_json(weak));
    spdlog::info("round {}: {} judged, {} weak, {} unscorable, {} flagged", round, judged.size(), weak.size(),
                 state.unscorable, state.flagged);
    weakness_[round] = std::move(weak);
    if (weakness_[round].empty()) {
        halt_note_ = fmt::format("EmptyWeaknessSet: round {} produced no weakness samples", round);
        spdlog::warn("{}", *halt_note_);
    }
}

Dataset Pipeline::dataset() const {
    Dataset d;
    d.samples = cfg_.retain_all_seeds ? seeds_ : seed_weakness_;
    for (const auto& [round, weak] : weakness_) d.samples.insert(d.samples.end(), weak.begin(), weak.end());
    std::sort(d.samples.begin(), d.samples.end(), sample_less);
    for (const auto& s : d.samples) d.tables.emplace(s.table_id, tables_.at(s.table_id));
    return d;
}

void Pipeline::stage_export() {
    export_dataset(dataset(), export_path());
}

// ---------------------------------------------------------------- export

json to_json(const ExportRecord& r) {
    const auto& s = r.sample;
    return {{"id", s.id},
            {"table_id", s.table_id},
            {"table_format", to_string(s.table_format)},
            {"table_text", r.table_text},
            {"table_title", r.table_title},
            {"instruction", s.instruction},
            {"response", s.response},
            {"lineage", to_json(s.lineage)},
            {"judge_score", s.judge_score ? json(*s.judge_score) : json(nullptr)}};
}

ExportRecord export_record_from_json(const json& j) {
    ExportRecord r;
    auto& s = r.sample;
    s.id = j.at("id").get<std::string>();
    s.table_id = j.at("table_id").get<std::string>();
    s.table_format = table_format_from_string(j.at("table_format").get<std::string>());
    s.instruction = j.at("instruction").get<std::string>();
    s.response = j.at("response").get<std::string>();
    s.lineage = lineage_from_json(j.at("lineage"));
    if (j.contains("judge_score") && !j["judge_score"].is_null()) s.judge_score = j["judge_score"].get<int>();
    r.table_title = j.value("table_title", "");
    r.table_text = j.at("table_text").get<std::string>();
    return r;
}

void export_dataset(const Dataset& dataset, const fs::path& path) {
    auto samples = dataset.samples;
    std::sort(samples.begin(), samples.end(), sample_less);
    std::vector<json> lines;
    for (const auto& s : samples) {
        auto it = dataset.tables.find(s.table_id);
        if (it == dataset.tables.end()) {
            throw std::runtime_error(fmt::format("sample {} refers to unknown table {}", s.id, s.table_id));
        }
        lines.push_back(to_json(ExportRecord{s, it->second.title, serialize(it->second, s.table_format)}));
    }
    write_jsonl(path, lines);
}

std::vector<ExportRecord> read_export(const fs::path& path) {
    std::vector<ExportRecord> out;
    for (const auto& j : read_jsonl(path)) out.push_back(export_record_from_json(j));
    return out;
}

std::vector<std::string> check_lineage(const std::vector<ExportRecord>& records) {
    std::vector<std::string> problems;
    std::map<std::string, const InstructionSample*> by_id;
    for (const auto& r : records) by_id.emplace(r.sample.id, &r.sample);
    for (const auto& r : records) {
        const auto& s = r.sample;
        if (!lineage_consistent(s.lineage)) problems.push_back(fmt::format("{}: inconsistent lineage", s.id));
        if (s.table_id.empty() || r.table_text.empty()) problems.push_back(fmt::format("{}: no table", s.id));
        const InstructionSample* cur = &s;
        std::size_t steps = 0;
        bool broken = false;
        while (cur->lineage.parent_id && !broken) {
            auto p = by_id.find(*cur->lineage.parent_id);
            if (p == by_id.end()) {
                problems.push_back(fmt::format("{}: parent {} missing", s.id, *cur->lineage.parent_id));
                broken = true;
            } else if (p->second->lineage.round + 1 != cur->lineage.round) {
                problems.push_back(fmt::format("{}: parent round mismatch", cur->id));
                broken = true;
            } else if (++steps > records.size()) {
                problems.push_back(fmt::format("{}: parent cycle", s.id));
                broken = true;
            } else {
                cur = p->second;
            }
        }
        if (!broken && steps != s.lineage.round) {
            problems.push_back(fmt::format("{}: chain length {} != round {}", s.id, steps, s.lineage.round));
        }
    }
    return problems;
}

// ---------------------------------------------------------------- stats

MetricStats summarize(std::vector<double> v) {
    MetricStats m;
    if (v.empty()) return m;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    m.min = v.front();
    m.max = v.back();
    m.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
    m.median = n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
    return m;
}

DatasetStats compute_stats(const std::vector<ExportRecord>& records) {
    DatasetStats s;
    s.n_samples = records.size();
    std::vector<double> rows, cols, cells, instr, output;
    std::set<std::string> seen;
    for (const auto& r : records) {
        instr.push_back(static_cast<double>(detail::count_words(r.sample.instruction)));
        output.push_back(static_cast<double>(detail::count_words(r.sample.response)));
        if (!seen.insert(r.sample.table_id).second) continue;
        const Table t = parse(r.table_text, r.sample.table_format);
        rows.push_back(static_cast<double>(t.n_rows));
        cols.push_back(static_cast<double>(t.n_cols));
        cells.push_back(static_cast<double>(t.n_rows * t.n_cols));
    }
    s.n_tables = seen.size();
    s.rows = summarize(rows);
    s.cols = summarize(cols);
    s.cells = summarize(cells);
    s.instruction_words = summarize(instr);
    s.output_words = summarize(output);
    s.avg_instructions_per_table = s.n_tables ? static_cast<double>(s.n_samples) / static_cast<double>(s.n_tables) : 0;
    return s;
}

json to_json(const DatasetStats& s) {
    auto m = [](const MetricStats& x) {
        return json{{"median", x.median}, {"mean", x.mean}, {"min", x.min}, {"max", x.max}};
    };
    return {{"samples", s.n_samples},
            {"tables", s.n_tables},
            {"table_rows", m(s.rows)},
            {"table_cols", m(s.cols)},
            {"table_cells", m(s.cells)},
            {"instruction_words", m(s.instruction_words)},
            {"output_words", m(s.output_words)},
            {"avg_instructions_per_table", s.avg_instructions_per_table}};
}

std::string format_stats(const DatasetStats& s) {
    std::string out = fmt::format("{} samples over {} tables\n\n", s.n_samples, s.n_tables);
    out += fmt::format("{:<22} {:>10} {:>10} {:>10} {:>10}\n", "metric", "median", "mean", "min", "max");
    auto row = [&](std::string_view name, const MetricStats& m) {
        out += fmt::format("{:<22} {:>10.1f} {:>10.2f} {:>10.0f} {:>10.0f}\n", name, m.median, m.mean, m.min, m.max);
    };
    row("table rows", s.rows);
    row("table cols", s.cols);
    row("table cells", s.cells);
    row("instruction words", s.instruction_words);
    row("output words", s.output_words);
    out += fmt::format("{:<22} {:>10.2f}\n", "instructions / table", s.avg_instructions_per_table);
    return out;
}

}  // namespace tabforge
