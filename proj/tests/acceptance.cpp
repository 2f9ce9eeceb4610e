// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails. Criterion 11 talks to a real endpoint
// and only runs when TABFORGE_LIVE_ENDPOINT is set.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/sinks/ringbuffer_sink.h>
#include <spdlog/spdlog.h>

#include "formula_oracle.hpp"
#include "random_tables.hpp"
#include "table_oracle.hpp"
#include "tabforge/eval.hpp"
#include "tabforge/evolution.hpp"
#include "tabforge/formula.hpp"
#include "tabforge/hashing.hpp"
#include "tabforge/judging.hpp"
#include "tabforge/offline.hpp"
#include "tabforge/pipeline.hpp"
#include "tabforge/registry.hpp"
#include "tabforge/synthesis.hpp"

using namespace tabforge;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned limits.
constexpr double kPipelineSeconds = 60.0;      // criterion 1, per run
constexpr double kFormulaSeconds = 10.0;       // criterion 3
constexpr double kStrategyTolerance = 0.04;    // criterion 5, absolute
constexpr double kStatsTolerance = 1e-9;       // criterion 10
constexpr std::size_t kFuzzTables = 1000;      // criterion 4
constexpr std::size_t kStrategyDraws = 10000;  // criterion 5, per direction
constexpr std::size_t kAttributeDraws = 10000; // criterion 6

const fs::path kData = TABFORGE_TEST_DATA;
const fs::path kWork = fs::temp_directory_path() / "tabforge_acceptance";

struct Outcome {
    bool pass = true;
    std::string detail;
    std::vector<std::string> problems;

    void require(bool ok, std::string what) {
        if (!ok) {
            pass = false;
            if (problems.size() < 5) problems.push_back(std::move(what));
        }
    }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

PipelineConfig mock_config(const std::string& run_id, std::size_t n_tables, std::string judge = "mock") {
    PipelineConfig cfg;
    cfg.master_seed = 20240601;
    cfg.run_root = (kWork / "runs").string();
    cfg.run_id = run_id;
    cfg.n_tables = n_tables;
    cfg.seeds_per_table = 2;
    cfg.n_rounds = 2;
    cfg.cache = false;
    cfg.teacher.endpoint = "mock";
    cfg.target.endpoint = "mock";
    cfg.judge.endpoint = std::move(judge);
    fs::remove_all(cfg.run_dir());
    return cfg;
}

// Offline backends that record the fingerprint of every request they serve.
struct Recorder {
    std::mutex mu;
    std::vector<std::string> fingerprints;
};

Backends recording_backends(const PipelineConfig& cfg, const std::shared_ptr<Recorder>& rec) {
    auto wrap = [&](const BackendConfig& b) -> std::shared_ptr<ChatBackend> {
        const auto opts = *offline_options_from_endpoint(b.endpoint);
        auto inner = offline_responder(opts);
        const std::size_t workers = opts.judge == OfflineJudge::Cycle ? 1 : b.max_in_flight;
        return std::make_shared<ScriptedBackend>(
            [inner, rec](const ChatRequest& req) {
                {
                    std::lock_guard lock(rec->mu);
                    rec->fingerprints.push_back(fingerprint(req));
                }
                return inner(req);
            },
            workers);
    };
    return {wrap(cfg.teacher), wrap(cfg.target), wrap(cfg.judge)};
}

// Weak ids per round recomputed from the audit log: scored below the
// threshold and not flagged by the safety screen.
std::vector<std::string> weak_from_judgments(const fs::path& file, int threshold) {
    std::vector<std::string> out;
    for (const auto& j : read_jsonl(file)) {
        if (j["score"].is_null() || j.contains("flagged")) continue;
        if (j["score"].get<int>() < threshold) out.push_back(j["sample_id"].get<std::string>());
    }
    return out;
}

// ---------------------------------------------------------------- 1

fs::path g_reference_export;

Outcome criterion1() {
    Outcome o;
    std::vector<std::string> exports;
    double slowest = 0;
    for (const char* id : {"c1_a", "c1_b"}) {
        const auto cfg = mock_config(id, 50);
        const auto t0 = Clock::now();
        Pipeline p(cfg, make_backends(cfg));
        o.require(p.run(), "pipeline did not finish");
        const double secs = seconds_since(t0);
        slowest = std::max(slowest, secs);
        o.require(secs < kPipelineSeconds, fmt::format("run {} took {:.1f} s", id, secs));
        exports.push_back(slurp(p.export_path()));
        g_reference_export = p.export_path();

        const auto records = read_export(p.export_path());
        const auto problems = check_lineage(records);
        o.require(problems.empty(), problems.empty() ? "" : problems.front());
        std::size_t expected = read_jsonl(p.dir() / "seeds.jsonl").size();
        for (std::size_t k = 1; k <= cfg.n_rounds; ++k) {
            const auto file = p.dir() / fmt::format("round{}", k) / "judgments.jsonl";
            if (fs::exists(file)) expected += weak_from_judgments(file, cfg.weakness_threshold).size();
        }
        o.require(records.size() == expected,
                  fmt::format("export has {} records, audit log implies {}", records.size(), expected));
        o.detail = fmt::format("{} records, {} tables", records.size(), compute_stats(records).n_tables);
    }
    o.require(exports[0] == exports[1], "exports differ between runs");
    o.detail += fmt::format(", byte-identical exports, lineage ok, slowest run {:.2f} s (limit {} s)", slowest,
                            kPipelineSeconds);
    return o;
}

// ---------------------------------------------------------------- 2

Outcome criterion2() {
    Outcome o;
    for (int k = 1; k <= 5; ++k) {
        o.require(make_verdict(k, "", kDefaultWeaknessThreshold).is_weakness == (k < 3),
                  fmt::format("score {} misclassified", k));
    }
    const auto cfg = mock_config("c2", 20, "mock:cycle,reply_fail=0");
    Pipeline p(cfg, make_backends(cfg));
    o.require(p.run(), "pipeline did not finish");

    std::set<int> seen;
    std::set<std::string> all_weak;
    std::size_t judged = 0;
    for (std::size_t k = 1; k <= cfg.n_rounds; ++k) {
        const auto dir = p.dir() / fmt::format("round{}", k);
        std::vector<std::string> weak;
        for (const auto& j : read_jsonl(dir / "judgments.jsonl")) {
            const int score = j.at("score").get<int>();
            seen.insert(score);
            ++judged;
            if (score < 3) weak.push_back(j["sample_id"].get<std::string>());
        }
        std::vector<std::string> file_weak;
        for (const auto& j : read_jsonl(dir / "weakness.jsonl")) {
            file_weak.push_back(j["id"].get<std::string>());
            const int score = j["judge_score"].get<int>();
            o.require(score == 1 || score == 2, fmt::format("weakness sample with score {}", score));
        }
        o.require(file_weak == weak, fmt::format("round {} weakness set differs from scores 1-2", k));
        if (k < cfg.n_rounds) {
            o.require(p.rounds().at(k).input_seeds == weak, fmt::format("round {} seeds are not round {} weakness",
                                                                        k + 1, k));
        }
        all_weak.insert(weak.begin(), weak.end());
    }
    o.require(seen == std::set<int>{1, 2, 3, 4, 5}, "not every score occurred");

    std::set<std::string> evolved;
    for (const auto& r : read_export(p.export_path())) {
        if (r.sample.lineage.round == 0) continue;
        evolved.insert(r.sample.id);
        o.require(r.sample.judge_score && *r.sample.judge_score < 3, fmt::format("{} exported with score >= 3",
                                                                               r.sample.id));
    }
    o.require(evolved == all_weak, "evolved export differs from the weakness sets");
    o.detail = fmt::format("{} judged over scores {{1..5}}, {} weak, all with score 1 or 2", judged, all_weak.size());
    return o;
}

// ---------------------------------------------------------------- 3

Outcome criterion3() {
    Outcome o;
    const auto t0 = Clock::now();
    std::mt19937_64 rng(3003);
    std::size_t formulas = 0, cells = 0;
    for (int i = 0; i < 1000; ++i) {
        auto ot = testing::random_formula_table(rng, 10, false);
        formulas += ot.formulas.size();
        const auto expected = testing::fixed_point_oracle(ot);
        if (!expected) {
            o.require(false, "oracle did not converge on an acyclic table");
            continue;
        }
        const Table out = evaluate_table(ot.table);
        for (const auto& [at, text] : *expected) {
            ++cells;
            o.require(out.cells[at.row][at.col].resolved_text == text,
                      fmt::format("table {} cell R{}C{}", i, at.row + 1, at.col + 1));
        }
    }
    std::size_t cyclic = 0;
    for (int i = 0; i < 100; ++i) {
        auto ot = testing::random_formula_table(rng, 10, true);
        try {
            evaluate_table(ot.table);
        } catch (const FormulaError& e) {
            if (e.code() == FormulaErrc::CyclicFormula) ++cyclic;
        }
    }
    o.require(cyclic == 100, fmt::format("{} of 100 cyclic cases raised CyclicFormula", cyclic));
    const double secs = seconds_since(t0);
    o.require(secs < kFormulaSeconds, fmt::format("took {:.2f} s", secs));
    o.detail = fmt::format("1000 acyclic tables ({} formulas, {} cells) equal the oracle, {}/100 cyclic rejected, "
                           "{:.2f} s (limit {} s)",
                           formulas, cells, cyclic, secs, kFormulaSeconds);
    return o;
}

// ---------------------------------------------------------------- 4

std::vector<std::string> sorted_slots(const Table& t) {
    auto v = expanded_texts(t);
    std::sort(v.begin(), v.end());
    return v;
}

Outcome criterion4() {
    Outcome o;
    std::mt19937_64 rng(4004);
    const TableFormat text_formats[] = {TableFormat::Markdown, TableFormat::Csv, TableFormat::Tsv};
    const TableFormat all_formats[] = {TableFormat::Html, TableFormat::Markdown, TableFormat::Csv, TableFormat::Tsv};
    std::size_t merged_tables = 0, moved = 0;
    for (std::size_t i = 0; i < kFuzzTables; ++i) {
        const Table flat = testing::random_table(rng, {.merges = false});
        o.require(validate(flat).ok, fmt::format("generated table {} invalid", i));
        for (TableFormat f : text_formats) {
            const Table back = parse(serialize(flat, f), f, {flat.table_type, flat.header_spec});
            o.require(same_structure(back, flat), fmt::format("{} round trip, table {}", to_string(f), i));
        }

        const Table t = testing::random_table(rng);
        o.require(validate(t).ok, fmt::format("generated merged table {} invalid", i));
        if (!t.merged_regions.empty()) ++merged_tables;
        const Table back = parse(serialize(t, TableFormat::Html), TableFormat::Html);
        o.require(same_structure(back, t) && back.title == t.title, fmt::format("HTML round trip, table {}", i));

        const auto slots = sorted_slots(t);
        for (TableFormat f : all_formats) {
            const Table conv = parse(convert(t, f), f, {t.table_type, t.header_spec});
            o.require(sorted_slots(conv) == slots, fmt::format("convert to {} changed cells, table {}", to_string(f), i));
        }
        const Table perm = apply_permutation(t, random_permutation(t, rng));
        o.require(sorted_slots(perm) == slots, fmt::format("permutation changed cells, table {}", i));
        o.require(validate(perm).ok, fmt::format("permuted table {} invalid", i));
        if (!same_structure(perm, t)) ++moved;
    }
    o.detail = fmt::format("{} merge-free and {} merged tables ({} with merges); {} permutations moved data",
                           kFuzzTables, kFuzzTables, merged_tables, moved);
    return o;
}

// ---------------------------------------------------------------- 5

Outcome criterion5() {
    Outcome o;
    const std::map<Direction, std::vector<std::string>> expected{
        {Direction::InstructionComplication,
         {"Add Constraints", "Increase Depth", "Add Reasoning Steps", "Add Task Number", "Add Details",
          "Increase Length", "Add Context"}},
        {Direction::InstructionGeneralization, {"New Instruction", "Similar Instruction"}},
        {Direction::TableGeneralization,
         {"Change Format", "Modify Header", "Modify Data", "Order Permutation", "Insert/Remove Data"}},
    };
    o.require(strategies().size() == 14, fmt::format("{} strategies", strategies().size()));
    double worst = 0;
    for (const auto& [dir, names] : expected) {
        const auto got = strategies_of(dir);
        std::vector<std::string> got_names;
        for (Strategy s : got) got_names.emplace_back(info(s).name);
        o.require(got_names == names, fmt::format("{} names differ", to_string(dir)));

        std::mt19937_64 rng(derive_seed(5005, {to_string(dir)}));
        std::map<Strategy, std::size_t> counts;
        for (std::size_t i = 0; i < kStrategyDraws; ++i) ++counts[sample_strategy(dir, rng)];
        const double uniform = 1.0 / static_cast<double>(got.size());
        for (Strategy s : got) {
            const double freq = static_cast<double>(counts[s]) / static_cast<double>(kStrategyDraws);
            worst = std::max(worst, std::abs(freq - uniform));
            o.require(std::abs(freq - uniform) <= kStrategyTolerance,
                      fmt::format("{} frequency {:.4f}", info(s).name, freq));
        }
        o.require(counts.size() == got.size(), "a draw left its direction");
    }
    o.detail = fmt::format("14 strategies split 7/2/5 with expected names; max |freq - uniform| = {:.4f} (limit {})",
                           worst, kStrategyTolerance);
    return o;
}

// ---------------------------------------------------------------- 6

Outcome criterion6() {
    Outcome o;
    std::mt19937_64 rng(6006);
    std::set<std::pair<int, int>> combos;
    std::size_t min_r = 1000, max_r = 0, min_c = 1000, max_c = 0;
    for (std::size_t i = 0; i < kAttributeDraws; ++i) {
        const auto a = sample_attributes(rng);
        min_r = std::min(min_r, a.n_rows);
        max_r = std::max(max_r, a.n_rows);
        min_c = std::min(min_c, a.n_cols);
        max_c = std::max(max_c, a.n_cols);
        o.require(a.n_rows >= 4 && a.n_rows <= 43, fmt::format("rows {}", a.n_rows));
        o.require(a.n_cols >= 4 && a.n_cols <= 45, fmt::format("cols {}", a.n_cols));
        if (a.table_type == TableType::Hierarchical) {
            const int c = a.header_spec.column_header_levels, r = a.header_spec.row_header_levels;
            o.require(c >= 1 && c <= 3 && r >= 1 && r <= 2, fmt::format("levels {}x{}", c, r));
            combos.insert({c, r});
        }
    }
    o.require(combos.size() == 6, fmt::format("{} level combinations seen", combos.size()));
    o.detail = fmt::format("rows seen [{}, {}], cols seen [{}, {}], {} hierarchical level combinations", min_r, max_r,
                           min_c, max_c, combos.size());
    return o;
}

// ---------------------------------------------------------------- 7

Outcome criterion7() {
    Outcome o;
    const auto rows = read_jsonl(kData / "judge_replies.jsonl");
    o.require(rows.size() == 30, fmt::format("fixture has {} rows", rows.size()));

    Table t = make_table({{"Item", "Value"}, {"a", "1"}, {"b", "2"}, {"c", "3"}}, TableType::Flat, {1, 0});
    t.id = make_table_id(t, 1);
    std::vector<InstructionSample> samples(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        samples[i].id = fmt::format("r1-item{:02}", i);
        samples[i].table_id = t.id;
        samples[i].instruction = fmt::format("Case-{:02}: report the value of row a.", i);
        samples[i].response = "1";
    }
    // Each sample always gets its own fixture reply, on every attempt.
    auto judge_backend = std::make_shared<ScriptedBackend>(
        [&rows](const ChatRequest& req) {
            const auto at = req.user.find("Case-");
            const std::size_t i = std::stoul(req.user.substr(at + 5, 2));
            return rows.at(i)["reply"].get<std::string>();
        },
        4);
    const RoleClient judge_client{judge_backend, RoleTag::Judge, "judge", 0.01, 512};

    auto ring = std::make_shared<spdlog::sinks::ringbuffer_sink_mt>(64);
    auto previous = spdlog::default_logger();
    spdlog::set_default_logger(std::make_shared<spdlog::logger>("acceptance", ring));

    std::vector<JudgeJob> jobs;
    for (const auto& s : samples) jobs.push_back({&s, &t, "1"});
    std::vector<JudgeOutcome> out;
    try {
        out = judge_batch(jobs, judge_client, PromptLibrary::builtin(), 2, kDefaultWeaknessThreshold);
    } catch (const std::exception& e) {
        o.require(false, fmt::format("judge_batch threw: {}", e.what()));
    }
    spdlog::set_default_logger(previous);
    if (out.size() != rows.size()) return o;

    std::size_t parsed = 0, excluded = 0;
    std::vector<InstructionSample> judged;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i]["score"].is_null()) {
            o.require(!out[i].verdict && out[i].attempts == 3, fmt::format("malformed row {} not excluded", i));
            ++excluded;
        } else {
            const bool ok = out[i].verdict && out[i].verdict->score == rows[i]["score"].get<int>();
            o.require(ok, fmt::format("row {} parsed wrong", i));
            if (ok) {
                ++parsed;
                auto s = samples[i];
                s.judge_score = out[i].verdict->score;
                judged.push_back(s);
            }
        }
    }
    const auto parts = partition(judged);
    o.require(parts.weakness.size() + parts.passed.size() == parsed, "partition lost samples");
    std::size_t logged = 0;
    for (const auto& line : ring->last_formatted()) {
        if (line.find("unscorable") != std::string::npos) ++logged;
    }
    o.require(logged == excluded, fmt::format("{} unscorable log lines for {} exclusions", logged, excluded));
    o.detail = fmt::format("{} scores parsed, {} malformed excluded after 3 attempts and logged, no crash", parsed,
                           excluded);
    return o;
}

// ---------------------------------------------------------------- 8

Outcome criterion8() {
    Outcome o;
    const auto records = load_benchmark(kData / "eval_fixture.jsonl");
    std::map<std::string, nlohmann::json> responses;
    std::size_t hand = 0;
    for (const auto& j : read_jsonl(kData / "eval_fixture_responses.jsonl")) {
        responses[j["id"].get<std::string>()] = j;
        hand += j["hand_correct"].get<std::size_t>();
    }
    auto scripted = std::make_shared<ScriptedBackend>([&](const ChatRequest& req) {
        for (const auto& r : records) {
            if (req.user.find(r.question) != std::string::npos) return responses.at(r.id)["response"].get<std::string>();
        }
        return std::string();
    });
    const RoleClient model{scripted, RoleTag::Target, "model", 0.01, 512};
    const auto report = run_eval(records, {}, model);
    std::size_t n = 0, correct = 0;
    for (const auto& b : report.benchmarks) {
        n += b.n;
        correct += b.correct;
    }
    const double expected = static_cast<double>(hand) / static_cast<double>(records.size());
    std::set<double> scripted_variants;
    for (const auto& [key, acc] : report.by_variant) scripted_variants.insert(acc);
    o.require(records.size() == 20 && hand == 13, "fixture is not the shipped 20/13 fixture");
    o.require(correct * records.size() == hand * n, fmt::format("accuracy {}/{} vs hand {}/20", correct, n, hand));
    o.require(scripted_variants.size() == 1 && *scripted_variants.begin() == expected,
              "scripted accuracy differs between variants");

    const RoleClient reader{std::make_shared<ScriptedBackend>(oracle::respond), RoleTag::Target, "oracle", 0.01, 512};
    const auto oracle_report = run_eval(records, {}, reader);
    std::set<double> oracle_variants;
    for (const auto& [key, acc] : oracle_report.by_variant) oracle_variants.insert(acc);
    o.require(oracle_report.by_variant.size() == 12, "expected 3 templates x 4 formats");
    o.require(oracle_variants.size() == 1, "oracle accuracy differs between variants");
    o.detail = fmt::format("scripted accuracy {:.2f} ({}/{}) in all 12 variants, hand count {}/20; oracle {:.2f} in "
                           "all 12 variants",
                           static_cast<double>(correct) / static_cast<double>(n), correct, n, hand,
                           oracle_variants.empty() ? 0.0 : *oracle_variants.begin());
    return o;
}

// ---------------------------------------------------------------- 9

Outcome criterion9() {
    Outcome o;
    const auto full_cfg = mock_config("c9_full", 50);
    auto full = std::make_shared<Recorder>();
    Pipeline(full_cfg, recording_backends(full_cfg, full)).run();

    const auto cfg = mock_config("c9_cut", 50);
    auto first = std::make_shared<Recorder>();
    {
        Pipeline p(cfg, recording_backends(cfg, first));
        o.require(!p.run("round1.judge"), "stopped run reports completion");
    }
    auto second = std::make_shared<Recorder>();
    Pipeline resumed(cfg, recording_backends(cfg, second));
    o.require(resumed.done("round1.judge") && !resumed.done("round2.evolve"), "resume point is wrong");
    o.require(resumed.run(), "resumed run did not finish");

    const std::multiset<std::string> a(first->fingerprints.begin(), first->fingerprints.end());
    const std::multiset<std::string> b(second->fingerprints.begin(), second->fingerprints.end());
    const std::multiset<std::string> whole(full->fingerprints.begin(), full->fingerprints.end());
    // A request may legitimately occur in both halves only if the
    // uninterrupted run also sent it that many times.
    std::size_t repeated = 0, shared = 0;
    for (const auto& fp : std::set<std::string>(b.begin(), b.end())) {
        if (!a.count(fp)) continue;
        ++shared;
        if (whole.count(fp) < a.count(fp) + b.count(fp)) ++repeated;
    }
    std::multiset<std::string> both = a;
    both.insert(b.begin(), b.end());
    o.require(repeated == 0, fmt::format("{} requests repeated after resume", repeated));
    o.require(both == whole, "interrupted + resumed calls differ from the uninterrupted run");
    o.require(slurp(resumed.export_path()) == slurp(full_cfg.run_dir() / "export.jsonl"), "exports differ");

    auto third = std::make_shared<Recorder>();
    Pipeline(cfg, recording_backends(cfg, third)).run();
    o.require(third->fingerprints.empty(), "reopening a finished run called a backend");
    o.detail = fmt::format("{} calls before the cut + {} after = {} uninterrupted, {} repeated ({} identical requests the "
                           "full run also sends twice), identical export",
                           a.size(), b.size(), whole.size(), repeated, shared);
    return o;
}

// ---------------------------------------------------------------- 10

std::optional<nlohmann::json> forge_stats(const fs::path& file) {
    const fs::path out = kWork / "stats.json";
    const std::string cmd = fmt::format("\"{}\" stats --json \"{}\" > \"{}\" 2>/dev/null", FORGE_BIN, file.string(),
                                        out.string());
    if (std::system(cmd.c_str()) != 0) return std::nullopt;
    return nlohmann::json::parse(slurp(out));
}

Outcome criterion10() {
    Outcome o;
    const char* families[] = {"table_rows", "table_cols", "table_cells", "instruction_words", "output_words"};
    const auto mock = forge_stats(g_reference_export);
    o.require(mock.has_value(), "forge stats failed on the mock export");
    if (mock) {
        for (const char* f : families) {
            o.require(mock->contains(f), fmt::format("missing {}", f));
            if (!mock->contains(f)) continue;
            const auto& m = (*mock)[f];
            for (const char* k : {"median", "mean", "min", "max"}) o.require(m.contains(k), fmt::format("{}.{}", f, k));
            o.require(m["min"].get<double>() <= m["median"].get<double>() &&
                          m["median"].get<double>() <= m["max"].get<double>(),
                      fmt::format("{} out of order", f));
        }
        o.require(mock->contains("avg_instructions_per_table"), "missing avg_instructions_per_table");
    }

    // Hand values for tests/data/stats_fixture.jsonl: tables 4x3, 6x5, 5x4;
    // instruction words 3,5,8,2,6; output words 1,4,10,2,3.
    const std::map<std::string, std::array<double, 4>> hand{
        {"table_rows", {5, 5, 4, 6}},
        {"table_cols", {4, 4, 3, 5}},
        {"table_cells", {20, 62.0 / 3.0, 12, 30}},
        {"instruction_words", {5, 4.8, 2, 8}},
        {"output_words", {3, 4, 1, 10}},
    };
    const auto fx = forge_stats(kData / "stats_fixture.jsonl");
    o.require(fx.has_value(), "forge stats failed on the fixture");
    if (fx) {
        for (const auto& [family, v] : hand) {
            const char* keys[] = {"median", "mean", "min", "max"};
            for (int i = 0; i < 4; ++i) {
                const double got = (*fx)[family][keys[i]].get<double>();
                o.require(std::abs(got - v[i]) <= kStatsTolerance,
                          fmt::format("{}.{} = {} (hand {})", family, keys[i], got, v[i]));
            }
        }
        o.require(std::abs((*fx)["avg_instructions_per_table"].get<double>() - 5.0 / 3.0) <= kStatsTolerance,
                  "avg_instructions_per_table");
        o.require((*fx)["samples"] == 5 && (*fx)["tables"] == 3, "sample/table counts");
    }
    o.detail = fmt::format("six statistic families present on the mock export ({} samples); fixture matches hand "
                           "values within {}",
                           mock ? (*mock)["samples"].get<std::size_t>() : 0, kStatsTolerance);
    return o;
}

// ---------------------------------------------------------------- 11

std::optional<Outcome> criterion11() {
    const char* endpoint = std::getenv("TABFORGE_LIVE_ENDPOINT");
    if (!endpoint || !*endpoint) return std::nullopt;
    Outcome o;
    PipelineConfig cfg;
    cfg.run_root = (kWork / "runs").string();
    cfg.run_id = "live";
    fs::remove_all(cfg.run_dir());
    cfg.n_tables = 3;
    cfg.seeds_per_table = 2;
    cfg.n_rounds = 1;
    cfg.subtopics_per_topic = 1;
    cfg.titles_per_subtopic = 3;
    cfg.limits.max_rows = 12;
    cfg.limits.max_cols = 8;
    const char* model = std::getenv("TABFORGE_LIVE_MODEL");
    const char* key_env = std::getenv("TABFORGE_LIVE_KEY_ENV");
    for (BackendConfig* b : {&cfg.teacher, &cfg.target, &cfg.judge}) {
        b->endpoint = endpoint;
        b->model = model ? model : "gpt-4o-mini";
        b->api_key_env = key_env ? key_env : "OPENAI_API_KEY";
        b->max_in_flight = 2;
    }
    Pipeline p(cfg, make_backends(cfg));
    o.require(p.run(), "live run did not finish");
    const auto records = read_export(p.export_path());
    std::size_t seeds = 0;
    for (const auto& r : records) {
        seeds += r.sample.lineage.round == 0 ? 1 : 0;
        o.require(lineage_consistent(r.sample.lineage), fmt::format("{} lineage", r.sample.id));
        try {
            o.require(validate(parse(r.table_text, r.sample.table_format), {.check_size = false}).ok,
                      fmt::format("{} table invalid", r.sample.id));
        } catch (const std::exception& e) {
            o.require(false, fmt::format("{} table does not parse: {}", r.sample.id, e.what()));
        }
        o.require(!r.sample.instruction.empty() && !r.sample.response.empty(), fmt::format("{} empty", r.sample.id));
    }
    o.require(check_lineage(records).empty(), "lineage problems");
    o.require(seeds <= 6, fmt::format("{} seeds", seeds));
    o.detail = fmt::format("{} records ({} seeds) from {}", records.size(), seeds, endpoint);
    return o;
}

}  // namespace

int main() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
    spdlog::set_level(spdlog::level::warn);

    const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
        {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4}, {5, criterion5},
        {6, criterion6}, {7, criterion7}, {8, criterion8}, {9, criterion9}, {10, criterion10},
    };
    int failed = 0;
    auto report = [&](int n, const Outcome& o) {
        std::string line = fmt::format("criterion {:>2}: {} - {}", n, o.pass ? "PASS" : "FAIL", o.detail);
        for (const auto& p : o.problems) line += fmt::format("\n    {}", p);
        fmt::print("{}\n", line);
        std::fflush(stdout);
        if (!o.pass) ++failed;
    };
    for (const auto& [n, fn] : criteria) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = fmt::format("exception: {}", e.what());
        }
        report(n, o);
    }
    try {
        if (auto o = criterion11()) {
            report(11, *o);
        } else {
            fmt::print("criterion 11: SKIP - set TABFORGE_LIVE_ENDPOINT (and TABFORGE_LIVE_MODEL, "
                       "TABFORGE_LIVE_KEY_ENV) to run the live smoke test\n");
        }
    } catch (const std::exception& e) {
        report(11, Outcome{false, fmt::format("exception: {}", e.what()), {}});
    }
    return failed == 0 ? 0 : 1;
}
