#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "tabforge/formats.hpp"
#include "tabforge/offline.hpp"
#include "tabforge/pipeline.hpp"

using namespace tabforge;
namespace fs = std::filesystem;

namespace {

fs::path scratch(std::string_view name) {
    const auto dir = fs::temp_directory_path() / "tabforge_test_pipeline" / std::string(name);
    fs::remove_all(dir);
    return dir;
}

PipelineConfig small_config(const fs::path& root, std::string judge = "mock:fail=0") {
    PipelineConfig cfg;
    cfg.run_root = root.string();
    cfg.run_id = "run";
    cfg.n_tables = 5;
    cfg.seeds_per_table = 2;
    cfg.n_rounds = 2;
    cfg.subtopics_per_topic = 2;
    cfg.titles_per_subtopic = 3;
    cfg.limits.max_rows = 12;
    cfg.limits.max_cols = 8;
    cfg.cache = false;
    cfg.teacher.endpoint = "mock:fail=0";
    cfg.target.endpoint = "mock:fail=0";
    cfg.judge.endpoint = std::move(judge);
    return cfg;
}

struct Counted {
    Backends backends;
    std::vector<std::shared_ptr<ScriptedBackend>> scripted;

    std::uint64_t calls() const {
        std::uint64_t n = 0;
        for (const auto& s : scripted) n += s->calls();
        return n;
    }
};

Counted counted_backends(const PipelineConfig& cfg) {
    Counted c;
    c.backends = {make_backend(cfg.teacher), make_backend(cfg.target), make_backend(cfg.judge)};
    for (const auto& b : {c.backends.teacher, c.backends.target, c.backends.judge}) {
        c.scripted.push_back(std::dynamic_pointer_cast<ScriptedBackend>(b));
        REQUIRE(c.scripted.back());
    }
    return c;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> ids_in(const fs::path& jsonl) {
    std::vector<std::string> out;
    for (const auto& j : read_jsonl(jsonl)) out.push_back(j.at("id").get<std::string>());
    return out;
}

bool subset(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    const std::set<std::string> sb(b.begin(), b.end());
    return std::all_of(a.begin(), a.end(), [&](const auto& x) { return sb.count(x) > 0; });
}

ExportRecord record(std::string id, const Table& t, std::string instruction, std::string response) {
    ExportRecord r;
    r.sample.id = std::move(id);
    r.sample.table_id = t.id;
    r.sample.table_format = TableFormat::Markdown;
    r.sample.instruction = std::move(instruction);
    r.sample.response = std::move(response);
    r.table_text = serialize(t, TableFormat::Markdown);
    return r;
}

Table grid(std::size_t rows, std::size_t cols, std::size_t counter) {
    std::vector<std::vector<std::string>> cells(rows, std::vector<std::string>(cols));
    for (std::size_t c = 0; c < cols; ++c) cells[0][c] = fmt::format("h{}", c);
    for (std::size_t r = 1; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) cells[r][c] = std::to_string(r * 10 + c);
    }
    Table t = make_table(cells, TableType::Flat, {1, 0});
    t.id = make_table_id(t, counter);
    return t;
}

}  // namespace

TEST_CASE("stage names follow the config") {
    PipelineConfig cfg;
    cfg.n_rounds = 1;
    CHECK(stage_names(cfg) ==
          std::vector<std::string>{"topics", "tables", "seeds", "round1.evolve", "round1.judge", "export"});
    cfg.retain_all_seeds = false;
    CHECK(stage_names(cfg)[3] == "seeds.judge");
}

TEST_CASE("small mock run: counts reconcile and lineage holds") {
    const auto root = scratch("small");
    const auto cfg = small_config(root);
    auto c = counted_backends(cfg);
    Pipeline p(cfg, c.backends);
    REQUIRE(p.run());

    const auto seeds = ids_in(p.dir() / "seeds.jsonl");
    CHECK(seeds.size() == 10);
    REQUIRE(p.rounds().size() >= 1);
    const auto& r1 = p.rounds()[0];
    CHECK(r1.input_seeds.size() == 10);
    CHECK(r1.jobs == 30);
    CHECK(r1.candidates.size() <= 30);
    CHECK(r1.jobs == r1.candidates.size() + r1.evolution_dropped + r1.filter_dropped);
    for (const auto& r : p.rounds()) {
        CHECK(subset(r.weakness, r.judged));
        CHECK(subset(r.judged, r.candidates));
        CHECK(r.candidates.size() == r.judged.size() + r.target_failed + r.unscorable);
    }
    if (p.rounds().size() == 2) CHECK(p.rounds()[1].input_seeds == r1.weakness);

    const auto records = read_export(p.export_path());
    CHECK(check_lineage(records).empty());
    std::size_t expected = seeds.size();
    for (const auto& r : p.rounds()) expected += r.weakness.size();
    CHECK(records.size() == expected);
    for (const auto& r : records) {
        if (r.sample.lineage.round >= 1) {
            REQUIRE(r.sample.judge_score);
            CHECK(*r.sample.judge_score < 3);
        }
        CHECK_NOTHROW(parse(r.table_text, r.sample.table_format));
    }
    for (std::size_t i = 1; i < records.size(); ++i) {
        const auto& a = records[i - 1].sample;
        const auto& b = records[i].sample;
        CHECK(std::tie(a.lineage.round, a.id) < std::tie(b.lineage.round, b.id));
    }
}

TEST_CASE("cycling judge: exactly scores 1 and 2 seed the next round") {
    const auto root = scratch("cycle");
    const auto cfg = small_config(root, "mock:cycle,fail=0");
    auto c = counted_backends(cfg);
    Pipeline p(cfg, c.backends);
    REQUIRE(p.run());

    std::size_t offset = 0;
    for (const auto& r : p.rounds()) {
        const auto judgments = read_jsonl(p.dir() / fmt::format("round{}", r.round) / "judgments.jsonl");
        std::vector<std::string> weak;
        for (std::size_t i = 0; i < judgments.size(); ++i) {
            const int score = judgments[i].at("score").get<int>();
            CHECK(score == static_cast<int>((offset + i) % 5) + 1);
            if (score < 3) weak.push_back(judgments[i].at("sample_id").get<std::string>());
        }
        offset += judgments.size();
        CHECK(r.weakness == weak);
        CHECK(ids_in(p.dir() / fmt::format("round{}", r.round) / "weakness.jsonl") == weak);
        if (r.round == 1) {
            const std::size_t n = judgments.size();
            CHECK(weak.size() == (n + 4) / 5 + (n + 3) / 5);
        }
    }
}

TEST_CASE("resume after round 1 judging makes no repeated calls") {
    const auto full_root = scratch("resume_full");
    const auto cut_root = scratch("resume_cut");

    const auto full_cfg = small_config(full_root);
    auto full = counted_backends(full_cfg);
    Pipeline(full_cfg, full.backends).run();

    const auto cut_cfg = small_config(cut_root);
    auto first = counted_backends(cut_cfg);
    CHECK_FALSE(Pipeline(cut_cfg, first.backends).run("round1.judge"));
    const std::string state_after_cut = slurp(cut_cfg.run_dir() / "state.json");

    auto second = counted_backends(cut_cfg);
    Pipeline resumed(cut_cfg, second.backends);
    CHECK(resumed.done("round1.judge"));
    CHECK_FALSE(resumed.done("round2.evolve"));
    CHECK(resumed.run());

    CHECK(first.calls() + second.calls() == full.calls());
    CHECK(slurp(cut_cfg.run_dir() / "export.jsonl") == slurp(full_cfg.run_dir() / "export.jsonl"));
    CHECK(slurp(cut_cfg.run_dir() / "state.json") == slurp(full_cfg.run_dir() / "state.json"));
    CHECK(state_after_cut != slurp(cut_cfg.run_dir() / "state.json"));

    auto third = counted_backends(cut_cfg);
    CHECK(Pipeline(cut_cfg, third.backends).run());
    CHECK(third.calls() == 0);
}

TEST_CASE("resume with a changed config is refused") {
    const auto root = scratch("changed");
    auto cfg = small_config(root);
    Pipeline(cfg, counted_backends(cfg).backends).run("topics");
    cfg.n_tables = 6;
    CHECK_THROWS_AS(Pipeline(cfg, counted_backends(cfg).backends), ConfigError);
}

TEST_CASE("unknown stop stage") {
    const auto root = scratch("stop");
    const auto cfg = small_config(root);
    Pipeline p(cfg, counted_backends(cfg).backends);
    CHECK_THROWS_AS(p.run("round9.judge"), std::invalid_argument);
}

TEST_CASE("one round with an all-5 judge halts with seeds only") {
    const auto root = scratch("allfive");
    auto cfg = small_config(root, "mock:score=5,fail=0");
    cfg.n_rounds = 1;
    Pipeline p(cfg, counted_backends(cfg).backends);
    REQUIRE(p.run());
    REQUIRE(p.halt_note());
    CHECK(p.halt_note()->rfind("EmptyWeaknessSet", 0) == 0);
    const auto records = read_export(p.export_path());
    CHECK(records.size() == ids_in(p.dir() / "seeds.jsonl").size());
    for (const auto& r : records) CHECK(r.sample.lineage.round == 0);
}

TEST_CASE("strict mode judges seeds and exports only weak ones") {
    const auto root = scratch("strict");
    auto cfg = small_config(root, "mock:cycle,fail=0");
    cfg.retain_all_seeds = false;
    cfg.n_rounds = 1;
    Pipeline p(cfg, counted_backends(cfg).backends);
    REQUIRE(p.run());
    const auto weak0 = ids_in(p.dir() / "round0" / "weakness.jsonl");
    CHECK(p.rounds().at(0).input_seeds == weak0);
    for (const auto& r : read_export(p.export_path())) {
        REQUIRE(r.sample.judge_score);
        CHECK(*r.sample.judge_score < 3);
    }
}

TEST_CASE("export is deterministic across runs and re-exports") {
    const auto a = scratch("det_a");
    const auto b = scratch("det_b");
    const auto cfg_a = small_config(a);
    const auto cfg_b = small_config(b);
    Pipeline pa(cfg_a, counted_backends(cfg_a).backends);
    pa.run();
    Pipeline(cfg_b, counted_backends(cfg_b).backends).run();
    const std::string first = slurp(pa.export_path());
    CHECK(first == slurp(cfg_b.run_dir() / "export.jsonl"));
    const auto again = a / "again.jsonl";
    export_dataset(pa.dataset(), again);
    CHECK(slurp(again) == first);
}

TEST_CASE("export records reference their tables") {
    const Table t = grid(4, 3, 1);
    Dataset d;
    InstructionSample s;
    s.id = "r0-x";
    s.table_id = t.id;
    s.instruction = "Sum column h1.";
    s.response = "63";
    d.samples.push_back(s);
    const auto path = scratch("refs") / "out.jsonl";
    CHECK_THROWS_AS(export_dataset(d, path), std::runtime_error);
    d.tables.emplace(t.id, t);
    export_dataset(d, path);
    const auto back = read_export(path);
    REQUIRE(back.size() == 1);
    CHECK(back[0].sample == s);
    CHECK(expanded_texts(parse(back[0].table_text, TableFormat::Markdown)) == expanded_texts(t));
}

TEST_CASE("lineage check finds broken chains") {
    const Table t = grid(4, 3, 1);
    auto seed = record("r0-a", t, "q", "a");
    auto child = record("r1-b", t, "q2", "a2");
    child.sample.lineage.round = 1;
    child.sample.lineage.parent_id = "r0-a";
    child.sample.lineage.direction = Direction::InstructionComplication;
    child.sample.lineage.strategy = Strategy::AddConstraints;
    CHECK(check_lineage({seed, child}).empty());
    CHECK(check_lineage({child}).size() == 1);
    child.sample.lineage.round = 2;
    CHECK_FALSE(check_lineage({seed, child}).empty());
}

TEST_CASE("stats on a hand-built five-sample fixture") {
    const Table a = grid(4, 3, 1);  // 12 cells
    const Table b = grid(6, 5, 2);  // 30 cells
    const Table c = grid(5, 4, 3);  // 20 cells
    const std::vector<ExportRecord> records{
        record("s1", a, "one two three", "x"),
        record("s2", a, "one two three four five", "x x x x"),
        record("s3", b, "a b c d e f g h", "1 2 3 4 5 6 7 8 9 10"),
        record("s4", c, "two  words", "y y"),
        record("s5", c, "\tseven words in this one here\n", "z z z"),
    };
    const auto s = compute_stats(records);
    CHECK(s.n_samples == 5);
    CHECK(s.n_tables == 3);
    // rows {4,6,5}, cols {3,5,4}, cells {12,30,20}
    CHECK(s.rows.median == 5);
    CHECK(s.rows.mean == doctest::Approx(5.0));
    CHECK(s.rows.min == 4);
    CHECK(s.rows.max == 6);
    CHECK(s.cols.median == 4);
    CHECK(s.cells.median == 20);
    CHECK(s.cells.mean == doctest::Approx(62.0 / 3.0).epsilon(1e-12));
    CHECK(s.cells.max == 30);
    // instruction words {3,5,8,2,6}, output words {1,4,10,2,3}
    CHECK(s.instruction_words.median == 5);
    CHECK(s.instruction_words.mean == doctest::Approx(24.0 / 5.0).epsilon(1e-12));
    CHECK(s.instruction_words.min == 2);
    CHECK(s.instruction_words.max == 8);
    CHECK(s.output_words.median == 3);
    CHECK(s.output_words.mean == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(s.avg_instructions_per_table == doctest::Approx(5.0 / 3.0).epsilon(1e-12));

    const auto j = to_json(s);
    for (const char* key : {"table_rows", "table_cols", "table_cells", "instruction_words", "output_words"}) {
        CHECK(j.contains(key));
        CHECK(j[key]["min"].get<double>() <= j[key]["median"].get<double>());
        CHECK(j[key]["median"].get<double>() <= j[key]["max"].get<double>());
    }
    CHECK(j.contains("avg_instructions_per_table"));
    CHECK(format_stats(s).find("instructions / table") != std::string::npos);
}

TEST_CASE("stats edge cases") {
    const Table a = grid(4, 3, 1);
    CHECK(compute_stats({record("s1", a, "q", "a")}).avg_instructions_per_table == 1.0);
    CHECK(summarize({4, 1, 3, 2}).median == 2.5);
    CHECK(summarize({}).max == 0);
}
