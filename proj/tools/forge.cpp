// forge: command line front end for the table instruction pipeline.

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "tabforge/eval.hpp"
#include "tabforge/offline.hpp"
#include "tabforge/pipeline.hpp"

using namespace tabforge;
namespace fs = std::filesystem;

namespace {

struct Common {
    std::string config_path;
    std::string run_id;
    bool verbose = false;
};

PipelineConfig load(const Common& c) {
    PipelineConfig cfg = c.config_path.empty() ? PipelineConfig{} : load_config(c.config_path);
    if (!c.run_id.empty()) cfg.run_id = c.run_id;
    check_config(cfg);
    return cfg;
}

PromptLibrary prompts_for(const PipelineConfig& cfg) {
    return cfg.prompts_dir.empty() ? PromptLibrary::builtin() : PromptLibrary::with_overrides(cfg.prompts_dir);
}

void summarize_run(const Pipeline& p) {
    for (const auto& r : p.rounds()) {
        fmt::print("round {}: {} seeds, {} jobs, {} candidates, {} judged, {} weak ({} unscorable, {} flagged)\n",
                   r.round, r.input_seeds.size(), r.jobs, r.candidates.size(), r.judged.size(), r.weakness.size(),
                   r.unscorable, r.flagged);
    }
    if (p.halt_note()) fmt::print("halted: {}\n", *p.halt_note());
    if (p.done("export")) fmt::print("export: {}\n", p.export_path().string());
}

int run_to(const PipelineConfig& cfg, const std::optional<std::string>& stage) {
    Pipeline p(cfg, make_backends(cfg), prompts_for(cfg));
    p.run(stage);
    summarize_run(p);
    return 0;
}

std::vector<std::string> parse_list(const std::string& list) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= list.size()) {
        auto comma = list.find(',', start);
        if (comma == std::string::npos) comma = list.size();
        if (comma > start) out.push_back(list.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

std::vector<TableFormat> parse_formats(const std::string& list) {
    std::vector<TableFormat> out;
    for (const auto& name : parse_list(list)) out.push_back(table_format_from_string(name));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Synthesize table instruction data and evaluate table models."};
    app.require_subcommand(1);
    Common common;
    app.add_option("-c,--config", common.config_path, "Pipeline config (TOML subset)");
    app.add_option("--run-id", common.run_id, "Override run.id from the config");
    app.add_flag("-v,--verbose", common.verbose, "Debug logging");

    std::string stop_after;
    auto* run = app.add_subcommand("run", "Run every unfinished stage");
    run->add_option("--stop-after", stop_after, "Stop after this stage (e.g. round1.judge)");

    auto* tables = app.add_subcommand("tables", "Topics and table synthesis");
    auto* seed = app.add_subcommand("seed", "Seed instructions (and seed judging in strict mode)");

    std::size_t round = 1;
    auto* evolve = app.add_subcommand("evolve", "Evolve one round");
    evolve->add_option("--round", round, "Round number")->required();
    auto* judge = app.add_subcommand("judge", "Answer and judge one round");
    judge->add_option("--round", round, "Round number")->required();

    std::string out_path;
    auto* exp = app.add_subcommand("export", "Finish the run and write the dataset");
    exp->add_option("-o,--out", out_path, "Copy of the export")->required();

    std::string stats_path;
    bool stats_json = false;
    auto* stats = app.add_subcommand("stats", "Statistics of an exported dataset");
    stats->add_option("file", stats_path, "export.jsonl")->required()->check(CLI::ExistingFile);
    stats->add_flag("--json", stats_json, "Print JSON instead of a table");

    std::string resume_id;
    std::string resume_root = "run";
    auto* resume = app.add_subcommand("resume", "Continue a run from its config snapshot");
    resume->add_option("run_id", resume_id, "Run id")->required();
    resume->add_option("--root", resume_root, "Run root directory");

    std::string bench, templates = "t1,t2,t3", formats = "md,html,csv,tsv", eval_out = "report";
    auto* eval = app.add_subcommand("eval", "Evaluate the target model on a benchmark file");
    eval->add_option("--bench", bench, "Benchmark JSONL")->required()->check(CLI::ExistingFile);
    eval->add_option("--templates", templates, "Comma separated template ids");
    eval->add_option("--formats", formats, "Comma separated formats (md, html, csv, tsv)");
    eval->add_option("--out", eval_out, "Report directory");

    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(common.verbose ? spdlog::level::debug : spdlog::level::info);

    try {
        if (*run) return run_to(load(common), stop_after.empty() ? std::nullopt : std::optional(stop_after));
        if (*tables) return run_to(load(common), "tables");
        if (*seed) {
            const auto cfg = load(common);
            return run_to(cfg, cfg.retain_all_seeds ? "seeds" : "seeds.judge");
        }
        if (*evolve) return run_to(load(common), fmt::format("round{}.evolve", round));
        if (*judge) return run_to(load(common), fmt::format("round{}.judge", round));
        if (*exp) {
            const auto cfg = load(common);
            Pipeline p(cfg, make_backends(cfg), prompts_for(cfg));
            p.run();
            export_dataset(p.dataset(), out_path);
            summarize_run(p);
            fmt::print("wrote {}\n", out_path);
            return 0;
        }
        if (*stats) {
            const auto records = read_export(stats_path);
            if (records.empty()) {
                spdlog::error("{} holds no records", stats_path);
                return 1;
            }
            const auto s = compute_stats(records);
            if (stats_json) {
                fmt::print("{}\n", to_json(s).dump(2));
            } else {
                fmt::print("{}", format_stats(s));
            }
            for (const auto& problem : check_lineage(records)) spdlog::warn("lineage: {}", problem);
            return 0;
        }
        if (*resume) {
            const fs::path dir = fs::path(resume_root) / resume_id;
            auto cfg = load_config(dir / "config.snapshot");
            return run_to(cfg, std::nullopt);
        }
        if (*eval) {
            const auto cfg = load(common);
            const auto records = load_benchmark(bench);
            EvalConfig ec;
            ec.template_ids = parse_list(templates);
            ec.formats = parse_formats(formats);
            const auto backends = make_backends(cfg);
            const RoleClient model{backends.target, RoleTag::Target, cfg.target.model, cfg.target.temperature,
                                   cfg.target.max_tokens};
            const RoleClient judge_client{backends.judge, RoleTag::Judge, cfg.judge.model, cfg.judge.temperature,
                                          cfg.judge.max_tokens};
            const auto report = run_eval(records, ec, model, &judge_client, prompts_for(cfg));
            write_report(report, records, eval_out);
            fmt::print("{}", format_report(report));
            return 0;
        }
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
