#include "tabforge/eval.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <regex>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/spdlog.h>

#include "tabforge/json_extract.hpp"
#include "tabforge/pipeline.hpp"
#include "text_util.hpp"

namespace tabforge {

using nlohmann::json;

std::string_view to_string(TaskType t) {
    switch (t) {
        case TaskType::TQA: return "TQA";
        case TaskType::TFV: return "TFV";
        case TaskType::T2T: return "T2T";
    }
    return "TQA";
}

TaskType task_type_from_string(std::string_view name) {
    const std::string n = detail::to_lower(detail::trim(name));
    if (n == "tqa") return TaskType::TQA;
    if (n == "tfv") return TaskType::TFV;
    if (n == "t2t") return TaskType::T2T;
    throw EvalError(fmt::format("unknown task type '{}'", name));
}

// ---------------------------------------------------------------- normalization

namespace {

std::string collapse_spaces(std::string_view s) {
    std::string out;
    bool space = false;
    for (char ch : s) {
        if (detail::is_space(ch)) {
            space = true;
            continue;
        }
        if (space && !out.empty()) out.push_back(' ');
        space = false;
        out.push_back(ch);
    }
    return out;
}

bool is_quote(char ch) { return ch == '"' || ch == '\'' || ch == '`'; }

std::string canonical_number(const std::string& s) {
    static const std::regex number(R"(^[-+]?(\d+|\d{1,3}(,\d{3})+)(\.\d+)?$)");
    if (!std::regex_match(s, number)) return s;
    std::string digits;
    for (char ch : s) {
        if (ch != ',') digits.push_back(ch);
    }
    const double v = std::strtod(digits.c_str(), nullptr);
    if (v == 0) return "0";
    if (std::floor(v) == v && std::abs(v) < 1e15) return fmt::format("{}", static_cast<long long>(v));
    return fmt::format("{}", v);
}

std::string json_scalar_text(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
}

void flatten_answer(const json& v, Answer& out) {
    if (v.is_null()) return;
    if (v.is_array()) {
        for (const auto& e : v) flatten_answer(e, out);
        return;
    }
    out.push_back(normalize_text(json_scalar_text(v)));
}

}  // namespace

std::string normalize_text(std::string_view in) {
    std::string s = collapse_spaces(detail::to_lower(in));
    while (true) {
        const std::string before = s;
        while (!s.empty() && (is_quote(s.front()) || detail::is_space(s.front()))) s.erase(s.begin());
        while (!s.empty() && (is_quote(s.back()) || s.back() == '.' || detail::is_space(s.back()))) s.pop_back();
        s = canonical_number(s);
        if (s == before) break;
    }
    return s;
}

std::string normalize_verdict(std::string_view s) {
    static const std::set<std::string, std::less<>> yes{"entailed", "entails", "true", "yes", "supported"};
    static const std::set<std::string, std::less<>> no{"refuted", "refutes", "false", "no", "not entailed",
                                                        "not supported"};
    if (yes.count(s)) return "entailed";
    if (no.count(s)) return "refuted";
    return std::string(s);
}

std::optional<Answer> extract_answer(std::string_view response) {
    auto obj = last_json_object_with(response, "answer");
    if (!obj || (*obj)["answer"].is_null()) return std::nullopt;
    Answer out;
    flatten_answer((*obj)["answer"], out);
    return out;
}

Answer normalize_gold(const BenchmarkRecord& rec) {
    Answer out;
    for (const auto& g : rec.gold) {
        std::string n = normalize_text(g);
        out.push_back(rec.task_type == TaskType::TFV ? normalize_verdict(n) : n);
    }
    return out;
}

int exact_match(const Answer& pred, const Answer& gold) {
    const std::set<std::string> a(pred.begin(), pred.end());
    const std::set<std::string> b(gold.begin(), gold.end());
    return a == b ? 1 : 0;
}

// ---------------------------------------------------------------- records

BenchmarkRecord benchmark_from_json(const json& j) {
    BenchmarkRecord r;
    try {
        r.id = j.at("id").is_string() ? j["id"].get<std::string>() : j["id"].dump();
        r.benchmark = j.value("benchmark", "default");
        r.task_type = task_type_from_string(j.at("task_type").get<std::string>());
        r.question = j.at("question").get<std::string>();
        if (j.contains("table_html")) {
            r.table = parse(j["table_html"].get<std::string>(), TableFormat::Html);
        } else if (j.at("table").is_array()) {
            r.table = make_table(j["table"].get<std::vector<std::vector<std::string>>>(), TableType::Flat, {1, 0});
        } else {
            r.table = table_from_json(j["table"]);
        }
        r.title = j.value("title", r.table.title);
        const json& gold = j.at("gold");
        if (gold.is_array()) {
            for (const auto& g : gold) r.gold.push_back(json_scalar_text(g));
        } else {
            r.gold.push_back(json_scalar_text(gold));
        }
    } catch (const EvalError&) {
        throw;
    } catch (const std::exception& e) {
        throw EvalError(fmt::format("benchmark record {}: {}", r.id.empty() ? "?" : r.id, e.what()));
    }
    if (r.gold.empty()) throw EvalError(fmt::format("benchmark record {}: empty gold", r.id));
    if (r.task_type == TaskType::TFV) {
        for (const auto& g : normalize_gold(r)) {
            if (g != "entailed" && g != "refuted") {
                throw EvalError(fmt::format("benchmark record {}: TFV gold '{}' is not entailed/refuted", r.id, g));
            }
        }
    }
    return r;
}

std::vector<BenchmarkRecord> load_benchmark(const std::filesystem::path& path) {
    std::vector<BenchmarkRecord> out;
    for (const auto& j : read_jsonl(path)) out.push_back(benchmark_from_json(j));
    return out;
}

// ---------------------------------------------------------------- prompts

std::string assemble_prompt(const BenchmarkRecord& rec, std::string_view template_id, TableFormat fmt,
                            const PromptLibrary& prompts) {
    const std::string name = fmt::format("eval_{}", template_id);
    if (!prompts.has(name)) {
        throw PromptError(PromptErrc::MissingTemplate, fmt::format("no evaluation template '{}'", template_id));
    }
    std::string clause;
    if (rec.task_type == TaskType::TQA) clause = prompts.render("eval_clause_tqa", {});
    if (rec.task_type == TaskType::TFV) clause = prompts.render("eval_clause_tfv", {});
    return prompts.render(name, {{"table_title", rec.title},
                                 {"table_format", std::string(display_name(fmt))},
                                 {"table_text", serialize(rec.table, fmt)},
                                 {"question", rec.question},
                                 {"answer_clause", clause}});
}

// ---------------------------------------------------------------- T2T judge

namespace {

std::optional<int> parse_t2t_reply(std::string_view reply) {
    const auto lines = detail::split_lines(reply);
    for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
        std::string word;
        for (char ch : detail::to_lower(*it)) {
            if (std::isalpha(static_cast<unsigned char>(ch))) word.push_back(ch);
        }
        if (word.empty()) continue;
        if (word == "correct") return 1;
        if (word == "incorrect") return 0;
        return std::nullopt;
    }
    return std::nullopt;
}

}  // namespace

T2TVerdict judge_t2t(const BenchmarkRecord& rec, std::string_view response, const RoleClient& judge,
                     const PromptLibrary& prompts, int reasks) {
    const std::string prompt = prompts.render(
        "t2t_judge", {{"question", rec.question}, {"gold", fmt::format("{}", fmt::join(rec.gold, "; "))},
                      {"response", std::string(response)}});
    T2TVerdict v;
    for (int attempt = 0; attempt <= reasks; ++attempt) {
        std::optional<std::int64_t> seed;
        if (attempt > 0) seed = attempt;
        ++v.attempts;
        try {
            const auto reply = judge.backend->complete(judge.request(prompt, "t2t_judge", seed));
            if (auto c = parse_t2t_reply(reply.text)) {
                v.correct = *c;
                return v;
            }
        } catch (const LlmError& e) {
            spdlog::debug("t2t judge call for {} failed: {}", rec.id, e.what());
        }
    }
    spdlog::warn("record {} unscorable after {} judge attempts; counted incorrect", rec.id, v.attempts);
    v.unscorable = true;
    return v;
}

// ---------------------------------------------------------------- scoring

EvalReport score_run(const std::vector<BenchmarkRecord>& records, const std::vector<EvalItem>& items,
                     const EvalConfig& cfg, const RoleClient* judge, const PromptLibrary& prompts) {
    EvalReport report;
    std::map<std::string, BenchmarkScore> per;
    for (const auto& name : cfg.benchmarks) per[name].benchmark = name;
    std::map<std::string, std::pair<std::size_t, std::size_t>> variants;

    for (const auto& item : items) {
        const BenchmarkRecord& rec = records.at(item.record);
        ScoredItem s{item, std::nullopt, 0, false};
        if (rec.task_type == TaskType::T2T) {
            if (!judge) throw EvalError(fmt::format("record {} needs a judge backend", rec.id));
            const auto v = judge_t2t(rec, item.response, *judge, prompts, cfg.t2t_reasks);
            s.correct = v.correct;
            s.unscorable = v.unscorable;
        } else {
            s.prediction = extract_answer(item.response);
            if (s.prediction && rec.task_type == TaskType::TFV) {
                for (auto& p : *s.prediction) p = normalize_verdict(p);
            }
            s.correct = s.prediction ? exact_match(*s.prediction, normalize_gold(rec)) : 0;
        }
        auto& b = per[rec.benchmark];
        b.benchmark = rec.benchmark;
        ++b.n;
        b.correct += static_cast<std::size_t>(s.correct);
        auto& v = variants[fmt::format("{}/{}", item.template_id, to_string(item.format))];
        ++v.first;
        v.second += static_cast<std::size_t>(s.correct);
        report.items.push_back(std::move(s));
    }

    double sum = 0;
    std::size_t counted = 0;
    for (auto& [name, b] : per) {
        if (b.n == 0) {
            spdlog::warn("benchmark {} has no scored items; left out of the macro average", name);
        } else {
            b.accuracy = static_cast<double>(b.correct) / static_cast<double>(b.n);
            sum += b.accuracy;
            ++counted;
        }
        report.benchmarks.push_back(b);
    }
    if (counted) report.macro_average = sum / static_cast<double>(counted);
    for (const auto& [key, v] : variants) {
        report.by_variant[key] = static_cast<double>(v.second) / static_cast<double>(v.first);
    }
    return report;
}

EvalReport run_eval(const std::vector<BenchmarkRecord>& records, const EvalConfig& cfg, const RoleClient& model,
                    const RoleClient* judge, const PromptLibrary& prompts) {
    RoleClient client = model;
    client.temperature = cfg.temperature;
    client.max_tokens = cfg.max_tokens;

    std::vector<EvalItem> items;
    std::vector<ChatRequest> requests;
    for (std::size_t i = 0; i < records.size(); ++i) {
        for (const auto& t : cfg.template_ids) {
            for (TableFormat f : cfg.formats) {
                items.push_back({i, t, f, ""});
                requests.push_back(client.request(assemble_prompt(records[i], t, f, prompts), "eval_answer"));
            }
        }
    }
    auto outcomes = client.backend->complete_batch(requests);
    for (std::size_t n = 0; n < items.size(); ++n) {
        if (outcomes[n].ok()) {
            items[n].response = outcomes[n].response->text;
        } else {
            spdlog::warn("model call for {} ({}/{}) failed: {}", records[items[n].record].id, items[n].template_id,
                         to_string(items[n].format), outcomes[n].error);
        }
    }
    return score_run(records, items, cfg, judge, prompts);
}

json to_json(const BenchmarkScore& s) {
    return {{"benchmark", s.benchmark}, {"n", s.n}, {"correct", s.correct}, {"accuracy", s.accuracy}};
}

std::string format_report(const EvalReport& report) {
    std::string out = fmt::format("{:<24} {:>6} {:>8} {:>9}\n", "benchmark", "n", "correct", "accuracy");
    for (const auto& b : report.benchmarks) {
        out += fmt::format("{:<24} {:>6} {:>8} {:>9.4f}\n", b.benchmark, b.n, b.correct, b.accuracy);
    }
    if (report.macro_average) {
        out += fmt::format("{:<24} {:>6} {:>8} {:>9.4f}\n", "macro average", "", "", *report.macro_average);
    }
    if (!report.by_variant.empty()) {
        out += "\nby template/format\n";
        for (const auto& [key, acc] : report.by_variant) out += fmt::format("  {:<22} {:.4f}\n", key, acc);
    }
    return out;
}

void write_report(const EvalReport& report, const std::vector<BenchmarkRecord>& records,
                  const std::filesystem::path& dir) {
    std::vector<json> lines;
    for (const auto& b : report.benchmarks) lines.push_back(to_json(b));
    write_jsonl(dir / "report.jsonl", lines);
    write_text_atomic(dir / "report.txt", format_report(report));

    std::vector<json> responses;
    for (const auto& s : report.items) {
        const auto& rec = records.at(s.item.record);
        responses.push_back({{"id", rec.id},
                             {"benchmark", rec.benchmark},
                             {"template", s.item.template_id},
                             {"format", to_string(s.item.format)},
                             {"response", s.item.response},
                             {"prediction", s.prediction ? json(*s.prediction) : json(nullptr)},
                             {"correct", s.correct},
                             {"unscorable", s.unscorable}});
    }
    write_jsonl(dir / "responses.jsonl", responses);
}

}  // namespace tabforge
