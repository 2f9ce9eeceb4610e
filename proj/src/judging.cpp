#include "tabforge/judging.hpp"

#include <cmath>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "tabforge/json_extract.hpp"
#include "text_util.hpp"

namespace tabforge {

using nlohmann::json;

JudgeVerdict make_verdict(int score, std::string rationale, int threshold) {
    return {score, std::move(rationale), score < threshold};
}

std::optional<JudgeVerdict> parse_judge_reply(std::string_view reply, int threshold) {
    auto obj = last_json_object_with(reply, "score");
    if (!obj) return std::nullopt;
    const json& v = (*obj)["score"];
    std::optional<int> score;
    if (v.is_number_integer()) {
        score = v.get<int>();
    } else if (v.is_number_float()) {
        const double d = v.get<double>();
        if (std::floor(d) == d) score = static_cast<int>(d);
    } else if (v.is_string()) {
        const std::string s = detail::trim(v.get<std::string>());
        if (s.size() == 1 && s[0] >= '0' && s[0] <= '9') score = s[0] - '0';
    }
    if (!score || *score < 1 || *score > 5) return std::nullopt;

    std::string rationale;
    if (auto key = reply.rfind("\"score\""); key != std::string_view::npos) {
        if (auto open = reply.rfind('{', key); open != std::string_view::npos) rationale = detail::trim(reply.substr(0, open));
    }
    return make_verdict(*score, std::move(rationale), threshold);
}

ChatRequest target_request(const RoleClient& target, const PromptLibrary& prompts, const InstructionSample& sample,
                           const Table& table) {
    return target.request(prompts.render("answer", sample_vars(table, sample.table_format, sample.instruction)),
                          "target_answer");
}

std::string target_answer(const InstructionSample& sample, const Table& table, const RoleClient& target,
                          const PromptLibrary& prompts) {
    return target.backend->complete(target_request(target, prompts, sample, table)).text;
}

ChatRequest judge_request(const RoleClient& judge, const PromptLibrary& prompts, const InstructionSample& sample,
                          const Table& table, std::string_view target_response, int attempt) {
    PromptVars vars = sample_vars(table, sample.table_format, sample.instruction);
    vars["reference_response"] = sample.response;
    vars["model_response"] = std::string(target_response);
    std::optional<std::int64_t> seed;
    if (attempt > 0) seed = attempt;
    return judge.request(prompts.render("judge", vars), "judge", seed);
}

std::vector<JudgeOutcome> judge_batch(const std::vector<JudgeJob>& jobs, const RoleClient& judge,
                                      const PromptLibrary& prompts, int max_reasks, int threshold) {
    std::vector<JudgeOutcome> out(jobs.size());
    std::vector<std::size_t> pending(jobs.size());
    for (std::size_t i = 0; i < jobs.size(); ++i) pending[i] = i;

    for (int attempt = 0; attempt <= max_reasks && !pending.empty(); ++attempt) {
        std::vector<ChatRequest> requests;
        for (std::size_t i : pending) {
            requests.push_back(judge_request(judge, prompts, *jobs[i].sample, *jobs[i].table, jobs[i].target_response,
                                             attempt));
        }
        auto outcomes = judge.backend->complete_batch(requests);
        std::vector<std::size_t> again;
        for (std::size_t n = 0; n < pending.size(); ++n) {
            JudgeOutcome& o = out[pending[n]];
            ++o.attempts;
            if (!outcomes[n].ok()) {
                o.error = fmt::format("judge call failed: {}", outcomes[n].error);
                again.push_back(pending[n]);
                continue;
            }
            if (auto v = parse_judge_reply(outcomes[n].response->text, threshold)) {
                o.verdict = std::move(v);
                o.error.clear();
            } else {
                o.error = "no score in judge reply";
                again.push_back(pending[n]);
            }
        }
        pending = std::move(again);
    }
    for (std::size_t i : pending) {
        spdlog::warn("sample {} unscorable after {} judge attempts: {}", jobs[i].sample->id, out[i].attempts,
                     out[i].error);
    }
    return out;
}

JudgeVerdict judge(const InstructionSample& sample, const Table& table, std::string_view target_response,
                   const RoleClient& judge_client, const PromptLibrary& prompts, int max_reasks, int threshold) {
    auto out = judge_batch({JudgeJob{&sample, &table, std::string(target_response)}}, judge_client, prompts,
                           max_reasks, threshold);
    if (!out[0].verdict) {
        throw JudgingError(JudgingErrc::UnscorableSample,
                           fmt::format("{}: {} after {} attempts", sample.id, out[0].error, out[0].attempts));
    }
    return *out[0].verdict;
}

Partition partition(const std::vector<InstructionSample>& judged, int threshold) {
    Partition p;
    for (const auto& s : judged) {
        if (!s.judge_score) throw std::invalid_argument(fmt::format("sample {} has no judge score", s.id));
        (*s.judge_score < threshold ? p.weakness : p.passed).push_back(s);
    }
    return p;
}

SafetyVerdict parse_safety_reply(std::string_view reply) {
    for (const auto& raw : detail::split_lines(reply)) {
        const std::string line = detail::trim(raw);
        if (line.empty()) continue;
        const std::string lower = detail::to_lower(line);
        if (lower == "safe" || lower == "safe.") return {false, std::nullopt};
        if (lower.rfind("unsafe", 0) == 0) {
            std::string reason = detail::trim(std::string_view(line).substr(6));
            if (!reason.empty() && reason.front() == ':') reason = detail::trim(std::string_view(reason).substr(1));
            return {true, reason.empty() ? "unspecified" : reason};
        }
        break;
    }
    return {true, "unparseable safety reply"};
}

ChatRequest safety_request(const RoleClient& judge, const PromptLibrary& prompts, const InstructionSample& sample,
                           const Table& table) {
    PromptVars vars = sample_vars(table, sample.table_format, sample.instruction);
    vars.erase("table_format");
    vars["response"] = sample.response;
    return judge.request(prompts.render("safety", vars), "safety");
}

std::vector<SafetyVerdict> safety_screen(const std::vector<std::pair<const InstructionSample*, const Table*>>& items,
                                         const RoleClient& judge, const PromptLibrary& prompts) {
    std::vector<ChatRequest> requests;
    for (const auto& [sample, table] : items) requests.push_back(safety_request(judge, prompts, *sample, *table));
    auto outcomes = judge.backend->complete_batch(requests);
    std::vector<SafetyVerdict> out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        SafetyVerdict v = outcomes[i].ok() ? parse_safety_reply(outcomes[i].response->text)
                                           : SafetyVerdict{true, fmt::format("safety call failed: {}", outcomes[i].error)};
        if (v.flagged) spdlog::info("sample {} flagged by safety screen: {}", items[i].first->id, *v.reason);
        out.push_back(std::move(v));
    }
    return out;
}

SafetyVerdict safety_screen(const InstructionSample& sample, const Table& table, const RoleClient& judge,
                            const PromptLibrary& prompts) {
    return safety_screen({{&sample, &table}}, judge, prompts).front();
}

json to_json(const JudgmentRecord& r) {
    return {{"sample_id", r.sample_id},
            {"target_response", r.target_response},
            {"score", r.score ? json(*r.score) : json(nullptr)},
            {"rationale", r.rationale},
            {"attempts", r.attempts},
            {"error", r.error}};
}

JudgmentRecord judgment_from_json(const json& j) {
    JudgmentRecord r;
    r.sample_id = j.at("sample_id").get<std::string>();
    r.target_response = j.value("target_response", "");
    if (j.contains("score") && !j["score"].is_null()) r.score = j["score"].get<int>();
    r.rationale = j.value("rationale", "");
    r.attempts = j.value("attempts", 0);
    r.error = j.value("error", "");
    return r;
}

}  // namespace tabforge
