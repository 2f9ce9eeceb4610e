#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "tabforge/llm.hpp"
#include "tabforge/prompts.hpp"
#include "tabforge/sample.hpp"
#include "tabforge/table.hpp"

namespace tabforge {

enum class JudgingErrc { UnscorableSample };

class JudgingError : public std::runtime_error {
public:
    JudgingError(JudgingErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    JudgingErrc code() const { return code_; }

private:
    JudgingErrc code_;
};

inline constexpr int kDefaultWeaknessThreshold = 3;

struct JudgeVerdict {
    int score = 0;
    std::string rationale;
    bool is_weakness = false;
};

/// Weak iff score < threshold.
JudgeVerdict make_verdict(int score, std::string rationale, int threshold = kDefaultWeaknessThreshold);

/// Score from the last JSON object carrying "score": an integer 1..5 (or a
/// string holding one). The rationale is the text before that object.
std::optional<JudgeVerdict> parse_judge_reply(std::string_view reply, int threshold = kDefaultWeaknessThreshold);

/// Target model's answer request for a sample, shown in the sample's format.
ChatRequest target_request(const RoleClient& target, const PromptLibrary& prompts, const InstructionSample& sample,
                           const Table& table);

/// Single-sample form; provider errors propagate.
std::string target_answer(const InstructionSample& sample, const Table& table, const RoleClient& target,
                          const PromptLibrary& prompts);

ChatRequest judge_request(const RoleClient& judge, const PromptLibrary& prompts, const InstructionSample& sample,
                          const Table& table, std::string_view target_response, int attempt);

struct JudgeJob {
    const InstructionSample* sample = nullptr;
    const Table* table = nullptr;
    std::string target_response;
};

struct JudgeOutcome {
    std::optional<JudgeVerdict> verdict;
    int attempts = 0;
    /// Why no verdict: unparseable replies or provider errors.
    std::string error;
};

/// Each job is asked once; unparseable replies are re-asked up to
/// `max_reasks` times with a fresh sampling seed. Prompts never include an
/// earlier judge reply. Results in job order.
std::vector<JudgeOutcome> judge_batch(const std::vector<JudgeJob>& jobs, const RoleClient& judge,
                                      const PromptLibrary& prompts, int max_reasks = 2,
                                      int threshold = kDefaultWeaknessThreshold);

/// Single-sample form. Throws UnscorableSample once the re-asks are spent.
JudgeVerdict judge(const InstructionSample& sample, const Table& table, std::string_view target_response,
                   const RoleClient& judge_client, const PromptLibrary& prompts, int max_reasks = 2,
                   int threshold = kDefaultWeaknessThreshold);

struct Partition {
    std::vector<InstructionSample> weakness;
    std::vector<InstructionSample> passed;
};

/// Splits judged samples on judge_score < threshold, keeping input order.
/// Every sample must carry a score.
Partition partition(const std::vector<InstructionSample>& judged, int threshold = kDefaultWeaknessThreshold);

struct SafetyVerdict {
    bool flagged = false;
    std::optional<std::string> reason;
};

/// "SAFE" clears the sample; "UNSAFE: why" flags it. Anything else is
/// flagged as unparseable.
SafetyVerdict parse_safety_reply(std::string_view reply);

ChatRequest safety_request(const RoleClient& judge, const PromptLibrary& prompts, const InstructionSample& sample,
                           const Table& table);

/// Provider errors also flag the sample.
std::vector<SafetyVerdict> safety_screen(const std::vector<std::pair<const InstructionSample*, const Table*>>& items,
                                         const RoleClient& judge, const PromptLibrary& prompts);

SafetyVerdict safety_screen(const InstructionSample& sample, const Table& table, const RoleClient& judge,
                            const PromptLibrary& prompts);

/// One line of the judgments audit log.
struct JudgmentRecord {
    std::string sample_id;
    std::string target_response;
    std::optional<int> score;
    std::string rationale;
    int attempts = 0;
    std::string error;
};

nlohmann::json to_json(const JudgmentRecord& r);
JudgmentRecord judgment_from_json(const nlohmann::json& j);

}  // namespace tabforge
