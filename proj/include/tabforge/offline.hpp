#pragma once

#include <memory>
#include <string>

#include "tabforge/llm.hpp"

namespace tabforge {

/// How the offline judge picks scores.
enum class OfflineJudge {
    Hash,   // score is a hash of the request, uniform over 1..5
    Cycle,  // 1,2,3,4,5,1,... in call order (only deterministic with one worker)
    Fixed,  // always `fixed_score`
};

struct OfflineOptions {
    /// Fraction of table replies with a cell knocked out.
    double table_failure_rate = 0.1;
    /// Fraction of instruction/evolution replies without usable JSON.
    double reply_failure_rate = 0.05;
    OfflineJudge judge = OfflineJudge::Hash;
    int fixed_score = 5;
};

/// Stand-in for teacher, target and judge models. It reads the rendered
/// prompt, dispatches on ChatRequest::purpose and answers in the shape the
/// pipeline expects. Apart from OfflineJudge::Cycle every reply is a pure
/// function of the request.
ScriptedBackend::Responder offline_responder(OfflineOptions options = {});

/// Parses "mock", "mock:cycle", "mock:score=N" or "mock:fail=0.2" style
/// endpoints; returns nothing for other endpoints.
std::optional<OfflineOptions> offline_options_from_endpoint(const std::string& endpoint);

/// Offline backend for mock endpoints, HttpBackend otherwise.
std::shared_ptr<ChatBackend> make_backend(const BackendConfig& cfg);

}  // namespace tabforge
