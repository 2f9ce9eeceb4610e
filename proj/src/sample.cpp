#include "tabforge/sample.hpp"

#include "tabforge/hashing.hpp"

namespace tabforge {

using nlohmann::json;

bool lineage_consistent(const Lineage& l) {
    const bool seed = l.round == 0;
    if (seed != !l.parent_id.has_value() || seed != !l.direction.has_value()) return false;
    if (l.strategy && (!l.direction || info(*l.strategy).direction != *l.direction)) return false;
    return true;
}

namespace {

template <class T, class F>
json optional_json(const std::optional<T>& v, F&& convert) {
    return v ? json(convert(*v)) : json(nullptr);
}

}  // namespace

json to_json(const Lineage& l) {
    return {{"round", l.round},
            {"parent_id", optional_json(l.parent_id, [](const std::string& s) { return s; })},
            {"direction", optional_json(l.direction, [](Direction d) { return std::string(to_string(d)); })},
            {"strategy", optional_json(l.strategy, [](Strategy s) { return std::string(to_string(s)); })},
            {"origin_task", optional_json(l.origin_task, [](const std::string& s) { return s; })}};
}

Lineage lineage_from_json(const json& j) {
    Lineage l;
    l.round = j.at("round").get<std::size_t>();
    if (!j.at("parent_id").is_null()) l.parent_id = j["parent_id"].get<std::string>();
    if (!j.at("direction").is_null()) l.direction = direction_from_string(j["direction"].get<std::string>());
    if (!j.at("strategy").is_null()) l.strategy = strategy_from_string(j["strategy"].get<std::string>());
    if (!j.at("origin_task").is_null()) l.origin_task = j["origin_task"].get<std::string>();
    return l;
}

json to_json(const InstructionSample& s) {
    return {{"id", s.id},
            {"table_id", s.table_id},
            {"table_format", std::string(to_string(s.table_format))},
            {"instruction", s.instruction},
            {"response", s.response},
            {"lineage", to_json(s.lineage)},
            {"judge_score", s.judge_score ? json(*s.judge_score) : json(nullptr)}};
}

InstructionSample sample_from_json(const json& j) {
    InstructionSample s;
    s.id = j.at("id").get<std::string>();
    s.table_id = j.at("table_id").get<std::string>();
    s.table_format = table_format_from_string(j.at("table_format").get<std::string>());
    s.instruction = j.at("instruction").get<std::string>();
    s.response = j.at("response").get<std::string>();
    s.lineage = lineage_from_json(j.at("lineage"));
    if (j.contains("judge_score") && !j["judge_score"].is_null()) s.judge_score = j["judge_score"].get<int>();
    return s;
}

std::string content_id(std::string_view prefix, std::initializer_list<std::string_view> parts) {
    std::string joined;
    for (auto part : parts) {
        joined.append(part);
        joined.push_back('\x1f');
    }
    return std::string(prefix) + sha256_hex(joined).substr(0, 12);
}

PromptVars sample_vars(const Table& table, TableFormat fmt, std::string_view instruction) {
    return {{"table_title", table.title},
            {"table_format", std::string(display_name(fmt))},
            {"table_text", serialize(table, fmt)},
            {"instruction", std::string(instruction)}};
}

}  // namespace tabforge
