#include "doctest.h"

#include <filesystem>
#include <fstream>

#include <fmt/format.h>

#include "tabforge/formats.hpp"
#include "tabforge/judging.hpp"
#include "tabforge/pipeline.hpp"

using namespace tabforge;

namespace {

Table fixture_table() {
    Table t = make_table({{"Region", "Q1", "Q2"}, {"North", "10", "12"}, {"South", "7", "9"}, {"East", "4", "6"}},
                         TableType::Flat, {1, 0});
    t.title = "Quarterly orders";
    t.id = make_table_id(t, 1);
    return t;
}

InstructionSample fixture_sample(const Table& t, std::string id = "r1-a") {
    InstructionSample s;
    s.id = std::move(id);
    s.table_id = t.id;
    s.instruction = "Which region had the most orders in Q2?";
    s.response = "North, with 12.";
    s.lineage.origin_task = "Table Question Answering";
    return s;
}

RoleClient client(std::shared_ptr<ChatBackend> b, RoleTag role = RoleTag::Judge) {
    return RoleClient{std::move(b), role, "judge", 0.01, 512};
}

std::shared_ptr<ScriptedBackend> scripted(std::initializer_list<std::string> replies) {
    auto b = std::make_shared<ScriptedBackend>();
    for (const auto& r : replies) b->queue(r);
    return b;
}

}  // namespace

TEST_CASE("judge reply below the threshold is a weakness") {
    const auto v = parse_judge_reply("Misses the Q2 figure.\n{\"score\": 2}");
    REQUIRE(v);
    CHECK(v->score == 2);
    CHECK(v->is_weakness);
    CHECK(v->rationale == "Misses the Q2 figure.");
}

TEST_CASE("score 3 is not a weakness") {
    const auto v = parse_judge_reply("{\"score\": 3}");
    REQUIRE(v);
    CHECK_FALSE(v->is_weakness);
    for (int k = 1; k <= 5; ++k) {
        CHECK(parse_judge_reply(fmt::format("{{\"score\": {}}}", k))->is_weakness == (k < 3));
    }
}

TEST_CASE("out of range and missing scores do not parse") {
    CHECK_FALSE(parse_judge_reply("great job!"));
    CHECK_FALSE(parse_judge_reply("{\"score\": 0}"));
    CHECK_FALSE(parse_judge_reply("{\"score\": 6}"));
    CHECK_FALSE(parse_judge_reply("{\"score\": 2.5}"));
    CHECK_FALSE(parse_judge_reply("{\"rating\": 2}"));
}

TEST_CASE("judge re-asks twice, then gives up") {
    const Table t = fixture_table();
    const auto s = fixture_sample(t);
    auto b = scripted({"great job!", "great job!", "great job!"});
    CHECK_THROWS_AS(judge(s, t, "North", client(b), PromptLibrary::builtin()), JudgingError);
    CHECK(b->calls() == 3);

    auto ok = scripted({"great job!", "fine {\"score\": 4}"});
    const auto v = judge(s, t, "North", client(ok), PromptLibrary::builtin());
    CHECK(v.score == 4);
    CHECK(ok->calls() == 2);
}

TEST_CASE("judge prompt carries both responses and no earlier judge output") {
    const Table t = fixture_table();
    const auto s = fixture_sample(t);
    std::vector<std::string> prompts;
    auto b = std::make_shared<ScriptedBackend>([&](const ChatRequest& req) {
        prompts.push_back(req.user);
        return std::string(prompts.size() < 2 ? "PREVIOUS-VERDICT" : "{\"score\": 1}");
    });
    judge(s, t, "South, with 9.", client(b), PromptLibrary::builtin());
    REQUIRE(prompts.size() == 2);
    for (const auto& p : prompts) {
        CHECK(p.find("North, with 12.") != std::string::npos);
        CHECK(p.find("South, with 9.") != std::string::npos);
        CHECK(p.find("PREVIOUS-VERDICT") == std::string::npos);
    }
}

TEST_CASE("partition keeps input order") {
    const Table t = fixture_table();
    std::vector<InstructionSample> judged;
    for (int k : {1, 3, 5, 2}) {
        auto s = fixture_sample(t, fmt::format("s{}", judged.size()));
        s.judge_score = k;
        judged.push_back(s);
    }
    const auto p = partition(judged);
    REQUIRE(p.weakness.size() == 2);
    CHECK(p.weakness[0].id == "s0");
    CHECK(p.weakness[1].id == "s3");
    REQUIRE(p.passed.size() == 2);
    CHECK(p.passed[0].id == "s1");

    for (auto& s : judged) s.judge_score = 5;
    CHECK(partition(judged).weakness.empty());
    const auto empty = partition({});
    CHECK(empty.weakness.empty());
    CHECK(empty.passed.empty());

    judged[0].judge_score.reset();
    CHECK_THROWS_AS(partition(judged), std::invalid_argument);
}

TEST_CASE("safety replies") {
    CHECK_FALSE(parse_safety_reply("SAFE").flagged);
    const auto pii = parse_safety_reply("UNSAFE: pii");
    CHECK(pii.flagged);
    CHECK(*pii.reason == "pii");
    CHECK(parse_safety_reply("unsafe").flagged);
    CHECK(*parse_safety_reply("unsafe").reason == "unspecified");
    CHECK(parse_safety_reply("I cannot decide").flagged);
    CHECK(parse_safety_reply("").flagged);

    const Table t = fixture_table();
    const auto s = fixture_sample(t);
    auto failing = std::make_shared<ScriptedBackend>([](const ChatRequest&) -> std::string {
        throw LlmError(LlmErrc::ProviderError, "down");
    });
    CHECK(safety_screen(s, t, client(failing), PromptLibrary::builtin()).flagged);
}

TEST_CASE("target answer echoes the scripted reply and the prompt holds the table") {
    const Table t = fixture_table();
    const auto s = fixture_sample(t);
    std::string seen;
    auto b = std::make_shared<ScriptedBackend>([&](const ChatRequest& req) {
        seen = req.user;
        return std::string("A");
    });
    CHECK(target_answer(s, t, client(b, RoleTag::Target), PromptLibrary::builtin()) == "A");
    CHECK(seen.find(serialize(t, s.table_format)) != std::string::npos);
}

TEST_CASE("identical target requests through the cache reach the backend once") {
    const auto dir = std::filesystem::temp_directory_path() / "tabforge_test_judging_cache";
    std::filesystem::remove_all(dir);
    const Table t = fixture_table();
    const auto s = fixture_sample(t);
    auto inner = std::make_shared<ScriptedBackend>([](const ChatRequest&) { return std::string("North"); });
    auto cached = std::make_shared<CachingBackend>(inner, dir);
    const auto c = client(cached, RoleTag::Target);
    CHECK(target_answer(s, t, c, PromptLibrary::builtin()) == "North");
    CHECK(target_answer(s, t, c, PromptLibrary::builtin()) == "North");
    CHECK(inner->calls() == 1);
    std::filesystem::remove_all(dir);
}

TEST_CASE("judge reply fixture") {
    const auto rows = read_jsonl(std::filesystem::path(TABFORGE_TEST_DATA) / "judge_replies.jsonl");
    REQUIRE(rows.size() == 30);
    for (const auto& row : rows) {
        const auto v = parse_judge_reply(row["reply"].get<std::string>());
        CAPTURE(row.dump());
        if (row["score"].is_null()) {
            CHECK_FALSE(v);
        } else {
            REQUIRE(v);
            CHECK(v->score == row["score"].get<int>());
        }
    }
}

TEST_CASE("judgment record round trip") {
    JudgmentRecord r{"r1-x", "North", 2, "close", 1, ""};
    const auto back = judgment_from_json(to_json(r));
    CHECK(back.sample_id == r.sample_id);
    CHECK(back.score == 2);
    CHECK(back.rationale == "close");
    JudgmentRecord none{"r1-y", "", std::nullopt, "", 3, "no score in judge reply"};
    CHECK_FALSE(judgment_from_json(to_json(none)).score);
}
