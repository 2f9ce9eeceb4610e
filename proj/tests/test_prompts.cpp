#include "doctest.h"

#include "tabforge/prompts.hpp"

using namespace tabforge;

TEST_CASE("render_template substitutes and unescapes") {
    CHECK(render_template("Hi {name}, {{x}} }}", {{"name", "Ann"}}) == "Hi Ann, {x} }");
    CHECK(render_template("{a}{b}", {{"a", "{b}"}, {"b", "2"}}) == "{b}2");
    CHECK(render_template("no vars", {}) == "no vars");
}

TEST_CASE("template errors") {
    auto code_of = [](auto&& fn) {
        try {
            fn();
        } catch (const PromptError& e) {
            return e.code();
        }
        FAIL("expected PromptError");
        return PromptErrc::MalformedTemplate;
    };
    CHECK(code_of([] { render_template("{title} here", {}); }) == PromptErrc::MissingPlaceholder);
    CHECK(code_of([] { render_template("a { b", {}); }) == PromptErrc::MalformedTemplate);
    CHECK(code_of([] { render_template("a } b", {}); }) == PromptErrc::MalformedTemplate);
    CHECK(code_of([] { render_template("{bad-name}", {}); }) == PromptErrc::MalformedTemplate);
    CHECK(code_of([] { PromptLibrary::builtin().get("nope"); }) == PromptErrc::MissingTemplate);
}

TEST_CASE("builtin library has every pipeline template") {
    auto lib = PromptLibrary::builtin();
    for (const char* name : {"topics", "table_synthesis", "seed_instruction", "answer", "evolve_complication",
                             "evolve_generalization", "evolve_table", "judge", "safety", "t2t_judge", "eval_t1",
                             "eval_t2", "eval_t3", "eval_clause_tqa", "eval_clause_tfv"}) {
        REQUIRE_MESSAGE(lib.has(name), name);
        CHECK(!lib.get(name).empty());
        CHECK(lib.get(name).back() != '\n');
    }
    for (const char* name : {"evolve_complication", "evolve_generalization", "evolve_table"}) {
        auto vars = placeholders(lib.get(name));
        CHECK(std::find(vars.begin(), vars.end(), "strategy_description") != vars.end());
    }
    auto judge_vars = placeholders(lib.get("judge"));
    CHECK(std::find(judge_vars.begin(), judge_vars.end(), "model_response") != judge_vars.end());
}
