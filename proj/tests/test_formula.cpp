#include "doctest.h"

#include <algorithm>
#include <random>

#include "formula_oracle.hpp"
#include "tabforge/formula.hpp"

using namespace tabforge;

namespace {

FormulaNode ref(std::size_t r, std::size_t c) {
    FormulaNode n;
    n.kind = FormulaNode::Kind::Ref;
    n.ref = {r, c};
    return n;
}

FormulaErrc error_code(auto&& fn) {
    try {
        fn();
    } catch (const FormulaError& e) {
        return e.code();
    }
    FAIL("expected FormulaError");
    return FormulaErrc::SyntaxError;
}

Table ledger(std::vector<std::vector<std::string>> rows) { return make_table(std::move(rows)); }

}  // namespace

TEST_CASE("parse_formula builds the expected trees") {
    auto add = parse_formula("=R2C2+R3C2");
    CHECK(add.ast.kind == FormulaNode::Kind::Binary);
    CHECK(add.ast.op == '+');
    CHECK(add.ast.children[0] == ref(2, 2));
    CHECK(add.ast.children[1] == ref(3, 2));

    auto sum = parse_formula("=SUM(R2C2:R5C2)");
    CHECK(sum.ast.kind == FormulaNode::Kind::Call);
    CHECK(sum.ast.fn == Aggregate::Sum);
    REQUIRE(sum.ast.children.size() == 1);
    CHECK(sum.ast.children[0].kind == FormulaNode::Kind::Range);
    CHECK(sum.ast.children[0].range == FormulaRange{{2, 2}, {5, 2}});

    auto prec = parse_formula("= 1 + 2 * r1c1");
    CHECK(prec.ast.op == '+');
    CHECK(prec.ast.children[1].op == '*');

    auto mixed = parse_formula("=average(R1C1:R2C2, 4, -R3C3) / (2)");
    CHECK(mixed.ast.op == '/');
    CHECK(mixed.ast.children[0].fn == Aggregate::Avg);
    CHECK(mixed.ast.children[0].children.size() == 3);
}

TEST_CASE("parse_formula errors") {
    CHECK(error_code([] { parse_formula("=R0C1"); }) == FormulaErrc::BadRef);
    CHECK(error_code([] { parse_formula("=R1C0"); }) == FormulaErrc::BadRef);
    CHECK(error_code([] { parse_formula("=SUM(R5C2:R2C2)"); }) == FormulaErrc::BadRef);
    CHECK(error_code([] { parse_formula("=R2C"); }) == FormulaErrc::BadRef);
    CHECK(error_code([] { parse_formula("R1C1"); }) == FormulaErrc::SyntaxError);
    CHECK(error_code([] { parse_formula("=R1C1 +"); }) == FormulaErrc::SyntaxError);
    CHECK(error_code([] { parse_formula("=MEDIAN(R1C1:R2C1)"); }) == FormulaErrc::SyntaxError);
    CHECK(error_code([] { parse_formula("=(R1C1"); }) == FormulaErrc::SyntaxError);
    CHECK(error_code([] { parse_formula("=R1C1:R2C2"); }) == FormulaErrc::SyntaxError);
}

TEST_CASE("cell number parsing") {
    CHECK(parse_cell_number("1,234.5") == doctest::Approx(1234.5));
    CHECK(parse_cell_number("$12") == doctest::Approx(12));
    CHECK(parse_cell_number("7%") == doctest::Approx(0.07));
    CHECK(parse_cell_number(" -3.25 ") == doctest::Approx(-3.25));
    CHECK(parse_cell_number("-$1,000") == doctest::Approx(-1000));
    CHECK(parse_cell_number("\xE2\x82\xAC" "5") == doctest::Approx(5));
    CHECK_FALSE(parse_cell_number("12 apples"));
    CHECK_FALSE(parse_cell_number("1,23"));
    CHECK_FALSE(parse_cell_number("N/A"));
    CHECK_FALSE(parse_cell_number(""));
    CHECK_FALSE(parse_cell_number("5."));
}

TEST_CASE("number rendering") {
    CHECK(format_number(5.0) == "5");
    CHECK(format_number(5.001) == "5");
    CHECK(format_number(2.5) == "2.5");
    CHECK(format_number(1.0 / 3.0) == "0.33");
    CHECK(format_number(-0.001) == "0");
    CHECK(format_number(1234567.891) == "1234567.89");
}

TEST_CASE("evaluate_table resolves formulas") {
    Table t = ledger({{"Item", "Amount", "Note", "X"},
                      {"Revenue", "10", "a", "x"},
                      {"Cost", "5", "b", "x"},
                      {"Net", "=R2C2-R3C2", "c", "x"}});
    Table out = evaluate_table(t);
    CHECK(out.cells[3][1].resolved_text == "5");
    CHECK(out.cells[3][1].raw_text == "=R2C2-R3C2");
    CHECK(validate(out, {.limits = {}, .check_size = true, .require_resolved = true}).ok);
    CHECK(evaluate_table(t) == out);
}

TEST_CASE("evaluate_table errors") {
    CHECK(error_code([] {
              evaluate_table(ledger({{"h", "h"}, {"a", "=R3C2"}, {"b", "=R2C2"}}));
          }) == FormulaErrc::CyclicFormula);
    CHECK(error_code([] { evaluate_table(ledger({{"h", "h"}, {"a", "=R2C1+1"}})); }) == FormulaErrc::NonNumericOperand);
    CHECK(error_code([] { evaluate_table(ledger({{"h", "h"}, {"0", "=5/R2C1"}})); }) == FormulaErrc::DivideByZero);
    CHECK(error_code([] { evaluate_table(ledger({{"h", "h"}, {"1", "=R9C1"}})); }) == FormulaErrc::BadRef);
    CHECK(error_code([] { evaluate_table(ledger({{"h", "h"}, {"1", "=SUM(R1C2:R2C2)"}})); }) ==
          FormulaErrc::CyclicFormula);
}

TEST_CASE("merged anchors are read once and formulas mirror into covered slots") {
    Table t = ledger({{"h", "h", "h"}, {"4", "4", "=SUM(R2C1:R2C2)"}, {"1", "=R2C3*2", "=R3C2"}});
    t.merged_regions = {{1, 0, 1, 2}};
    Table out = evaluate_table(t);
    CHECK(out.cells[1][2].resolved_text == "4");
    CHECK(out.cells[2][1].resolved_text == "8");
    CHECK(out.cells[2][2].resolved_text == "8");

    Table m = ledger({{"h", "h"}, {"=2+3", "=2+3"}, {"=R2C2*2", "x"}});
    m.merged_regions = {{1, 0, 1, 2}};
    Table mo = evaluate_table(m);
    CHECK(mo.cells[1][1].resolved_text == "5");
    CHECK(mo.cells[2][0].resolved_text == "10");
}

TEST_CASE("dependencies") {
    SUBCASE("formula over literals has no inter-formula edges") {
        auto g = dependencies(ledger({{"h", "h"}, {"1", "2"}, {"=R2C1+R2C2", "x"}}));
        CHECK(g.nodes.size() == 1);
        CHECK(g.edges.empty());
    }
    SUBCASE("chain orders dependees first") {
        // A reads B, B reads C.
        auto g = dependencies(ledger({{"h", "h"}, {"=R3C1", "1"}, {"=R4C1", "2"}, {"=R2C2", "3"}}));
        REQUIRE(g.topological_order.size() == 3);
        CHECK(g.topological_order[0] == CellCoord{3, 0});
        CHECK(g.topological_order[1] == CellCoord{2, 0});
        CHECK(g.topological_order[2] == CellCoord{1, 0});
        CHECK(g.edges.size() == 2);
    }
    SUBCASE("diamond evaluates like the fixed-point oracle") {
        Table t = ledger({{"h", "h", "h"},
                          {"=R3C1+R3C2", "1", "x"},
                          {"=R4C1*2", "=R4C1+1", "x"},
                          {"7", "x", "x"}});
        auto g = dependencies(t);
        CHECK(g.nodes.size() == 3);
        CHECK(g.edges.size() == 2);
        Table out = evaluate_table(t);
        CHECK(out.cells[2][0].resolved_text == "14");
        CHECK(out.cells[2][1].resolved_text == "8");
        CHECK(out.cells[1][0].resolved_text == "22");
    }
}

TEST_CASE("random acyclic tables match the fixed-point oracle") {
    std::mt19937_64 rng(99);
    for (int i = 0; i < 300; ++i) {
        auto ot = testing::random_formula_table(rng, 10, false);
        auto expected = testing::fixed_point_oracle(ot);
        REQUIRE(expected);
        Table out = evaluate_table(ot.table);
        for (const auto& [at, text] : *expected) {
            CHECK_MESSAGE(out.cells[at.row][at.col].resolved_text == text, ot.formulas.size());
        }
    }
}

TEST_CASE("random cyclic tables are rejected") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 100; ++i) {
        auto ot = testing::random_formula_table(rng, 10, true);
        CHECK(error_code([&] { evaluate_table(ot.table); }) == FormulaErrc::CyclicFormula);
    }
}

TEST_CASE("evaluation is deterministic") {
    std::mt19937_64 rng(12);
    for (int i = 0; i < 50; ++i) {
        auto ot = testing::random_formula_table(rng, 10, false);
        Table a = evaluate_table(ot.table);
        CHECK(nlohmann::json(to_json(a)).dump() == to_json(evaluate_table(ot.table)).dump());
    }
}
