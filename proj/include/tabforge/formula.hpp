#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tabforge/table.hpp"

namespace tabforge {

/// 1-based reference as written in a formula, "R<row>C<col>".
struct FormulaRef {
    std::size_t row = 1;
    std::size_t col = 1;

    CellCoord to_grid() const { return {row - 1, col - 1}; }
    bool operator==(const FormulaRef&) const = default;
};

struct FormulaRange {
    FormulaRef first;
    FormulaRef last;
    bool operator==(const FormulaRange&) const = default;
};

enum class Aggregate { Sum, Avg, Min, Max };

/// Expression tree over numbers, refs, ranges, + - * / and the four
/// aggregates. Ranges only appear as aggregate arguments.
struct FormulaNode {
    enum class Kind { Number, Ref, Range, Negate, Binary, Call };

    Kind kind = Kind::Number;
    double number = 0.0;
    FormulaRef ref;
    FormulaRange range;
    char op = '+';
    Aggregate fn = Aggregate::Sum;
    std::vector<FormulaNode> children;

    bool operator==(const FormulaNode&) const = default;
};

struct Formula {
    std::string source;
    FormulaNode ast;
};

enum class FormulaErrc { SyntaxError, BadRef, CyclicFormula, NonNumericOperand, DivideByZero };

std::string_view to_string(FormulaErrc code);

class FormulaError : public std::runtime_error {
public:
    FormulaError(FormulaErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    FormulaErrc code() const { return code_; }

private:
    FormulaErrc code_;
};

/// Grammar: "=" expr; expr := term (('+'|'-') term)*; term := unary (('*'|'/') unary)*;
/// unary := '-' unary | primary; primary := number | ref | FN '(' arg (',' arg)* ')' | '(' expr ')';
/// arg := ref ':' ref | expr. Function names are SUM, AVG (or AVERAGE), MIN, MAX.
Formula parse_formula(std::string_view text);

/// Every grid slot a formula reads, in source order.
std::vector<CellCoord> referenced_cells(const Formula& formula);

/// Number as it may appear in a table cell: "1,234.5", "$12", "-7%" ("%"
/// divides by 100). Returns nothing for any other text.
std::optional<double> parse_cell_number(std::string_view text);

/// Up to two decimals, trailing zeros trimmed, integers without a point.
std::string format_number(double value);

struct DependencyGraph {
    /// Formula cells (merge anchors), row-major.
    std::vector<CellCoord> nodes;
    /// (dependent, dependee) pairs between formula cells.
    std::vector<std::pair<CellCoord, CellCoord>> edges;
    /// Dependees before dependents; ties broken row-major.
    std::vector<CellCoord> topological_order;
};

/// Throws SyntaxError/BadRef for unparsable or out-of-range formulas and
/// CyclicFormula when the formulas reference each other in a loop.
DependencyGraph dependencies(const Table& table);

/// Evaluates every formula cell in topological order and stores the
/// rendered value in resolved_text (mirrored into covered merge slots).
Table evaluate_table(const Table& table);

bool has_formulas(const Table& table);

}  // namespace tabforge
