#include "tabforge/formula.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fmt/format.h>
#include <map>
#include <set>

#include "text_util.hpp"

namespace tabforge {

std::string_view to_string(FormulaErrc code) {
    switch (code) {
        case FormulaErrc::SyntaxError: return "SyntaxError";
        case FormulaErrc::BadRef: return "BadRef";
        case FormulaErrc::CyclicFormula: return "CyclicFormula";
        case FormulaErrc::NonNumericOperand: return "NonNumericOperand";
        case FormulaErrc::DivideByZero: return "DivideByZero";
    }
    return "Unknown";
}

namespace {

class FormulaParser {
public:
    explicit FormulaParser(std::string_view text) : text_(text) {}

    FormulaNode parse() {
        skip_ws();
        if (!consume('=')) fail(FormulaErrc::SyntaxError, "formula must start with '='");
        FormulaNode node = expr();
        skip_ws();
        if (pos_ != text_.size()) fail(FormulaErrc::SyntaxError, fmt::format("unexpected '{}'", text_[pos_]));
        return node;
    }

private:
    [[noreturn]] void fail(FormulaErrc code, const std::string& msg) const {
        throw FormulaError(code, fmt::format("{} in \"{}\" at offset {}", msg, text_, pos_));
    }

    void skip_ws() {
        while (pos_ < text_.size() && detail::is_space(text_[pos_])) ++pos_;
    }
    bool peek(char ch) {
        skip_ws();
        return pos_ < text_.size() && text_[pos_] == ch;
    }
    bool consume(char ch) {
        if (!peek(ch)) return false;
        ++pos_;
        return true;
    }

    FormulaNode expr() {
        FormulaNode lhs = term();
        while (peek('+') || peek('-')) {
            char op = text_[pos_++];
            lhs = binary(op, std::move(lhs), term());
        }
        return lhs;
    }

    FormulaNode term() {
        FormulaNode lhs = unary();
        while (peek('*') || peek('/')) {
            char op = text_[pos_++];
            lhs = binary(op, std::move(lhs), unary());
        }
        return lhs;
    }

    FormulaNode unary() {
        if (consume('-')) {
            FormulaNode n;
            n.kind = FormulaNode::Kind::Negate;
            n.children.push_back(unary());
            return n;
        }
        if (consume('+')) return unary();
        return primary();
    }

    FormulaNode primary() {
        skip_ws();
        if (pos_ >= text_.size()) fail(FormulaErrc::SyntaxError, "unexpected end");
        char ch = text_[pos_];
        if (ch == '(') {
            ++pos_;
            FormulaNode inner = expr();
            if (!consume(')')) fail(FormulaErrc::SyntaxError, "missing ')'");
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(ch))) {
            std::size_t start = pos_;
            while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) ++pos_;
            std::string word = detail::to_lower(text_.substr(start, pos_ - start));
            if (peek('(')) {
                pos_ = start;
                return call();
            }
            pos_ = start;
            if (word.front() == 'r') {
                FormulaNode n;
                n.kind = FormulaNode::Kind::Ref;
                n.ref = reference();
                return n;
            }
            fail(FormulaErrc::SyntaxError, fmt::format("unknown name '{}'", word));
        }
        fail(FormulaErrc::SyntaxError, fmt::format("unexpected '{}'", ch));
    }

    FormulaNode number() {
        std::size_t start = pos_;
        while (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) ++pos_;
        FormulaNode n;
        n.kind = FormulaNode::Kind::Number;
        auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, n.number);
        if (ec != std::errc{} || ptr != text_.data() + pos_) fail(FormulaErrc::SyntaxError, "bad number");
        return n;
    }

    std::size_t index() {
        std::size_t start = pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        if (start == pos_ || pos_ - start > 6) fail(FormulaErrc::BadRef, "malformed reference");
        std::size_t v = 0;
        std::from_chars(text_.data() + start, text_.data() + pos_, v);
        if (v == 0) fail(FormulaErrc::BadRef, "references are 1-based");
        return v;
    }

    FormulaRef reference() {
        skip_ws();
        if (pos_ >= text_.size() || (text_[pos_] != 'R' && text_[pos_] != 'r')) fail(FormulaErrc::BadRef, "expected reference");
        ++pos_;
        FormulaRef ref;
        ref.row = index();
        if (pos_ >= text_.size() || (text_[pos_] != 'C' && text_[pos_] != 'c')) fail(FormulaErrc::BadRef, "malformed reference");
        ++pos_;
        ref.col = index();
        return ref;
    }

    FormulaNode call() {
        std::size_t start = pos_;
        while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        std::string name = detail::to_lower(text_.substr(start, pos_ - start));
        FormulaNode n;
        n.kind = FormulaNode::Kind::Call;
        if (name == "sum") n.fn = Aggregate::Sum;
        else if (name == "avg" || name == "average") n.fn = Aggregate::Avg;
        else if (name == "min") n.fn = Aggregate::Min;
        else if (name == "max") n.fn = Aggregate::Max;
        else fail(FormulaErrc::SyntaxError, fmt::format("unknown function '{}'", name));
        consume('(');
        do {
            n.children.push_back(argument());
        } while (consume(','));
        if (!consume(')')) fail(FormulaErrc::SyntaxError, "missing ')' after arguments");
        return n;
    }

    FormulaNode argument() {
        skip_ws();
        std::size_t save = pos_;
        if (pos_ < text_.size() && (text_[pos_] == 'R' || text_[pos_] == 'r') && pos_ + 1 < text_.size() &&
            std::isdigit(static_cast<unsigned char>(text_[pos_ + 1]))) {
            FormulaRef first = reference();
            if (consume(':')) {
                FormulaNode n;
                n.kind = FormulaNode::Kind::Range;
                n.range = {first, reference()};
                if (n.range.first.row > n.range.last.row || n.range.first.col > n.range.last.col) {
                    fail(FormulaErrc::BadRef, "range corners out of order");
                }
                return n;
            }
            pos_ = save;
        }
        return expr();
    }

    static FormulaNode binary(char op, FormulaNode lhs, FormulaNode rhs) {
        FormulaNode n;
        n.kind = FormulaNode::Kind::Binary;
        n.op = op;
        n.children.push_back(std::move(lhs));
        n.children.push_back(std::move(rhs));
        return n;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

void collect_refs(const FormulaNode& n, std::vector<FormulaRef>& out) {
    switch (n.kind) {
        case FormulaNode::Kind::Ref: out.push_back(n.ref); break;
        case FormulaNode::Kind::Range:
            for (auto r = n.range.first.row; r <= n.range.last.row; ++r) {
                for (auto c = n.range.first.col; c <= n.range.last.col; ++c) out.push_back({r, c});
            }
            break;
        default:
            for (const auto& ch : n.children) collect_refs(ch, out);
    }
}

CellCoord anchor_of(const Table& t, CellCoord at) {
    if (const auto* m = merge_covering(t, at.row, at.col)) return {m->top_row, m->left_col};
    return at;
}

void check_bounds(const Table& t, const Formula& f, CellCoord owner) {
    std::vector<FormulaRef> refs;
    collect_refs(f.ast, refs);
    for (const auto& r : refs) {
        if (r.row > t.n_rows || r.col > t.n_cols) {
            throw FormulaError(FormulaErrc::BadRef, fmt::format("R{}C{} outside {}x{} table (formula at R{}C{})", r.row,
                                                                r.col, t.n_rows, t.n_cols, owner.row + 1, owner.col + 1));
        }
    }
}

class Evaluator {
public:
    explicit Evaluator(const Table& t) : t_(t) {}

    double eval(const FormulaNode& n) const {
        switch (n.kind) {
            case FormulaNode::Kind::Number: return n.number;
            case FormulaNode::Kind::Ref: return operand(n.ref.to_grid());
            case FormulaNode::Kind::Negate: return -eval(n.children[0]);
            case FormulaNode::Kind::Binary: {
                double a = eval(n.children[0]);
                double b = eval(n.children[1]);
                switch (n.op) {
                    case '+': return a + b;
                    case '-': return a - b;
                    case '*': return a * b;
                    case '/':
                        if (b == 0.0) throw FormulaError(FormulaErrc::DivideByZero, "division by zero");
                        return a / b;
                }
                break;
            }
            case FormulaNode::Kind::Call: return aggregate(n);
            case FormulaNode::Kind::Range:
                throw FormulaError(FormulaErrc::SyntaxError, "range used outside an aggregate");
        }
        throw FormulaError(FormulaErrc::SyntaxError, "bad node");
    }

private:
    double operand(CellCoord at) const {
        const Cell& cell = cell_at(t_, at.row, at.col);
        const std::string& text = cell.kind == CellKind::Formula ? cell.resolved_text.value_or(cell.raw_text) : cell.raw_text;
        if (auto v = parse_cell_number(text)) return *v;
        throw FormulaError(FormulaErrc::NonNumericOperand,
                           fmt::format("R{}C{} holds non-numeric \"{}\"", at.row + 1, at.col + 1, text));
    }

    double aggregate(const FormulaNode& n) const {
        std::vector<double> values;
        for (const auto& arg : n.children) {
            if (arg.kind == FormulaNode::Kind::Range) {
                // A merged region inside a range counts once.
                std::set<CellCoord> seen;
                for (auto r = arg.range.first.row; r <= arg.range.last.row; ++r) {
                    for (auto c = arg.range.first.col; c <= arg.range.last.col; ++c) {
                        CellCoord a = anchor_of(t_, FormulaRef{r, c}.to_grid());
                        if (seen.insert(a).second) values.push_back(operand(a));
                    }
                }
            } else {
                values.push_back(eval(arg));
            }
        }
        switch (n.fn) {
            case Aggregate::Sum: {
                double s = 0;
                for (double v : values) s += v;
                return s;
            }
            case Aggregate::Avg: {
                double s = 0;
                for (double v : values) s += v;
                return s / static_cast<double>(values.size());
            }
            case Aggregate::Min: return *std::min_element(values.begin(), values.end());
            case Aggregate::Max: return *std::max_element(values.begin(), values.end());
        }
        return 0;
    }

    const Table& t_;
};

}  // namespace

Formula parse_formula(std::string_view text) {
    Formula f;
    f.source = std::string(text);
    f.ast = FormulaParser(text).parse();
    return f;
}

std::vector<CellCoord> referenced_cells(const Formula& formula) {
    std::vector<FormulaRef> refs;
    collect_refs(formula.ast, refs);
    std::vector<CellCoord> out;
    out.reserve(refs.size());
    for (const auto& r : refs) out.push_back(r.to_grid());
    return out;
}

std::optional<double> parse_cell_number(std::string_view raw) {
    std::string s = detail::trim(raw);
    bool negative = false;
    auto take_sign = [&] {
        if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
            negative = negative != (s.front() == '-');
            s.erase(0, 1);
        }
    };
    take_sign();
    for (std::string_view sym : {"$", "\xE2\x82\xAC", "\xC2\xA3", "\xC2\xA5"}) {
        if (s.rfind(sym, 0) == 0) {
            s.erase(0, sym.size());
            take_sign();
            break;
        }
    }
    bool percent = false;
    if (!s.empty() && s.back() == '%') {
        percent = true;
        s.pop_back();
    }
    if (s.empty()) return std::nullopt;

    // Digits with optional well-formed thousands groups, then an optional fraction.
    std::string digits;
    std::size_t i = 0;
    std::size_t group = 0;
    bool grouped = false;
    while (i < s.size() && (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == ',')) {
        if (s[i] == ',') {
            if (digits.empty() || (grouped && group != 3) || (!grouped && group > 3)) return std::nullopt;
            grouped = true;
            group = 0;
        } else {
            digits.push_back(s[i]);
            ++group;
        }
        ++i;
    }
    if (grouped && group != 3) return std::nullopt;
    if (i < s.size() && s[i] == '.') {
        digits.push_back('.');
        ++i;
        std::size_t frac = 0;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
            digits.push_back(s[i++]);
            ++frac;
        }
        if (frac == 0) return std::nullopt;
    }
    if (i != s.size() || digits.empty() || digits == ".") return std::nullopt;

    double v = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
    if (ec != std::errc{} || ptr != digits.data() + digits.size()) return std::nullopt;
    if (percent) v /= 100.0;
    return negative ? -v : v;
}

std::string format_number(double value) {
    std::string s = fmt::format("{:.2f}", value);
    if (auto dot = s.find('.'); dot != std::string::npos) {
        while (s.back() == '0') s.pop_back();
        if (s.back() == '.') s.pop_back();
    }
    if (s == "-0") s = "0";
    return s;
}

bool has_formulas(const Table& table) {
    for (const auto& row : table.cells) {
        for (const auto& c : row) {
            if (c.kind == CellKind::Formula) return true;
        }
    }
    return false;
}

namespace {

struct ParsedFormulas {
    std::map<CellCoord, Formula> by_cell;
};

ParsedFormulas parse_all(const Table& t) {
    ParsedFormulas out;
    for (std::size_t r = 0; r < t.n_rows && r < t.cells.size(); ++r) {
        for (std::size_t c = 0; c < t.n_cols && c < t.cells[r].size(); ++c) {
            const Cell& cell = t.cells[r][c];
            if (cell.kind != CellKind::Formula) continue;
            if (const auto* m = merge_covering(t, r, c); m && !m->is_anchor(r, c)) continue;
            Formula f = parse_formula(cell.raw_text);
            check_bounds(t, f, {r, c});
            out.by_cell.emplace(CellCoord{r, c}, std::move(f));
        }
    }
    return out;
}

DependencyGraph build_graph(const Table& t, const ParsedFormulas& parsed) {
    DependencyGraph g;
    std::map<CellCoord, std::set<CellCoord>> dependees;
    std::map<CellCoord, std::vector<CellCoord>> dependents;
    for (const auto& [at, f] : parsed.by_cell) {
        g.nodes.push_back(at);
        auto& deps = dependees[at];
        for (CellCoord ref : referenced_cells(f)) {
            CellCoord a = anchor_of(t, ref);
            if (!parsed.by_cell.count(a)) continue;
            if (deps.insert(a).second) {
                g.edges.emplace_back(at, a);
                dependents[a].push_back(at);
            }
        }
    }

    std::map<CellCoord, std::size_t> pending;
    std::set<CellCoord> ready;
    for (const auto& node : g.nodes) {
        pending[node] = dependees[node].size();
        if (pending[node] == 0) ready.insert(node);
    }
    while (!ready.empty()) {
        CellCoord next = *ready.begin();
        ready.erase(ready.begin());
        g.topological_order.push_back(next);
        for (const auto& d : dependents[next]) {
            if (--pending[d] == 0) ready.insert(d);
        }
    }
    if (g.topological_order.size() != g.nodes.size()) {
        for (const auto& node : g.nodes) {
            if (pending[node] > 0) {
                throw FormulaError(FormulaErrc::CyclicFormula,
                                   fmt::format("formula at R{}C{} is part of a reference cycle", node.row + 1, node.col + 1));
            }
        }
    }
    return g;
}

}  // namespace

DependencyGraph dependencies(const Table& table) { return build_graph(table, parse_all(table)); }

Table evaluate_table(const Table& table) {
    ParsedFormulas parsed = parse_all(table);
    DependencyGraph graph = build_graph(table, parsed);
    Table out = table;
    Evaluator evaluator(out);
    for (const auto& at : graph.topological_order) {
        double v = evaluator.eval(parsed.by_cell.at(at).ast);
        if (!std::isfinite(v)) {
            throw FormulaError(FormulaErrc::NonNumericOperand,
                               fmt::format("formula at R{}C{} produced a non-finite value", at.row + 1, at.col + 1));
        }
        out.cells[at.row][at.col].resolved_text = format_number(v);
    }
    mirror_merged_slots(out);
    return out;
}

}  // namespace tabforge
