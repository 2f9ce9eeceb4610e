#include "tabforge/table.hpp"

#include <algorithm>
#include <fmt/format.h>

#include "tabforge/hashing.hpp"

namespace tabforge {

using nlohmann::json;

std::string_view to_string(TableType type) {
    switch (type) {
        case TableType::Flat: return "flat";
        case TableType::Horizontal: return "horizontal";
        case TableType::Hierarchical: return "hierarchical";
    }
    return "flat";
}

TableType table_type_from_string(std::string_view name) {
    if (name == "flat") return TableType::Flat;
    if (name == "horizontal") return TableType::Horizontal;
    if (name == "hierarchical") return TableType::Hierarchical;
    throw std::invalid_argument(fmt::format("unknown table type '{}'", name));
}

HeaderSpec canonical_header(TableType type, HeaderSpec hierarchical) {
    switch (type) {
        case TableType::Flat: return {1, 0};
        case TableType::Horizontal: return {0, 1};
        case TableType::Hierarchical: return hierarchical;
    }
    return {1, 0};
}

Cell Cell::from_text(std::string text) {
    Cell c;
    c.kind = (!text.empty() && text.front() == '=') ? CellKind::Formula : CellKind::Literal;
    c.raw_text = std::move(text);
    return c;
}

bool same_structure(const Table& a, const Table& b) {
    if (a.table_type != b.table_type || a.header_spec != b.header_spec || a.n_rows != b.n_rows ||
        a.n_cols != b.n_cols || a.cells != b.cells) {
        return false;
    }
    auto ma = a.merged_regions;
    auto mb = b.merged_regions;
    std::sort(ma.begin(), ma.end());
    std::sort(mb.begin(), mb.end());
    return ma == mb;
}

std::string_view to_string(Violation v) {
    switch (v) {
        case Violation::RaggedRow: return "RaggedRow";
        case Violation::DimensionMismatch: return "DimensionMismatch";
        case Violation::TooSmall: return "TooSmall";
        case Violation::TooLarge: return "TooLarge";
        case Violation::HeaderMismatch: return "HeaderMismatch";
        case Violation::HeaderTooDeep: return "HeaderTooDeep";
        case Violation::TrivialMerge: return "TrivialMerge";
        case Violation::MergeOutOfBounds: return "MergeOutOfBounds";
        case Violation::OverlappingMerge: return "OverlappingMerge";
        case Violation::CoveredSlotMismatch: return "CoveredSlotMismatch";
        case Violation::EmptyCell: return "EmptyCell";
        case Violation::KindMismatch: return "KindMismatch";
        case Violation::UnresolvedFormula: return "UnresolvedFormula";
    }
    return "Unknown";
}

bool ValidationReport::has(Violation v) const {
    return std::find(violations.begin(), violations.end(), v) != violations.end();
}

ValidationReport validate(const Table& t, const ValidateOptions& options) {
    ValidationReport report;
    auto flag = [&](Violation v) {
        report.ok = false;
        if (!report.has(v)) report.violations.push_back(v);
    };

    if (t.cells.size() != t.n_rows) flag(Violation::DimensionMismatch);
    for (const auto& row : t.cells) {
        if (row.size() != t.n_cols) flag(Violation::RaggedRow);
    }

    if (options.check_size) {
        if (t.n_rows < options.limits.min_rows || t.n_cols < options.limits.min_cols) flag(Violation::TooSmall);
        if (t.n_rows > options.limits.max_rows || t.n_cols > options.limits.max_cols) flag(Violation::TooLarge);
    }

    const auto& h = t.header_spec;
    switch (t.table_type) {
        case TableType::Flat:
            if (h.column_header_levels != 1 || h.row_header_levels != 0) flag(Violation::HeaderMismatch);
            break;
        case TableType::Horizontal:
            if (h.column_header_levels != 0 || h.row_header_levels != 1) flag(Violation::HeaderMismatch);
            break;
        case TableType::Hierarchical:
            if (h.column_header_levels < 1 || h.column_header_levels > 3 || h.row_header_levels < 1 ||
                h.row_header_levels > 2) {
                flag(Violation::HeaderMismatch);
            }
            break;
    }
    if (h.column_header_levels < 0 || h.row_header_levels < 0 ||
        static_cast<std::size_t>(h.column_header_levels) >= t.n_rows ||
        static_cast<std::size_t>(h.row_header_levels) >= t.n_cols) {
        flag(Violation::HeaderTooDeep);
    }

    // Occupancy is only meaningful on a rectangular grid.
    const bool rectangular = report.ok || (!report.has(Violation::RaggedRow) && !report.has(Violation::DimensionMismatch));
    std::vector<int> owner(t.n_rows * t.n_cols, -1);
    std::size_t merged_area = 0;
    for (std::size_t i = 0; i < t.merged_regions.size(); ++i) {
        const auto& m = t.merged_regions[i];
        if (m.row_span == 0 || m.col_span == 0 || m.area() < 2) {
            flag(Violation::TrivialMerge);
            continue;
        }
        if (m.top_row + m.row_span > t.n_rows || m.left_col + m.col_span > t.n_cols) {
            flag(Violation::MergeOutOfBounds);
            continue;
        }
        merged_area += m.area();
        for (std::size_t r = m.top_row; r < m.top_row + m.row_span; ++r) {
            for (std::size_t c = m.left_col; c < m.left_col + m.col_span; ++c) {
                int& o = owner[r * t.n_cols + c];
                if (o >= 0) flag(Violation::OverlappingMerge);
                o = static_cast<int>(i);
            }
        }
    }
    if (merged_area > t.n_rows * t.n_cols) flag(Violation::OverlappingMerge);

    if (!rectangular) return report;

    for (std::size_t r = 0; r < t.n_rows; ++r) {
        for (std::size_t c = 0; c < t.n_cols; ++c) {
            const Cell& cell = t.cells[r][c];
            const bool starts_eq = !cell.raw_text.empty() && cell.raw_text.front() == '=';
            if (starts_eq != (cell.kind == CellKind::Formula)) flag(Violation::KindMismatch);
            if (options.require_resolved && cell.kind == CellKind::Formula && !cell.resolved_text) {
                flag(Violation::UnresolvedFormula);
            }
            int o = owner[r * t.n_cols + c];
            if (o >= 0) {
                const auto& m = t.merged_regions[static_cast<std::size_t>(o)];
                const Cell& anchor = t.cells[m.top_row][m.left_col];
                if (anchor.raw_text.empty()) flag(Violation::EmptyCell);
                if (!m.is_anchor(r, c) && cell.raw_text != anchor.raw_text) flag(Violation::CoveredSlotMismatch);
            } else if (cell.raw_text.empty()) {
                flag(Violation::EmptyCell);
            }
        }
    }
    return report;
}

const MergedRegion* merge_covering(const Table& table, std::size_t r, std::size_t c) {
    for (const auto& m : table.merged_regions) {
        if (m.contains(r, c)) return &m;
    }
    return nullptr;
}

const Cell& cell_at(const Table& table, std::size_t r, std::size_t c) {
    if (r >= table.n_rows || c >= table.n_cols || r >= table.cells.size() || c >= table.cells[r].size()) {
        throw TableError(TableErrc::OutOfBounds,
                         fmt::format("cell ({}, {}) outside {}x{} grid", r, c, table.n_rows, table.n_cols));
    }
    if (const auto* m = merge_covering(table, r, c)) return table.cells[m->top_row][m->left_col];
    return table.cells[r][c];
}

Rect data_region(const Table& table) {
    const auto top = static_cast<std::size_t>(std::max(0, table.header_spec.column_header_levels));
    const auto left = static_cast<std::size_t>(std::max(0, table.header_spec.row_header_levels));
    if (top >= table.n_rows || left >= table.n_cols) {
        throw TableError(TableErrc::DegenerateTable,
                         fmt::format("headers ({} rows, {} cols) consume the {}x{} grid", top, left, table.n_rows,
                                     table.n_cols));
    }
    return {top, table.n_rows - 1, left, table.n_cols - 1};
}

void mirror_merged_slots(Table& table) {
    for (const auto& m : table.merged_regions) {
        if (m.top_row + m.row_span > table.cells.size()) continue;
        const Cell anchor = table.cells[m.top_row][m.left_col];
        for (std::size_t r = m.top_row; r < m.top_row + m.row_span; ++r) {
            for (std::size_t c = m.left_col; c < m.left_col + m.col_span && c < table.cells[r].size(); ++c) {
                table.cells[r][c] = anchor;
            }
        }
    }
}

Table materialize(const Table& table) {
    Table out = table;
    for (auto& row : out.cells) {
        for (auto& cell : row) {
            if (cell.kind == CellKind::Formula && cell.resolved_text) {
                cell = Cell::from_text(*cell.resolved_text);
            }
        }
    }
    return out;
}

std::vector<std::string> expanded_texts(const Table& table) {
    std::vector<std::string> out;
    out.reserve(table.n_rows * table.n_cols);
    for (std::size_t r = 0; r < table.n_rows; ++r) {
        for (std::size_t c = 0; c < table.n_cols; ++c) out.push_back(cell_at(table, r, c).display());
    }
    return out;
}

std::string make_table_id(const Table& table, std::size_t counter) {
    std::string key = table.title;
    key.push_back('\x1e');
    for (const auto& row : table.cells) {
        for (const auto& cell : row) {
            key.append(cell.raw_text);
            key.push_back('\x1f');
        }
        key.push_back('\x1e');
    }
    auto merges = table.merged_regions;
    std::sort(merges.begin(), merges.end());
    for (const auto& m : merges) {
        key.append(fmt::format("{},{},{},{};", m.top_row, m.left_col, m.row_span, m.col_span));
    }
    return fmt::format("T{:06}-{}", counter, sha256_hex(key).substr(0, 12));
}

Table make_table(std::vector<std::vector<std::string>> rows, TableType type, HeaderSpec header) {
    Table t;
    t.table_type = type;
    t.header_spec = header;
    t.n_rows = rows.size();
    t.n_cols = rows.empty() ? 0 : rows.front().size();
    t.cells.reserve(rows.size());
    for (auto& row : rows) {
        std::vector<Cell> cells;
        cells.reserve(row.size());
        for (auto& text : row) cells.push_back(Cell::from_text(std::move(text)));
        t.cells.push_back(std::move(cells));
    }
    return t;
}

json to_json(const Table& t) {
    json cells = json::array();
    for (const auto& row : t.cells) {
        for (const auto& cell : row) {
            json c = {{"text", cell.raw_text}, {"kind", cell.kind == CellKind::Formula ? "formula" : "literal"}};
            if (cell.resolved_text) c["resolved"] = *cell.resolved_text;
            cells.push_back(std::move(c));
        }
    }
    json merges = json::array();
    for (const auto& m : t.merged_regions) merges.push_back({m.top_row, m.left_col, m.row_span, m.col_span});
    return {{"id", t.id},
            {"title", t.title},
            {"topic", t.topic},
            {"subtopic", t.subtopic},
            {"table_type", std::string(to_string(t.table_type))},
            {"col_header_levels", t.header_spec.column_header_levels},
            {"row_header_levels", t.header_spec.row_header_levels},
            {"n_rows", t.n_rows},
            {"n_cols", t.n_cols},
            {"cells", std::move(cells)},
            {"merges", std::move(merges)}};
}

Table table_from_json(const json& j) {
    Table t;
    t.id = j.value("id", "");
    t.title = j.value("title", "");
    t.topic = j.value("topic", "");
    t.subtopic = j.value("subtopic", "");
    t.table_type = table_type_from_string(j.at("table_type").get<std::string>());
    t.header_spec = {j.at("col_header_levels").get<int>(), j.at("row_header_levels").get<int>()};
    t.n_rows = j.at("n_rows").get<std::size_t>();
    t.n_cols = j.at("n_cols").get<std::size_t>();
    const auto& cells = j.at("cells");
    if (cells.size() != t.n_rows * t.n_cols) {
        throw std::invalid_argument(
            fmt::format("table {}: {} cells for a {}x{} grid", t.id, cells.size(), t.n_rows, t.n_cols));
    }
    t.cells.assign(t.n_rows, std::vector<Cell>(t.n_cols));
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto& c = cells[i];
        Cell& cell = t.cells[i / t.n_cols][i % t.n_cols];
        cell.raw_text = c.at("text").get<std::string>();
        cell.kind = c.value("kind", "literal") == "formula" ? CellKind::Formula : CellKind::Literal;
        if (c.contains("resolved")) cell.resolved_text = c["resolved"].get<std::string>();
    }
    for (const auto& m : j.at("merges")) {
        t.merged_regions.push_back(
            {m.at(0).get<std::size_t>(), m.at(1).get<std::size_t>(), m.at(2).get<std::size_t>(), m.at(3).get<std::size_t>()});
    }
    return t;
}

}  // namespace tabforge
