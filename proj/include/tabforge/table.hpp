#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace tabforge {

enum class TableType { Flat, Horizontal, Hierarchical };

std::string_view to_string(TableType type);
TableType table_type_from_string(std::string_view name);

struct HeaderSpec {
    int column_header_levels = 1;
    int row_header_levels = 0;

    bool operator==(const HeaderSpec&) const = default;
};

/// Header layout implied by the table type. Hierarchical tables have no
/// canonical layout, so the caller's levels are returned unchanged.
HeaderSpec canonical_header(TableType type, HeaderSpec hierarchical = {1, 1});

struct MergedRegion {
    std::size_t top_row = 0;
    std::size_t left_col = 0;
    std::size_t row_span = 1;
    std::size_t col_span = 1;

    bool contains(std::size_t r, std::size_t c) const {
        return r >= top_row && r < top_row + row_span && c >= left_col && c < left_col + col_span;
    }
    bool is_anchor(std::size_t r, std::size_t c) const { return r == top_row && c == left_col; }
    std::size_t area() const { return row_span * col_span; }

    auto operator<=>(const MergedRegion&) const = default;
};

enum class CellKind { Literal, Formula };

struct Cell {
    std::string raw_text;
    CellKind kind = CellKind::Literal;
    std::optional<std::string> resolved_text;

    /// Builds a cell whose kind follows from the leading "=".
    static Cell from_text(std::string text);

    /// What a reader sees: the resolved value for formulas, otherwise the raw text.
    const std::string& display() const { return resolved_text ? *resolved_text : raw_text; }

    bool operator==(const Cell&) const = default;
};

struct CellCoord {
    std::size_t row = 0;
    std::size_t col = 0;
    auto operator<=>(const CellCoord&) const = default;
};

/// Inclusive rectangle of grid coordinates.
struct Rect {
    std::size_t first_row = 0;
    std::size_t last_row = 0;
    std::size_t first_col = 0;
    std::size_t last_col = 0;

    std::size_t rows() const { return last_row - first_row + 1; }
    std::size_t cols() const { return last_col - first_col + 1; }
    bool operator==(const Rect&) const = default;
};

struct Table {
    std::string id;
    std::string title;
    std::string topic;
    std::string subtopic;
    TableType table_type = TableType::Flat;
    HeaderSpec header_spec;
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<std::vector<Cell>> cells;
    std::vector<MergedRegion> merged_regions;

    bool operator==(const Table&) const = default;
};

/// Structural equality: type, headers, grid and merges. Ignores id and
/// descriptive metadata, and compares merges as a set.
bool same_structure(const Table& a, const Table& b);

struct TableLimits {
    std::size_t min_rows = 4;
    std::size_t min_cols = 4;
    std::size_t max_rows = 43;
    std::size_t max_cols = 45;
};

enum class Violation {
    RaggedRow,
    DimensionMismatch,
    TooSmall,
    TooLarge,
    HeaderMismatch,
    HeaderTooDeep,
    TrivialMerge,
    MergeOutOfBounds,
    OverlappingMerge,
    CoveredSlotMismatch,
    EmptyCell,
    KindMismatch,
    UnresolvedFormula,
};

std::string_view to_string(Violation v);

struct ValidationReport {
    bool ok = true;
    std::vector<Violation> violations;

    bool has(Violation v) const;
};

struct ValidateOptions {
    TableLimits limits;
    bool check_size = true;
    /// Reject formula cells that carry no resolved value.
    bool require_resolved = false;
};

ValidationReport validate(const Table& table, const ValidateOptions& options = {});

enum class TableErrc { OutOfBounds, DegenerateTable };

class TableError : public std::runtime_error {
public:
    TableError(TableErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    TableErrc code() const { return code_; }

private:
    TableErrc code_;
};

/// Cell visible at (r, c): the anchor cell when the slot is covered by a merge.
const Cell& cell_at(const Table& table, std::size_t r, std::size_t c);

/// Region holding data (everything right of the row headers and below the
/// column headers).
Rect data_region(const Table& table);

/// Merge whose area includes (r, c), if any.
const MergedRegion* merge_covering(const Table& table, std::size_t r, std::size_t c);

/// Copies each anchor into every slot its merge covers.
void mirror_merged_slots(Table& table);

/// Turns resolved formula cells into plain literals holding the value.
Table materialize(const Table& table);

/// Display texts of every grid slot, row-major.
std::vector<std::string> expanded_texts(const Table& table);

/// Content hash of (title, grid, merges) prefixed with a run-scoped counter.
std::string make_table_id(const Table& table, std::size_t counter);

/// Grid builder used by parsers and tests; fills metadata defaults.
Table make_table(std::vector<std::vector<std::string>> rows, TableType type = TableType::Flat,
                 HeaderSpec header = {1, 0});

nlohmann::json to_json(const Table& table);
Table table_from_json(const nlohmann::json& j);

}  // namespace tabforge
