#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "tabforge/table.hpp"

namespace tabforge {

enum class TableFormat { Html, Markdown, Csv, Tsv };

inline constexpr TableFormat kAllFormats[] = {TableFormat::Html, TableFormat::Markdown, TableFormat::Csv,
                                              TableFormat::Tsv};

std::string_view to_string(TableFormat fmt);
/// "HTML", "Markdown", "CSV", "TSV" for use in prompts.
std::string_view display_name(TableFormat fmt);
/// Accepts "html", "markdown"/"md", "csv", "tsv".
TableFormat table_format_from_string(std::string_view name);

/// Format a synthesized table is natively written in: HTML for hierarchical
/// tables, Markdown otherwise.
TableFormat native_format(TableType type);

enum class FormatErrc { NoTableFound, RaggedRows, MalformedMarkup };

class FormatError : public std::runtime_error {
public:
    FormatError(FormatErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    FormatErrc code() const { return code_; }

private:
    FormatErrc code_;
};

/// Serializes the displayed cell values. Lossy formats (Markdown, CSV, TSV)
/// duplicate merged anchors into every covered slot.
std::string serialize(const Table& table, TableFormat fmt);

/// Same as serialize; named for the format-change evolution path.
std::string convert(const Table& table, TableFormat to);

struct ParseHints {
    /// Header layout for formats that cannot express it (Markdown, CSV, TSV).
    /// Defaults to a flat table.
    std::optional<TableType> table_type;
    std::optional<HeaderSpec> header_spec;
};

/// Parses the first table found in `text`. Surrounding prose is skipped: the
/// first fenced code block is used when present, and for HTML the first
/// <table> element.
Table parse(std::string_view text, TableFormat fmt, const ParseHints& hints = {});

/// Body of the first ``` fenced block, if any.
std::optional<std::string> first_fenced_block(std::string_view text);

}  // namespace tabforge
