#include "tabforge/formats.hpp"

#include <algorithm>
#include <cctype>
#include <fmt/format.h>
#include <regex>

#include "text_util.hpp"

namespace tabforge {

std::string_view to_string(TableFormat fmt) {
    switch (fmt) {
        case TableFormat::Html: return "html";
        case TableFormat::Markdown: return "markdown";
        case TableFormat::Csv: return "csv";
        case TableFormat::Tsv: return "tsv";
    }
    return "markdown";
}

std::string_view display_name(TableFormat fmt) {
    switch (fmt) {
        case TableFormat::Html: return "HTML";
        case TableFormat::Markdown: return "Markdown";
        case TableFormat::Csv: return "CSV";
        case TableFormat::Tsv: return "TSV";
    }
    return "Markdown";
}

TableFormat table_format_from_string(std::string_view name) {
    const std::string n = detail::to_lower(detail::trim(name));
    if (n == "html") return TableFormat::Html;
    if (n == "markdown" || n == "md") return TableFormat::Markdown;
    if (n == "csv") return TableFormat::Csv;
    if (n == "tsv") return TableFormat::Tsv;
    throw std::invalid_argument(fmt::format("unknown table format '{}'", name));
}

TableFormat native_format(TableType type) {
    return type == TableType::Hierarchical ? TableFormat::Html : TableFormat::Markdown;
}

std::optional<std::string> first_fenced_block(std::string_view text) {
    auto open = text.find("```");
    if (open == std::string_view::npos) return std::nullopt;
    auto body = text.find('\n', open);
    if (body == std::string_view::npos) return std::nullopt;
    ++body;
    auto close = text.find("```", body);
    if (close == std::string_view::npos) close = text.size();
    return std::string(text.substr(body, close - body));
}

namespace {

bool is_header_slot(const Table& t, std::size_t r, std::size_t c) {
    return r < static_cast<std::size_t>(t.header_spec.column_header_levels) ||
           c < static_cast<std::size_t>(t.header_spec.row_header_levels);
}

// ---------------------------------------------------------------- Markdown

std::string escape_markdown(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char ch : s) {
        switch (ch) {
            case '\\': out += "\\\\"; break;
            case '|': out += "\\|"; break;
            case '\n': out += "\\n"; break;
            default: out.push_back(ch);
        }
    }
    return out;
}

std::string unescape_markdown(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\\' && i + 1 < s.size()) {
            char next = s[i + 1];
            if (next == '\\' || next == '|') {
                out.push_back(next);
                ++i;
                continue;
            }
            if (next == 'n') {
                out.push_back('\n');
                ++i;
                continue;
            }
        }
        out.push_back(s[i]);
    }
    return out;
}

std::string serialize_markdown(const Table& t) {
    std::string out;
    for (std::size_t r = 0; r < t.n_rows; ++r) {
        out += "|";
        for (std::size_t c = 0; c < t.n_cols; ++c) {
            out += ' ';
            out += escape_markdown(cell_at(t, r, c).display());
            out += " |";
        }
        out += '\n';
        if (r == 0) {
            out += "|";
            for (std::size_t c = 0; c < t.n_cols; ++c) out += " --- |";
            out += '\n';
        }
    }
    return out;
}

// Splits on unescaped pipes; the leading and trailing pipe are dropped.
std::vector<std::string> split_pipe_row(std::string_view line) {
    std::vector<std::string> fields;
    std::string current;
    bool escaped = false;
    for (char ch : line) {
        if (escaped) {
            current.push_back('\\');
            current.push_back(ch);
            escaped = false;
        } else if (ch == '\\') {
            escaped = true;
        } else if (ch == '|') {
            fields.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(ch);
        }
    }
    if (escaped) current.push_back('\\');
    fields.push_back(std::move(current));
    if (!fields.empty() && detail::trim(fields.front()).empty() && !line.empty() && line.front() == '|') {
        fields.erase(fields.begin());
    }
    if (!fields.empty() && detail::trim(fields.back()).empty() && line.size() > 1 && line.back() == '|') {
        fields.pop_back();
    }
    for (auto& f : fields) f = unescape_markdown(detail::trim(f));
    return fields;
}

bool is_separator_row(std::string_view line) {
    static const std::regex kSep(R"(^\|?\s*:?-+:?\s*(\|\s*:?-+:?\s*)*\|?$)");
    return std::regex_match(line.begin(), line.end(), kSep);
}

std::vector<std::vector<std::string>> parse_markdown_rows(std::string_view text) {
    std::vector<std::string> lines;
    bool started = false;
    for (auto& raw : detail::split_lines(text)) {
        std::string line = detail::trim(raw);
        if (!line.empty() && line.front() == '|') {
            lines.push_back(std::move(line));
            started = true;
        } else if (started) {
            break;
        }
    }
    if (lines.empty()) throw FormatError(FormatErrc::NoTableFound, "no pipe table found");

    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i == 1 && is_separator_row(lines[i])) continue;
        rows.push_back(split_pipe_row(lines[i]));
    }
    return rows;
}

// ---------------------------------------------------------------- CSV / TSV

bool needs_quotes(const std::string& s, char delim) {
    if (s.empty()) return false;
    if (std::isspace(static_cast<unsigned char>(s.front())) || std::isspace(static_cast<unsigned char>(s.back()))) {
        return true;
    }
    return s.find_first_of(std::string{delim, '"', '\n', '\r'}) != std::string::npos;
}

std::string serialize_delimited(const Table& t, char delim) {
    std::string out;
    for (std::size_t r = 0; r < t.n_rows; ++r) {
        for (std::size_t c = 0; c < t.n_cols; ++c) {
            if (c) out.push_back(delim);
            const std::string& text = cell_at(t, r, c).display();
            if (needs_quotes(text, delim)) {
                out.push_back('"');
                for (char ch : text) {
                    if (ch == '"') out.push_back('"');
                    out.push_back(ch);
                }
                out.push_back('"');
            } else {
                out += text;
            }
        }
        out.push_back('\n');
    }
    return out;
}

std::vector<std::vector<std::string>> parse_delimited_rows(std::string_view text, char delim) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted_field = false;
    bool in_quotes = false;
    bool row_has_content = false;

    auto finish_field = [&] {
        row.push_back(quoted_field ? field : detail::trim(field));
        field.clear();
        quoted_field = false;
    };
    auto finish_row = [&] {
        finish_field();
        if (row_has_content) rows.push_back(std::move(row));
        row.clear();
        row_has_content = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        char ch = text[i];
        if (in_quotes) {
            if (ch == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(ch);
            }
            continue;
        }
        if (ch == '"' && detail::trim(field).empty()) {
            field.clear();
            in_quotes = true;
            quoted_field = true;
            row_has_content = true;
        } else if (ch == delim) {
            finish_field();
            row_has_content = true;
        } else if (ch == '\n') {
            finish_row();
        } else if (ch == '\r') {
            if (i + 1 < text.size() && text[i + 1] == '\n') continue;
            finish_row();
        } else {
            if (!std::isspace(static_cast<unsigned char>(ch))) row_has_content = true;
            field.push_back(ch);
        }
    }
    if (in_quotes) throw FormatError(FormatErrc::MalformedMarkup, "unterminated quoted field");
    finish_row();
    if (rows.empty()) throw FormatError(FormatErrc::NoTableFound, "no delimited rows found");
    return rows;
}

// ---------------------------------------------------------------- HTML

std::string escape_html(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char ch : s) {
        switch (ch) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '\n': out += "<br>"; break;
            case '\t': out += "&#9;"; break;
            case '\r': out += "&#13;"; break;
            default: out.push_back(ch);
        }
    }
    return out;
}

void append_utf8(std::string& out, unsigned long cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

std::string decode_entities(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '&') {
            out.push_back(s[i]);
            continue;
        }
        auto semi = s.find(';', i);
        if (semi == std::string_view::npos || semi - i > 10) {
            out.push_back('&');
            continue;
        }
        std::string_view name = s.substr(i + 1, semi - i - 1);
        if (name == "amp") out.push_back('&');
        else if (name == "lt") out.push_back('<');
        else if (name == "gt") out.push_back('>');
        else if (name == "quot") out.push_back('"');
        else if (name == "apos") out.push_back('\'');
        else if (name == "nbsp") out.push_back(' ');
        else if (name.size() > 1 && name[0] == '#') {
            unsigned long cp = 0;
            try {
                cp = (name[1] == 'x' || name[1] == 'X') ? std::stoul(std::string(name.substr(2)), nullptr, 16)
                                                        : std::stoul(std::string(name.substr(1)));
            } catch (const std::exception&) {
                out.push_back('&');
                continue;
            }
            append_utf8(out, cp);
        } else {
            out.push_back('&');
            continue;
        }
        i = semi;
    }
    return out;
}

std::string serialize_html(const Table& t) {
    std::string out = "<table>\n";
    if (!t.title.empty()) out += "<caption>" + escape_html(t.title) + "</caption>\n";
    const auto head_rows = static_cast<std::size_t>(std::max(0, t.header_spec.column_header_levels));
    for (std::size_t r = 0; r < t.n_rows; ++r) {
        if (r == 0 && head_rows > 0) out += "<thead>\n";
        if (r == head_rows) out += "<tbody>\n";
        out += "<tr>";
        for (std::size_t c = 0; c < t.n_cols; ++c) {
            const MergedRegion* m = merge_covering(t, r, c);
            if (m && !m->is_anchor(r, c)) continue;
            const char* tag = is_header_slot(t, r, c) ? "th" : "td";
            out += '<';
            out += tag;
            if (m && m->row_span > 1) out += fmt::format(" rowspan=\"{}\"", m->row_span);
            if (m && m->col_span > 1) out += fmt::format(" colspan=\"{}\"", m->col_span);
            out += '>';
            out += escape_html(t.cells[r][c].display());
            out += "</";
            out += tag;
            out += '>';
        }
        out += "</tr>\n";
        if (r + 1 == head_rows) out += "</thead>\n";
    }
    if (head_rows < t.n_rows) out += "</tbody>\n";
    out += "</table>\n";
    return out;
}

struct HtmlCell {
    std::string text;
    std::size_t row_span = 1;
    std::size_t col_span = 1;
    bool header = false;
};

struct HtmlRow {
    std::vector<HtmlCell> cells;
    bool in_thead = false;
};

struct HtmlTable {
    std::string caption;
    std::vector<HtmlRow> rows;
};

std::size_t find_ci(std::string_view hay, std::string_view needle, std::size_t from = 0) {
    if (needle.empty() || hay.size() < needle.size()) return std::string_view::npos;
    for (std::size_t i = from; i + needle.size() <= hay.size(); ++i) {
        bool match = true;
        for (std::size_t k = 0; k < needle.size(); ++k) {
            if (std::tolower(static_cast<unsigned char>(hay[i + k])) != needle[k]) {
                match = false;
                break;
            }
        }
        if (match) return i;
    }
    return std::string_view::npos;
}

std::size_t span_attribute(std::string_view tag, std::string_view name) {
    static const std::regex kRowspan(R"(rowspan\s*=\s*["']?\s*(\d+))", std::regex::icase);
    static const std::regex kColspan(R"(colspan\s*=\s*["']?\s*(\d+))", std::regex::icase);
    std::match_results<std::string_view::const_iterator> m;
    const auto& re = name == "rowspan" ? kRowspan : kColspan;
    if (!std::regex_search(tag.begin(), tag.end(), m, re)) return 1;
    const auto digits = m[1].str();
    if (digits.size() > 4) throw FormatError(FormatErrc::MalformedMarkup, fmt::format("{} too large", name));
    return std::max<std::size_t>(1, std::stoul(digits));
}

// Cell content: tags stripped except <br>, entities decoded, whitespace runs
// that include line breaks collapsed to one space.
std::string clean_cell_text(std::string_view inner) {
    std::string plain;
    for (std::size_t i = 0; i < inner.size(); ++i) {
        if (inner[i] == '<') {
            auto close = inner.find('>', i);
            if (close == std::string_view::npos) break;
            std::string tag = detail::to_lower(inner.substr(i + 1, close - i - 1));
            if (tag.rfind("br", 0) == 0 && (tag.size() == 2 || !std::isalpha(static_cast<unsigned char>(tag[2])))) {
                plain += "\x01";
            }
            i = close;
            continue;
        }
        plain.push_back(inner[i]);
    }
    std::string collapsed;
    for (std::size_t i = 0; i < plain.size();) {
        char ch = plain[i];
        if (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r') {
            std::size_t j = i;
            bool breaks = false;
            while (j < plain.size() && (plain[j] == ' ' || plain[j] == '\t' || plain[j] == '\n' || plain[j] == '\r')) {
                if (plain[j] != ' ') breaks = true;
                ++j;
            }
            if (breaks) collapsed.push_back(' ');
            else collapsed.append(plain, i, j - i);
            i = j;
            continue;
        }
        collapsed.push_back(ch);
        ++i;
    }
    std::string decoded = decode_entities(detail::trim(collapsed));
    std::replace(decoded.begin(), decoded.end(), '\x01', '\n');
    return decoded;
}

HtmlTable tokenize_html_table(std::string_view text) {
    auto start = find_ci(text, "<table");
    if (start == std::string_view::npos) throw FormatError(FormatErrc::NoTableFound, "no <table> element");

    // Matching close tag, counting nested tables.
    std::size_t depth = 0;
    std::size_t end = std::string_view::npos;
    for (std::size_t pos = start; pos < text.size();) {
        auto open = find_ci(text, "<table", pos);
        auto close = find_ci(text, "</table", pos);
        if (close == std::string_view::npos) break;
        if (open != std::string_view::npos && open < close) {
            ++depth;
            pos = open + 6;
        } else {
            if (--depth == 0) {
                end = close;
                break;
            }
            pos = close + 7;
        }
    }
    if (end == std::string_view::npos) throw FormatError(FormatErrc::MalformedMarkup, "unterminated <table>");
    std::string_view body = text.substr(start, end - start);

    HtmlTable table;
    bool in_thead = false;
    HtmlRow* row = nullptr;
    std::size_t pos = body.find('>');
    if (pos == std::string_view::npos) throw FormatError(FormatErrc::MalformedMarkup, "broken <table> tag");
    ++pos;

    while (pos < body.size()) {
        auto lt = body.find('<', pos);
        if (lt == std::string_view::npos) break;
        auto gt = body.find('>', lt);
        if (gt == std::string_view::npos) throw FormatError(FormatErrc::MalformedMarkup, "unterminated tag");
        std::string_view tag = body.substr(lt + 1, gt - lt - 1);
        std::string lower = detail::to_lower(tag);
        std::string name;
        for (char ch : lower) {
            if (std::isalnum(static_cast<unsigned char>(ch)) || ch == '/') name.push_back(ch);
            else break;
        }
        pos = gt + 1;

        if (name == "thead") in_thead = true;
        else if (name == "/thead" || name == "tbody" || name == "tfoot") in_thead = false;
        else if (name == "tr") {
            table.rows.push_back({{}, in_thead});
            row = &table.rows.back();
        } else if (name == "/tr") {
            row = nullptr;
        } else if (name == "caption") {
            auto close = find_ci(body, "</caption", pos);
            if (close == std::string_view::npos) throw FormatError(FormatErrc::MalformedMarkup, "unterminated caption");
            table.caption = clean_cell_text(body.substr(pos, close - pos));
            pos = body.find('>', close) + 1;
        } else if (name == "th" || name == "td") {
            if (!row) {
                table.rows.push_back({{}, in_thead});
                row = &table.rows.back();
            }
            HtmlCell cell;
            cell.header = name == "th";
            cell.row_span = span_attribute(tag, "rowspan");
            cell.col_span = span_attribute(tag, "colspan");
            // Content runs to the matching close, or to the next cell/row when
            // the close tag was omitted.
            std::size_t scan = pos;
            std::size_t content_end = body.size();
            std::size_t resume = body.size();
            while (scan < body.size()) {
                auto next = body.find('<', scan);
                if (next == std::string_view::npos) break;
                auto next_gt = body.find('>', next);
                if (next_gt == std::string_view::npos) break;
                std::string inner = detail::to_lower(body.substr(next + 1, next_gt - next - 1));
                auto is = [&](std::string_view t) {
                    return inner.rfind(t, 0) == 0 &&
                           (inner.size() == t.size() || !std::isalnum(static_cast<unsigned char>(inner[t.size()])));
                };
                if (is("/" + name)) {
                    content_end = next;
                    resume = next_gt + 1;
                    break;
                }
                if (is("td") || is("th") || is("tr") || is("/tr") || is("/tbody") || is("/thead") || is("tbody") ||
                    is("thead")) {
                    content_end = next;
                    resume = next;
                    break;
                }
                scan = next_gt + 1;
            }
            cell.text = clean_cell_text(body.substr(pos, content_end - pos));
            row->cells.push_back(std::move(cell));
            pos = resume;
        }
    }
    if (table.rows.empty()) throw FormatError(FormatErrc::NoTableFound, "<table> has no rows");
    return table;
}

Table parse_html(std::string_view text, const ParseHints& hints) {
    HtmlTable html = tokenize_html_table(text);
    const std::size_t tr_count = html.rows.size();

    struct Slot {
        int cell = -1;  // index into placed
    };
    struct Placed {
        HtmlCell cell;
        std::size_t row, col;
    };
    std::vector<Placed> placed;
    std::vector<std::vector<Slot>> grid(tr_count);
    std::size_t n_cols = 0;

    auto ensure_width = [&](std::size_t r, std::size_t w) {
        if (grid[r].size() < w) grid[r].resize(w);
    };

    for (std::size_t r = 0; r < tr_count; ++r) {
        std::size_t c = 0;
        for (auto& cell : html.rows[r].cells) {
            while (c < grid[r].size() && grid[r][c].cell >= 0) ++c;
            const std::size_t rs = std::min(cell.row_span, tr_count - r);
            const int idx = static_cast<int>(placed.size());
            for (std::size_t dr = 0; dr < rs; ++dr) {
                ensure_width(r + dr, c + cell.col_span);
                for (std::size_t dc = 0; dc < cell.col_span; ++dc) {
                    auto& slot = grid[r + dr][c + dc];
                    if (slot.cell >= 0) {
                        throw FormatError(FormatErrc::MalformedMarkup,
                                          fmt::format("cell spans overlap at ({}, {})", r + dr, c + dc));
                    }
                    slot.cell = idx;
                }
            }
            cell.row_span = rs;
            placed.push_back({cell, r, c});
            c += cell.col_span;
        }
        n_cols = std::max(n_cols, grid[r].size());
    }
    // A <tr> with no cells is kept only when rowspans from above cover it.
    for (std::size_t r = tr_count; r-- > 0;) {
        if (!grid[r].empty()) continue;
        grid.erase(grid.begin() + static_cast<std::ptrdiff_t>(r));
        html.rows.erase(html.rows.begin() + static_cast<std::ptrdiff_t>(r));
        for (auto& p : placed) {
            if (p.row > r) --p.row;
        }
    }
    const std::size_t n_rows = grid.size();
    if (n_rows == 0) throw FormatError(FormatErrc::NoTableFound, "<table> has no cells");
    for (std::size_t r = 0; r < n_rows; ++r) {
        if (grid[r].size() != n_cols || std::any_of(grid[r].begin(), grid[r].end(), [](const Slot& s) { return s.cell < 0; })) {
            throw FormatError(FormatErrc::RaggedRows, fmt::format("row {} does not fill {} columns", r, n_cols));
        }
    }

    Table t;
    t.title = html.caption;
    t.n_rows = n_rows;
    t.n_cols = n_cols;
    t.cells.assign(n_rows, std::vector<Cell>(n_cols));
    for (const auto& p : placed) {
        Cell cell = Cell::from_text(p.cell.text);
        for (std::size_t r = p.row; r < p.row + p.cell.row_span; ++r) {
            for (std::size_t c = p.col; c < p.col + p.cell.col_span; ++c) t.cells[r][c] = cell;
        }
        if (p.cell.row_span * p.cell.col_span >= 2) {
            t.merged_regions.push_back({p.row, p.col, p.cell.row_span, p.cell.col_span});
        }
    }

    // Column header rows: the <thead> rows, else leading rows made only of <th>.
    std::size_t head = 0;
    while (head < n_rows && html.rows[head].in_thead) ++head;
    if (head == 0) {
        while (head + 1 < n_rows) {
            bool all_th = true;
            for (std::size_t c = 0; c < n_cols; ++c) all_th = all_th && placed[grid[head][c].cell].cell.header;
            if (!all_th) break;
            ++head;
        }
    }
    // Row header columns: td anchors in body rows start at the first data column.
    std::size_t left = 0;
    bool saw_td = false;
    std::size_t min_td = n_cols;
    for (const auto& p : placed) {
        if (p.row < head || p.cell.header) continue;
        saw_td = true;
        min_td = std::min(min_td, p.col);
    }
    if (saw_td) {
        left = min_td;
    } else {
        for (const auto& p : placed) {
            if (p.row >= head && p.cell.header) left = std::max(left, p.col + 1);
        }
        left = std::min(left, n_cols > 0 ? n_cols - 1 : 0);
    }

    HeaderSpec spec{static_cast<int>(head), static_cast<int>(left)};
    if (head == 0 && left == 0) {
        const TableType type = hints.table_type.value_or(TableType::Flat);
        t.table_type = type;
        t.header_spec = hints.header_spec.value_or(canonical_header(type));
    } else {
        t.header_spec = spec;
        if (head == 1 && left == 0) t.table_type = TableType::Flat;
        else if (head == 0 && left == 1) t.table_type = TableType::Horizontal;
        else t.table_type = TableType::Hierarchical;
    }
    return t;
}

Table grid_to_table(std::vector<std::vector<std::string>> rows, const ParseHints& hints) {
    const std::size_t width = rows.front().size();
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != width) {
            throw FormatError(FormatErrc::RaggedRows,
                              fmt::format("row {} has {} cells, expected {}", r, rows[r].size(), width));
        }
    }
    const TableType type = hints.table_type.value_or(TableType::Flat);
    return make_table(std::move(rows), type, hints.header_spec.value_or(canonical_header(type)));
}

}  // namespace

std::string serialize(const Table& table, TableFormat fmt) {
    switch (fmt) {
        case TableFormat::Html: return serialize_html(table);
        case TableFormat::Markdown: return serialize_markdown(table);
        case TableFormat::Csv: return serialize_delimited(table, ',');
        case TableFormat::Tsv: return serialize_delimited(table, '\t');
    }
    return {};
}

std::string convert(const Table& table, TableFormat to) { return serialize(table, to); }

Table parse(std::string_view text, TableFormat fmt, const ParseHints& hints) {
    if (fmt == TableFormat::Html) return parse_html(text, hints);

    std::string source;
    if (auto block = first_fenced_block(text)) source = std::move(*block);
    else source = std::string(text);

    switch (fmt) {
        case TableFormat::Markdown: return grid_to_table(parse_markdown_rows(source), hints);
        case TableFormat::Csv: return grid_to_table(parse_delimited_rows(source, ','), hints);
        case TableFormat::Tsv: return grid_to_table(parse_delimited_rows(source, '\t'), hints);
        case TableFormat::Html: break;
    }
    throw FormatError(FormatErrc::NoTableFound, "unsupported format");
}

}  // namespace tabforge
