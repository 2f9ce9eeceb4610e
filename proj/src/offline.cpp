#include "tabforge/offline.hpp"

#include <algorithm>
#include <atomic>
#include <random>

#include <fmt/format.h>

#include "tabforge/evolution.hpp"
#include "tabforge/formats.hpp"
#include "tabforge/hashing.hpp"
#include "tabforge/registry.hpp"
#include "tabforge/table.hpp"
#include "text_util.hpp"

namespace tabforge {

namespace {

using Rng = std::mt19937_64;

constexpr std::string_view kTopics[] = {"Business", "Public health", "Education", "Sport", "Energy", "Transport",
                                        "Agriculture", "Science", "Tourism", "Housing", "Finance", "Environment"};
constexpr std::string_view kMeasures[] = {"Revenue", "Cost", "Units", "Share", "Growth", "Score", "Count",
                                          "Rate", "Budget", "Staff", "Visits", "Output", "Margin", "Index"};
constexpr std::string_view kTitleShapes[] = {"Annual {} figures by region, 2016-2023",
                                             "Quarterly {} indicators for 2022",
                                             "{} totals by category and year",
                                             "Monthly {} summary for selected sites",
                                             "{} comparison across providers, 2021"};

// Value after `prefix` on the first line that starts with it.
std::string line_value(std::string_view text, std::string_view prefix) {
    for (const auto& line : detail::split_lines(text)) {
        if (line.rfind(prefix, 0) == 0) return detail::trim(std::string_view(line).substr(prefix.size()));
    }
    return {};
}

std::size_t number_after(std::string_view text, std::string_view marker, std::size_t fallback) {
    auto pos = text.find(marker);
    if (pos == std::string_view::npos) return fallback;
    pos += marker.size();
    std::size_t value = 0;
    bool any = false;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
        value = value * 10 + static_cast<std::size_t>(text[pos++] - '0');
        any = true;
    }
    return any ? value : fallback;
}

// Text between `start` and `end` markers.
std::string between(std::string_view text, std::string_view start, std::string_view end) {
    auto a = text.find(start);
    if (a == std::string_view::npos) return {};
    a += start.size();
    auto b = text.find(end, a);
    return std::string(text.substr(a, b == std::string_view::npos ? std::string_view::npos : b - a));
}

std::string measure(std::size_t i) {
    const std::size_t n = std::size(kMeasures);
    return i < n ? std::string(kMeasures[i]) : fmt::format("{} {}", kMeasures[i % n], i / n + 1);
}

std::string number(Rng& rng) { return std::to_string(std::uniform_int_distribution<int>(10, 999)(rng)); }

std::string fence(const Table& t, TableFormat fmt) {
    return fmt::format("```{}\n{}\n```", detail::to_lower(display_name(fmt)), serialize(t, fmt));
}

// ---------------------------------------------------------------- topics

std::string reply_topics(std::string_view prompt) {
    const std::size_t n_topics = number_after(prompt, "Propose ", 4);
    const std::size_t n_subs = number_after(prompt, "give ", 3);
    const auto titles_at = prompt.find("subtopic give ");
    const std::size_t n_titles =
        titles_at == std::string_view::npos ? 5 : number_after(prompt.substr(titles_at), "subtopic give ", 5);
    nlohmann::json out = nlohmann::json::array();
    for (std::size_t t = 0; t < n_topics; ++t) {
        const std::string topic(kTopics[t % std::size(kTopics)]);
        nlohmann::json subs = nlohmann::json::array();
        for (std::size_t s = 0; s < n_subs; ++s) {
            const std::string sub = fmt::format("{} area {}", topic, s + 1);
            nlohmann::json titles = nlohmann::json::array();
            for (std::size_t k = 0; k < n_titles; ++k) {
                titles.push_back(fmt::format(fmt::runtime(kTitleShapes[k % std::size(kTitleShapes)]),
                                             fmt::format("{} {}", sub, measure(k))));
            }
            subs.push_back({{"name", sub}, {"titles", titles}});
        }
        out.push_back({{"topic", topic}, {"subtopics", subs}});
    }
    return out.dump(2);
}

// ---------------------------------------------------------------- tables

Table flat_or_horizontal(TableType type, std::size_t rows, std::size_t cols, bool formulas, Rng& rng) {
    std::vector<std::vector<std::string>> g(rows, std::vector<std::string>(cols));
    const bool flat = type == TableType::Flat;
    g[0][0] = "Name";
    for (std::size_t c = 1; c < cols; ++c) g[0][c] = flat ? measure(c - 1) : fmt::format("Record {}", c);
    for (std::size_t r = 1; r < rows; ++r) {
        g[r][0] = flat ? fmt::format("Entry {}", r) : measure(r - 1);
        for (std::size_t c = 1; c < cols; ++c) g[r][c] = number(rng);
    }
    if (formulas) {
        g[rows - 1][0] = "Total";
        for (std::size_t c = 1; c < cols; ++c) g[rows - 1][c] = fmt::format("=SUM(R2C{0}:R{1}C{0})", c + 1, rows - 1);
    }
    return make_table(std::move(g), type, canonical_header(type));
}

Table hierarchical(std::size_t rows, std::size_t cols, HeaderSpec h, bool formulas, Rng& rng) {
    const auto C = static_cast<std::size_t>(h.column_header_levels);
    const auto R = static_cast<std::size_t>(h.row_header_levels);
    formulas = formulas && rows >= C + 3;
    std::vector<std::vector<std::string>> g(rows, std::vector<std::string>(cols));
    std::vector<MergedRegion> merges;

    for (std::size_t r = 0; r < C; ++r) {
        for (std::size_t c = 0; c < R; ++c) g[r][c] = "Category";
    }
    if (C * R > 1) merges.push_back({0, 0, C, R});

    const std::size_t D = cols - R;
    for (std::size_t l = 0; l < C; ++l) {
        const std::size_t size = std::size_t{1} << (C - 1 - l);
        for (std::size_t start = 0, group = 1; start < D; start += size, ++group) {
            const std::size_t len = std::min(size, D - start);
            const std::string label = l + 1 == C ? measure(start) : fmt::format("Group {}.{}", l + 1, group);
            for (std::size_t k = 0; k < len; ++k) g[l][R + start + k] = label;
            if (len > 1) merges.push_back({l, R + start, 1, len});
        }
    }

    const std::size_t last_data = formulas ? rows - 2 : rows - 1;
    for (std::size_t r = C; r <= last_data; ++r) {
        const std::size_t k = r - C;
        if (R == 2) {
            g[r][0] = fmt::format("Segment {}", k / 2 + 1);
            g[r][1] = fmt::format("Item {}", k + 1);
        } else {
            g[r][0] = fmt::format("Item {}", k + 1);
        }
        for (std::size_t c = R; c < cols; ++c) g[r][c] = number(rng);
    }
    if (R == 2) {
        for (std::size_t r = C; r + 1 <= last_data; r += 2) merges.push_back({r, 0, 2, 1});
    }
    if (formulas) {
        g[rows - 1][0] = "Total";
        if (R == 2) g[rows - 1][1] = "All";
        for (std::size_t c = R; c < cols; ++c) {
            g[rows - 1][c] = fmt::format("=SUM(R{1}C{0}:R{2}C{0})", c + 1, C + 1, rows - 1);
        }
    }
    Table t = make_table(std::move(g), TableType::Hierarchical, h);
    t.merged_regions = std::move(merges);
    std::sort(t.merged_regions.begin(), t.merged_regions.end());
    mirror_merged_slots(t);
    return t;
}

void knock_out_cell(Table& t, Rng& rng) {
    const Rect d = data_region(t);
    std::uniform_int_distribution<std::size_t> row(d.first_row, d.last_row), col(d.first_col, d.last_col);
    for (int tries = 0; tries < 32; ++tries) {
        const std::size_t r = row(rng), c = col(rng);
        if (merge_covering(t, r, c)) continue;
        t.cells[r][c] = Cell{};
        return;
    }
}

std::string reply_table(std::string_view prompt, const OfflineOptions& opts, Rng& rng) {
    const TableType type = table_type_from_string(line_value(prompt, "- Table type: ").substr(
        0, line_value(prompt, "- Table type: ").find('.')));
    const std::size_t rows = number_after(prompt, "- Number of rows: ", 6);
    const std::size_t cols = number_after(prompt, "- Number of columns: ", 5);
    const HeaderSpec h{static_cast<int>(number_after(prompt, "- Column header levels: ", 1)),
                       static_cast<int>(number_after(prompt, "- Row header levels: ", 0))};
    const bool formulas = line_value(prompt, "- Formulas: ") == "yes";
    const TableFormat fmt = table_format_from_string(line_value(prompt, "- Output format: "));

    Table t = type == TableType::Hierarchical ? hierarchical(rows, cols, h, formulas, rng)
                                              : flat_or_horizontal(type, rows, cols, formulas, rng);
    if (std::bernoulli_distribution(opts.table_failure_rate)(rng)) knock_out_cell(t, rng);
    return fmt::format("Here is the table.\n\n{}\n", fence(t, fmt));
}

// ---------------------------------------------------------------- instructions

std::string json_instruction(const std::string& instruction) { return nlohmann::json{{"instruction", instruction}}.dump(); }

std::string reply_seed(std::string_view prompt, Rng& rng) {
    const std::string task = line_value(prompt, "Task name: ");
    const std::string title = between(prompt, "titled \"", "\"");
    static constexpr std::string_view kAsks[] = {
        "Using the table \"{}\", carry out the following task: {}.",
        "For the table \"{}\", perform the task \"{}\" and explain the result briefly.",
        "Look at \"{}\" and do this: {}.",
    };
    std::uniform_int_distribution<std::size_t> pick(0, std::size(kAsks) - 1);
    return json_instruction(fmt::format(fmt::runtime(kAsks[pick(rng)]), title, detail::to_lower(task)));
}

std::string_view complication_suffix(Strategy s) {
    switch (s) {
        case Strategy::AddConstraints: return "Answer in no more than three sentences and cite the cells you used.";
        case Strategy::IncreaseDepth: return "Also explain what the result suggests about the overall trend.";
        case Strategy::AddReasoningSteps: return "Show each intermediate step of your reasoning.";
        case Strategy::AddDetails: return "Treat any N/A value as missing and say how you handled it.";
        case Strategy::IncreaseLength: return "Give a detailed answer of at least two paragraphs.";
        case Strategy::AddContext: return "Assume you are preparing a briefing for a regional planning office.";
        default: return "Be precise.";
    }
}

std::optional<Strategy> strategy_named(std::string_view name) {
    for (const auto& s : strategies()) {
        if (s.name == name) return s.id;
    }
    return std::nullopt;
}

std::string reply_instruction_evolution(std::string_view prompt, std::string_view purpose, Rng& rng) {
    const bool complication = purpose == "evolve_complication";
    const std::string original =
        detail::trim(between(prompt, complication ? "Original instruction:\n" : "Example instruction:\n", "\n\n"));
    const std::string method = between(prompt, complication ? "Rewriting method (" : "Method (", ")");
    const auto strategy = strategy_named(method);
    const std::string title = line_value(prompt, "Table title: ");
    if (complication && strategy == Strategy::AddTaskNumber) {
        return json_instruction(fmt::format(
            "Complete both tasks. 1. {} 2. Name the row holding the largest value in the last column.", original));
    }
    if (complication) {
        return json_instruction(fmt::format("{} {}", original, complication_suffix(strategy.value_or(Strategy::AddConstraints))));
    }
    if (strategy == Strategy::SimilarInstruction) {
        return json_instruction(fmt::format("In a similar way, and using \"{}\": {}", title, original));
    }
    std::uniform_int_distribution<int> k(2, 5);
    return json_instruction(
        fmt::format("List the {} rows of \"{}\" with the highest values in the second column.", k(rng), title));
}

Table modify_table(const Table& src, Strategy s, TableFormat current, Rng& rng) {
    Table t = src;
    const Rect d = data_region(t);
    switch (s) {
        case Strategy::ChangeFormat: return t;  // the caller re-serializes in the target format
        case Strategy::OrderPermutation: return deterministic_perturb(t, s, current, rng).table;
        case Strategy::ModifyHeader: {
            // Rename the innermost header band.
            const bool rows_band = t.table_type == TableType::Horizontal;
            const std::size_t band = rows_band ? d.first_col - 1 : (d.first_row == 0 ? 0 : d.first_row - 1);
            const std::size_t n = rows_band ? t.n_rows : t.n_cols;
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t r = rows_band ? i : band, c = rows_band ? band : i;
                if ((rows_band ? r >= d.first_row : c >= d.first_col) && !merge_covering(t, r, c)) {
                    t.cells[r][c] = Cell::from_text(t.cells[r][c].display() + " (revised)");
                }
            }
            return t;
        }
        case Strategy::ModifyData: {
            std::uniform_int_distribution<std::size_t> row(d.first_row, d.last_row), col(d.first_col, d.last_col);
            for (int k = 0; k < 2; ++k) {
                const std::size_t r = row(rng), c = col(rng);
                if (!merge_covering(t, r, c)) t.cells[r][c] = Cell::from_text(k == 0 ? "N/A" : number(rng));
            }
            return t;
        }
        case Strategy::InsertRemoveData: {
            bool last_free = true;
            for (const auto& m : t.merged_regions) last_free = last_free && m.top_row + m.row_span < t.n_rows;
            if (last_free && t.n_rows > d.first_row + 2 && t.n_rows > 4) {
                t.cells.pop_back();
                --t.n_rows;
            } else {
                std::vector<Cell> row(t.n_cols);
                for (std::size_t c = 0; c < t.n_cols; ++c) {
                    row[c] = Cell::from_text(c < d.first_col ? (c == 0 ? "Added" : "New") : number(rng));
                }
                t.cells.push_back(std::move(row));
                ++t.n_rows;
            }
            return t;
        }
        default: return t;
    }
}

std::string reply_table_evolution(std::string_view prompt, const OfflineOptions& opts, Rng& rng) {
    const std::string fmt_name = between(prompt, "Original table (", ")");
    const TableFormat current = table_format_from_string(fmt_name);
    const std::string text = between(prompt, fmt::format("Original table ({}):\n", fmt_name), "\n\nOriginal instruction:");
    const std::string original = detail::trim(between(prompt, "Original instruction:\n", "\n\nMethod for changing"));
    const auto strategy = strategy_named(between(prompt, "Method for changing the table (", ")"));
    const TableFormat target = table_format_from_string(between(prompt, "Write the new table in ", " inside"));
    const std::string title = line_value(prompt, "Table title: ");

    Table parsed = parse(text, current);
    Table changed = modify_table(parsed, strategy.value_or(Strategy::ModifyData), current, rng);
    if (std::bernoulli_distribution(opts.table_failure_rate)(rng)) knock_out_cell(changed, rng);
    const std::string instruction = fmt::format("{} (Refer to the updated table.)", original);
    return fmt::format("{}\n\n{}\n", fence(changed, target),
                       nlohmann::json{{"instruction", instruction}, {"title", title + " (variant)"}}.dump());
}

// ---------------------------------------------------------------- answers and verdicts

std::string reply_answer(std::string_view prompt, std::string_view purpose, Rng& rng) {
    const std::string title = line_value(prompt, "Table title: ");
    static constexpr std::string_view kOpen[] = {"Reading the table", "From the table", "According to the table"};
    std::uniform_int_distribution<std::size_t> pick(0, std::size(kOpen) - 1);
    std::uniform_int_distribution<int> value(10, 999);
    return fmt::format("{} \"{}\", the requested figure is {}. {}", kOpen[pick(rng)], title, value(rng),
                       purpose == "target_answer" ? "This is my best reading." : "The relevant cells are cited above.");
}

std::string reply_eval(std::string_view prompt, Rng& rng) {
    if (prompt.find("\"entailed\"") != std::string_view::npos) {
        return fmt::format("Checking the table.\n{{\"answer\": \"{}\"}}",
                           std::bernoulli_distribution(0.5)(rng) ? "entailed" : "refuted");
    }
    return fmt::format("Checking the table.\n{{\"answer\": \"{}\"}}", number(rng));
}

std::string reply_t2t(std::string_view prompt) {
    const std::string gold = detail::to_lower(detail::trim(between(prompt, "Gold answer:\n", "\n\nModel answer:")));
    const std::string response =
        detail::to_lower(detail::trim(between(prompt, "Model answer:\n", "\n\nEnd your reply")));
    const bool agree = !gold.empty() && response.find(gold) != std::string::npos;
    return fmt::format("Compared the two answers.\n{}", agree ? "correct" : "incorrect");
}

}  // namespace

ScriptedBackend::Responder offline_responder(OfflineOptions options) {
    auto cycle = std::make_shared<std::atomic<std::uint64_t>>(0);
    return [options, cycle](const ChatRequest& req) -> std::string {
        Rng rng(hash64(fingerprint(req)));
        const std::string& p = req.user;
        const std::string& purpose = req.purpose;
        auto fails = [&] { return std::bernoulli_distribution(options.reply_failure_rate)(rng); };

        if (purpose == "topics") return reply_topics(p);
        if (purpose == "table") return reply_table(p, options, rng);
        if (purpose == "seed_instruction") return fails() ? "I could not think of one." : reply_seed(p, rng);
        if (purpose == "evolve_complication" || purpose == "evolve_generalization") {
            return fails() ? "Here is a harder version, described in prose." : reply_instruction_evolution(p, purpose, rng);
        }
        if (purpose == "evolve_table") {
            if (fails()) return "The table cannot be changed that way.";
            try {
                return reply_table_evolution(p, options, rng);
            } catch (const std::exception& e) {
                return fmt::format("Could not read the table: {}", e.what());
            }
        }
        if (purpose == "reference_answer" || purpose == "target_answer") return reply_answer(p, purpose, rng);
        if (purpose == "judge") {
            if (fails()) return "The response is hard to grade.";
            int score = options.fixed_score;
            if (options.judge == OfflineJudge::Hash) score = static_cast<int>(std::uniform_int_distribution<int>(1, 5)(rng));
            if (options.judge == OfflineJudge::Cycle) score = static_cast<int>(cycle->fetch_add(1) % 5) + 1;
            return fmt::format("The response was compared with the reference.\n{{\"score\": {}}}", score);
        }
        if (purpose == "safety") {
            return p.find("[unsafe]") != std::string::npos ? "UNSAFE: marked as harmful test content" : "SAFE";
        }
        if (purpose == "t2t_judge") return reply_t2t(p);
        if (purpose == "eval_answer") return reply_eval(p, rng);
        return "OK";
    };
}

std::optional<OfflineOptions> offline_options_from_endpoint(const std::string& endpoint) {
    if (endpoint != "mock" && endpoint.rfind("mock:", 0) != 0) return std::nullopt;
    OfflineOptions o;
    if (endpoint == "mock") return o;
    for (const auto& raw : detail::split(std::string_view(endpoint).substr(5), ',')) {
        const std::string part = detail::trim(raw);
        const auto eq = part.find('=');
        const std::string key = part.substr(0, eq);
        const std::string value = eq == std::string::npos ? "" : part.substr(eq + 1);
        try {
            if (key == "cycle") {
                o.judge = OfflineJudge::Cycle;
            } else if (key == "score") {
                o.judge = OfflineJudge::Fixed;
                o.fixed_score = std::stoi(value);
            } else if (key == "fail") {
                o.table_failure_rate = o.reply_failure_rate = std::stod(value);
            } else if (key == "table_fail") {
                o.table_failure_rate = std::stod(value);
            } else if (key == "reply_fail") {
                o.reply_failure_rate = std::stod(value);
            } else {
                throw std::invalid_argument("unknown option");
            }
        } catch (const std::exception&) {
            throw LlmError(LlmErrc::InvalidRequest, fmt::format("bad mock endpoint option '{}'", part));
        }
    }
    return o;
}

std::shared_ptr<ChatBackend> make_backend(const BackendConfig& cfg) {
    if (auto o = offline_options_from_endpoint(cfg.endpoint)) {
        const std::size_t workers = o->judge == OfflineJudge::Cycle ? 1 : cfg.max_in_flight;
        return std::make_shared<ScriptedBackend>(offline_responder(*o), workers);
    }
    return std::make_shared<HttpBackend>(cfg);
}

}  // namespace tabforge
