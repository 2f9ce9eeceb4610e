#include "tabforge/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include <fmt/format.h>

#include "text_util.hpp"

namespace tabforge {

namespace {

bool is_bare_key(std::string_view s) {
    if (s.empty()) return false;
    for (char ch : s) {
        if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '_' && ch != '-') return false;
    }
    return true;
}

// Drops a trailing comment outside of strings.
std::string strip_comment(std::string_view line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '\\' && in_string) {
            ++i;
        } else if (line[i] == '"') {
            in_string = !in_string;
        } else if (line[i] == '#' && !in_string) {
            return std::string(line.substr(0, i));
        }
    }
    return std::string(line);
}

std::optional<TomlValue> parse_value(std::string_view v) {
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') {
        std::string out;
        for (std::size_t i = 1; i + 1 < v.size(); ++i) {
            if (v[i] == '"') return std::nullopt;
            if (v[i] != '\\') {
                out.push_back(v[i]);
                continue;
            }
            if (++i + 1 >= v.size()) return std::nullopt;
            switch (v[i]) {
                case 'n': out.push_back('\n'); break;
                case 't': out.push_back('\t'); break;
                case '"': out.push_back('"'); break;
                case '\\': out.push_back('\\'); break;
                default: return std::nullopt;
            }
        }
        return out;
    }
    if (v == "true") return true;
    if (v == "false") return false;
    std::string digits;
    for (char ch : v) {
        if (ch != '_') digits.push_back(ch);
    }
    std::int64_t i = 0;
    auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), i);
    if (ec == std::errc() && p == digits.data() + digits.size()) return i;
    try {
        std::size_t used = 0;
        const double d = std::stod(digits, &used);
        if (used == digits.size()) return d;
    } catch (const std::exception&) {
    }
    return std::nullopt;
}

}  // namespace

TomlTable parse_toml_subset(std::string_view text) {
    TomlTable out;
    std::string section;
    std::size_t line_no = 0;
    for (const auto& raw : detail::split_lines(text)) {
        ++line_no;
        const std::string line = detail::trim(strip_comment(raw));
        if (line.empty()) continue;
        auto fail = [&](std::string_view what) {
            return ConfigError(fmt::format("config line {}: {}: {}", line_no, what, line));
        };
        if (line.front() == '[') {
            if (line.back() != ']') throw fail("unterminated section header");
            section = detail::trim(std::string_view(line).substr(1, line.size() - 2));
            if (!is_bare_key(section)) throw fail("bad section name");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw fail("expected key = value");
        const std::string key = detail::trim(std::string_view(line).substr(0, eq));
        if (!is_bare_key(key)) throw fail("bad key");
        auto value = parse_value(detail::trim(std::string_view(line).substr(eq + 1)));
        if (!value) throw fail("unsupported value");
        const std::string full = section.empty() ? key : section + "." + key;
        if (!out.emplace(full, std::move(*value)).second) throw fail("duplicate key");
    }
    return out;
}

PipelineConfig::PipelineConfig() {
    teacher.model = "mock-teacher";
    target.model = "mock-target";
    target.temperature = 0.01;
    judge.model = "mock-judge";
    judge.temperature = 0.01;
}

void check_config(const PipelineConfig& cfg) {
    auto require = [](bool ok, std::string_view what) {
        if (!ok) throw ConfigError(fmt::format("invalid config: {}", what));
    };
    require(cfg.n_rounds >= 1, "n_rounds must be >= 1");
    require(cfg.weakness_threshold >= 1 && cfg.weakness_threshold <= 5, "weakness_threshold must be in [1,5]");
    require(cfg.n_tables >= 1, "n_tables must be >= 1");
    require(cfg.seeds_per_table >= 1 && cfg.seeds_per_table <= 20, "seeds_per_table must be in [1,20]");
    require(cfg.children_per_direction >= 1, "children_per_direction must be >= 1");
    require(cfg.subtopics_per_topic >= 1 && cfg.titles_per_subtopic >= 1, "topic fan-out must be >= 1");
    require(cfg.limits.min_rows >= 2 && cfg.limits.min_rows <= cfg.limits.max_rows, "row range");
    require(cfg.limits.min_cols >= 3 && cfg.limits.min_cols <= cfg.limits.max_cols, "column range");
    require(cfg.formula_probability >= 0 && cfg.formula_probability <= 1, "formula_probability must be in [0,1]");
    require(cfg.retry_budget >= 1, "retry_budget must be >= 1");
    require(cfg.judge_reasks >= 0, "judge_reasks must be >= 0");
    require(!cfg.run_id.empty() && cfg.run_id.find('/') == std::string::npos, "run id must be a plain name");
    for (const BackendConfig* b : {&cfg.teacher, &cfg.target, &cfg.judge}) {
        require(b->max_in_flight >= 1, "max_in_flight must be >= 1");
        require(b->max_tokens >= 1, "max_tokens must be >= 1");
        require(b->max_retries >= 0, "max_retries must be >= 0");
    }
}

namespace {

// One binding between a TOML key and a config field.
struct Binding {
    std::function<void(const TomlValue&)> set;
    std::function<std::string()> get;
};

template <class T>
T as(const TomlValue& v, std::string_view key) {
    if constexpr (std::is_same_v<T, bool>) {
        if (auto* b = std::get_if<bool>(&v)) return *b;
    } else if constexpr (std::is_same_v<T, std::string>) {
        if (auto* s = std::get_if<std::string>(&v)) return *s;
    } else if constexpr (std::is_floating_point_v<T>) {
        if (auto* d = std::get_if<double>(&v)) return *d;
        if (auto* i = std::get_if<std::int64_t>(&v)) return static_cast<T>(*i);
    } else {
        if (auto* i = std::get_if<std::int64_t>(&v)) {
            if (*i < 0 && std::is_unsigned_v<T>) throw ConfigError(fmt::format("{} must not be negative", key));
            return static_cast<T>(*i);
        }
    }
    throw ConfigError(fmt::format("{} has the wrong type", key));
}

template <class T>
Binding bind(T& field, std::string key) {
    return {[&field, key](const TomlValue& v) { field = as<T>(v, key); },
            [&field] {
                if constexpr (std::is_same_v<T, bool>) return std::string(field ? "true" : "false");
                else if constexpr (std::is_same_v<T, std::string>) return nlohmann::json(field).dump();
                else if constexpr (std::is_floating_point_v<T>) return fmt::format("{}", field);
                else return std::to_string(field);
            }};
}

void bind_backend(std::vector<std::pair<std::string, Binding>>& out, const std::string& section, BackendConfig& b) {
    out.emplace_back(section + ".endpoint", bind(b.endpoint, section + ".endpoint"));
    out.emplace_back(section + ".api_key_env", bind(b.api_key_env, section + ".api_key_env"));
    out.emplace_back(section + ".model", bind(b.model, section + ".model"));
    out.emplace_back(section + ".temperature", bind(b.temperature, section + ".temperature"));
    out.emplace_back(section + ".max_tokens", bind(b.max_tokens, section + ".max_tokens"));
    out.emplace_back(section + ".max_in_flight", bind(b.max_in_flight, section + ".max_in_flight"));
    out.emplace_back(section + ".requests_per_minute", bind(b.requests_per_minute, section + ".requests_per_minute"));
    out.emplace_back(section + ".max_retries", bind(b.max_retries, section + ".max_retries"));
    out.emplace_back(section + ".backoff_ms",
                     Binding{[&b](const TomlValue& v) {
                                 b.backoff_base = std::chrono::milliseconds(as<std::int64_t>(v, "backoff_ms"));
                             },
                             [&b] { return std::to_string(b.backoff_base.count()); }});
    out.emplace_back(section + ".timeout_s",
                     Binding{[&b](const TomlValue& v) {
                                 b.timeout = std::chrono::seconds(as<std::int64_t>(v, "timeout_s"));
                             },
                             [&b] { return std::to_string(b.timeout.count()); }});
}

std::vector<std::pair<std::string, Binding>> bindings(PipelineConfig& c) {
    std::vector<std::pair<std::string, Binding>> out;
    auto add = [&](std::string key, auto& field) { out.emplace_back(key, bind(field, key)); };
    add("pipeline.master_seed", c.master_seed);
    add("pipeline.n_tables", c.n_tables);
    add("pipeline.seeds_per_table", c.seeds_per_table);
    add("pipeline.n_rounds", c.n_rounds);
    add("pipeline.children_per_direction", c.children_per_direction);
    add("pipeline.weakness_threshold", c.weakness_threshold);
    add("pipeline.retain_all_seeds", c.retain_all_seeds);
    add("pipeline.safety_screen", c.safety_screen);
    add("pipeline.judge_reasks", c.judge_reasks);
    add("topics.subtopics_per_topic", c.subtopics_per_topic);
    add("topics.titles_per_subtopic", c.titles_per_subtopic);
    add("tables.min_rows", c.limits.min_rows);
    add("tables.max_rows", c.limits.max_rows);
    add("tables.min_cols", c.limits.min_cols);
    add("tables.max_cols", c.limits.max_cols);
    add("tables.formula_probability", c.formula_probability);
    add("tables.retry_budget", c.retry_budget);
    add("run.root", c.run_root);
    add("run.id", c.run_id);
    add("run.cache", c.cache);
    add("run.prompts_dir", c.prompts_dir);
    bind_backend(out, "teacher", c.teacher);
    bind_backend(out, "target", c.target);
    bind_backend(out, "judge", c.judge);
    return out;
}

}  // namespace

PipelineConfig config_from_toml(const TomlTable& table) {
    PipelineConfig cfg;
    auto b = bindings(cfg);
    for (const auto& [key, value] : table) {
        auto it = std::find_if(b.begin(), b.end(), [&](const auto& p) { return p.first == key; });
        if (it == b.end()) throw ConfigError(fmt::format("unknown config key '{}'", key));
        it->second.set(value);
    }
    check_config(cfg);
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(fmt::format("cannot read config file {}", path.string()));
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_toml(parse_toml_subset(ss.str()));
}

std::string to_toml(const PipelineConfig& cfg) {
    PipelineConfig copy = cfg;
    std::string out;
    std::string section;
    for (const auto& [key, binding] : bindings(copy)) {
        const auto dot = key.find('.');
        const std::string sec = key.substr(0, dot);
        if (sec != section) {
            out += fmt::format("{}[{}]\n", out.empty() ? "" : "\n", sec);
            section = sec;
        }
        out += fmt::format("{} = {}\n", key.substr(dot + 1), binding.get());
    }
    return out;
}

}  // namespace tabforge
