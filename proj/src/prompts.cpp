#include "tabforge/prompts.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace tabforge {

namespace detail {
const std::map<std::string, std::string>& embedded_prompts();
}

std::string_view to_string(PromptErrc code) {
    switch (code) {
        case PromptErrc::MissingPlaceholder: return "MissingPlaceholder";
        case PromptErrc::MissingTemplate: return "MissingTemplate";
        case PromptErrc::MalformedTemplate: return "MalformedTemplate";
    }
    return "MalformedTemplate";
}

namespace {

bool ident_char(char ch) {
    return (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') || ch == '_';
}

// Calls on_text for literal runs and on_name for each placeholder.
template <class Text, class Name>
void scan(std::string_view tmpl, Text&& on_text, Name&& on_name) {
    std::size_t i = 0;
    while (i < tmpl.size()) {
        const char ch = tmpl[i];
        if (ch == '{') {
            if (i + 1 < tmpl.size() && tmpl[i + 1] == '{') {
                on_text(std::string_view("{"));
                i += 2;
                continue;
            }
            std::size_t j = i + 1;
            while (j < tmpl.size() && ident_char(tmpl[j])) ++j;
            if (j == i + 1 || j >= tmpl.size() || tmpl[j] != '}') {
                throw PromptError(PromptErrc::MalformedTemplate,
                                  fmt::format("stray '{{' at offset {} (write '{{{{' for a literal brace)", i));
            }
            on_name(tmpl.substr(i + 1, j - i - 1));
            i = j + 1;
        } else if (ch == '}') {
            if (i + 1 < tmpl.size() && tmpl[i + 1] == '}') {
                on_text(std::string_view("}"));
                i += 2;
                continue;
            }
            throw PromptError(PromptErrc::MalformedTemplate,
                              fmt::format("stray '}}' at offset {} (write '}}}}' for a literal brace)", i));
        } else {
            std::size_t j = i;
            while (j < tmpl.size() && tmpl[j] != '{' && tmpl[j] != '}') ++j;
            on_text(tmpl.substr(i, j - i));
            i = j;
        }
    }
}

std::string strip_final_newline(std::string text) {
    if (!text.empty() && text.back() == '\n') text.pop_back();
    if (!text.empty() && text.back() == '\r') text.pop_back();
    return text;
}

}  // namespace

std::string render_template(std::string_view tmpl, const PromptVars& vars) {
    std::string out;
    out.reserve(tmpl.size());
    scan(
        tmpl, [&](std::string_view text) { out.append(text); },
        [&](std::string_view name) {
            auto it = vars.find(name);
            if (it == vars.end()) {
                throw PromptError(PromptErrc::MissingPlaceholder, fmt::format("no value for placeholder {{{}}}", name));
            }
            out += it->second;
        });
    return out;
}

std::vector<std::string> placeholders(std::string_view tmpl) {
    std::vector<std::string> names;
    scan(
        tmpl, [](std::string_view) {},
        [&](std::string_view name) {
            if (std::find(names.begin(), names.end(), name) == names.end()) names.emplace_back(name);
        });
    return names;
}

PromptLibrary PromptLibrary::builtin() {
    PromptLibrary lib;
    for (const auto& [name, text] : detail::embedded_prompts()) lib.templates_[name] = strip_final_newline(text);
    return lib;
}

PromptLibrary PromptLibrary::with_overrides(const std::filesystem::path& dir) {
    PromptLibrary lib = builtin();
    if (!std::filesystem::is_directory(dir)) {
        throw PromptError(PromptErrc::MissingTemplate, fmt::format("prompt directory {} does not exist", dir.string()));
    }
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
        std::ifstream in(entry.path(), std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        lib.set(entry.path().stem().string(), strip_final_newline(ss.str()));
    }
    return lib;
}

bool PromptLibrary::has(std::string_view name) const { return templates_.find(name) != templates_.end(); }

const std::string& PromptLibrary::get(std::string_view name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) {
        throw PromptError(PromptErrc::MissingTemplate, fmt::format("no prompt template named '{}'", name));
    }
    return it->second;
}

std::string PromptLibrary::render(std::string_view name, const PromptVars& vars) const {
    return render_template(get(name), vars);
}

std::vector<std::string> PromptLibrary::names() const {
    std::vector<std::string> out;
    for (const auto& [name, text] : templates_) out.push_back(name);
    return out;
}

void PromptLibrary::set(std::string name, std::string text) {
    placeholders(text);  // rejects malformed templates early
    templates_[std::move(name)] = std::move(text);
}

}  // namespace tabforge
