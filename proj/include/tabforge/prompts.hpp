#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tabforge {

enum class PromptErrc { MissingPlaceholder, MissingTemplate, MalformedTemplate };

std::string_view to_string(PromptErrc code);

class PromptError : public std::runtime_error {
public:
    PromptError(PromptErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    PromptErrc code() const { return code_; }

private:
    PromptErrc code_;
};

using PromptVars = std::map<std::string, std::string, std::less<>>;

/// Single pass over `tmpl`: "{name}" becomes vars[name], "{{" and "}}" become
/// literal braces. Substituted text is never rescanned. Unused vars are fine.
std::string render_template(std::string_view tmpl, const PromptVars& vars);

/// Placeholder names in order of first appearance.
std::vector<std::string> placeholders(std::string_view tmpl);

/// Named templates. The built-in set is compiled from prompts/*.txt; a
/// directory can override any of them file by file.
class PromptLibrary {
public:
    static PromptLibrary builtin();
    /// Built-ins, then every `<name>.txt` in `dir` replaces or adds `name`.
    static PromptLibrary with_overrides(const std::filesystem::path& dir);

    bool has(std::string_view name) const;
    const std::string& get(std::string_view name) const;
    std::string render(std::string_view name, const PromptVars& vars) const;
    std::vector<std::string> names() const;

    void set(std::string name, std::string text);

private:
    std::map<std::string, std::string, std::less<>> templates_;
};

}  // namespace tabforge
