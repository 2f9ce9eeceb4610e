#include "tabforge/json_extract.hpp"

namespace tabforge {

namespace {

// Offset one past the bracket closing the one at `start`, or npos.
std::size_t match_bracket(std::string_view text, std::size_t start, char open, char close) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = start; i < text.size(); ++i) {
        const char ch = text[i];
        if (in_string) {
            if (ch == '\\') {
                ++i;
            } else if (ch == '"') {
                in_string = false;
            }
            continue;
        }
        if (ch == '"') {
            in_string = true;
        } else if (ch == open) {
            ++depth;
        } else if (ch == close) {
            if (--depth == 0) return i + 1;
        }
    }
    return std::string_view::npos;
}

}  // namespace

std::vector<nlohmann::json> json_values_in(std::string_view text, char open, char close) {
    std::vector<nlohmann::json> out;
    for (std::size_t i = text.find(open); i != std::string_view::npos; i = text.find(open, i + 1)) {
        const std::size_t end = match_bracket(text, i, open, close);
        if (end == std::string_view::npos) continue;
        auto value = nlohmann::json::parse(text.substr(i, end - i), nullptr, false);
        if (!value.is_discarded()) out.push_back(std::move(value));
    }
    return out;
}

std::optional<nlohmann::json> last_json_object_with(std::string_view text, std::string_view key) {
    auto values = json_values_in(text);
    for (auto it = values.rbegin(); it != values.rend(); ++it) {
        if (it->is_object() && it->contains(key)) return std::move(*it);
    }
    return std::nullopt;
}

std::optional<nlohmann::json> first_json_array(std::string_view text) {
    for (std::size_t i = text.find('['); i != std::string_view::npos; i = text.find('[', i + 1)) {
        const std::size_t end = match_bracket(text, i, '[', ']');
        if (end == std::string_view::npos) continue;
        auto value = nlohmann::json::parse(text.substr(i, end - i), nullptr, false);
        if (!value.is_discarded()) return value;
    }
    return std::nullopt;
}

}  // namespace tabforge
