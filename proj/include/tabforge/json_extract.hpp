#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace tabforge {

/// Every balanced `open ... close` span in `text` that parses as JSON, in
/// order of starting offset. Nested spans are included. Quotes inside a
/// candidate are respected when matching brackets.
std::vector<nlohmann::json> json_values_in(std::string_view text, char open = '{', char close = '}');

/// The JSON object that starts last in `text` and has `key` at top level.
std::optional<nlohmann::json> last_json_object_with(std::string_view text, std::string_view key);

/// The first JSON array in `text`.
std::optional<nlohmann::json> first_json_array(std::string_view text);

}  // namespace tabforge
