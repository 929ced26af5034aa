#pragma once

// Internal JSON helpers. nlohmann::json prints the shortest round-trip form of
// a double; the on-disk formats here pin 17 significant digits instead, so
// output goes through dump17.

#include <string>

#include "json.hpp"

namespace ccert::detail {

using nlohmann::json;

// Compact when indent < 0. Non-finite doubles are written as null.
std::string dump17(const json& j, int indent = -1);

json parse_json_file(const std::string& path);

// Throws ParseError naming the key when it is missing.
const json& require(const json& j, const char* key, const std::string& what);

}  // namespace ccert::detail
