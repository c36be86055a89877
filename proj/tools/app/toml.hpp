#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace dld::app {

/// Parses the TOML subset used by run configs into JSON: tables and dotted
/// table headers, bare/quoted/dotted keys, strings, integers, floats,
/// booleans, arrays (multi-line allowed) and inline tables. Dates, array
/// tables and multi-line strings are rejected. Errors are ConfigErrors
/// prefixed with `name:line:`.
nlohmann::json parse_toml(std::string_view text, const std::string& name);

}  // namespace dld::app
