#pragma once

#include <nlohmann/json.hpp>
#include <string>

namespace pcapce::cli {

/// Reads the subset of TOML used by run configs into a JSON object:
/// `[table]`, `[a.b]`, `[[array]]` headers, `key = value` pairs with bare or
/// quoted keys, basic and literal strings, integers, floats, booleans and
/// (possibly multi-line) arrays of those. Throws ConfigInvalid with a line
/// number on anything else.
nlohmann::json parse_toml(const std::string& text);

nlohmann::json parse_toml_file(const std::string& path);

}  // namespace pcapce::cli
