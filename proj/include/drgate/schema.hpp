#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace drgate {

/// Checks `instance` against a JSON Schema subset: type, enum, properties,
/// required, additionalProperties, items, minItems, minLength, numeric
/// bounds, anyOf and local "#/$defs/..." references. Returns one message per
/// violation, each prefixed with its JSON pointer.
std::vector<std::string> schema_violations(const nlohmann::json& instance, const nlohmann::json& schema);

/// Throws a configuration error listing the violations, if any.
void validate_against_schema(const nlohmann::json& instance, const nlohmann::json& schema, const std::string& what);

}  // namespace drgate
