#include "drgate/schema.hpp"

#include <sstream>

#include "drgate/error.hpp"

namespace drgate {

namespace {

using nlohmann::json;

bool has_type(const json& v, const std::string& type) {
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  if (type == "string") return v.is_string();
  if (type == "boolean") return v.is_boolean();
  if (type == "null") return v.is_null();
  if (type == "number") return v.is_number();
  if (type == "integer") {
    if (v.is_number_integer()) return true;
    return v.is_number_float() && v.get<double>() == static_cast<double>(static_cast<long long>(v.get<double>()));
  }
  return false;
}

class Validator {
 public:
  explicit Validator(const json& root) : root_(root) {}

  void check(const json& v, const json& s, const std::string& path, std::vector<std::string>& out) const {
    if (s.is_boolean()) {
      if (!s.get<bool>()) out.push_back(at(path) + "is not allowed");
      return;
    }
    if (s.contains("$ref")) {
      check(v, resolve(s.at("$ref").get<std::string>()), path, out);
      return;
    }
    if (s.contains("type")) {
      const auto& t = s.at("type");
      bool ok = false;
      if (t.is_string()) ok = has_type(v, t.get<std::string>());
      else
        for (const auto& alt : t) ok = ok || has_type(v, alt.get<std::string>());
      if (!ok) {
        out.push_back(at(path) + "expected " + t.dump() + ", got " + v.type_name());
        return;
      }
    }
    if (s.contains("enum")) {
      bool found = false;
      for (const auto& e : s.at("enum")) found = found || e == v;
      if (!found) out.push_back(at(path) + v.dump() + " is not one of " + s.at("enum").dump());
    }
    if (s.contains("anyOf")) {
      bool matched = false;
      for (const auto& alt : s.at("anyOf")) {
        std::vector<std::string> sub;
        check(v, alt, path, sub);
        if (sub.empty()) {
          matched = true;
          break;
        }
      }
      if (!matched) out.push_back(at(path) + "matches none of the allowed forms");
    }
    if (v.is_number()) {
      const double x = v.get<double>();
      if (s.contains("minimum") && x < s.at("minimum").get<double>())
        out.push_back(at(path) + "must be >= " + s.at("minimum").dump());
      if (s.contains("maximum") && x > s.at("maximum").get<double>())
        out.push_back(at(path) + "must be <= " + s.at("maximum").dump());
      if (s.contains("exclusiveMinimum") && x <= s.at("exclusiveMinimum").get<double>())
        out.push_back(at(path) + "must be > " + s.at("exclusiveMinimum").dump());
      if (s.contains("exclusiveMaximum") && x >= s.at("exclusiveMaximum").get<double>())
        out.push_back(at(path) + "must be < " + s.at("exclusiveMaximum").dump());
    }
    if (v.is_string() && s.contains("minLength") &&
        v.get<std::string>().size() < s.at("minLength").get<std::size_t>())
      out.push_back(at(path) + "is too short");
    if (v.is_array()) {
      if (s.contains("minItems") && v.size() < s.at("minItems").get<std::size_t>())
        out.push_back(at(path) + "needs at least " + s.at("minItems").dump() + " items");
      if (s.contains("items"))
        for (std::size_t i = 0; i < v.size(); ++i) check(v[i], s.at("items"), path + "/" + std::to_string(i), out);
    }
    if (v.is_object()) {
      if (s.contains("required"))
        for (const auto& r : s.at("required"))
          if (!v.contains(r.get<std::string>())) out.push_back(at(path) + "missing required key '" + r.get<std::string>() + "'");
      const json empty = json::object();
      const json& props = s.contains("properties") ? s.at("properties") : empty;
      for (const auto& [key, value] : v.items()) {
        if (props.contains(key)) {
          check(value, props.at(key), path + "/" + key, out);
        } else if (s.contains("additionalProperties")) {
          const auto& extra = s.at("additionalProperties");
          if (extra.is_boolean() && !extra.get<bool>()) out.push_back(at(path) + "unknown key '" + key + "'");
          else if (extra.is_object()) check(value, extra, path + "/" + key, out);
        }
      }
    }
  }

 private:
  static std::string at(const std::string& path) { return (path.empty() ? std::string("/") : path) + ": "; }

  const json& resolve(const std::string& ref) const {
    if (!ref.starts_with("#/"))
      throw Error(ErrorKind::Configuration, "schema", "only local references are supported: " + ref);
    return root_.at(json::json_pointer(ref.substr(1)));
  }

  const json& root_;
};

}  // namespace

std::vector<std::string> schema_violations(const nlohmann::json& instance, const nlohmann::json& schema) {
  std::vector<std::string> out;
  Validator(schema).check(instance, schema, "", out);
  return out;
}

void validate_against_schema(const nlohmann::json& instance, const nlohmann::json& schema, const std::string& what) {
  const auto v = schema_violations(instance, schema);
  if (v.empty()) return;
  std::ostringstream msg;
  msg << what << " does not match the schema:";
  for (const auto& line : v) msg << "\n  " << line;
  throw Error(ErrorKind::Configuration, "cli", msg.str(), "see schemas/run_config.schema.json");
}

}  // namespace drgate
