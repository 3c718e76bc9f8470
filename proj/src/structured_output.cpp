#include "dytag/structured_output.hpp"

#include <cmath>

#include "dytag/error.hpp"

namespace dytag {

namespace {

/// End of the balanced object starting at `begin`, honoring string literals.
std::optional<std::size_t> object_end(std::string_view s, std::size_t begin) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = begin; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (c == '\\')
        ++i;
      else if (c == '"')
        in_string = false;
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::nullopt;
}

bool kind_matches(const nlohmann::ordered_json& v, JsonKind kind) {
  switch (kind) {
    case JsonKind::string: return v.is_string();
    case JsonKind::number: return v.is_number();
    case JsonKind::boolean: return v.is_boolean();
    case JsonKind::object: return v.is_object();
    case JsonKind::array: return v.is_array();
    case JsonKind::any: return true;
  }
  return false;
}

void validate(const nlohmann::ordered_json& obj, const std::vector<FieldSpec>& fields,
              const std::string& path, std::string_view raw) {
  for (const auto& f : fields) {
    auto it = obj.find(f.key);
    if (it == obj.end()) {
      if (f.required) throw ParseError("missing key '" + path + f.key + "'", std::string(raw));
      continue;
    }
    if (!kind_matches(*it, f.kind))
      throw ParseError("key '" + path + f.key + "' has the wrong kind", std::string(raw));
    if (f.kind == JsonKind::object && !f.fields.empty())
      validate(*it, f.fields, path + f.key + ".", raw);
  }
}

}  // namespace

std::optional<nlohmann::ordered_json> extract_json_object(std::string_view content) {
  for (std::size_t i = content.find('{'); i != std::string_view::npos;
       i = content.find('{', i + 1)) {
    const auto end = object_end(content, i);
    if (!end) continue;
    auto parsed = nlohmann::ordered_json::parse(content.substr(i, *end - i), nullptr, false);
    if (!parsed.is_discarded() && parsed.is_object()) return parsed;
  }
  return std::nullopt;
}

nlohmann::ordered_json parse_structured(std::string_view content, const Schema& schema) {
  auto obj = extract_json_object(content);
  if (!obj) throw ParseError(schema.name + ": no JSON object in response", std::string(content));
  validate(*obj, schema.fields, "", content);
  return *obj;
}

std::map<std::string, double> parse_likelihood_map(std::string_view content) {
  auto obj = extract_json_object(content);
  if (!obj) throw ParseError("likelihood map: no JSON object in response", std::string(content));
  std::map<std::string, double> out;
  for (const auto& [key, value] : obj->items()) {
    double v = 0;
    if (value.is_number()) {
      v = value.get<double>();
    } else if (value.is_string()) {
      try {
        std::size_t used = 0;
        const auto& s = value.get_ref<const std::string&>();
        v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
      } catch (const std::exception&) {
        throw ParseError("likelihood for '" + key + "' is not a number", std::string(content));
      }
    } else {
      throw ParseError("likelihood for '" + key + "' is not a number", std::string(content));
    }
    if (!std::isfinite(v) || v < 0 || v > 1)
      throw ParseError("likelihood for '" + key + "' is outside [0, 1]", std::string(content));
    out[key] = v;
  }
  return out;
}

int parse_binary_answer(std::string_view content) {
  std::string_view s = content;
  auto trim = [&] {
    const char* junk = " \t\r\n`'\".";
    const auto b = s.find_first_not_of(junk);
    if (b == std::string_view::npos) {
      s = {};
      return;
    }
    s = s.substr(b, s.find_last_not_of(junk) - b + 1);
  };
  trim();
  if (s.substr(0, 4) == "json") {
    s.remove_prefix(4);
    trim();
  }
  if (s == "1") return 1;
  if (s == "0") return 0;
  if (auto obj = extract_json_object(content)) {
    auto it = obj->find("Prediction");
    if (it != obj->end()) {
      if (it->is_number_integer() && (*it == 0 || *it == 1)) return it->get<int>();
      if (it->is_string() && (*it == "0" || *it == "1")) return it->get<std::string>() == "1";
    }
  }
  throw ParseError("expected a single 0 or 1", std::string(content));
}

}  // namespace dytag
