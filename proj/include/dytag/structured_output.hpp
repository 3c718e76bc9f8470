#pragma once

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dytag {

enum class JsonKind { string, number, boolean, object, array, any };

/// Expected shape of one key in an agent response.
struct FieldSpec {
  FieldSpec(std::string k, JsonKind kd = JsonKind::any, bool req = true, std::vector<FieldSpec> nested = {})
      : key(std::move(k)), kind(kd), required(req), fields(std::move(nested)) {}

  std::string key;
  JsonKind kind = JsonKind::any;
  bool required = true;
  std::vector<FieldSpec> fields;  // nested keys when kind == object
};

struct Schema {
  std::string name;
  std::vector<FieldSpec> fields;
};

/// First balanced, syntactically valid JSON object in `content`. Key order is
/// preserved. Code fences and surrounding prose are ignored.
std::optional<nlohmann::ordered_json> extract_json_object(std::string_view content);

/// Extracts and validates an object. Throws ParseError carrying `content`.
nlohmann::ordered_json parse_structured(std::string_view content, const Schema& schema);

/// Node-retrieval answer: object of id string -> probability in [0, 1].
std::map<std::string, double> parse_likelihood_map(std::string_view content);

/// Link-prediction answer: exactly 0 or 1 after trimming quotes, fences,
/// whitespace and a trailing period; a {"Prediction": 0|1} object is accepted too.
int parse_binary_answer(std::string_view content);

}  // namespace dytag
