#include "dytag/prompts.hpp"

#include "dytag/error.hpp"

namespace dytag::prompts {

namespace detail {
const std::map<std::string, std::string>& embedded_templates();
}

const std::string& template_text(std::string_view name) {
  const auto& table = detail::embedded_templates();
  auto it = table.find(std::string(name));
  if (it == table.end()) throw TemplateError("unknown prompt template '" + std::string(name) + "'");
  return it->second;
}

std::vector<std::string> template_names() {
  std::vector<std::string> out;
  for (const auto& [name, text] : detail::embedded_templates()) out.push_back(name);
  return out;
}

namespace {

template <class OnText, class OnName>
void scan(std::string_view tmpl, OnText&& on_text, OnName&& on_name) {
  std::size_t i = 0;
  while (i < tmpl.size()) {
    const char c = tmpl[i];
    if (c == '{') {
      if (i + 1 < tmpl.size() && tmpl[i + 1] == '{') {
        on_text("{");
        i += 2;
        continue;
      }
      const auto close = tmpl.find('}', i + 1);
      if (close == std::string_view::npos)
        throw TemplateError("unterminated placeholder at offset " + std::to_string(i));
      const auto name = tmpl.substr(i + 1, close - i - 1);
      if (name.empty() || name.find_first_of("{ \n\"") != std::string_view::npos)
        throw TemplateError("malformed placeholder at offset " + std::to_string(i));
      on_name(name);
      i = close + 1;
    } else if (c == '}') {
      if (i + 1 < tmpl.size() && tmpl[i + 1] == '}') {
        on_text("}");
        i += 2;
        continue;
      }
      throw TemplateError("unbalanced '}' at offset " + std::to_string(i));
    } else {
      const auto next = tmpl.find_first_of("{}", i);
      const auto end = next == std::string_view::npos ? tmpl.size() : next;
      on_text(tmpl.substr(i, end - i));
      i = end;
    }
  }
}

}  // namespace

std::string render_string(std::string_view tmpl, const Vars& vars) {
  std::string out;
  out.reserve(tmpl.size());
  scan(
      tmpl, [&](std::string_view text) { out.append(text); },
      [&](std::string_view name) {
        auto it = vars.find(name);
        if (it == vars.end())
          throw TemplateError("no value for placeholder {" + std::string(name) + "}");
        out.append(it->second);
      });
  return out;
}

std::string render(std::string_view name, const Vars& vars) {
  try {
    return render_string(template_text(name), vars);
  } catch (const TemplateError& e) {
    throw TemplateError(std::string(name) + ": " + e.what());
  }
}

std::vector<std::string> placeholders(std::string_view tmpl) {
  std::vector<std::string> out;
  scan(
      tmpl, [](std::string_view) {},
      [&](std::string_view name) {
        for (const auto& n : out)
          if (n == name) return;
        out.emplace_back(name);
      });
  return out;
}

std::string_view current_sample_section(std::string_view prompt) {
  const auto pos = prompt.rfind(kCurrentSampleMarker);
  if (pos == std::string_view::npos) return {};
  return prompt.substr(pos + kCurrentSampleMarker.size());
}

}  // namespace dytag::prompts
