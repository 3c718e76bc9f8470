#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace dytag::prompts {

using Vars = std::map<std::string, std::string, std::less<>>;

/// Marks the start of the section describing the query being answered.
inline constexpr std::string_view kCurrentSampleMarker = "Current Sample:";

/// Raw text of an embedded template. Throws TemplateError for unknown names.
const std::string& template_text(std::string_view name);
std::vector<std::string> template_names();

/// Substitutes `{name}` placeholders in one pass; `{{` and `}}` yield literal
/// braces. Values are inserted verbatim. Throws TemplateError on a
/// placeholder without a value or an unbalanced brace.
std::string render_string(std::string_view tmpl, const Vars& vars);
std::string render(std::string_view name, const Vars& vars);

/// Placeholder names referenced by a template, in order of first use.
std::vector<std::string> placeholders(std::string_view tmpl);

/// Text after the current-sample marker, or empty when absent.
std::string_view current_sample_section(std::string_view prompt);

}  // namespace dytag::prompts
