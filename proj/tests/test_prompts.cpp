#include <gtest/gtest.h>

#include <regex>

#include "dytag/error.hpp"
#include "dytag/prompts.hpp"

using namespace dytag;
using namespace dytag::prompts;

TEST(Render, SubstitutesAndEscapes) {
  EXPECT_EQ(render_string("a {x} b {{lit}} {y}", {{"x", "1"}, {"y", "{z}"}}), "a 1 b {lit} {z}");
  EXPECT_THROW(render_string("missing {x}", {}), TemplateError);
  EXPECT_THROW(render_string("open { brace", {}), TemplateError);
  EXPECT_THROW(render_string("close } brace", {}), TemplateError);
  EXPECT_EQ(placeholders("{b} {a} {b} {{c}}"), (std::vector<std::string>{"b", "a"}));
}

TEST(Render, UnknownTemplateIsAnError) { EXPECT_THROW(template_text("no_such_template"), TemplateError); }

TEST(Templates, EveryTemplateRendersClosed) {
  const auto names = template_names();
  ASSERT_GE(names.size(), 50u);
  const std::regex unresolved(R"(\{[A-Za-z_][A-Za-z0-9_]*\})");
  for (const auto& name : names) {
    SCOPED_TRACE(name);
    // Output-format examples are inserted verbatim and hold literal JSON.
    if (name.rfind("output_", 0) == 0) {
      EXPECT_EQ(template_text(name).find("\xE2\x80\x94"), std::string::npos);
      continue;
    }
    Vars vars;
    for (const auto& p : placeholders(template_text(name))) vars.emplace(p, "VALUE");
    const auto text = render(name, vars);
    EXPECT_FALSE(std::regex_search(text, unresolved));
    EXPECT_EQ(text.find("\xE2\x80\x94"), std::string::npos) << "em-dash in " << name;
  }
}

TEST(Templates, PredictorTemplatesMarkTheCurrentSample) {
  for (const char* name : {"predictor_lp_user", "predictor_nr_user", "predictor_ec_user"}) {
    SCOPED_TRACE(name);
    EXPECT_NE(template_text(name).find(kCurrentSampleMarker), std::string::npos);
  }
}

TEST(Sections, CurrentSampleUsesLastMarker) {
  EXPECT_EQ(current_sample_section("x Current Sample: a\nCurrent Sample: b"), " b");
  EXPECT_EQ(current_sample_section("no marker"), "");
}
