// Copyright (C) 2026 critloop authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"

#include "critloop/prompt_assembly.hpp"

#include <filesystem>

using namespace critloop::prompts;
using critloop::model::Strategy;
using critloop::model::TaskKind;
namespace ts = critloop::testsupport;
namespace fs = std::filesystem;

TEST_CASE("render_template substitutes exactly") {
  const PromptTemplate tmpl{"feedback_base", "A <INPUT> B"};
  CHECK(render_template(tmpl, {{"INPUT", "q"}}, TaskKind::custom) == "A q B");
}

TEST_CASE("unbound placeholder is an error naming the placeholder") {
  const PromptTemplate tmpl{"feedback_base", "A <INPUT> B"};
  CHECK_THROWS_WITH_AS((void)render_template(tmpl, {}, TaskKind::custom),
                       doctest::Contains("unbound placeholder INPUT"),
                       TemplateError);
}

TEST_CASE("undeclared placeholder in a template body is an error") {
  const PromptTemplate tmpl{"feedback_base", "A <WRONG> B"};
  CHECK_THROWS_WITH_AS(
      (void)render_template(tmpl, {{"WRONG", "x"}}, TaskKind::custom),
      doctest::Contains("unknown placeholder WRONG"), TemplateError);
}

TEST_CASE("binding values may not smuggle placeholders back in") {
  const PromptTemplate tmpl{"feedback_crit", "<GUIDELINE> <CODE> <CRITERIA>"};
  PlaceholderBinding binding{
      {"GUIDELINE", "g"}, {"CODE", "see <CRITERIA>"}, {"CRITERIA", "c"}};
  CHECK_THROWS_AS((void)render_template(tmpl, binding, TaskKind::code),
                  TemplateError);
}

TEST_CASE("placeholder syntax is uppercase-only; literal tags survive") {
  const PromptTemplate tmpl{"eval_validity",
                            "<text>\n<TEXT>\n</text>\nvector<T> stays? no: "
                            "lowercase <thinking> does"};
  // <T> is uppercase and undeclared for this slot -> error.
  CHECK_THROWS_AS(
      (void)render_template(tmpl, {{"TEXT", "body"}}, TaskKind::custom),
      TemplateError);

  const PromptTemplate clean{"eval_validity", "<text>\n<TEXT>\n</text>"};
  CHECK(render_template(clean, {{"TEXT", "body"}}, TaskKind::custom) ==
        "<text>\nbody\n</text>");
}

TEST_CASE("find_placeholders reports first-occurrence order, deduped") {
  const auto names = find_placeholders("<B> <A> <B> <a> <A2_X>");
  REQUIRE(names.size() == 3);
  CHECK(names[0] == "B");
  CHECK(names[1] == "A");
  CHECK(names[2] == "A2_X");
}

TEST_CASE("ordinal phrases follow the serial-comma form") {
  CHECK(ordinal_phrase({0}) == "the first");
  CHECK(ordinal_phrase({0, 2}) == "the first and third");
  CHECK(ordinal_phrase({0, 1, 4}) == "the first, second, and fifth");
  CHECK(ordinal_phrase({20}) == "the 21st");
  CHECK_THROWS_AS((void)ordinal_phrase({}), TemplateError);
}

TEST_CASE("sampled numberings pick the requested polarity") {
  critloop::model::SatisfactionVector vector;
  vector.flags = {true, false, false, true, true};
  CHECK(sampled_numberings(vector, true) == "the first, fourth, and fifth");
  CHECK(sampled_numberings(vector, false) == "the second and third");

  vector.flags = {true, true};
  CHECK_THROWS_AS((void)sampled_numberings(vector, false), TemplateError);
}

TEST_CASE("criteria render as a numbered bold list") {
  critloop::model::Criterion a{"c1", "Alpha", "Is it alpha?", "x"};
  critloop::model::Criterion b{"c2", "Beta", "Is it beta?", "x"};
  const std::vector<critloop::model::Criterion> criteria{a, b};
  CHECK(format_criteria_list(criteria) ==
        "1. **Alpha**: Is it alpha?\n2. **Beta**: Is it beta?");
}

TEST_CASE("demonstration blocks wrap pairs and divide with 55 dashes") {
  const auto pack = ts::fixture_pack(TaskKind::introduction);
  const auto& demos = pack.aspects[0].demonstrations;

  const std::string one =
      format_demonstration_block({demos.data(), 1}, TaskKind::introduction);
  CHECK(one.find("[Begin Example Introduction]\n") == 0);
  CHECK(one.find(kDemoDivider) == std::string::npos);

  const std::string two =
      format_demonstration_block(demos, TaskKind::introduction);
  std::size_t dividers = 0;
  for (std::size_t pos = two.find(kDemoDivider); pos != std::string::npos;
       pos = two.find(kDemoDivider, pos + 1)) {
    ++dividers;
  }
  CHECK(dividers == 1);
  CHECK(kDemoDivider.size() == 55);

  const std::string code =
      format_demonstration_block(demos, TaskKind::code);
  CHECK(code.find("[Begin Example Code]") != std::string::npos);

  CHECK_THROWS_AS(
      (void)format_demonstration_block({demos.data(), 0}, TaskKind::code),
      TemplateError);
}

TEST_CASE("strategy prompts include the pieces their strategy names") {
  const auto pack = ts::fixture_pack(TaskKind::introduction);
  const auto& sample = pack.test_samples[0];
  const auto& aspect = pack.aspects[0];

  const std::string base =
      assemble_strategy_prompt(Strategy::base, sample, nullptr, pack);
  CHECK(base.find("Below is my introduction") != std::string::npos);
  CHECK(base.find(sample.text) != std::string::npos);
  CHECK(base.find("Criteria") == std::string::npos);

  const std::string crit =
      assemble_strategy_prompt(Strategy::crit, sample, &aspect, pack);
  CHECK(crit.find(aspect.guideline_text) != std::string::npos);
  for (const auto& criterion : aspect.criteria) {
    CHECK(crit.find(criterion.name) != std::string::npos);
  }

  // Aspect handling errors.
  CHECK_THROWS_AS((void)assemble_strategy_prompt(Strategy::crit, sample,
                                                 nullptr, pack),
                  TemplateError);
  CHECK_THROWS_AS((void)assemble_strategy_prompt(Strategy::base, sample,
                                                 &aspect, pack),
                  TemplateError);

  // icl with zero demos errors.
  auto no_demos = pack;
  no_demos.aspects[0].demonstrations.clear();
  CHECK_THROWS_AS((void)assemble_strategy_prompt(
                      Strategy::icl, sample, &no_demos.aspects[0], no_demos),
                  TemplateError);
}

TEST_CASE("assembly is deterministic") {
  const auto pack = ts::fixture_pack(TaskKind::reddit_post);
  const auto& sample = pack.test_samples[0];
  const auto& aspect = pack.aspects[0];
  const std::string a =
      assemble_strategy_prompt(Strategy::cricl, sample, &aspect, pack);
  const std::string b =
      assemble_strategy_prompt(Strategy::cricl, sample, &aspect, pack);
  CHECK(a == b);
}

TEST_CASE("the extraction prompt opens by sharing the guidelines") {
  const auto pack = ts::fixture_pack(TaskKind::introduction);
  const std::string prompt = render_template(
      {"extract_criteria", pack.template_body("extract_criteria")},
      {{"GUIDELINE", pack.aspects[0].guideline_text}}, TaskKind::introduction);
  CHECK(prompt.rfind("First, I'll share the guidelines", 0) == 0);
}

TEST_CASE("golden prompts match byte-for-byte with no leftover placeholders") {
  const fs::path golden_dir = ts::data_dir() / "golden_prompts";
  for (const auto& golden : ts::golden_prompt_set()) {
    const fs::path file = golden_dir / golden.name;
    if (ts::update_goldens()) {
      critloop::model::write_text_file(file, golden.text);
      continue;
    }
    INFO("golden prompt: ", golden.name);
    REQUIRE(fs::exists(file));
    CHECK(critloop::model::read_text_file(file) == golden.text);

    const TaskKind kind = critloop::model::parse_task_kind(
        fs::path(golden.name).parent_path().string());
    const auto leftovers =
        scan_unreplaced(golden.text, declared_placeholders(golden.slot, kind));
    CHECK(leftovers.empty());
  }
}
