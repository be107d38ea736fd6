// Copyright (C) 2026 critloop authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "critloop/curation.hpp"
#include "critloop/layered_eval.hpp"
#include "critloop/llm_gateway.hpp"
#include "critloop/prompt_assembly.hpp"
#include "critloop/task_model.hpp"

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace critloop::testsupport {

inline std::filesystem::path source_dir() {
  return std::filesystem::path(CRITLOOP_SOURCE_DIR);
}

inline std::filesystem::path data_dir() { return source_dir() / "tests/data"; }

inline std::filesystem::path tiny_pack_dir() {
  return source_dir() / "packs/tiny-intro";
}

inline std::filesystem::path tiny_fixtures_dir() {
  return data_dir() / "fixtures/tiny-intro";
}

inline bool update_goldens() {
  const char* flag = std::getenv("CRITLOOP_UPDATE_GOLDENS");
  return flag != nullptr && *flag == '1';
}

/// Test provider whose behavior is supplied as callables.
struct FnProvider : gateway::Provider {
  std::function<gateway::ChatResponse(const gateway::ChatRequest&)> on_chat;
  std::function<std::vector<double>(const gateway::EmbeddingRequest&)> on_embed;

  std::string id() const override { return "test"; }
  gateway::ChatResponse complete(const gateway::ChatRequest& request) override {
    return on_chat(request);
  }
  std::vector<double> embed(const gateway::EmbeddingRequest& request) override {
    return on_embed(request);
  }
};

inline gateway::ChatResponse plain_reply(std::string text) {
  return gateway::ChatResponse{std::move(text),
                               gateway::FinishReason::complete, false};
}

/// In-memory pack with the shipped template assets for one task kind;
/// content is fixed so rendered prompts can be pinned as goldens.
inline model::TaskPack fixture_pack(model::TaskKind kind) {
  using model::Criterion;
  using model::Demonstration;
  using model::TaskKind;

  model::TaskPack pack;
  pack.id = "fixture-" + model::to_string(kind);
  pack.task_kind = kind;

  model::Aspect aspect;
  aspect.id = "style";
  aspect.title = "Style";
  aspect.guideline_text =
      "Keep every statement concrete. Name the thing you refer to, state "
      "its effect, and avoid filler phrases.";

  const char* names[3] = {"Concrete References", "Stated Effects",
                          "No Filler"};
  const char* descriptions[3] = {
      "Does the text name the specific object each statement refers to?",
      "Does each claim state its observable effect?",
      "Is the text free of filler phrases that carry no information?"};
  for (int i = 0; i < 3; ++i) {
    Criterion criterion;
    criterion.id = model::slugify(names[i]);
    criterion.name = names[i];
    criterion.description = descriptions[i];
    criterion.aspect_id = aspect.id;
    aspect.criteria.push_back(std::move(criterion));
  }

  Demonstration first;
  first.input_text = "EXAMPLE INPUT ONE. It gestures vaguely at things and "
                     "never names them.";
  first.output_text = "EXAMPLE FEEDBACK ONE. Every reference is vague: name "
                      "the component each sentence describes.";
  first.vector.flags = {false, false, false};
  first.vector.aspect_id = aspect.id;
  first.vector.seed = 11;
  first.variant = 1;
  first.review_status = model::ReviewStatus::human_reviewed;
  aspect.demonstrations.push_back(first);

  Demonstration second;
  second.input_text = "EXAMPLE INPUT TWO. The cache layer halves lookup "
                      "latency, though some filler remains, to be sure.";
  second.output_text = "EXAMPLE FEEDBACK TWO. References and effects are "
                       "concrete; cut the filler clause \"to be sure\".";
  second.vector.flags = {true, true, false};
  second.vector.aspect_id = aspect.id;
  second.vector.seed = 12;
  second.variant = 2;
  second.review_status = model::ReviewStatus::human_reviewed;
  aspect.demonstrations.push_back(second);

  pack.aspects.push_back(std::move(aspect));

  model::TestSample sample;
  sample.id = "sample-1";
  sample.text = "SAMPLE TEXT. The scheduler improves things considerably in "
                "many situations.";
  pack.test_samples.push_back(std::move(sample));

  const std::vector<std::string> slots = [&] {
    std::vector<std::string> base = {
        "extract_criteria", "demo_output",  "feedback_base",
        "feedback_crit",    "feedback_icl", "feedback_cricl",
        "eval_validity",    "eval_contextualization", "eval_criterion"};
    const int variants = kind == TaskKind::introduction ? 2 : 4;
    for (int v = 1; v <= variants; ++v) {
      base.push_back("demo_input_variant_" + std::to_string(v));
    }
    return base;
  }();
  const std::filesystem::path asset_dir =
      source_dir() / "assets/templates" / model::to_string(kind);
  for (const std::string& slot : slots) {
    pack.template_set[slot] = "templates/" + slot + ".txt";
    pack.template_bodies[slot] =
        model::read_text_file(asset_dir / (slot + ".txt"));
  }
  return pack;
}

/// A pack shaped like the published Reddit task: 6 aspects, 25 criteria,
/// 4 reviewed demonstrations per aspect.
inline model::TaskPack reddit_shaped_pack() {
  model::TaskPack pack = fixture_pack(model::TaskKind::reddit_post);
  pack.id = "reddit-shaped";
  pack.reproduction = true;
  pack.aspects.clear();
  const int criteria_per_aspect[6] = {4, 4, 4, 4, 4, 5};
  for (int a = 0; a < 6; ++a) {
    model::Aspect aspect;
    aspect.id = "aspect-" + std::to_string(a);
    aspect.title = "Aspect " + std::to_string(a);
    aspect.guideline_text = "Guideline for aspect " + std::to_string(a) + ".";
    for (int c = 0; c < criteria_per_aspect[a]; ++c) {
      model::Criterion criterion;
      criterion.id = aspect.id + "-c" + std::to_string(c);
      criterion.name = "Criterion " + std::to_string(c);
      criterion.description = "Does the post satisfy point " +
                              std::to_string(c) + "?";
      criterion.aspect_id = aspect.id;
      aspect.criteria.push_back(std::move(criterion));
    }
    for (int d = 0; d < 4; ++d) {
      model::Demonstration demo;
      demo.input_text = "demo input " + std::to_string(d);
      demo.output_text = "demo feedback " + std::to_string(d);
      demo.variant = d + 1;
      demo.vector.aspect_id = aspect.id;
      demo.vector.flags.assign(aspect.criteria.size(), d == 3);
      if (d == 1 || d == 2) {
        demo.vector.flags[0] = !demo.vector.flags[0];
      }
      demo.review_status = model::ReviewStatus::human_reviewed;
      aspect.demonstrations.push_back(std::move(demo));
    }
    pack.aspects.push_back(std::move(aspect));
  }
  return pack;
}

struct GoldenPrompt {
  std::string name; // relative path under tests/data/golden_prompts
  std::string slot; // template slot, for the unreplaced-placeholder scan
  std::string text;
};

/// Every prompt rendering pinned by golden files: the four strategy
/// prompts (plus single-criterion crit) and all curation/evaluation
/// templates, for each task kind.
inline std::vector<GoldenPrompt> golden_prompt_set() {
  using model::Strategy;
  using model::TaskKind;

  std::vector<GoldenPrompt> goldens;
  for (TaskKind kind : {TaskKind::introduction, TaskKind::code,
                        TaskKind::reddit_post}) {
    const model::TaskPack pack = fixture_pack(kind);
    const model::Aspect& aspect = pack.aspects.front();
    const model::TestSample& sample = pack.test_samples.front();
    const std::string prefix = model::to_string(kind) + "/";

    for (Strategy strategy : {Strategy::base, Strategy::crit, Strategy::icl,
                              Strategy::cricl}) {
      const model::Aspect* scope =
          strategy == Strategy::base ? nullptr : &aspect;
      goldens.push_back(
          {prefix + "feedback_" + model::to_string(strategy) + ".txt",
           prompts::strategy_slot(strategy),
           prompts::assemble_strategy_prompt(strategy, sample, scope, pack)});
    }
    goldens.push_back({prefix + "feedback_crit_single.txt", "feedback_crit",
                       prompts::assemble_strategy_prompt(
                           Strategy::crit, sample, &aspect, pack,
                           &aspect.criteria.front())});

    goldens.push_back(
        {prefix + "extract_criteria.txt", "extract_criteria",
         prompts::render_template(
             {"extract_criteria", pack.template_body("extract_criteria")},
             {{"GUIDELINE", aspect.guideline_text}}, kind)});

    const int variants = curation::variant_count(pack);
    for (int v = 1; v <= variants; ++v) {
      model::SatisfactionVector vector;
      vector.aspect_id = aspect.id;
      vector.seed = 9;
      switch (curation::variant_rule(v)) {
        case curation::VectorRule::violate_all:
          vector.flags = {false, false, false};
          break;
        case curation::VectorRule::adhere_all:
          vector.flags = {true, true, true};
          break;
        case curation::VectorRule::mixed_adhere:
        case curation::VectorRule::mixed_violate:
          vector.flags = {true, false, true};
          break;
      }
      goldens.push_back(
          {prefix + "demo_input_variant_" + std::to_string(v) + ".txt",
           "demo_input_variant_" + std::to_string(v),
           curation::build_demo_input_prompt(
               pack, aspect, "SEED TEXT to be modified.", vector, v)});
    }

    goldens.push_back({prefix + "demo_output.txt", "demo_output",
                       curation::build_demo_output_prompt(
                           pack, aspect, "DRAFT INPUT awaiting feedback.")});

    goldens.push_back(
        {prefix + "eval_validity.txt", "eval_validity",
         eval::build_validity_prompt("FEEDBACK TEXT under evaluation.", pack)});
    goldens.push_back({prefix + "eval_contextualization.txt",
                       "eval_contextualization",
                       eval::build_contextualization_prompt(
                           sample.text, "FEEDBACK TEXT under evaluation.",
                           pack)});
    goldens.push_back(
        {prefix + "eval_criterion.txt", "eval_criterion",
         eval::build_criterion_prompt(sample.text,
                                      "FEEDBACK TEXT under evaluation.",
                                      aspect.criteria.front(), pack)});
  }
  return goldens;
}

} // namespace critloop::testsupport
