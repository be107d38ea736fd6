// Copyright (C) 2026 critloop authors
// SPDX-License-Identifier: Apache-2.0

#include "critloop/prompt_assembly.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <sstream>

namespace critloop::prompts {

using model::Aspect;
using model::Criterion;
using model::Demonstration;
using model::SatisfactionVector;
using model::Strategy;
using model::TaskKind;
using model::TaskPack;
using model::TestSample;

namespace {

[[noreturn]] void fail(const std::string& message) {
  throw TemplateError(message);
}

bool is_placeholder_char(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

// Finds the next <NAME> token at or after `pos`. Returns npos when none.
std::size_t next_token(std::string_view body, std::size_t pos,
                       std::string& name_out) {
  while (pos < body.size()) {
    const std::size_t open = body.find('<', pos);
    if (open == std::string_view::npos) {
      return std::string_view::npos;
    }
    std::size_t end = open + 1;
    while (end < body.size() && is_placeholder_char(body[end])) {
      ++end;
    }
    if (end > open + 1 && end < body.size() && body[end] == '>' &&
        body[open + 1] >= 'A' && body[open + 1] <= 'Z') {
      name_out = std::string(body.substr(open + 1, end - open - 1));
      return open;
    }
    pos = open + 1;
  }
  return std::string_view::npos;
}

} // namespace

std::vector<std::string> find_placeholders(std::string_view body) {
  std::vector<std::string> names;
  std::string name;
  std::size_t pos = 0;
  while (true) {
    const std::size_t at = next_token(body, pos, name);
    if (at == std::string_view::npos) {
      break;
    }
    if (std::find(names.begin(), names.end(), name) == names.end()) {
      names.push_back(name);
    }
    pos = at + name.size() + 2;
  }
  return names;
}

std::string input_placeholder(TaskKind kind) {
  switch (kind) {
    case TaskKind::introduction: return "INTRODUCTION";
    case TaskKind::code: return "CODE";
    case TaskKind::reddit_post: return "POST";
    case TaskKind::custom: return "INPUT";
  }
  return "INPUT";
}

std::string seed_placeholder(TaskKind kind) {
  return kind == TaskKind::introduction ? "PAPER" : input_placeholder(kind);
}

std::string example_input_label(TaskKind kind) {
  switch (kind) {
    case TaskKind::introduction: return "Example Introduction";
    case TaskKind::code: return "Example Code";
    case TaskKind::reddit_post: return "Example Post";
    case TaskKind::custom: return "Example Input";
  }
  return "Example Input";
}

std::string strategy_slot(Strategy strategy) {
  switch (strategy) {
    case Strategy::base: return "feedback_base";
    case Strategy::crit: return "feedback_crit";
    case Strategy::icl: return "feedback_icl";
    case Strategy::cricl: return "feedback_cricl";
  }
  return "feedback_base";
}

std::set<std::string> declared_placeholders(std::string_view slot,
                                            TaskKind kind) {
  const std::string input = input_placeholder(kind);
  const std::string seed = seed_placeholder(kind);

  if (slot == "extract_criteria") {
    return {"GUIDELINE"};
  }
  if (slot.rfind("demo_input_variant_", 0) == 0) {
    return {"GUIDELINE", "CRITERIA", "SAMPLED_NUMBERINGS", seed};
  }
  if (slot == "demo_output") {
    return {"GUIDELINE", "CRITERIA", input};
  }
  if (slot == "feedback_base") {
    return {input};
  }
  if (slot == "feedback_crit") {
    return {"GUIDELINE", "CRITERIA", input};
  }
  if (slot == "feedback_icl") {
    return {"DEMONSTRATIONS", "USER_INPUT"};
  }
  if (slot == "feedback_cricl") {
    return {"GUIDELINE", "CRITERIA", "DEMONSTRATIONS", "USER_INPUT"};
  }
  if (slot == "eval_validity") {
    return {"TEXT"};
  }
  if (slot == "eval_contextualization") {
    return {input, "TEXT"};
  }
  if (slot == "eval_criterion") {
    return {input, "FEEDBACK", "CRITERION"};
  }
  fail("unknown template slot \"" + std::string(slot) + "\"");
}

void validate_template(const PromptTemplate& tmpl, TaskKind kind) {
  const std::set<std::string> declared = declared_placeholders(tmpl.slot, kind);
  for (const std::string& name : find_placeholders(tmpl.body)) {
    if (!declared.contains(name)) {
      fail("template \"" + tmpl.slot + "\": unknown placeholder " + name);
    }
  }
}

std::string render_template(const PromptTemplate& tmpl,
                            const PlaceholderBinding& binding,
                            TaskKind kind) {
  const std::set<std::string> declared = declared_placeholders(tmpl.slot, kind);

  for (const auto& [name, value] : binding) {
    for (const std::string& nested : find_placeholders(value)) {
      if (declared.contains(nested)) {
        fail("template \"" + tmpl.slot + "\": binding value for " + name +
             " contains unexpanded placeholder " + nested);
      }
    }
  }

  std::string out;
  out.reserve(tmpl.body.size());
  std::size_t pos = 0;
  std::string name;
  while (true) {
    const std::size_t at = next_token(tmpl.body, pos, name);
    if (at == std::string_view::npos) {
      out.append(tmpl.body, pos, std::string::npos);
      break;
    }
    out.append(tmpl.body, pos, at - pos);
    if (!declared.contains(name)) {
      fail("template \"" + tmpl.slot + "\": unknown placeholder " + name);
    }
    const auto bound = binding.find(name);
    if (bound == binding.end()) {
      fail("template \"" + tmpl.slot + "\": unbound placeholder " + name);
    }
    out.append(bound->second);
    pos = at + name.size() + 2;
  }
  return out;
}

std::vector<std::string>
scan_unreplaced(std::string_view text, const std::set<std::string>& declared) {
  std::vector<std::string> found;
  for (const std::string& name : find_placeholders(text)) {
    if (declared.contains(name)) {
      found.push_back(name);
    }
  }
  return found;
}

std::string format_criteria_list(std::span<const Criterion> criteria) {
  std::ostringstream out;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (i > 0) {
      out << '\n';
    }
    out << (i + 1) << ". **" << criteria[i].name
        << "**: " << criteria[i].description;
  }
  return out.str();
}

std::string ordinal_phrase(const std::vector<std::size_t>& positions) {
  if (positions.empty()) {
    fail("ordinal phrase requires at least one position");
  }
  static constexpr std::array<std::string_view, 20> kWords = {
      "first",     "second",     "third",     "fourth",    "fifth",
      "sixth",     "seventh",    "eighth",    "ninth",     "tenth",
      "eleventh",  "twelfth",    "thirteenth", "fourteenth", "fifteenth",
      "sixteenth", "seventeenth", "eighteenth", "nineteenth", "twentieth"};
  auto ordinal = [](std::size_t zero_based) -> std::string {
    const std::size_t n = zero_based + 1;
    if (n <= kWords.size()) {
      return std::string(kWords[n - 1]);
    }
    // Past twentieth fall back to numeric ordinals.
    const std::size_t tens = n % 100;
    std::string_view suffix = "th";
    if (tens < 11 || tens > 13) {
      switch (n % 10) {
        case 1: suffix = "st"; break;
        case 2: suffix = "nd"; break;
        case 3: suffix = "rd"; break;
        default: break;
      }
    }
    return std::to_string(n) + std::string(suffix);
  };

  std::string out = "the ";
  if (positions.size() == 1) {
    return out + ordinal(positions[0]);
  }
  if (positions.size() == 2) {
    return out + ordinal(positions[0]) + " and " + ordinal(positions[1]);
  }
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (i > 0) {
      out += i + 1 == positions.size() ? ", and " : ", ";
    }
    out += ordinal(positions[i]);
  }
  return out;
}

std::string sampled_numberings(const SatisfactionVector& vector,
                               bool true_positions) {
  std::vector<std::size_t> positions;
  for (std::size_t i = 0; i < vector.flags.size(); ++i) {
    if (vector.flags[i] == true_positions) {
      positions.push_back(i);
    }
  }
  if (positions.empty()) {
    fail("satisfaction vector has no " +
         std::string(true_positions ? "satisfied" : "violated") +
         " flags to render");
  }
  return ordinal_phrase(positions);
}

std::string format_demonstration_block(std::span<const Demonstration> demos,
                                       TaskKind kind) {
  if (demos.empty()) {
    fail("demonstration block requires at least one demonstration");
  }
  const std::string input_label = example_input_label(kind);
  std::ostringstream out;
  for (std::size_t i = 0; i < demos.size(); ++i) {
    if (i > 0) {
      out << '\n' << kDemoDivider << '\n';
    }
    out << "[Begin " << input_label << "]\n"
        << demos[i].input_text << '\n'
        << "[End " << input_label << "]\n"
        << "[Begin Example Feedback]\n"
        << demos[i].output_text << '\n'
        << "[End Example Feedback]";
  }
  return out.str();
}

std::string assemble_strategy_prompt(Strategy strategy,
                                     const TestSample& sample,
                                     const Aspect* aspect,
                                     const TaskPack& pack,
                                     const Criterion* criterion) {
  if (strategy != Strategy::base && aspect == nullptr) {
    fail("strategy " + model::to_string(strategy) + " requires an aspect");
  }
  if (strategy == Strategy::base && aspect != nullptr) {
    fail("base strategy takes no aspect");
  }
  if (criterion != nullptr && strategy != Strategy::crit) {
    fail("single-criterion prompts are only defined for the crit strategy");
  }

  const std::string slot = strategy_slot(strategy);
  const PromptTemplate tmpl{slot, pack.template_body(slot)};
  const std::string input = input_placeholder(pack.task_kind);

  PlaceholderBinding binding;
  switch (strategy) {
    case Strategy::base:
      binding[input] = sample.text;
      break;
    case Strategy::crit: {
      binding["GUIDELINE"] = aspect->guideline_text;
      binding[input] = sample.text;
      if (criterion != nullptr) {
        binding["CRITERIA"] = format_criteria_list({criterion, 1});
      } else {
        binding["CRITERIA"] = format_criteria_list(aspect->criteria);
      }
      break;
    }
    case Strategy::icl:
      binding["DEMONSTRATIONS"] =
          format_demonstration_block(aspect->demonstrations, pack.task_kind);
      binding["USER_INPUT"] = sample.text;
      break;
    case Strategy::cricl:
      binding["GUIDELINE"] = aspect->guideline_text;
      binding["CRITERIA"] = format_criteria_list(aspect->criteria);
      binding["DEMONSTRATIONS"] =
          format_demonstration_block(aspect->demonstrations, pack.task_kind);
      binding["USER_INPUT"] = sample.text;
      break;
  }

  std::string prompt = render_template(tmpl, binding, pack.task_kind);
  const std::vector<std::string> leftovers = scan_unreplaced(
      prompt, declared_placeholders(slot, pack.task_kind));
  if (!leftovers.empty()) {
    fail("assembled " + slot + " prompt still contains placeholder " +
         leftovers.front());
  }
  return prompt;
}

} // namespace critloop::prompts
