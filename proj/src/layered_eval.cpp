// Copyright (C) 2026 critloop authors
// SPDX-License-Identifier: Apache-2.0

#include "critloop/layered_eval.hpp"

#include "critloop/hash.hpp"
#include "critloop/prompt_assembly.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <sstream>
#include <unordered_map>

namespace critloop::eval {

using feedback::FeedbackBundle;
using feedback::FeedbackRecord;
using gateway::ChatRequest;
using gateway::Endpoint;
using gateway::ParseError;
using model::Criterion;
using model::Perspective;
using model::TaskPack;

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) {
    ++begin;
  }
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) {
    --end;
  }
  return std::string(text.substr(begin, end - begin));
}

// Finds "<tag>" (or "</tag>") case-insensitively, tolerating whitespace
// inside the brackets. Returns the index of '<' and sets `after` to the
// index past '>'.
std::size_t find_tag_token(std::string_view text, std::string_view tag,
                           bool closing, std::size_t from, std::size_t* after) {
  auto lower = [](char c) {
    return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  };
  for (std::size_t open = text.find('<', from); open != std::string_view::npos;
       open = text.find('<', open + 1)) {
    std::size_t pos = open + 1;
    auto skip_ws = [&] {
      while (pos < text.size() &&
             std::isspace(static_cast<unsigned char>(text[pos]))) {
        ++pos;
      }
    };
    skip_ws();
    if (closing) {
      if (pos >= text.size() || text[pos] != '/') continue;
      ++pos;
      skip_ws();
    }
    bool matched = true;
    for (char c : tag) {
      if (pos >= text.size() || lower(text[pos]) != lower(c)) {
        matched = false;
        break;
      }
      ++pos;
    }
    if (!matched) continue;
    skip_ws();
    if (pos < text.size() && text[pos] == '>') {
      *after = pos + 1;
      return open;
    }
  }
  return std::string_view::npos;
}

ChatRequest judge_request(const TaskPack& pack, Endpoint judge,
                          const std::string& prompt) {
  ChatRequest request;
  request.provider_id = judge.gateway.provider().id();
  request.model_id = judge.model;
  request.prompt = prompt;
  // Judges decode greedily with a single sample.
  request.temperature = pack.sampling.judge_temperature;
  request.top_p = 1.0;
  request.candidate_index = 0;
  return request;
}

std::string render_eval_prompt(const TaskPack& pack, const std::string& slot,
                               prompts::PlaceholderBinding binding) {
  const prompts::PromptTemplate tmpl{slot, pack.template_body(slot)};
  return prompts::render_template(tmpl, binding, pack.task_kind);
}

Verdict parse_validity_reply(const std::string& reply) {
  const std::string label =
      normalize_label(parse_tagged_field(reply, "answer"));
  if (label != "specific" && label != "not specific") {
    throw ParseError("unrecognized validity label \"" + label + "\"", reply);
  }
  Verdict verdict;
  verdict.perspective = Perspective::validity;
  verdict.label = label;
  verdict.raw_reply = reply;
  verdict.passed_gate = label == "specific";
  return verdict;
}

Verdict parse_contextualization_reply(const std::string& reply) {
  const std::string label =
      normalize_label(parse_tagged_field(reply, "answer"));
  if (label != "match" && label != "not match" && label != "unsure") {
    throw ParseError("unrecognized contextualization label \"" + label + "\"",
                     reply);
  }
  Verdict verdict;
  verdict.perspective = Perspective::contextualization;
  verdict.label = label;
  verdict.raw_reply = reply;
  verdict.passed_gate = label == "match";
  return verdict;
}

CriterionVerdict parse_criterion_reply(const std::string& reply) {
  CriterionVerdict verdict;
  verdict.raw_reply = reply;
  verdict.extraction = parse_tagged_field(reply, "extraction");

  const std::string answer = normalize_label(
      parse_tagged_field(reply, "negative_critique_or_suggestion"));
  if (answer != "yes" && answer != "no") {
    throw ParseError("unrecognized critique answer \"" + answer + "\"", reply);
  }
  verdict.has_critique_or_suggestion = answer == "yes";

  if (verdict.has_critique_or_suggestion) {
    if (verdict.extraction.empty()) {
      throw ParseError(
          "inconsistent tags: critique answered yes with empty extraction",
          reply);
    }
    const std::string helpfulness =
        normalize_label(parse_tagged_field(reply, "helpfulness"));
    if (helpfulness != "helpful" && helpfulness != "unhelpful") {
      throw ParseError("unrecognized helpfulness label \"" + helpfulness + "\"",
                       reply);
    }
    verdict.helpful = helpfulness == "helpful";
  } else {
    // The prompt asks for a vacuous "unhelpful" in the no-critique case;
    // it carries no information and is discarded. A "helpful" there is a
    // contradiction.
    try {
      const std::string helpfulness =
          normalize_label(parse_tagged_field(reply, "helpfulness"));
      if (helpfulness == "helpful") {
        throw ParseError(
            "inconsistent tags: no critique but helpfulness answered helpful",
            reply);
      }
    } catch (const ParseError& e) {
      if (std::string_view(e.what()).find("inconsistent") !=
          std::string_view::npos) {
        throw;
      }
    }
  }
  return verdict;
}

std::string criterion_text(const Criterion& criterion) {
  return "**" + criterion.name + "**: " + criterion.description;
}

// Parses a batched reply, running the one bounded re-issue on parse
// failure. Shares semantics with gateway::complete_with_repair.
template <typename ParseFn>
auto parse_or_repair(gateway::Gateway& gateway, ChatRequest request,
                     const std::string& reply, ParseFn&& parse) {
  try {
    return parse(reply);
  } catch (const ParseError& original) {
    request.temperature = 0.3;
    gateway::ChatResponse second;
    try {
      second = gateway.complete_nocache(request);
    } catch (const std::exception& reissue) {
      throw ParseError(std::string(original.what()) +
                           " (re-issue failed: " + reissue.what() + ")",
                       reply);
    }
    return parse(second.text);
  }
}

} // namespace

std::string normalize_label(std::string_view label) {
  std::string out;
  out.reserve(label.size());
  bool pending_space = false;
  for (char c : label) {
    const unsigned char uc = static_cast<unsigned char>(c);
    if (std::isspace(uc) || c == '_') {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) {
      out.push_back(' ');
    }
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(uc)));
  }
  return out;
}

std::string parse_tagged_field(const std::string& reply,
                               const std::string& tag) {
  std::size_t after_open = 0;
  const std::size_t open =
      find_tag_token(reply, tag, /*closing=*/false, 0, &after_open);
  if (open == std::string_view::npos) {
    throw ParseError("tag <" + tag + "> not found", reply);
  }
  std::size_t after_close = 0;
  const std::size_t close =
      find_tag_token(reply, tag, /*closing=*/true, after_open, &after_close);
  if (close == std::string_view::npos) {
    throw ParseError("tag <" + tag + "> not closed", reply);
  }
  return trim(std::string_view(reply).substr(after_open, close - after_open));
}


std::string build_validity_prompt(const std::string& feedback_text,
                                  const TaskPack& pack) {
  return render_eval_prompt(pack, "eval_validity", {{"TEXT", feedback_text}});
}

std::string build_contextualization_prompt(const std::string& sample_text,
                                           const std::string& feedback_text,
                                           const TaskPack& pack) {
  return render_eval_prompt(
      pack, "eval_contextualization",
      {{prompts::input_placeholder(pack.task_kind), sample_text},
       {"TEXT", feedback_text}});
}

std::string build_criterion_prompt(const std::string& sample_text,
                                   const std::string& feedback_text,
                                   const Criterion& criterion,
                                   const TaskPack& pack) {
  return render_eval_prompt(
      pack, "eval_criterion",
      {{prompts::input_placeholder(pack.task_kind), sample_text},
       {"FEEDBACK", feedback_text},
       {"CRITERION", criterion_text(criterion)}});
}

std::size_t EvalTable::unsure_count() const {
  return static_cast<std::size_t>(
      std::count_if(verdicts.begin(), verdicts.end(), [](const Verdict& v) {
        return v.perspective == Perspective::contextualization &&
               v.label == "unsure";
      }));
}

Verdict eval_validity(const std::string& feedback_text, const TaskPack& pack,
                      Endpoint judge) {
  if (feedback_text.empty()) {
    throw EvalError("validity evaluation requires non-empty feedback text");
  }
  const std::string prompt = build_validity_prompt(feedback_text, pack);
  return gateway::complete_with_repair(
      judge.gateway, judge_request(pack, judge, prompt),
      [](const std::string& reply) { return parse_validity_reply(reply); });
}

Verdict eval_contextualization(const std::string& sample_text,
                               const std::string& feedback_text,
                               const TaskPack& pack, Endpoint judge) {
  const std::string prompt =
      build_contextualization_prompt(sample_text, feedback_text, pack);
  return gateway::complete_with_repair(
      judge.gateway, judge_request(pack, judge, prompt),
      [](const std::string& reply) {
        return parse_contextualization_reply(reply);
      });
}

CriterionVerdict eval_criterion(const std::string& sample_text,
                                const std::string& feedback_text,
                                const Criterion& criterion,
                                const TaskPack& pack, Endpoint judge) {
  const std::string prompt =
      build_criterion_prompt(sample_text, feedback_text, criterion, pack);
  CriterionVerdict verdict = gateway::complete_with_repair(
      judge.gateway, judge_request(pack, judge, prompt),
      [](const std::string& reply) { return parse_criterion_reply(reply); });
  verdict.criterion_id = criterion.id;
  return verdict;
}

EvalTable run_layered_eval(const std::vector<FeedbackBundle>& bundles,
                           const TaskPack& pack, Endpoint judge,
                           const std::string& run_id) {
  EvalTable table;
  table.run_id = run_id;

  std::unordered_map<std::string, const std::string*> sample_texts;
  for (const model::TestSample& sample : pack.test_samples) {
    sample_texts[sample.id] = &sample.text;
  }

  std::vector<const FeedbackRecord*> records;
  for (const FeedbackBundle& bundle : bundles) {
    for (const FeedbackRecord& record : bundle.records) {
      records.push_back(&record);
    }
  }

  auto sample_text_of = [&](const FeedbackRecord& record) -> const std::string& {
    const auto it = sample_texts.find(record.sample_id);
    if (it == sample_texts.end()) {
      throw EvalError("record \"" + record.feedback_id() +
                      "\" references unknown sample \"" + record.sample_id +
                      "\"");
    }
    return *it->second;
  };

  // Level 1: validity for every record.
  std::vector<ChatRequest> requests;
  requests.reserve(records.size());
  for (const FeedbackRecord* record : records) {
    requests.push_back(judge_request(
        pack, judge, build_validity_prompt(record->selected_text, pack)));
  }
  std::vector<gateway::BatchOutcome> outcomes =
      judge.gateway.complete_batch_outcomes(requests);

  std::vector<const FeedbackRecord*> specific;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const FeedbackRecord* record = records[i];
    if (!outcomes[i].ok()) {
      table.errors.push_back(
          {record->feedback_id(), "validity", "", outcomes[i].error});
      continue;
    }
    try {
      Verdict verdict =
          parse_or_repair(judge.gateway, requests[i], outcomes[i].response->text,
                          parse_validity_reply);
      verdict.feedback_id = record->feedback_id();
      if (verdict.passed_gate) {
        specific.push_back(record);
      }
      table.verdicts.push_back(std::move(verdict));
    } catch (const ParseError& e) {
      table.errors.push_back({record->feedback_id(), "validity", "", e.what()});
    }
  }

  // Level 2: contextualization for records that passed validity.
  requests.clear();
  for (const FeedbackRecord* record : specific) {
    requests.push_back(judge_request(
        pack, judge,
        build_contextualization_prompt(sample_text_of(*record),
                                       record->selected_text, pack)));
  }
  outcomes = judge.gateway.complete_batch_outcomes(requests);

  std::vector<const FeedbackRecord*> gated;
  for (std::size_t i = 0; i < specific.size(); ++i) {
    const FeedbackRecord* record = specific[i];
    if (!outcomes[i].ok()) {
      table.errors.push_back(
          {record->feedback_id(), "contextualization", "", outcomes[i].error});
      continue;
    }
    try {
      Verdict verdict =
          parse_or_repair(judge.gateway, requests[i], outcomes[i].response->text,
                          parse_contextualization_reply);
      verdict.feedback_id = record->feedback_id();
      if (verdict.passed_gate) {
        gated.push_back(record);
      }
      table.verdicts.push_back(std::move(verdict));
    } catch (const ParseError& e) {
      table.errors.push_back(
          {record->feedback_id(), "contextualization", "", e.what()});
    }
  }

  // Level 3: per-criterion verdicts for fully gated records.
  struct Cell {
    const FeedbackRecord* record;
    const Criterion* criterion;
  };
  std::vector<Cell> cells;
  for (const FeedbackRecord* record : gated) {
    if (record->strategy == model::Strategy::base) {
      for (const model::Aspect& aspect : pack.aspects) {
        for (const Criterion& criterion : aspect.criteria) {
          cells.push_back({record, &criterion});
        }
      }
    } else if (record->granularity == model::Granularity::single_criterion) {
      const Criterion* criterion = pack.find_criterion(record->scope_id);
      if (criterion == nullptr) {
        table.errors.push_back({record->feedback_id(), "criterion",
                                record->scope_id, "unknown criterion"});
        continue;
      }
      cells.push_back({record, criterion});
    } else {
      const model::Aspect* aspect = pack.find_aspect(record->scope_id);
      if (aspect == nullptr) {
        table.errors.push_back({record->feedback_id(), "criterion",
                                record->scope_id, "unknown aspect"});
        continue;
      }
      for (const Criterion& criterion : aspect->criteria) {
        cells.push_back({record, &criterion});
      }
    }
  }

  requests.clear();
  requests.reserve(cells.size());
  for (const Cell& cell : cells) {
    requests.push_back(judge_request(
        pack, judge,
        build_criterion_prompt(sample_text_of(*cell.record),
                               cell.record->selected_text, *cell.criterion,
                               pack)));
  }
  outcomes = judge.gateway.complete_batch_outcomes(requests);

  for (std::size_t i = 0; i < cells.size(); ++i) {
    const Cell& cell = cells[i];
    if (!outcomes[i].ok()) {
      table.errors.push_back({cell.record->feedback_id(), "criterion",
                              cell.criterion->id, outcomes[i].error});
      continue;
    }
    try {
      CriterionVerdict verdict =
          parse_or_repair(judge.gateway, requests[i], outcomes[i].response->text,
                          parse_criterion_reply);
      verdict.feedback_id = cell.record->feedback_id();
      verdict.criterion_id = cell.criterion->id;
      table.criterion_verdicts.push_back(std::move(verdict));
    } catch (const ParseError& e) {
      table.errors.push_back({cell.record->feedback_id(), "criterion",
                              cell.criterion->id, e.what()});
    }
  }

  return table;
}

std::map<Perspective, MetaEvalResult>
meta_eval_accuracy(const EvalTable& table,
                   const std::vector<model::AnnotationRecord>& annotations) {
  if (annotations.empty()) {
    throw EvalError("empty annotation set");
  }

  std::map<std::pair<std::string, Perspective>, const Verdict*> verdict_index;
  for (const Verdict& verdict : table.verdicts) {
    verdict_index[{verdict.feedback_id, verdict.perspective}] = &verdict;
  }
  std::map<std::pair<std::string, std::string>, const CriterionVerdict*>
      criterion_index;
  for (const CriterionVerdict& verdict : table.criterion_verdicts) {
    criterion_index[{verdict.feedback_id, verdict.criterion_id}] = &verdict;
  }

  auto vocabulary = [](Perspective perspective) -> std::vector<std::string> {
    switch (perspective) {
      case Perspective::validity: return {"specific", "not specific"};
      case Perspective::contextualization:
        return {"match", "not match", "unsure"};
      case Perspective::constructiveness: return {"yes", "no"};
      case Perspective::helpfulness: return {"helpful", "unhelpful"};
    }
    return {};
  };

  struct Tally {
    std::size_t total = 0;
    std::size_t agreed = 0;
    std::size_t matched = 0;
  };
  std::map<Perspective, Tally> tallies;

  for (const model::AnnotationRecord& annotation : annotations) {
    const std::string a = normalize_label(annotation.annotator_a);
    const std::string b = normalize_label(annotation.annotator_b);
    const std::vector<std::string> vocab = vocabulary(annotation.perspective);
    for (const std::string& label : {a, b}) {
      if (std::find(vocab.begin(), vocab.end(), label) == vocab.end()) {
        throw EvalError("annotation label \"" + label +
                        "\" outside the vocabulary of " +
                        model::to_string(annotation.perspective));
      }
    }

    std::string model_label;
    if (annotation.perspective == Perspective::validity ||
        annotation.perspective == Perspective::contextualization) {
      const auto it = verdict_index.find(
          {annotation.feedback_id, annotation.perspective});
      if (it == verdict_index.end()) {
        throw EvalError("annotation references feedback \"" +
                        annotation.feedback_id + "\" absent from the " +
                        model::to_string(annotation.perspective) + " table");
      }
      model_label = it->second->label;
    } else {
      if (!annotation.criterion_id) {
        throw EvalError(model::to_string(annotation.perspective) +
                        " annotation for \"" + annotation.feedback_id +
                        "\" requires a criterion_id");
      }
      const auto it = criterion_index.find(
          {annotation.feedback_id, *annotation.criterion_id});
      if (it == criterion_index.end()) {
        throw EvalError("annotation references criterion verdict \"" +
                        annotation.feedback_id + "/" +
                        *annotation.criterion_id + "\" absent from the table");
      }
      if (annotation.perspective == Perspective::constructiveness) {
        model_label = it->second->has_critique_or_suggestion ? "yes" : "no";
      } else {
        if (!it->second->helpful.has_value()) {
          throw EvalError("no model helpfulness label for \"" +
                          annotation.feedback_id + "/" +
                          *annotation.criterion_id +
                          "\" (no critique was found)");
        }
        model_label = *it->second->helpful ? "helpful" : "unhelpful";
      }
    }

    Tally& tally = tallies[annotation.perspective];
    ++tally.total;
    if (a == b) {
      ++tally.agreed;
      if (model_label == a) {
        ++tally.matched;
      }
    }
  }

  std::map<Perspective, MetaEvalResult> results;
  for (const auto& [perspective, tally] : tallies) {
    if (tally.agreed == 0) {
      throw EvalError("no agreed labels for " + model::to_string(perspective));
    }
    MetaEvalResult result;
    result.annotations = tally.total;
    result.agreed = tally.agreed;
    result.agreement_pct = 100.0 * static_cast<double>(tally.agreed) /
                           static_cast<double>(tally.total);
    result.accuracy_pct = 100.0 * static_cast<double>(tally.matched) /
                          static_cast<double>(tally.agreed);
    results[perspective] = result;
  }
  return results;
}

void save_eval_table(const EvalTable& table, const fs::path& file) {
  fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) {
    throw EvalError(file.string() + ": cannot open for writing");
  }
  auto digest_of = [](const std::string& raw_digest, const std::string& raw) {
    return raw_digest.empty() ? hash::sha256_hex(raw) : raw_digest;
  };
  for (const Verdict& verdict : table.verdicts) {
    json line{{"kind", model::to_string(verdict.perspective)},
              {"feedback_id", verdict.feedback_id},
              {"label", verdict.label},
              {"passed", verdict.passed_gate},
              {"raw_digest", digest_of(verdict.raw_digest, verdict.raw_reply)}};
    out << line.dump() << '\n';
  }
  for (const CriterionVerdict& verdict : table.criterion_verdicts) {
    json line{{"kind", "criterion"},
              {"feedback_id", verdict.feedback_id},
              {"criterion_id", verdict.criterion_id},
              {"extraction", verdict.extraction},
              {"critique", verdict.has_critique_or_suggestion},
              {"raw_digest", digest_of(verdict.raw_digest, verdict.raw_reply)}};
    if (verdict.helpful.has_value()) {
      line["helpful"] = *verdict.helpful;
    } else {
      line["helpful"] = nullptr;
    }
    out << line.dump() << '\n';
  }
  for (const VerdictError& error : table.errors) {
    json line{{"kind", "error"},
              {"feedback_id", error.feedback_id},
              {"stage", error.stage},
              {"message", error.message}};
    if (!error.criterion_id.empty()) {
      line["criterion_id"] = error.criterion_id;
    }
    out << line.dump() << '\n';
  }
}

EvalTable load_eval_table(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) {
    throw EvalError(file.string() + ": file not found");
  }
  EvalTable table;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw EvalError(file.string() + ":" + std::to_string(line_number) + ": " +
                      e.what());
    }
    const std::string kind = obj.at("kind").get<std::string>();
    if (kind == "validity" || kind == "contextualization") {
      Verdict verdict;
      verdict.feedback_id = obj.at("feedback_id").get<std::string>();
      verdict.perspective = model::parse_perspective(kind);
      verdict.label = obj.at("label").get<std::string>();
      verdict.passed_gate = obj.at("passed").get<bool>();
      verdict.raw_digest = obj.value("raw_digest", "");
      table.verdicts.push_back(std::move(verdict));
    } else if (kind == "criterion") {
      CriterionVerdict verdict;
      verdict.feedback_id = obj.at("feedback_id").get<std::string>();
      verdict.criterion_id = obj.at("criterion_id").get<std::string>();
      verdict.extraction = obj.value("extraction", "");
      verdict.has_critique_or_suggestion = obj.at("critique").get<bool>();
      if (obj.contains("helpful") && !obj["helpful"].is_null()) {
        verdict.helpful = obj["helpful"].get<bool>();
      }
      verdict.raw_digest = obj.value("raw_digest", "");
      table.criterion_verdicts.push_back(std::move(verdict));
    } else if (kind == "error") {
      VerdictError error;
      error.feedback_id = obj.at("feedback_id").get<std::string>();
      error.stage = obj.at("stage").get<std::string>();
      error.criterion_id = obj.value("criterion_id", "");
      error.message = obj.at("message").get<std::string>();
      table.errors.push_back(std::move(error));
    } else {
      throw EvalError(file.string() + ":" + std::to_string(line_number) +
                      ": unknown verdict kind \"" + kind + "\"");
    }
  }
  return table;
}

} // namespace critloop::eval
