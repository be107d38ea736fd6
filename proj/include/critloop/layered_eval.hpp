// Copyright (C) 2026 critloop authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "critloop/feedback_engine.hpp"
#include "critloop/llm_gateway.hpp"
#include "critloop/task_model.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace critloop::eval {

struct EvalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Trimmed content of the first <tag>...</tag> pair, matched
/// case-insensitively with whitespace tolerated inside the brackets.
/// A missing or unclosed tag is a gateway::ParseError, never an empty
/// success.
std::string parse_tagged_field(const std::string& reply,
                               const std::string& tag);

/// Lowercases, maps underscores to spaces, collapses whitespace runs.
std::string normalize_label(std::string_view label);

/// Gate verdict for one feedback text. Labels: validity uses
/// specific/not specific, contextualization match/not match/unsure.
struct Verdict {
  std::string feedback_id;
  model::Perspective perspective = model::Perspective::validity;
  std::string label;
  std::string raw_reply;
  std::string raw_digest; // populated on save/load
  bool passed_gate = false;
};

/// Joint constructiveness/helpfulness verdict for one (feedback,
/// criterion) pair. helpful is present iff a critique or suggestion was
/// found.
struct CriterionVerdict {
  std::string feedback_id;
  std::string criterion_id;
  std::string extraction;
  bool has_critique_or_suggestion = false;
  std::optional<bool> helpful;
  std::string raw_reply;
  std::string raw_digest;
};

/// A judge cell that could not be evaluated (recorded, not fatal).
struct VerdictError {
  std::string feedback_id;
  std::string stage; // validity | contextualization | criterion
  std::string criterion_id;
  std::string message;
};

struct EvalTable {
  std::string run_id;
  std::vector<Verdict> verdicts;
  std::vector<CriterionVerdict> criterion_verdicts;
  std::vector<VerdictError> errors;

  std::size_t unsure_count() const;
};

/// Rendered judge prompts (what the eval_* operations send).
std::string build_validity_prompt(const std::string& feedback_text,
                                  const model::TaskPack& pack);
std::string build_contextualization_prompt(const std::string& sample_text,
                                           const std::string& feedback_text,
                                           const model::TaskPack& pack);
std::string build_criterion_prompt(const std::string& sample_text,
                                   const std::string& feedback_text,
                                   const model::Criterion& criterion,
                                   const model::TaskPack& pack);

Verdict eval_validity(const std::string& feedback_text,
                      const model::TaskPack& pack, gateway::Endpoint judge);

Verdict eval_contextualization(const std::string& sample_text,
                               const std::string& feedback_text,
                               const model::TaskPack& pack,
                               gateway::Endpoint judge);

CriterionVerdict eval_criterion(const std::string& sample_text,
                                const std::string& feedback_text,
                                const model::Criterion& criterion,
                                const model::TaskPack& pack,
                                gateway::Endpoint judge);

/// Runs the gated cascade over every record: validity for all,
/// contextualization for specific ones, per-criterion verdicts for records
/// passing both gates (aspect scope for aspect records, the whole pack for
/// base records, the single criterion for single-criterion records).
/// Individual judge failures become VerdictError cells.
EvalTable run_layered_eval(const std::vector<feedback::FeedbackBundle>& bundles,
                           const model::TaskPack& pack,
                           gateway::Endpoint judge,
                           const std::string& run_id = {});

struct MetaEvalResult {
  double accuracy_pct = 0.0;
  double agreement_pct = 0.0;
  std::size_t annotations = 0;
  std::size_t agreed = 0;
};

/// Annotator agreement and judge accuracy per perspective. Accuracy counts
/// only rows where both annotators agreed.
std::map<model::Perspective, MetaEvalResult>
meta_eval_accuracy(const EvalTable& table,
                   const std::vector<model::AnnotationRecord>& annotations);

/// JSON-Lines persistence, one verdict (or error cell) per line, raw
/// replies stored as digests for audit.
void save_eval_table(const EvalTable& table,
                     const std::filesystem::path& file);
EvalTable load_eval_table(const std::filesystem::path& file);

} // namespace critloop::eval
