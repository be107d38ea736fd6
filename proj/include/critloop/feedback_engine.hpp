// Copyright (C) 2026 critloop authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "critloop/llm_gateway.hpp"
#include "critloop/task_model.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace critloop::feedback {

struct FeedbackError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One generated feedback text with its candidate set and selection
/// metadata. scope_id is an aspect id, a criterion id, or "whole" for the
/// base strategy.
struct FeedbackRecord {
  std::string sample_id;
  model::Strategy strategy = model::Strategy::base;
  model::Granularity granularity = model::Granularity::aspect_batch;
  std::string scope_id;
  std::vector<std::string> candidates;
  std::size_t selected_index = 0;
  std::string selected_text;
  std::string prompt_digest;
  bool truncated = false; // any candidate cut off provider-side

  /// Stable key used by verdict tables: sample/strategy/scope.
  std::string feedback_id() const;
};

struct FeedbackBundle {
  std::string sample_id;
  std::vector<FeedbackRecord> records;
};

/// Samples n candidates for one prompt (candidate_index 0..n-1), returned
/// in index order. Sets *truncated when any candidate was cut off.
std::vector<std::string> generate_candidates(const std::string& prompt,
                                             const model::SamplingConfig& config,
                                             gateway::Endpoint generator,
                                             bool* truncated = nullptr);

/// Index of the candidate whose mean cosine similarity to all other
/// candidates is highest; ties resolve to the lowest index. Errors on a
/// zero-norm embedding.
std::size_t
most_consistent_index(const std::vector<std::vector<double>>& embeddings);

/// Embeds the candidates (trimmed of surrounding whitespace) and picks the
/// most self-consistent one. A single candidate wins without embedding.
std::size_t select_self_consistent(const std::vector<std::string>& candidates,
                                   gateway::Endpoint embedder);

/// Generates one bundle for a sample: 1 record for base, one per aspect
/// for aspect granularity, one per criterion for single-criterion
/// granularity (crit strategy only).
FeedbackBundle generate_feedback(const model::TestSample& sample,
                                 model::Strategy strategy,
                                 model::Granularity granularity,
                                 const model::TaskPack& pack,
                                 gateway::Endpoint generator,
                                 gateway::Endpoint embedder);

/// JSON-Lines persistence, one FeedbackRecord per line.
void append_feedback_records(const std::filesystem::path& file,
                             const std::vector<FeedbackBundle>& bundles);
std::vector<FeedbackRecord>
load_feedback_records(const std::filesystem::path& file);

} // namespace critloop::feedback
