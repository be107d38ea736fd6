// Copyright (C) 2026 critloop authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "critloop/layered_eval.hpp"
#include "critloop/llm_gateway.hpp"
#include "critloop/metrics_report.hpp"
#include "critloop/task_model.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace critloop::pipeline {

struct PipelineError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// "provider" or "provider:model" (e.g. "mock:scripted-v1").
model::ProviderRef parse_provider_spec(const std::string& text,
                                       const std::string& default_model);

/// Default model id for a provider role.
std::string default_chat_model(const std::string& provider);
std::string default_embed_model();

struct RunConfig {
  std::filesystem::path pack_dir;
  std::filesystem::path runs_dir;
  std::string run_id;
  model::ProviderRef generator{"scripted", "scripted-v1"};
  model::ProviderRef embedder{"scripted", "embed-english-v2.0"};
  model::ProviderRef judge{"scripted", "scripted-v1"};
  std::optional<std::filesystem::path> fixtures_dir; // mock replay source
  std::optional<std::filesystem::path> cache_dir;    // write-through cache
  std::uint64_t seed = 0;
  std::string created_at; // empty = current UTC time
  bool offline = false;
  int max_in_flight = 4;

  std::filesystem::path run_dir() const { return runs_dir / run_id; }
};

/// Gateways for the three provider roles of a run.
struct RunServices {
  std::unique_ptr<gateway::Gateway> generator;
  std::unique_ptr<gateway::Gateway> embedder;
  std::unique_ptr<gateway::Gateway> judge;
  model::ProviderRef generator_ref;
  model::ProviderRef embedder_ref;
  model::ProviderRef judge_ref;
};

RunServices make_services(const RunConfig& config);

std::string now_utc_iso8601();

/// Generates feedback for every test sample under one strategy/granularity
/// and appends the records to <run>/feedback.jsonl. Creates or extends the
/// run manifest; re-running an already recorded generation is an error.
void generate_run(const RunConfig& config, model::Strategy strategy,
                  model::Granularity granularity);

/// Runs the layered judge cascade over the run's feedback records and
/// writes <run>/verdicts.jsonl.
void evaluate_run(const RunConfig& config);

/// Renders <run>/report.md and <run>/report.csv from the verdict table,
/// one column per generated strategy slice. When both crit granularities
/// are present a batch-minus-single section is appended.
void report_run(const RunConfig& config);

/// Meta-evaluates the judge against human annotations and writes
/// <run>/meta_eval.json.
std::map<model::Perspective, eval::MetaEvalResult>
meta_eval_run(const RunConfig& config,
              const std::filesystem::path& annotations_file);

/// Runs generate (for each entry) + evaluate + report with the cache
/// directed at a fixture store, capturing every provider response for
/// later mock replay.
void record_fixture_run(const RunConfig& config,
                        const std::vector<model::GenerationEntry>& entries);

} // namespace critloop::pipeline
