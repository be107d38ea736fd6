// Copyright (C) 2026 critloop authors
// SPDX-License-Identifier: Apache-2.0

#include "critloop/feedback_engine.hpp"

#include "critloop/hash.hpp"
#include "critloop/prompt_assembly.hpp"

#include <json.hpp>

#include <cctype>
#include <cmath>
#include <fstream>

namespace critloop::feedback {

using gateway::ChatRequest;
using gateway::Endpoint;
using model::Granularity;
using model::SamplingConfig;
using model::Strategy;
using model::TaskPack;
using model::TestSample;

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void fail(const std::string& message) {
  throw FeedbackError(message);
}

std::string trim_copy(const std::string& text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) {
    ++begin;
  }
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) {
    --end;
  }
  return text.substr(begin, end - begin);
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0;
  double norm_a = 0.0;
  double norm_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    norm_a += a[i] * a[i];
    norm_b += b[i] * b[i];
  }
  if (norm_a == 0.0 || norm_b == 0.0) {
    fail("cosine undefined for zero-norm embedding");
  }
  return dot / (std::sqrt(norm_a) * std::sqrt(norm_b));
}

FeedbackRecord make_record(const TestSample& sample, Strategy strategy,
                           Granularity granularity, std::string scope_id,
                           const std::string& prompt,
                           const SamplingConfig& config, Endpoint generator,
                           Endpoint embedder) {
  FeedbackRecord record;
  record.sample_id = sample.id;
  record.strategy = strategy;
  record.granularity = granularity;
  record.scope_id = std::move(scope_id);
  record.prompt_digest = hash::sha256_hex(hash::normalize_newlines(prompt));

  try {
    record.candidates =
        generate_candidates(prompt, config, generator, &record.truncated);
    record.selected_index = select_self_consistent(record.candidates, embedder);
  } catch (const std::exception& e) {
    fail("scope \"" + record.scope_id + "\" of sample \"" + sample.id +
         "\": " + e.what());
  }
  record.selected_text = record.candidates[record.selected_index];
  return record;
}

} // namespace

std::string FeedbackRecord::feedback_id() const {
  return sample_id + "/" + model::to_string(strategy) + "/" + scope_id;
}

std::vector<std::string> generate_candidates(const std::string& prompt,
                                             const SamplingConfig& config,
                                             Endpoint generator,
                                             bool* truncated) {
  if (prompt.empty()) {
    fail("candidate generation requires a non-empty prompt");
  }
  if (config.num_candidates < 1) {
    fail("num_candidates must be >= 1");
  }

  std::vector<ChatRequest> requests;
  requests.reserve(static_cast<std::size_t>(config.num_candidates));
  for (int i = 0; i < config.num_candidates; ++i) {
    ChatRequest request;
    request.provider_id = generator.gateway.provider().id();
    request.model_id = generator.model;
    request.prompt = prompt;
    request.temperature = config.temperature;
    request.top_p = config.top_p;
    request.candidate_index = i;
    requests.push_back(std::move(request));
  }

  const std::vector<gateway::ChatResponse> responses =
      generator.gateway.complete_batch(requests);
  std::vector<std::string> texts;
  texts.reserve(responses.size());
  bool any_truncated = false;
  for (const gateway::ChatResponse& response : responses) {
    any_truncated = any_truncated ||
                    response.finish_reason == gateway::FinishReason::truncated;
    texts.push_back(response.text);
  }
  if (truncated != nullptr) {
    *truncated = any_truncated;
  }
  return texts;
}

std::size_t
most_consistent_index(const std::vector<std::vector<double>>& embeddings) {
  if (embeddings.empty()) {
    fail("selection requires at least one candidate");
  }
  if (embeddings.size() == 1) {
    return 0;
  }
  std::size_t best = 0;
  double best_score = -2.0;
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < embeddings.size(); ++j) {
      if (j != i) {
        sum += cosine(embeddings[i], embeddings[j]);
      }
    }
    const double score =
        sum / static_cast<double>(embeddings.size() - 1);
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  return best;
}

std::size_t select_self_consistent(const std::vector<std::string>& candidates,
                                   Endpoint embedder) {
  if (candidates.empty()) {
    fail("selection requires at least one candidate");
  }
  if (candidates.size() == 1) {
    return 0;
  }
  std::vector<std::string> trimmed;
  trimmed.reserve(candidates.size());
  for (const std::string& candidate : candidates) {
    trimmed.push_back(trim_copy(candidate));
  }
  const std::vector<std::vector<double>> embeddings =
      embedder.gateway.embed(trimmed, embedder.model);
  return most_consistent_index(embeddings);
}

FeedbackBundle generate_feedback(const TestSample& sample, Strategy strategy,
                                 Granularity granularity, const TaskPack& pack,
                                 Endpoint generator, Endpoint embedder) {
  if (granularity == Granularity::single_criterion &&
      strategy != Strategy::crit) {
    fail("single-criterion granularity is only defined for the crit strategy");
  }

  FeedbackBundle bundle;
  bundle.sample_id = sample.id;
  const SamplingConfig& config = pack.sampling;

  if (strategy == Strategy::base) {
    const std::string prompt =
        prompts::assemble_strategy_prompt(strategy, sample, nullptr, pack);
    bundle.records.push_back(make_record(sample, strategy, granularity,
                                         "whole", prompt, config, generator,
                                         embedder));
    return bundle;
  }

  for (const model::Aspect& aspect : pack.aspects) {
    if (granularity == Granularity::aspect_batch) {
      const std::string prompt =
          prompts::assemble_strategy_prompt(strategy, sample, &aspect, pack);
      bundle.records.push_back(make_record(sample, strategy, granularity,
                                           aspect.id, prompt, config,
                                           generator, embedder));
    } else {
      for (const model::Criterion& criterion : aspect.criteria) {
        const std::string prompt = prompts::assemble_strategy_prompt(
            strategy, sample, &aspect, pack, &criterion);
        bundle.records.push_back(make_record(sample, strategy, granularity,
                                             criterion.id, prompt, config,
                                             generator, embedder));
      }
    }
  }
  return bundle;
}

void append_feedback_records(const fs::path& file,
                             const std::vector<FeedbackBundle>& bundles) {
  fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary | std::ios::app);
  if (!out) {
    fail(file.string() + ": cannot open for writing");
  }
  for (const FeedbackBundle& bundle : bundles) {
    for (const FeedbackRecord& record : bundle.records) {
      json line{{"sample_id", record.sample_id},
                {"strategy", model::to_string(record.strategy)},
                {"granularity", model::to_string(record.granularity)},
                {"scope_id", record.scope_id},
                {"candidates", record.candidates},
                {"selected_index", record.selected_index},
                {"selected_text", record.selected_text},
                {"prompt_digest", record.prompt_digest},
                {"truncated", record.truncated}};
      out << line.dump() << '\n';
    }
  }
}

std::vector<FeedbackRecord> load_feedback_records(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) {
    fail(file.string() + ": file not found");
  }
  std::vector<FeedbackRecord> records;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(file.string() + ":" + std::to_string(line_number) + ": " + e.what());
    }
    FeedbackRecord record;
    record.sample_id = obj.at("sample_id").get<std::string>();
    record.strategy = model::parse_strategy(obj.at("strategy").get<std::string>());
    record.granularity =
        model::parse_granularity(obj.at("granularity").get<std::string>());
    record.scope_id = obj.at("scope_id").get<std::string>();
    record.candidates = obj.at("candidates").get<std::vector<std::string>>();
    record.selected_index = obj.at("selected_index").get<std::size_t>();
    record.selected_text = obj.at("selected_text").get<std::string>();
    record.prompt_digest = obj.at("prompt_digest").get<std::string>();
    record.truncated = obj.value("truncated", false);
    if (record.selected_index >= record.candidates.size() ||
        record.selected_text != record.candidates[record.selected_index]) {
      fail(file.string() + ":" + std::to_string(line_number) +
           ": selected_text does not match candidates[selected_index]");
    }
    records.push_back(std::move(record));
  }
  return records;
}

} // namespace critloop::feedback
