// Copyright (C) 2026 critloop authors
// SPDX-License-Identifier: Apache-2.0

#include "critloop/llm_gateway.hpp"

#include "critloop/hash.hpp"

#include <json.hpp>

#include <array>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

namespace critloop::gateway {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json canonical_chat(const ChatRequest& request) {
  return json{{"kind", "chat"},
              {"model", request.model_id},
              {"prompt", hash::normalize_newlines(request.prompt)},
              {"temperature", request.temperature},
              {"top_p", request.top_p},
              {"candidate_index", request.candidate_index},
              {"max_output_tokens", request.max_output_tokens}};
}

json canonical_embedding(const EmbeddingRequest& request) {
  json texts = json::array();
  for (const std::string& text : request.texts) {
    texts.push_back(hash::normalize_newlines(text));
  }
  return json{{"kind", "embedding"},
              {"model", request.model_id},
              {"texts", texts}};
}

fs::path entry_path(const fs::path& root, const std::string& key) {
  return root / key.substr(0, 2) / (key + ".json");
}

std::optional<json> read_entry(const fs::path& root, const std::string& key) {
  const fs::path file = entry_path(root, key);
  std::ifstream in(file, std::ios::binary);
  if (!in) {
    return std::nullopt;
  }
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw GatewayError(file.string() + ": corrupt cache entry: " + e.what());
  }
}

void write_entry(const fs::path& root, const std::string& key,
                 const json& request, const json& response) {
  const fs::path file = entry_path(root, key);
  fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) {
    throw GatewayError(file.string() + ": cannot write cache entry");
  }
  out << json{{"request", request}, {"response", response}}.dump(2) << '\n';
}

ChatResponse response_from_json(const json& obj, bool from_cache) {
  ChatResponse response;
  response.text = obj.at("text").get<std::string>();
  response.finish_reason =
      parse_finish_reason(obj.value("finish_reason", "complete"));
  response.from_cache = from_cache;
  return response;
}

json response_to_json(const ChatResponse& response) {
  return json{{"text", response.text},
              {"finish_reason", to_string(response.finish_reason)}};
}

// Stable small hash used by the scripted provider to pick reply shapes.
unsigned bucket(const std::string& key, const char* salt, unsigned mod) {
  const std::string digest = hash::sha256_hex(key + ":" + salt);
  return static_cast<unsigned>(
             std::stoul(digest.substr(0, 6), nullptr, 16)) %
         mod;
}

} // namespace

std::string to_string(FinishReason reason) {
  switch (reason) {
    case FinishReason::complete: return "complete";
    case FinishReason::truncated: return "truncated";
    case FinishReason::refused: return "refused";
  }
  return "complete";
}

FinishReason parse_finish_reason(std::string_view text) {
  if (text == "complete") return FinishReason::complete;
  if (text == "truncated") return FinishReason::truncated;
  if (text == "refused") return FinishReason::refused;
  throw GatewayError("unknown finish reason \"" + std::string(text) + "\"");
}

std::string cache_key(const ChatRequest& request) {
  return hash::sha256_hex(canonical_chat(request).dump());
}

std::string cache_key(const EmbeddingRequest& request) {
  return hash::sha256_hex(canonical_embedding(request).dump());
}

// --- MockProvider ---------------------------------------------------------

MockProvider::MockProvider(fs::path fixtures_dir)
    : fixtures_dir_(std::move(fixtures_dir)) {
  if (!fs::exists(fixtures_dir_)) {
    throw GatewayError("mock fixtures directory not found: " +
                       fixtures_dir_.string());
  }
}

ChatResponse MockProvider::complete(const ChatRequest& request) {
  const std::string key = cache_key(request);
  const std::optional<json> entry = read_entry(fixtures_dir_, key);
  if (!entry) {
    throw GatewayError("unrecorded request " + key + " (model " +
                       request.model_id + ")");
  }
  return response_from_json(entry->at("response"), /*from_cache=*/true);
}

std::vector<double> MockProvider::embed(const EmbeddingRequest& request) {
  const std::string key = cache_key(request);
  const std::optional<json> entry = read_entry(fixtures_dir_, key);
  if (!entry) {
    throw GatewayError("unrecorded request " + key + " (model " +
                       request.model_id + ")");
  }
  return entry->at("response").at("vector").get<std::vector<double>>();
}

// --- ScriptedProvider ------------------------------------------------------

ChatResponse ScriptedProvider::complete(const ChatRequest& request) {
  const std::string key = cache_key(request);
  const std::string ref = key.substr(0, 8);
  const std::string& prompt = request.prompt;
  auto has = [&prompt](std::string_view needle) {
    return prompt.find(needle) != std::string::npos;
  };

  std::string text;
  if (has("<negative_critique_or_suggestion>")) {
    if (bucket(key, "crit", 100) < 60) {
      const bool helpful = bucket(key, "help", 100) < 72;
      text = "<thinking>Searched the feedback for critique tied to this "
             "criterion (ref " + ref + ").</thinking>\n\n"
             "<extraction>The feedback presses the draft to justify its main "
             "point more concretely.</extraction>\n\n"
             "<negative_critique_or_suggestion>yes"
             "</negative_critique_or_suggestion>\n\n"
             "<helpfulness>" + std::string(helpful ? "helpful" : "unhelpful") +
             "</helpfulness>";
    } else {
      text = "<thinking>Found no critique or suggestion for this criterion "
             "(ref " + ref + ").</thinking>\n\n"
             "<extraction></extraction>\n\n"
             "<negative_critique_or_suggestion>no"
             "</negative_critique_or_suggestion>\n\n"
             "<helpfulness>unhelpful</helpfulness>";
    }
  } else if (has("match determination")) {
    const unsigned roll = bucket(key, "ctx", 100);
    const char* answer = roll < 80 ? "match" : roll < 90 ? "not match" : "unsure";
    text = "<thinking>Checked whether the comments track this particular "
           "draft (ref " + ref + ").</thinking>\n\n"
           "<answer>" + std::string(answer) + "</answer>";
  } else if (has("\"not specific\"")) {
    const char* answer =
        bucket(key, "val", 100) < 88 ? "specific" : "not specific";
    text = "<thinking>Compared the feedback against the draft it claims to "
           "describe (ref " + ref + ").</thinking>\n\n"
           "<answer>" + std::string(answer) + "</answer>";
  } else if (has("atomic criteria")) {
    text = "1. **Clear Motivation**: Does the text explain why its subject "
           "matters to the intended reader?\n"
           "2. **Scoped Claims**: Does every stated claim stay within what "
           "the text actually supports?\n"
           "3. **Defined Terms**: Is every specialist term introduced before "
           "it is used?";
  } else if (has("# Modified")) {
    text = "Here is the modified version (ref " + ref + ").\n\n"
           "The revised text deliberately adjusts the flagged points while "
           "keeping the remaining structure intact.";
  } else if (has("[Begin Example Feedback]") || has("# You should give feedback") ||
             has("# Your Feedback")) {
    static constexpr std::array<std::string_view, 5> kAngles = {
        "tighten the opening so the main point lands earlier",
        "state the motivation before diving into details",
        "tie the closing statement back to concrete evidence",
        "name the intended audience explicitly",
        "trim the repetition in the middle section"};
    const std::string_view angle =
        kAngles[bucket(key, "angle", kAngles.size())];
    text = "The draft covers its subject but leaves gaps. It asserts its "
           "main point without support, so you should " + std::string(angle) +
           ". Several passages would read better after that change "
           "(candidate " + std::to_string(request.candidate_index) + ", ref " +
           ref + ").";
  } else {
    text = "ok (ref " + ref + ")";
  }

  return ChatResponse{std::move(text), FinishReason::complete,
                      /*from_cache=*/false};
}

std::vector<double> ScriptedProvider::embed(const EmbeddingRequest& request) {
  if (request.texts.size() != 1) {
    throw GatewayError("scripted embedder expects one text per request");
  }
  const std::string digest =
      hash::sha256_hex(request.model_id + "\x1f" +
                       hash::normalize_newlines(request.texts.front()));
  std::vector<double> vec;
  vec.reserve(8);
  for (int i = 0; i < 8; ++i) {
    const unsigned byte =
        static_cast<unsigned>(std::stoul(digest.substr(i * 2, 2), nullptr, 16));
    vec.push_back((static_cast<double>(byte) - 127.5) / 127.5);
  }
  return vec;
}

// --- OpenAiProvider ---------------------------------------------------------

OpenAiProvider::OpenAiProvider() {
  const char* base = std::getenv("CRITLOOP_OPENAI_BASE_URL");
  base_url_ = base != nullptr ? base : "https://api.openai.com";
  const char* key = std::getenv("CRITLOOP_OPENAI_API_KEY");
  if (key == nullptr || *key == '\0') {
    throw GatewayError("CRITLOOP_OPENAI_API_KEY is not set");
  }
  api_key_ = key;
}

// --- Gateway ----------------------------------------------------------------

Gateway::Gateway(std::shared_ptr<Provider> provider, GatewayConfig config)
    : provider_(std::move(provider)), config_(std::move(config)) {
  if (config_.offline && provider_->is_network()) {
    throw GatewayError("provider \"" + provider_->id() +
                       "\" performs network calls, forbidden in offline mode");
  }
  if (config_.max_in_flight < 1) {
    config_.max_in_flight = 1;
  }
}

std::vector<std::vector<double>>
Gateway::embed(const std::vector<std::string>& texts,
               const std::string& model_id) {
  if (texts.empty()) {
    throw GatewayError("embed requires a non-empty text list");
  }
  std::vector<std::vector<double>> vectors;
  vectors.reserve(texts.size());
  for (const std::string& text : texts) {
    embed_requests_.fetch_add(1);
    EmbeddingRequest request{provider_->id(), model_id, {text}};
    const std::string key = cache_key(request);

    if (config_.cache_dir) {
      std::lock_guard<std::mutex> lock(cache_mutex_);
      const std::optional<json> entry = read_entry(*config_.cache_dir, key);
      if (entry) {
        embed_cache_hits_.fetch_add(1);
        vectors.push_back(
            entry->at("response").at("vector").get<std::vector<double>>());
        continue;
      }
    }

    provider_embed_calls_.fetch_add(1);
    std::vector<double> vec;
    int attempt = 0;
    while (true) {
      ++attempt;
      try {
        vec = provider_->embed(request);
        break;
      } catch (const GatewayError& e) {
        if (!e.transient || attempt >= config_.max_attempts) {
          throw;
        }
        std::this_thread::sleep_for(
            std::chrono::milliseconds(200LL << (attempt - 1)));
      }
    }
    if (vec.empty()) {
      throw GatewayError("embedder returned an empty vector");
    }

    if (config_.cache_dir) {
      std::lock_guard<std::mutex> lock(cache_mutex_);
      write_entry(*config_.cache_dir, key, canonical_embedding(request),
                  json{{"vector", vec}});
    }
    vectors.push_back(std::move(vec));
  }

  const std::size_t dimension = vectors.front().size();
  for (const auto& vec : vectors) {
    if (vec.size() != dimension) {
      throw GatewayError("embedding dimension mismatch within batch: " +
                         std::to_string(vec.size()) + " vs " +
                         std::to_string(dimension));
    }
  }
  return vectors;
}

ChatResponse Gateway::call_with_retries(const ChatRequest& request) {
  int attempt = 0;
  while (true) {
    ++attempt;
    try {
      provider_chat_calls_.fetch_add(1);
      return provider_->complete(request);
    } catch (const GatewayError& e) {
      if (!e.transient || attempt >= config_.max_attempts) {
        throw;
      }
      // Exponential backoff with jitter.
      thread_local std::minstd_rand jitter_rng{std::random_device{}()};
      const long long jitter = static_cast<long long>(jitter_rng() % 100);
      std::this_thread::sleep_for(
          std::chrono::milliseconds((200LL << (attempt - 1)) + jitter));
    }
  }
}

ChatResponse Gateway::complete_impl(const ChatRequest& request,
                                    bool use_cache) {
  if (request.prompt.empty()) {
    throw GatewayError("chat request has an empty prompt");
  }
  if (request.candidate_index < 0) {
    throw GatewayError("candidate_index must be >= 0");
  }
  chat_requests_.fetch_add(1);
  const std::string key = cache_key(request);

  if (use_cache && config_.cache_dir) {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    const std::optional<json> entry = read_entry(*config_.cache_dir, key);
    if (entry) {
      chat_cache_hits_.fetch_add(1);
      return response_from_json(entry->at("response"), /*from_cache=*/true);
    }
  }

  ChatResponse response = call_with_retries(request);
  if (response.finish_reason == FinishReason::complete &&
      response.text.empty()) {
    throw GatewayError("provider returned an empty completion");
  }

  if (use_cache && config_.cache_dir) {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    write_entry(*config_.cache_dir, key, canonical_chat(request),
                response_to_json(response));
  }
  return response;
}

ChatResponse Gateway::complete(const ChatRequest& request) {
  return complete_impl(request, /*use_cache=*/true);
}

ChatResponse Gateway::complete_nocache(const ChatRequest& request) {
  return complete_impl(request, /*use_cache=*/false);
}

std::vector<BatchOutcome>
Gateway::complete_batch_outcomes(std::span<const ChatRequest> requests) {
  std::vector<BatchOutcome> outcomes(requests.size());
  if (requests.empty()) {
    return outcomes;
  }
  const std::size_t workers =
      std::min<std::size_t>(requests.size(),
                            static_cast<std::size_t>(config_.max_in_flight));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= requests.size()) {
        return;
      }
      try {
        outcomes[i].response = complete(requests[i]);
      } catch (const std::exception& e) {
        outcomes[i].error = e.what();
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back(worker);
    }
    for (std::thread& t : pool) {
      t.join();
    }
  }
  return outcomes;
}

std::vector<ChatResponse>
Gateway::complete_batch(std::span<const ChatRequest> requests) {
  std::vector<BatchOutcome> outcomes = complete_batch_outcomes(requests);
  std::vector<ChatResponse> responses;
  responses.reserve(outcomes.size());
  for (BatchOutcome& outcome : outcomes) {
    if (!outcome.ok()) {
      throw GatewayError(outcome.error);
    }
    responses.push_back(std::move(*outcome.response));
  }
  return responses;
}

GatewayStats Gateway::stats() const {
  GatewayStats stats;
  stats.chat_requests = chat_requests_.load();
  stats.chat_cache_hits = chat_cache_hits_.load();
  stats.provider_chat_calls = provider_chat_calls_.load();
  stats.embed_requests = embed_requests_.load();
  stats.embed_cache_hits = embed_cache_hits_.load();
  stats.provider_embed_calls = provider_embed_calls_.load();
  return stats;
}

std::shared_ptr<Provider>
make_provider(const std::string& provider_id,
              const std::optional<fs::path>& fixtures_dir, bool offline) {
  if (provider_id == "mock") {
    if (!fixtures_dir) {
      throw GatewayError("mock provider requires a fixtures directory");
    }
    return std::make_shared<MockProvider>(*fixtures_dir);
  }
  if (provider_id == "scripted") {
    return std::make_shared<ScriptedProvider>();
  }
  if (provider_id == "openai") {
    if (offline) {
      throw GatewayError("openai provider is forbidden in offline mode");
    }
    return std::make_shared<OpenAiProvider>();
  }
  throw GatewayError("unknown provider \"" + provider_id + "\"");
}

} // namespace critloop::gateway
