// Copyright (C) 2026 critloop authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace critloop::gateway {

/// Provider or transport failure. `transient` failures are retried with
/// exponential backoff; everything else (missing fixture, bad credentials
/// configuration, malformed provider output) fails immediately.
struct GatewayError : std::runtime_error {
  explicit GatewayError(const std::string& message, bool transient_ = false)
      : std::runtime_error(message), transient(transient_) {}
  bool transient;
};

enum class FinishReason { complete, truncated, refused };

std::string to_string(FinishReason reason);
FinishReason parse_finish_reason(std::string_view text);

inline constexpr int kDefaultMaxOutputTokens = 2048;

struct ChatRequest {
  std::string provider_id;
  std::string model_id;
  std::string prompt;
  double temperature = 0.0;
  double top_p = 1.0;
  int candidate_index = 0; // distinguishes the n samples of one prompt
  int max_output_tokens = kDefaultMaxOutputTokens;
};

struct ChatResponse {
  std::string text;
  FinishReason finish_reason = FinishReason::complete;
  bool from_cache = false;
};

struct EmbeddingRequest {
  std::string provider_id;
  std::string model_id;
  std::vector<std::string> texts;
};

/// Content digest of the canonicalized request: stable field order,
/// line endings normalized to LF. The provider id is routing, not content,
/// and is excluded so recorded live runs replay through the mock provider.
std::string cache_key(const ChatRequest& request);
std::string cache_key(const EmbeddingRequest& request);

class Provider {
public:
  virtual ~Provider() = default;
  virtual std::string id() const = 0;
  /// True when calls leave the machine (forbidden under --offline).
  virtual bool is_network() const { return false; }
  virtual ChatResponse complete(const ChatRequest& request) = 0;
  /// Embeds a single-text request.
  virtual std::vector<double> embed(const EmbeddingRequest& request) = 0;
};

/// Replays recorded responses from a content-addressed fixture directory
/// (same layout as the gateway cache). A request with no recorded fixture
/// is a hard error — the mock never fabricates output.
class MockProvider : public Provider {
public:
  explicit MockProvider(std::filesystem::path fixtures_dir);
  std::string id() const override { return "mock"; }
  ChatResponse complete(const ChatRequest& request) override;
  std::vector<double> embed(const EmbeddingRequest& request) override;

private:
  std::filesystem::path fixtures_dir_;
};

/// Deterministic offline stand-in for a real model: replies are synthesized
/// from the request digest and shaped by what the prompt asks for, so whole
/// pipeline runs work without credentials and can be recorded into fixture
/// sets with `record-fixtures`.
class ScriptedProvider : public Provider {
public:
  std::string id() const override { return "scripted"; }
  ChatResponse complete(const ChatRequest& request) override;
  std::vector<double> embed(const EmbeddingRequest& request) override;
};

/// OpenAI-compatible chat/embeddings HTTP provider. Reads the API key from
/// CRITLOOP_OPENAI_API_KEY and the endpoint from CRITLOOP_OPENAI_BASE_URL
/// (default https://api.openai.com; TLS requires an OpenSSL-enabled build).
class OpenAiProvider : public Provider {
public:
  OpenAiProvider();
  std::string id() const override { return "openai"; }
  bool is_network() const override { return true; }
  ChatResponse complete(const ChatRequest& request) override;
  std::vector<double> embed(const EmbeddingRequest& request) override;

private:
  std::string base_url_;
  std::string api_key_;
};

struct GatewayConfig {
  std::optional<std::filesystem::path> cache_dir;
  int max_in_flight = 4;
  int max_attempts = 3;
  bool offline = false;
};

struct GatewayStats {
  std::uint64_t chat_requests = 0;
  std::uint64_t chat_cache_hits = 0;
  std::uint64_t provider_chat_calls = 0;
  std::uint64_t embed_requests = 0;
  std::uint64_t embed_cache_hits = 0;
  std::uint64_t provider_embed_calls = 0;
};

struct BatchOutcome {
  std::optional<ChatResponse> response;
  std::string error;

  bool ok() const { return response.has_value(); }
};

/// Uniform access to one provider with write-through content-addressed
/// caching and bounded-concurrency fan-out. Batch results always come back
/// in request order.
class Gateway {
public:
  Gateway(std::shared_ptr<Provider> provider, GatewayConfig config);

  ChatResponse complete(const ChatRequest& request);
  /// Skips cache lookup and storage (used for the one bounded re-issue on
  /// unparseable judge output).
  ChatResponse complete_nocache(const ChatRequest& request);

  /// Fans out up to max_in_flight calls; throws the first failure by
  /// request order.
  std::vector<ChatResponse> complete_batch(std::span<const ChatRequest> requests);
  /// Like complete_batch but reports per-request outcomes instead of
  /// throwing.
  std::vector<BatchOutcome> complete_batch_outcomes(std::span<const ChatRequest> requests);

  /// One vector per text, order preserved, cached per text. Rejects an
  /// empty input and dimension mismatches within the batch.
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts,
                                         const std::string& model_id);

  GatewayStats stats() const;
  Provider& provider() { return *provider_; }

private:
  ChatResponse complete_impl(const ChatRequest& request, bool use_cache);
  ChatResponse call_with_retries(const ChatRequest& request);

  std::shared_ptr<Provider> provider_;
  GatewayConfig config_;
  mutable std::mutex cache_mutex_;
  std::atomic<std::uint64_t> chat_requests_{0};
  std::atomic<std::uint64_t> chat_cache_hits_{0};
  std::atomic<std::uint64_t> provider_chat_calls_{0};
  std::atomic<std::uint64_t> embed_requests_{0};
  std::atomic<std::uint64_t> embed_cache_hits_{0};
  std::atomic<std::uint64_t> provider_embed_calls_{0};
};

/// Builds a provider from its id ("mock", "scripted", "openai"). The mock
/// requires a fixtures directory.
std::shared_ptr<Provider>
make_provider(const std::string& provider_id,
              const std::optional<std::filesystem::path>& fixtures_dir,
              bool offline);

/// A model reply that could not be parsed into the expected shape. Carries
/// the raw reply for diagnosis; parsing never falls back to a default.
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& message, std::string raw = {})
      : std::runtime_error(message), raw_reply(std::move(raw)) {}
  std::string raw_reply;
};

/// Gateway with the model id requests should carry.
struct Endpoint {
  Gateway& gateway;
  std::string model;
};

/// Completes `request` and parses the reply. On a ParseError the request is
/// re-issued once at temperature 0.3 bypassing the cache; a second parse
/// failure (or a failed re-issue) propagates as ParseError.
template <typename ParseFn>
auto complete_with_repair(Gateway& gateway, ChatRequest request,
                          ParseFn&& parse) {
  const ChatResponse first = gateway.complete(request);
  try {
    return parse(first.text);
  } catch (const ParseError& original) {
    request.temperature = 0.3;
    ChatResponse second;
    try {
      second = gateway.complete_nocache(request);
    } catch (const std::exception& reissue) {
      throw ParseError(std::string(original.what()) +
                           " (re-issue failed: " + reissue.what() + ")",
                       first.text);
    }
    return parse(second.text);
  }
}

} // namespace critloop::gateway
