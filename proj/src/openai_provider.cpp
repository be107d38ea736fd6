// Copyright (C) 2026 critloop authors
// SPDX-License-Identifier: Apache-2.0

#include "critloop/llm_gateway.hpp"

#include <httplib.h>
#include <json.hpp>

namespace critloop::gateway {

using nlohmann::json;

namespace {

// The API key never appears in error messages.
json post_json(const std::string& base_url, const std::string& api_key,
               const std::string& path, const json& body) {
  httplib::Client client(base_url);
  client.set_connection_timeout(30);
  client.set_read_timeout(120);
  httplib::Headers headers{{"Authorization", "Bearer " + api_key}};
  auto result =
      client.Post(path, headers, body.dump(), "application/json");
  if (!result) {
    throw GatewayError("openai: transport failure: " +
                           httplib::to_string(result.error()),
                       /*transient=*/true);
  }
  if (result->status == 429 || result->status >= 500) {
    throw GatewayError("openai: HTTP " + std::to_string(result->status),
                       /*transient=*/true);
  }
  if (result->status != 200) {
    throw GatewayError("openai: HTTP " + std::to_string(result->status) +
                       ": " + result->body);
  }
  try {
    return json::parse(result->body);
  } catch (const json::parse_error& e) {
    throw GatewayError(std::string("openai: malformed response: ") + e.what());
  }
}

FinishReason map_finish_reason(const std::string& reason) {
  if (reason == "length") return FinishReason::truncated;
  if (reason == "content_filter") return FinishReason::refused;
  return FinishReason::complete;
}

} // namespace

ChatResponse OpenAiProvider::complete(const ChatRequest& request) {
  const json body{{"model", request.model_id},
                  {"messages", json::array({json{{"role", "user"},
                                                 {"content", request.prompt}}})},
                  {"temperature", request.temperature},
                  {"top_p", request.top_p},
                  {"max_tokens", request.max_output_tokens}};
  const json reply =
      post_json(base_url_, api_key_, "/v1/chat/completions", body);
  try {
    const json& choice = reply.at("choices").at(0);
    ChatResponse response;
    response.text = choice.at("message").at("content").get<std::string>();
    response.finish_reason =
        map_finish_reason(choice.value("finish_reason", "stop"));
    return response;
  } catch (const json::exception& e) {
    throw GatewayError(std::string("openai: unexpected completion shape: ") +
                       e.what());
  }
}

std::vector<double> OpenAiProvider::embed(const EmbeddingRequest& request) {
  const json body{{"model", request.model_id}, {"input", request.texts}};
  const json reply = post_json(base_url_, api_key_, "/v1/embeddings", body);
  try {
    return reply.at("data").at(0).at("embedding").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw GatewayError(std::string("openai: unexpected embedding shape: ") +
                       e.what());
  }
}

} // namespace critloop::gateway
