#pragma once

// Chat-completion and embedding clients over HTTP (OpenAI-style wire format).
// Define CPPHTTPLIB_OPENSSL_SUPPORT before including for https endpoints.

#include <cstdlib>
#include <memory>
#include <string>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "factsteer/clients/chat_client.hpp"
#include "factsteer/retrieval/embedder.hpp"

namespace factsteer::clients {

struct EndpointConfig {
  std::string base_url;  // scheme://host[:port]
  std::string path = "/v1/chat/completions";
  std::string token;
  std::string model;
  int timeout_seconds = 120;

  // FACTSTEER_LLM_URL, FACTSTEER_LLM_TOKEN, FACTSTEER_LLM_MODEL
  static EndpointConfig from_env(const std::string& prefix = "FACTSTEER_LLM") {
    auto get = [](const std::string& name) {
      const char* v = std::getenv(name.c_str());
      return v ? std::string(v) : std::string();
    };
    EndpointConfig c;
    c.base_url = get(prefix + "_URL");
    c.token = get(prefix + "_TOKEN");
    c.model = get(prefix + "_MODEL");
    if (c.base_url.empty()) throw Error(prefix + "_URL is not set");
    return c;
  }
};

namespace detail {

inline nlohmann::json post_json(const EndpointConfig& cfg, const std::string& path,
                                const nlohmann::json& body) {
  httplib::Client cli(cfg.base_url);
  cli.set_connection_timeout(cfg.timeout_seconds);
  cli.set_read_timeout(cfg.timeout_seconds);
  httplib::Headers headers;
  if (!cfg.token.empty()) headers.emplace("Authorization", "Bearer " + cfg.token);
  auto res = cli.Post(path, headers, body.dump(), "application/json");
  if (!res) throw ClientError("POST " + cfg.base_url + path + " failed: " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw ClientError("POST " + cfg.base_url + path + " returned HTTP " + std::to_string(res->status));
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw ClientError(std::string("malformed response body: ") + e.what());
  }
}

}  // namespace detail

class HttpChatClient final : public ChatClient {
 public:
  explicit HttpChatClient(EndpointConfig cfg) : cfg_(std::move(cfg)) {}

  std::string id() const override { return "http:" + cfg_.base_url + cfg_.path + "#" + cfg_.model; }

  std::string complete(const std::string& prompt) override {
    nlohmann::json body = {{"model", cfg_.model},
                           {"messages", {{{"role", "user"}, {"content", prompt}}}},
                           {"temperature", 0}};
    const auto doc = detail::post_json(cfg_, cfg_.path, body);
    try {
      return doc.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ClientError(std::string("unexpected completion payload: ") + e.what());
    }
  }

 private:
  EndpointConfig cfg_;
};

class HttpEmbedder final : public retrieval::Embedder {
 public:
  HttpEmbedder(EndpointConfig cfg, int dim, RetryPolicy retry = {})
      : cfg_(std::move(cfg)), dim_(dim), retry_(retry) {
    if (cfg_.path == "/v1/chat/completions") cfg_.path = "/v1/embeddings";
  }

  std::string id() const override { return "http:" + cfg_.base_url + cfg_.path + "#" + cfg_.model; }
  int dim() const override { return dim_; }

  std::vector<Vector> embed(const std::vector<std::string>& texts) override {
    if (texts.empty()) throw InvalidArgument("embed: no texts");
    nlohmann::json body = {{"model", cfg_.model}, {"input", texts}};
    nlohmann::json doc;
    try {
      doc = with_retries(retry_, [&] { return detail::post_json(cfg_, cfg_.path, body); });
    } catch (const ClientError& e) {
      std::string ids;
      for (const auto& t : texts) ids += (ids.empty() ? "" : ",") + content_hash(t);
      throw ClientError(std::string(e.what()) + " (failed text hashes: " + ids + ")");
    }
    std::vector<Vector> out;
    for (const auto& item : doc.at("data")) {
      Vector v = item.at("embedding").get<Vector>();
      if (static_cast<int>(v.size()) != dim_)
        throw ClientError("embedding service returned dimension " + std::to_string(v.size()));
      out.push_back(std::move(v));
    }
    if (out.size() != texts.size()) throw ClientError("embedding service returned wrong count");
    return out;
  }

 private:
  EndpointConfig cfg_;
  int dim_;
  RetryPolicy retry_;
};

}  // namespace factsteer::clients
