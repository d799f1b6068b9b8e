#pragma once

// Chat-completion client (OpenAI-style JSON over HTTP).
//
// POST {endpoint} with {"model", "messages": [{"role": "user", ...}],
// "temperature", "max_tokens"}; the reply text is choices[0].message.content.
// 429, 5xx and connection failures are retryable; other statuses are not.

#include <chrono>
#include <cstdlib>
#include <memory>
#include <mutex>
#include <string>

#include "httplib.h"
#include "json.hpp"

#include "text2flow/agents.hpp"
#include "text2flow/error.hpp"

namespace text2flow::agents {

struct HttpBackendConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-4o";
  std::string api_key_env = "TEXT2FLOW_API_KEY";
  double timeout_s = 120.0;
};

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

inline ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorCode::Config, "endpoint '" + url + "' has no scheme");
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw Error(ErrorCode::Config, "endpoint scheme '" + scheme + "' is not http or https");
  }
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (scheme == "https") throw Error(ErrorCode::Config, "https endpoint but the build has no OpenSSL support");
#endif
  const auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl out;
  out.origin = url.substr(0, path_start);
  out.path = path_start == std::string::npos ? "/" : url.substr(path_start);
  if (out.origin.size() <= scheme_end + 3) throw Error(ErrorCode::Config, "endpoint '" + url + "' has no host");
  return out;
}

class HttpBackend : public Backend {
 public:
  // Reads the key from the environment; an unset variable is a Config error.
  explicit HttpBackend(HttpBackendConfig cfg) : cfg_(std::move(cfg)), url_(parse_url(cfg_.endpoint)) {
    const char* key = std::getenv(cfg_.api_key_env.c_str());
    if (!key || !*key) {
      throw Error(ErrorCode::Config, "environment variable " + cfg_.api_key_env + " is not set");
    }
    api_key_ = key;
  }

  AgentResponse complete(const AgentRequest& req) override {
    nlohmann::json body{{"model", cfg_.model},
                        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", req.prompt}}})},
                        {"temperature", req.temperature},
                        {"max_tokens", req.max_tokens}};
    // A client per call keeps concurrent requests independent.
    httplib::Client client(url_.origin);
    const auto sec = static_cast<time_t>(cfg_.timeout_s);
    const auto usec = static_cast<time_t>((cfg_.timeout_s - static_cast<double>(sec)) * 1e6);
    client.set_connection_timeout(sec, usec);
    client.set_read_timeout(sec, usec);
    client.set_write_timeout(sec, usec);
    const httplib::Headers headers{{"Authorization", "Bearer " + api_key_}};

    const auto start = std::chrono::steady_clock::now();
    auto res = client.Post(url_.path, headers, body.dump(), "application/json");
    const long latency = static_cast<long>(
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count());
    if (!res) throw TransportError("request to " + url_.origin + " failed: " + httplib::to_string(res.error()), true);
    if (res->status == 429 || res->status >= 500) {
      throw TransportError("HTTP " + std::to_string(res->status) + " from " + url_.origin, true);
    }
    if (res->status < 200 || res->status >= 300) {
      throw TransportError("HTTP " + std::to_string(res->status) + " from " + url_.origin + ": " + res->body.substr(0, 200),
                           false);
    }

    AgentResponse out;
    out.latency_ms = latency;
    try {
      const auto j = nlohmann::json::parse(res->body);
      const auto& content = j.at("choices").at(0).at("message").at("content");
      if (!content.is_null()) out.text = content.get<std::string>();
      if (j.contains("usage")) {
        out.usage.prompt_tokens = j["usage"].value("prompt_tokens", 0L);
        out.usage.completion_tokens = j["usage"].value("completion_tokens", 0L);
      }
    } catch (const nlohmann::json::exception& e) {
      throw TransportError(std::string("malformed completion response: ") + e.what(), false);
    }
    return out;
  }

  std::string name() const override { return "http:" + cfg_.model; }

 private:
  HttpBackendConfig cfg_;
  ParsedUrl url_;
  std::string api_key_;
};

}  // namespace text2flow::agents
