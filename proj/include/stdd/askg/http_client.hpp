#pragma once

// Chat-completion transport. The endpoint is a full URL such as
// https://api.example.com/v1/chat/completions; the bearer key is read from
// STDD_LLM_API_KEY and the model name from STDD_LLM_MODEL when not given.

#include <cstdlib>
#include <regex>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "stdd/askg/client.hpp"

namespace stdd::askg {

inline constexpr const char* kApiKeyEnv = "STDD_LLM_API_KEY";
inline constexpr const char* kModelEnv = "STDD_LLM_MODEL";

class HTTPClient : public LLMClient {
 public:
  explicit HTTPClient(const std::string& endpoint, std::string model = "", std::string api_key = "",
                      int timeout_seconds = 60)
      : timeout_(timeout_seconds) {
    static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(endpoint, m, url)) throw ConfigError("malformed endpoint URL '" + endpoint + "'", "endpoint");
    base_ = m[1].str();
    path_ = m[2].matched ? m[2].str() : "/v1/chat/completions";
    const char* env_model = std::getenv(kModelEnv);
    model_ = !model.empty() ? model : (env_model ? env_model : "gpt-3.5-turbo");
    const char* env_key = std::getenv(kApiKeyEnv);
    key_ = !api_key.empty() ? api_key : (env_key ? env_key : "");
  }

  const std::string& model() const noexcept { return model_; }

  std::string complete(Stage, const std::string&, const StructuredPrompt& prompt) override {
    const nlohmann::json body = {
        {"model", model_},
        {"temperature", 0},
        {"messages",
         {{{"role", "system"}, {"content", prompt.instruction}},
          {{"role", "user"}, {"content", prompt.context_user}},
          {{"role", "assistant"}, {"content", prompt.context_assistant}},
          {{"role", "user"}, {"content", prompt.input}}}}};
    httplib::Client cli(base_);
    cli.set_connection_timeout(timeout_);
    cli.set_read_timeout(timeout_);
    httplib::Headers headers;
    if (!key_.empty()) headers.emplace("Authorization", "Bearer " + key_);
    auto res = cli.Post(path_, headers, body.dump(), "application/json");
    if (!res) throw IoError("request to " + base_ + path_ + " failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
      throw IoError("endpoint " + base_ + path_ + " returned HTTP " + std::to_string(res->status));
    try {
      const auto doc = nlohmann::json::parse(res->body);
      return doc.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("unexpected chat-completion response: " + std::string(e.what()));
    }
  }

 private:
  std::string base_;
  std::string path_;
  std::string model_;
  std::string key_;
  int timeout_;
};

}  // namespace stdd::askg
