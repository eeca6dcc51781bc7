#include <gtest/gtest.h>

#include <filesystem>
#include <mutex>
#include <thread>

#include "stdd/askg/http_client.hpp"

using namespace stdd;
using namespace stdd::askg;

namespace {

const std::filesystem::path kFixtures = std::filesystem::path(STDD_SOURCE_DIR) / "data" / "fixtures" / "askg";

// Local chat-completion endpoint answering from the fixture directory.
class FakeEndpoint {
 public:
  explicit FakeEndpoint(int status = 200) {
    server_.Post("/v1/chat/completions", [this, status](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mutex_);
      requests.push_back(nlohmann::json::parse(req.body));
      auth = req.get_header_value("Authorization");
      if (status != 200) {
        res.status = status;
        return;
      }
      if (garbled) {
        res.set_content(R"({"choices": []})", "application/json");
        return;
      }
      const auto& msgs = requests.back()["messages"];
      const std::string input = msgs.back()["content"];
      const std::string action = input.substr(0, input.find('\n'));
      const bool stage2 = msgs.front()["content"].get<std::string>().find("complete the whole sentence") != std::string::npos;
      const std::string text =
          detail::read_text(kFixtures / fixture_name(action, stage2 ? Stage::completion : Stage::graph));
      res.set_content(nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}}}.dump(),
                      "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeEndpoint() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }

  std::vector<nlohmann::json> requests;
  std::string auth;
  bool garbled = false;

 private:
  httplib::Server server_;
  std::thread thread_;
  std::mutex mutex_;
  int port_ = 0;
};

}  // namespace

TEST(HTTPClientTest, BuildsTheSameGraphAsTheFixtures) {
  FakeEndpoint endpoint;
  HTTPClient http(endpoint.url(), "test-model", "secret", 10);
  FixtureClient fixtures(kFixtures);
  const BuildResult live = build_action(http, "archery");
  EXPECT_EQ(live.graph, build_action(fixtures, "archery").graph);
  ASSERT_EQ(endpoint.requests.size(), 2u);
  EXPECT_EQ(endpoint.requests[0]["model"], "test-model");
  EXPECT_EQ(endpoint.requests[0]["messages"].size(), 4u);
  EXPECT_EQ(endpoint.auth, "Bearer secret");
}

TEST(HTTPClientTest, ErrorsAreTyped) {
  {
    FakeEndpoint endpoint(500);
    HTTPClient http(endpoint.url(), "m", "", 10);
    EXPECT_THROW(build_action(http, "archery"), IoError);
    EXPECT_EQ(endpoint.auth, "");
  }
  {
    FakeEndpoint endpoint;
    endpoint.garbled = true;
    HTTPClient http(endpoint.url(), "m", "", 10);
    EXPECT_THROW(build_action(http, "archery"), ParseError);
  }
  HTTPClient closed("http://127.0.0.1:1/v1/chat/completions", "m", "", 2);
  EXPECT_THROW(build_action(closed, "archery"), IoError);
  EXPECT_THROW(HTTPClient("ftp://example.com"), ConfigError);
}

TEST(HTTPClientTest, ModelFromEnvironment) {
  setenv(kModelEnv, "env-model", 1);
  EXPECT_EQ(HTTPClient("http://localhost:8080").model(), "env-model");
  EXPECT_EQ(HTTPClient("http://localhost:8080", "explicit").model(), "explicit");
  unsetenv(kModelEnv);
}
