// Contract tests for the chat-completions client against a local server.

#include <gtest/gtest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstdlib>
#include <mutex>
#include <thread>

#include "fixtures.hpp"
#include "ttc/harness.hpp"
#include "ttc/openai_backend.hpp"

using namespace ttc;

namespace {

nlohmann::json completion(const std::string& content, const std::string& finish = "stop",
                          int tokens = 7) {
  return {{"choices",
           {{{"index", 0},
             {"message", {{"role", "assistant"}, {"content", content}}},
             {"finish_reason", finish}}}},
          {"usage", {{"completion_tokens", tokens}}}};
}

class FakeServer {
 public:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  explicit FakeServer(std::string route = "/v1/chat/completions") {
    server_.Post(route, [this](const httplib::Request& req, httplib::Response& res) {
      {
        std::lock_guard lock(mu_);
        bodies_.push_back(nlohmann::json::parse(req.body));
        auth_.push_back(req.get_header_value("Authorization"));
      }
      handler_(req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }

  void on(Handler h) { handler_ = std::move(h); }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  std::vector<nlohmann::json> bodies() {
    std::lock_guard lock(mu_);
    return bodies_;
  }
  std::vector<std::string> auth() {
    std::lock_guard lock(mu_);
    return auth_;
  }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::mutex mu_;
  std::vector<nlohmann::json> bodies_;
  std::vector<std::string> auth_;
  Handler handler_ = [](const httplib::Request&, httplib::Response& res) {
    res.set_content(completion("Answer: 4").dump(), "application/json");
  };
};

OpenAiBackend client(const std::string& url, std::string key = "") {
  OpenAiConfig c;
  c.base_url = url;
  c.model = "gen-model";
  c.judge_model = "judge-model";
  c.api_key = std::move(key);
  c.read_timeout_s = 5;
  return OpenAiBackend(c);
}

GenerationRequest request(SamplingParams params = {}) {
  GenerationRequest r;
  r.question = fixture::make_question("bb", SimilarityLevel::S1, 0);
  r.params = params;
  return r;
}

}  // namespace

TEST(OpenAi, RequestBodyCarriesModelAndSampling) {
  FakeServer srv;
  auto b = client(srv.url(), "sk-test");
  auto g = b.generate(request({0.3, 0.8, 123}));
  EXPECT_EQ(g.content, "Answer: 4");
  ASSERT_TRUE(g.tokens.has_value());
  EXPECT_EQ(*g.tokens, 7);
  EXPECT_TRUE(g.finished);

  auto body = srv.bodies().at(0);
  EXPECT_EQ(body["model"], "gen-model");
  EXPECT_DOUBLE_EQ(body["temperature"].get<double>(), 0.3);
  EXPECT_DOUBLE_EQ(body["top_p"].get<double>(), 0.8);
  EXPECT_EQ(body["max_tokens"], 123);
  const auto& msgs = body["messages"];
  ASSERT_EQ(msgs.size(), 2u);
  EXPECT_EQ(msgs[1]["role"], "user");
  EXPECT_NE(msgs[1]["content"].get<std::string>().find("Question: "), std::string::npos);
  EXPECT_EQ(srv.auth().at(0), "Bearer sk-test");
}

TEST(OpenAi, NoKeyMeansNoAuthorizationHeader) {
  FakeServer srv;
  client(srv.url()).generate(request());
  EXPECT_EQ(srv.auth().at(0), "");
}

TEST(OpenAi, KeyComesFromEnvironment) {
  ::setenv("TTC_API_KEY", "from-env", 1);
  EXPECT_EQ(OpenAiConfig::from_env({}).api_key, "from-env");
  ::unsetenv("TTC_API_KEY");
  OpenAiConfig base;
  base.api_key = "kept";
  EXPECT_EQ(OpenAiConfig::from_env(base).api_key, "kept");
}

TEST(OpenAi, BaseUrlPathPrefix) {
  FakeServer srv("/proxy/v1/chat/completions");
  EXPECT_EQ(client(srv.url() + "/proxy/").generate(request()).content, "Answer: 4");
}

TEST(OpenAi, MemoryPromptPrecedesQuestion) {
  FakeServer srv;
  auto req = request();
  req.memory_prompt = "Example: 1+1 = 2";
  client(srv.url()).generate(req);
  auto text = srv.bodies().at(0)["messages"][1]["content"].get<std::string>();
  EXPECT_LT(text.find("Example: 1+1"), text.find("Question: "));
}

TEST(OpenAi, NonSuccessStatusIsBackendError) {
  FakeServer srv;
  srv.on([](const httplib::Request&, httplib::Response& res) {
    res.status = 503;
    res.set_content("overloaded", "text/plain");
  });
  try {
    client(srv.url()).generate(request());
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_NE(std::string(e.what()).find("503"), std::string::npos) << e.what();
  }
}

TEST(OpenAi, MalformedBodiesAreBackendErrors) {
  FakeServer srv;
  srv.on([](const httplib::Request&, httplib::Response& res) {
    res.set_content("{not json", "application/json");
  });
  EXPECT_THROW(client(srv.url()).generate(request()), BackendError);
  srv.on([](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"choices":[]})", "application/json");
  });
  EXPECT_THROW(client(srv.url()).generate(request()), BackendError);
}

TEST(OpenAi, TransportFailureIsBackendError) {
  // A bound socket that never listens: connects are refused at once.
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  ASSERT_GE(fd, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  ASSERT_EQ(::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr), 0);
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  const int port = ntohs(addr.sin_port);
  struct Closer {
    int fd;
    ~Closer() { ::close(fd); }
  } closer{fd};
  auto b = client("http://127.0.0.1:" + std::to_string(port));
  try {
    b.generate(request());
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_NE(std::string(e.what()).find("transport failure"), std::string::npos) << e.what();
  }
}

TEST(OpenAi, LengthFinishMarksTruncation) {
  FakeServer srv;
  srv.on([](const httplib::Request&, httplib::Response& res) {
    auto j = completion("<think> still going", "length");
    j.erase("usage");
    res.set_content(j.dump(), "application/json");
  });
  auto req = request();
  req.mode = mode::CotContinuation{"", 256};
  auto g = client(srv.url()).generate(req);
  EXPECT_FALSE(g.finished);
  EXPECT_FALSE(g.tokens.has_value());
  EXPECT_EQ(srv.bodies().at(0)["max_tokens"], 256);
}

TEST(OpenAi, JudgeUsesJudgeModelAndParsesGrade) {
  FakeServer srv;
  srv.on([](const httplib::Request&, httplib::Response& res) {
    res.set_content(completion("Score: 0.85").dump(), "application/json");
  });
  auto b = client(srv.url());
  EXPECT_DOUBLE_EQ(b.score(fixture::make_question("bb", SimilarityLevel::S1, 0), "Answer: 4"),
                   0.85);
  EXPECT_EQ(srv.bodies().at(0)["model"], "judge-model");
  EXPECT_THROW(b.score(fixture::make_question("bb", SimilarityLevel::S1, 0), ""), ContractError);

  srv.on([](const httplib::Request&, httplib::Response& res) {
    res.set_content(completion("I cannot grade this").dump(), "application/json");
  });
  EXPECT_THROW(b.score(fixture::make_question("bb", SimilarityLevel::S1, 0), "x"), BackendError);
}

TEST(OpenAi, JudgeGradeParsing) {
  EXPECT_EQ(parse_judge_grade("0.7"), 0.7);
  EXPECT_EQ(parse_judge_grade("grade: 1"), 1.0);
  EXPECT_EQ(parse_judge_grade("7"), 1.0);  // clamped
  EXPECT_EQ(parse_judge_grade("-0.2"), 0.0);
  EXPECT_EQ(parse_judge_grade(".5 of 1"), 0.5);
  EXPECT_FALSE(parse_judge_grade("none").has_value());
}

TEST(OpenAi, DrivesAdaptiveBestOfNEndToEnd) {
  // Generation and judge share one server; the judge grades 0.95, so the
  // first candidate satisfies and the run stops after one answer.
  FakeServer srv;
  srv.on([](const httplib::Request& req, httplib::Response& res) {
    auto body = nlohmann::json::parse(req.body);
    res.set_content(completion(body["model"] == "judge-model" ? "0.95" : "Answer: 10").dump(),
                    "application/json");
  });
  std::vector<Question> qs{fixture::make_question("bb", SimilarityLevel::S1, 0)};
  StrategyConfig cfg;
  auto out = run_sequence(std::span<const Question>(qs), MemoryMethod::none, cfg,
                          client(srv.url()), 1);
  ASSERT_EQ(out.records.size(), 1u);
  EXPECT_EQ(out.records[0].cost, 1);
  EXPECT_TRUE(out.records[0].satisfied);
  EXPECT_EQ(out.records[0].accuracy, 1);
  EXPECT_FALSE(out.records[0].failed);
}

TEST(OpenAi, ServerErrorsBecomeFailedRecords) {
  FakeServer srv;
  srv.on([](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  std::vector<Question> qs{fixture::make_question("bb", SimilarityLevel::S1, 0),
                           fixture::make_question("bb", SimilarityLevel::S1, 1)};
  auto out = run_sequence(std::span<const Question>(qs), MemoryMethod::in_context, StrategyConfig{},
                          client(srv.url()), 1);
  ASSERT_EQ(out.records.size(), 2u);
  for (const auto& r : out.records) {
    EXPECT_TRUE(r.failed);
    EXPECT_EQ(r.accuracy, 0);
  }
}
