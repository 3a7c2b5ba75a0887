#include <gtest/gtest.h>

#include <filesystem>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "spe/error.hpp"
#include "spe/http.hpp"

using namespace spe;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class HttpTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / "spe_http_test";
    fs::remove_all(dir_);
    start();
  }

  void TearDown() override {
    stop();
    fs::remove_all(dir_);
  }

  void start() {
    ServiceOptions o;
    o.data_dir = dir_;
    o.feature_dim = 32;
    service_ = std::make_unique<AnnotationService>(o);
    std::vector<BacklogItem> items;
    const char* titles[] = {"fix typo", "migrate cluster storage", "add filter", "redesign protocol"};
    for (int i = 0; i < 4; ++i) {
      BacklogItem it;
      it.id = "T-" + std::to_string(i + 1);
      it.title = titles[i];
      it.description = "details " + std::to_string(i);
      it.story_point = StoryPoint(i + 1);
      items.push_back(it);
    }
    service_->register_dataset(ProjectDataset("tiny", items));
    service_->restore();
    server_ = std::make_unique<HttpServer>(*service_);
    port_ = server_->bind({"127.0.0.1", 0});
    thread_ = std::thread([this] { server_->serve(); });
    while (!server_->running()) std::this_thread::yield();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }

  void stop() {
    client_.reset();
    server_->stop();
    thread_.join();
    server_.reset();
    service_.reset();
  }

  std::pair<int, json> get(const std::string& path) {
    auto res = client_->Get(path);
    EXPECT_TRUE(res);
    return {res->status, json::parse(res->body)};
  }

  std::pair<int, json> post(const std::string& path, const std::string& body) {
    auto res = client_->Post(path, body, "application/json");
    EXPECT_TRUE(res);
    return {res->status, json::parse(res->body)};
  }

  fs::path dir_;
  std::unique_ptr<AnnotationService> service_;
  std::unique_ptr<HttpServer> server_;
  std::unique_ptr<httplib::Client> client_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace

TEST(Listen, ParsesAddresses) {
  EXPECT_EQ(parse_listen("0.0.0.0:9000").host, "0.0.0.0");
  EXPECT_EQ(parse_listen("0.0.0.0:9000").port, 9000);
  EXPECT_EQ(parse_listen(":81").host, "127.0.0.1");
  EXPECT_EQ(parse_listen("8088").port, 8088);
  EXPECT_THROW(parse_listen("host:port"), ValidationError);
  EXPECT_THROW(parse_listen("host:70000"), ValidationError);
}

TEST(Listen, StatusMapping) {
  EXPECT_EQ(http_status_for("validation_error"), 400);
  EXPECT_EQ(http_status_for("format_error"), 400);
  EXPECT_EQ(http_status_for("not_found"), 404);
  EXPECT_EQ(http_status_for("conflict"), 409);
  EXPECT_EQ(http_status_for("timeout"), 504);
  EXPECT_EQ(http_status_for("io_error"), 500);
}

TEST_F(HttpTest, FullWorkflow) {
  auto [st, datasets] = get("/datasets");
  EXPECT_EQ(st, 200);
  EXPECT_EQ(datasets["datasets"], json::array({"tiny"}));

  auto [created_status, session] = post("/sessions", R"({"dataset": "tiny", "k": 1, "seed": 4})");
  ASSERT_EQ(created_status, 201);
  const std::string id = session["session_id"];
  EXPECT_EQ(session["status"], "collecting");
  EXPECT_EQ(session["progress"]["total"], 4);
  const std::string base = "/sessions/" + id;

  std::vector<std::string> seen;
  for (int i = 0; i < 4; ++i) {
    auto [s, next] = get(base + "/next-pair");
    ASSERT_EQ(s, 200);
    EXPECT_FALSE(next["done"].get<bool>());
    EXPECT_EQ(next["pair_index"], i);
    EXPECT_EQ(next["progress"]["judged"], i);
    EXPECT_FALSE(next["item_a"].contains("story_point"));
    EXPECT_TRUE(next["item_b"].contains("title"));
    auto [js, ack] = post(base + "/judgments",
                          json{{"pair_index", i}, {"choice", i % 2 ? "B" : "A"}}.dump());
    ASSERT_EQ(js, 201);
    EXPECT_EQ(ack["y"], i % 2 ? -1 : 1);
    EXPECT_EQ(ack["progress"]["judged"], i + 1);
  }
  auto [dup_status, dup] = post(base + "/judgments", R"({"pair_index": 0, "choice": "B"})");
  EXPECT_EQ(dup_status, 409);
  EXPECT_EQ(dup["code"], "conflict");
  EXPECT_TRUE(dup.contains("message"));

  auto [ds, done] = get(base + "/next-pair");
  EXPECT_TRUE(done["done"].get<bool>());
  EXPECT_EQ(done["progress"]["judged"], 4);

  auto [untrained, err] = get(base + "/ranking");
  EXPECT_EQ(untrained, 409);

  auto [ts, summary] = post(base + "/train", R"({"config": {"max_epochs": 1}})");
  ASSERT_EQ(ts, 200);
  EXPECT_EQ(summary["history"]["train_loss"].size(), 1u);
  EXPECT_EQ(summary["config"]["lr_start"], 0.001);
  EXPECT_EQ(summary["config"]["lr_end"], 0.000001);
  EXPECT_TRUE(summary.contains("elapsed_seconds"));

  auto [ts2, defaults] = post(base + "/train", "");
  ASSERT_EQ(ts2, 200);
  EXPECT_EQ(defaults["epochs"], 100);

  auto [rs, ranking] = get(base + "/ranking");
  ASSERT_EQ(rs, 200);
  ASSERT_EQ(ranking["items"].size(), 4u);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(ranking["items"][i]["rank"], i + 1);

  auto [rn, extended] = post(base + "/ranking", R"({"items": [{"title": "migrate cluster"}]})");
  ASSERT_EQ(rn, 200);
  EXPECT_EQ(extended["items"].size(), 5u);

  auto [is, info] = get(base);
  EXPECT_EQ(info["status"], "trained");
  EXPECT_EQ(info["progress"]["judged"], 4);

  auto [ls, list] = get("/sessions");
  EXPECT_EQ(list["sessions"].size(), 1u);
}

TEST_F(HttpTest, ErrorsHaveCodeAndMessage) {
  auto [s1, b1] = post("/sessions", R"({"dataset": "tiny", "k": 0})");
  EXPECT_EQ(s1, 400);
  EXPECT_EQ(b1["code"], "validation_error");
  auto [s2, b2] = post("/sessions", R"({"dataset": "absent", "k": 1})");
  EXPECT_EQ(s2, 404);
  EXPECT_EQ(b2["code"], "not_found");
  auto [s3, b3] = post("/sessions", "{broken");
  EXPECT_EQ(s3, 400);
  EXPECT_EQ(b3["code"], "format_error");
  auto [s4, b4] = get("/sessions/unknown/next-pair");
  EXPECT_EQ(s4, 404);
  auto [s5, b5] = get("/no/such/route");
  EXPECT_EQ(s5, 404);
  EXPECT_EQ(b5["code"], "not_found");

  auto [cs, session] = post("/sessions", R"({"dataset": "tiny", "k": 1})");
  const std::string base = "/sessions/" + session["session_id"].get<std::string>();
  auto [s6, b6] = post(base + "/judgments", R"({"pair_index": 0, "choice": "tie"})");
  EXPECT_EQ(s6, 400);
  auto [s7, b7] = post(base + "/train", "{}");
  EXPECT_EQ(s7, 400);
  auto [s8, b8] = post(base + "/judgments", R"({"pair_index": 0})");
  EXPECT_EQ(s8, 400);
}

TEST_F(HttpTest, CorsHeadersAndPreflight) {
  auto res = client_->Get("/datasets");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");
  auto pre = client_->Options("/sessions");
  ASSERT_TRUE(pre);
  EXPECT_EQ(pre->status, 204);
}

TEST_F(HttpTest, JudgmentsSurviveServerRestart) {
  auto [cs, session] = post("/sessions", R"({"dataset": "tiny", "k": 1, "seed": 1})");
  const std::string base = "/sessions/" + session["session_id"].get<std::string>();
  post(base + "/judgments", R"({"pair_index": 0, "choice": "A"})");
  post(base + "/skip", R"({"pair_index": 1})");
  stop();
  start();
  auto [s, info] = get(base);
  ASSERT_EQ(s, 200);
  EXPECT_EQ(info["progress"]["judged"], 1);
  auto [ns, next] = get(base + "/next-pair");
  EXPECT_EQ(next["pair_index"], 2);
  auto [js, list] = get(base + "/judgments");
  ASSERT_EQ(list["judgments"].size(), 1u);
  EXPECT_EQ(list["judgments"][0]["y"], 1);
}
