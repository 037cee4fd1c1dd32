#include <atomic>
#include <fstream>
#include <set>
#include <thread>

#include <gtest/gtest.h>

#include "igrec/agent/episode.hpp"
#include "igrec/common/binary_io.hpp"
#include "igrec/pipeline/pipeline.hpp"
#include "igrec/service/http.hpp"
#include "igrec/service/session.hpp"
#include "../support/temp_dir.hpp"

// After Eigen: <resolv.h>, pulled in by httplib, defines a macro named _res.
#include <httplib.h>

namespace igrec::service {
namespace {

using nlohmann::json;

// One tiny trained workdir shared by every test in this file.
class ServiceTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new testing::TempDir("service_world");
    const pipeline::Workdir wd{dir_->path()};
    pipeline::Profile p = pipeline::profile("tiny");
    pipeline::reseed(p, 11);
    pipeline::synth(wd, p);
    pipeline::preprocess(wd, p);
    pipeline::train_proxy(wd, p);
    pipeline::train_agent(wd, p, "rl");
    models_ = new ServiceModels(load_models(wd.root, "rl"));
  }
  static void TearDownTestSuite() {
    delete models_;
    delete dir_;
  }

  static const ServiceModels& models() { return *models_; }
  static const std::filesystem::path& root() { return dir_->path(); }

  static std::vector<data::OutfitQuadruple> test_quads() { return models().artifacts.dataset->quadruples_in(data::Split::kTest); }

  static agent::EpisodeLog offline(const data::OutfitQuadruple& q, std::uint64_t seed, std::size_t steps = 10) {
    const auto& a = models().artifacts;
    agent::ProxyFeedbackSource source(*a.scorer, q.user, q.top);
    return agent::run_episode(*models().policy, *a.space, source, q.user, q.top, a.dataset->garment(q.top).feature,
                              {steps, false, seed});
  }

  static ServiceOptions options() {
    ServiceOptions o;
    o.id_salt = 42;
    return o;
  }

 private:
  static inline testing::TempDir* dir_ = nullptr;
  static inline ServiceModels* models_ = nullptr;
};

json proxy_start(const data::OutfitQuadruple& q, std::uint64_t seed) {
  return {{"top_id", q.top}, {"mode", "proxy"}, {"user_tag", q.user}, {"seed", seed}};
}

std::vector<agent::EpisodeStep> steps_from(const json& history) {
  std::vector<agent::EpisodeStep> out;
  for (const auto& h : history) {
    out.push_back({h.at("step").get<std::size_t>(), h.at("bottom").at("action").get<std::size_t>(),
                   h.at("bottom").at("id").get<std::string>(), h.at("raw").get<double>(), h.at("score").get<double>(),
                   h.at("reward").get<double>()});
  }
  return out;
}

// Feeds proxy feedback until the session ends and returns the final reply.
json drive_to_end(SessionManager& m, const std::string& id) {
  json reply;
  do {
    reply = m.post_feedback(id, json::object());
  } while (reply.at("status") == "active");
  return reply;
}

void expect_service_error(int status, const std::function<void()>& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected ServiceError " << status;
  } catch (const ServiceError& e) {
    EXPECT_EQ(e.status(), status) << e.what();
  }
}

TEST_F(ServiceTest, ProxySessionReproducesOfflineEpisode) {
  SessionManager m(models(), options());
  const auto quads = test_quads();
  ASSERT_FALSE(quads.empty());
  for (std::size_t i = 0; i < std::min<std::size_t>(quads.size(), 8); ++i) {
    const auto start = m.start_session(proxy_start(quads[i], 100 + i));
    const auto expected = offline(quads[i], 100 + i);
    EXPECT_EQ(start.at("bottom").at("action").get<std::size_t>(), expected.steps.front().action);
    const auto end = drive_to_end(m, start.at("session_id"));
    EXPECT_EQ(steps_from(end.at("history")), expected.steps);
    EXPECT_EQ(end.at("history_summary").at("steps"), 10);
  }
}

TEST_F(ServiceTest, InterleavedSessionsDoNotInteract) {
  SessionManager m(models(), options());
  const auto quads = test_quads();
  const std::size_t n = std::min<std::size_t>(quads.size(), 4);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back(m.start_session(proxy_start(quads[i], 7)).at("session_id"));
  for (int step = 0; step < 10; ++step) {
    for (const auto& id : ids) m.post_feedback(id, json::object());
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto snap = m.get_session(ids[i]);
    EXPECT_EQ(snap.at("status"), "done");
    EXPECT_EQ(steps_from(snap.at("history")), offline(quads[i], 7).steps);
  }
}

TEST_F(ServiceTest, ConcurrentSessionsMatchOffline) {
  SessionManager m(models(), options());
  const auto quads = test_quads();
  const std::size_t n = std::min<std::size_t>(quads.size(), 8);
  std::vector<json> ends(n);
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < n; ++i) {
    threads.emplace_back([&, i] { ends[i] = drive_to_end(m, m.start_session(proxy_start(quads[i], i)).at("session_id")); });
  }
  for (auto& t : threads) t.join();
  for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(steps_from(ends[i].at("history")), offline(quads[i], i).steps);
}

// A human session replays exactly like an offline episode fed the same scores.
TEST_F(ServiceTest, HumanSnapshotReplaysAsOfflineEpisode) {
  struct Scripted : agent::FeedbackSource {
    std::vector<double> scores;
    std::size_t next = 0;
    agent::Feedback score(std::size_t, const std::string&) override {
      const double s = scores.at(next++);
      return {s, s};
    }
  };
  SessionManager m(models(), options());
  const auto top = models().artifacts.dataset->ids(data::Category::kTop).front();
  const auto id = m.start_session({{"top_id", top}, {"seed", 5}}).at("session_id").get<std::string>();
  Scripted script;
  script.scores = {0.1, 0.75, 0.3, 0.0, 0.5, 1.0 / 3.0, 0.9, 0.2, 0.6, 0.4};
  for (double s : script.scores) m.post_feedback(id, {{"score", s}});
  const auto snap = m.get_session(id);
  EXPECT_EQ(snap.at("status"), "done");
  EXPECT_FALSE(snap.at("satisfied").get<bool>());
  const auto& a = models().artifacts;
  const auto expected = agent::run_episode(*models().policy, *a.space, script, "", top, a.dataset->garment(top).feature,
                                           {10, true, 5});
  EXPECT_EQ(steps_from(snap.at("history")), expected.steps);
}

TEST_F(ServiceTest, HumanSessionEndsWhenSatisfied) {
  SessionManager m(models(), options());
  const auto top = models().artifacts.dataset->ids(data::Category::kTop).front();
  const auto id = m.start_session({{"top_id", top}, {"mode", "human"}}).at("session_id").get<std::string>();
  m.post_feedback(id, {{"score", 0.2}});
  const auto reply = m.post_feedback(id, {{"score", 0.97}});
  EXPECT_EQ(reply.at("status"), "done");
  EXPECT_TRUE(reply.at("satisfied").get<bool>());
  EXPECT_TRUE(reply.at("next").is_null());
  EXPECT_EQ(reply.at("history").size(), 2u);
  EXPECT_DOUBLE_EQ(reply.at("history_summary").at("best_score").get<double>(), 0.97);
  EXPECT_DOUBLE_EQ(reply.at("history_summary").at("mean_score").get<double>(), (0.2 + 0.97) / 2);
  expect_service_error(409, [&] { m.post_feedback(id, {{"score", 0.5}}); });
}

TEST_F(ServiceTest, IdempotencyKeyReturnsTheStoredReply) {
  SessionManager m(models(), options());
  const auto top = models().artifacts.dataset->ids(data::Category::kTop).front();
  const auto id = m.start_session({{"top_id", top}}).at("session_id").get<std::string>();
  const auto first = m.post_feedback(id, {{"score", 0.4}, {"idempotency_key", "k1"}});
  const auto again = m.post_feedback(id, {{"score", 0.9}, {"idempotency_key", "k1"}});
  EXPECT_EQ(first, again);
  EXPECT_EQ(m.get_session(id).at("step"), 1);
  const auto second = m.post_feedback(id, {{"score", 0.9}, {"idempotency_key", "k2"}});
  EXPECT_EQ(second.at("step"), 2);
}

TEST_F(ServiceTest, RequestValidation) {
  SessionManager m(models(), options());
  const auto quad = test_quads().front();
  const auto top = quad.top;
  expect_service_error(400, [&] { m.start_session(json::array()); });
  expect_service_error(400, [&] { m.start_session(json::object()); });
  expect_service_error(400, [&] { m.start_session({{"top_id", 3}}); });
  expect_service_error(400, [&] { m.start_session({{"top_id", top}, {"mode", "robot"}}); });
  expect_service_error(400, [&] { m.start_session({{"top_id", top}, {"mode", "proxy"}}); });
  expect_service_error(404, [&] { m.start_session({{"top_id", "no-such-top"}}); });
  expect_service_error(404, [&] { m.start_session({{"top_id", quad.positive}}); });  // a bottom, not a top
  expect_service_error(404, [&] { m.get_session("s-missing"); });
  expect_service_error(404, [&] { m.post_feedback("s-missing", {{"score", 0.5}}); });

  const auto human = m.start_session({{"top_id", top}}).at("session_id").get<std::string>();
  expect_service_error(400, [&] { m.post_feedback(human, json::object()); });
  expect_service_error(400, [&] { m.post_feedback(human, {{"score", "high"}}); });
  expect_service_error(400, [&] { m.post_feedback(human, {{"score", 1.5}}); });
  expect_service_error(400, [&] { m.post_feedback(human, {{"score", -0.1}}); });
  EXPECT_EQ(m.get_session(human).at("step"), 0);

  const auto proxy = m.start_session(proxy_start(quad, 1)).at("session_id").get<std::string>();
  expect_service_error(400, [&] { m.post_feedback(proxy, {{"score", 0.5}}); });
  drive_to_end(m, proxy);
  expect_service_error(409, [&] { m.post_feedback(proxy, json::object()); });
}

TEST_F(ServiceTest, ProxyModeNeedsALoadedProxy) {
  ServiceModels no_proxy = models();
  no_proxy.artifacts.scorer.reset();
  SessionManager m(no_proxy, options());
  expect_service_error(409, [&] { m.start_session(proxy_start(test_quads().front(), 1)); });
  EXPECT_FALSE(m.health().at("proxy").get<bool>());
}

TEST_F(ServiceTest, CapacityEvictsFinishedSessionsFirst) {
  ServiceOptions o = options();
  o.max_sessions = 2;
  SessionManager m(models(), o);
  const auto quad = test_quads().front();
  const auto a = m.start_session(proxy_start(quad, 1)).at("session_id").get<std::string>();
  const auto b = m.start_session(proxy_start(quad, 2)).at("session_id").get<std::string>();
  expect_service_error(503, [&] { m.start_session(proxy_start(quad, 3)); });
  drive_to_end(m, a);
  const auto c = m.start_session(proxy_start(quad, 3)).at("session_id").get<std::string>();
  EXPECT_EQ(m.session_count(), 2u);
  expect_service_error(404, [&] { m.get_session(a); });
  EXPECT_EQ(m.get_session(b).at("status"), "active");
  EXPECT_NE(b, c);
}

TEST_F(ServiceTest, IdleSessionsExpire) {
  auto now = std::chrono::steady_clock::time_point{};
  ServiceOptions o = options();
  o.session_timeout = std::chrono::seconds(60);
  SessionManager m(models(), o, [&now] { return now; });
  const auto top = models().artifacts.dataset->ids(data::Category::kTop).front();
  const auto idle = m.start_session({{"top_id", top}}).at("session_id").get<std::string>();
  const auto busy = m.start_session({{"top_id", top}}).at("session_id").get<std::string>();
  now += std::chrono::seconds(45);
  m.post_feedback(busy, {{"score", 0.5}});
  now += std::chrono::seconds(30);
  EXPECT_EQ(m.evict_expired(), 1u);
  expect_service_error(404, [&] { m.get_session(idle); });
  EXPECT_EQ(m.get_session(busy).at("step"), 1);
  now += std::chrono::seconds(60);
  EXPECT_EQ(m.evict_expired(), 0u);  // the get above refreshed it
  now += std::chrono::seconds(1);
  EXPECT_EQ(m.evict_expired(), 1u);
  EXPECT_EQ(m.session_count(), 0u);
}

TEST_F(ServiceTest, CatalogPagesCoverAllTops) {
  SessionManager m(models(), options());
  const auto tops = models().artifacts.dataset->ids(data::Category::kTop);
  std::vector<std::string> seen;
  for (std::size_t offset = 0;; offset += 5) {
    const auto page = m.catalog_tops(offset, 5);
    EXPECT_EQ(page.at("total"), tops.size());
    if (page.at("items").empty()) break;
    for (const auto& item : page.at("items")) seen.push_back(item.at("id"));
  }
  EXPECT_EQ(seen, tops);
  expect_service_error(400, [&] { m.catalog_tops(0, 0); });
  expect_service_error(400, [&] { m.catalog_tops(0, 501); });
}

TEST_F(ServiceTest, SessionIdsAreUniqueAndSwatchesStable) {
  SessionManager m(models(), options());
  const auto top = models().artifacts.dataset->ids(data::Category::kTop).front();
  std::set<std::string> ids;
  for (int i = 0; i < 30; ++i) {
    ids.insert(m.start_session({{"top_id", top}}).at("session_id").get<std::string>());
    m.evict_expired();
  }
  EXPECT_EQ(ids.size(), 30u);
  const Eigen::VectorXd f = models().artifacts.dataset->garment(top).feature;
  EXPECT_EQ(swatch(f), swatch(f));
  const auto s = swatch(f);
  EXPECT_EQ(s.at("color").get<std::string>().size(), 7u);
  EXPECT_TRUE(std::set<std::string>({"solid", "stripes", "dots", "checks"}).count(s.at("pattern")));
}

TEST_F(ServiceTest, FinishedEpisodesAreJournaled) {
  testing::TempDir dir("service_journal");
  ServiceOptions o = options();
  o.journal = dir.path() / "sessions.jsonl";
  SessionManager m(models(), o);
  const auto quads = test_quads();
  drive_to_end(m, m.start_session(proxy_start(quads.front(), 9)).at("session_id"));
  m.start_session(proxy_start(quads.front(), 10));  // unfinished, not journaled
  std::ifstream in(*o.journal);
  const auto logs = agent::read_jsonl(in);
  ASSERT_EQ(logs.size(), 1u);
  auto expected = offline(quads.front(), 9);
  EXPECT_EQ(logs[0], expected);
}

TEST_F(ServiceTest, ConstructorRejectsBadOptions) {
  ServiceOptions o = options();
  o.steps = models().artifacts.space->size() + 1;
  EXPECT_THROW(SessionManager(models(), o), ContractError);
  o = options();
  o.max_sessions = 0;
  EXPECT_THROW(SessionManager(models(), o), ContractError);
}

TEST_F(ServiceTest, ConfigResolvesPathsAgainstItsDirectory) {
  testing::TempDir dir("service_config");
  io::write_text_file(dir.path() / "svc.json",
                      R"({"workdir": "world", "policy": "random", "port": 0, "steps": 5, "journal": "j.jsonl"})");
  const auto c = ServiceConfig::load(dir.path() / "svc.json");
  EXPECT_EQ(c.workdir, dir.path() / "world");
  EXPECT_EQ(c.policy, "random");
  EXPECT_EQ(c.port, 0);
  EXPECT_EQ(c.options.steps, 5u);
  EXPECT_EQ(*c.options.journal, dir.path() / "j.jsonl");
  io::write_text_file(dir.path() / "bad.json", R"({"policy": "rl"})");
  EXPECT_THROW(ServiceConfig::load(dir.path() / "bad.json"), LoadError);
  io::write_text_file(dir.path() / "port.json", R"({"workdir": ".", "port": 70000})");
  EXPECT_THROW(ServiceConfig::load(dir.path() / "port.json"), LoadError);
}

TEST_F(ServiceTest, LoadModelsNamesMissingCheckpoint) {
  try {
    load_models(root(), "lstm");
    FAIL() << "expected LoadError";
  } catch (const LoadError& e) {
    EXPECT_NE(std::string(e.what()).find("lstm"), std::string::npos) << e.what();
  }
  EXPECT_EQ(load_models(root(), "random").policy->kind(), "random");
}

class HttpServiceTest : public ServiceTest {
 protected:
  void SetUp() override {
    manager_ = std::make_unique<SessionManager>(models(), options());
    http_ = std::make_unique<HttpService>(*manager_);
    port_ = http_->bind("127.0.0.1", 0);
    server_ = std::thread([this] { http_->run(); });
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    client_->set_read_timeout(10, 0);
  }
  void TearDown() override {
    http_->stop();
    server_.join();
  }

  std::pair<int, json> post(const std::string& path, const std::string& body) {
    const auto res = client_->Post(path, body, "application/json");
    if (!res) throw std::runtime_error("no HTTP response for " + path);
    return {res->status, json::parse(res->body)};
  }
  std::pair<int, json> get(const std::string& path) {
    const auto res = client_->Get(path);
    if (!res) throw std::runtime_error("no HTTP response for " + path);
    EXPECT_EQ(res->get_header_value("Content-Type"), "application/json");
    return {res->status, json::parse(res->body)};
  }

  std::unique_ptr<SessionManager> manager_;
  std::unique_ptr<HttpService> http_;
  std::unique_ptr<httplib::Client> client_;
  std::thread server_;
  int port_ = 0;
};

TEST_F(HttpServiceTest, ProxySessionOverHttpMatchesOffline) {
  const auto q = test_quads().front();
  const auto [status, start] = post("/sessions", proxy_start(q, 21).dump());
  ASSERT_EQ(status, 201) << start.dump();
  const std::string id = start.at("session_id");
  json reply;
  do {
    const auto [s, body] = post("/sessions/" + id + "/feedback", "{}");
    ASSERT_EQ(s, 200) << body.dump();
    reply = body;
  } while (reply.at("status") == "active");
  EXPECT_EQ(steps_from(reply.at("history")), offline(q, 21).steps);
  const auto [gs, snap] = get("/sessions/" + id);
  EXPECT_EQ(gs, 200);
  EXPECT_EQ(snap.at("history"), reply.at("history"));
  EXPECT_EQ(post("/sessions/" + id + "/feedback", "{}").first, 409);
}

TEST_F(HttpServiceTest, ErrorsAreJsonWithStatus) {
  const auto [s1, b1] = post("/sessions", "{not json");
  EXPECT_EQ(s1, 400);
  EXPECT_EQ(b1.at("code"), "bad_request");
  const auto [s2, b2] = get("/sessions/s-nothing");
  EXPECT_EQ(s2, 404);
  EXPECT_EQ(b2.at("code"), "not_found");
  const auto [s3, b3] = get("/no/such/route");
  EXPECT_EQ(s3, 404);
  EXPECT_EQ(b3.at("code"), "not_found");
  EXPECT_EQ(get("/catalog/tops?limit=abc").first, 400);
  EXPECT_EQ(get("/catalog/tops?offset=-1").first, 400);
  EXPECT_EQ(post("/sessions", R"({"top_id": "nope"})").first, 404);
}

TEST_F(HttpServiceTest, CatalogAndHealth) {
  const auto [s, health] = get("/healthz");
  EXPECT_EQ(s, 200);
  EXPECT_EQ(health.at("status"), "ok");
  EXPECT_EQ(health.at("policy"), "rl");
  EXPECT_EQ(health.at("actions"), models().artifacts.space->size());
  const auto [cs, page] = get("/catalog/tops?offset=2&limit=3");
  EXPECT_EQ(cs, 200);
  EXPECT_EQ(page.at("items").size(), 3u);
  EXPECT_EQ(page.at("items")[0].at("id"), models().artifacts.dataset->ids(data::Category::kTop)[2]);
  EXPECT_EQ(get("/catalog/tops").second.at("limit"), 50);
}

TEST_F(HttpServiceTest, HumanFeedbackWithRetriedKey) {
  const auto top = models().artifacts.dataset->ids(data::Category::kTop).front();
  const auto [s, start] = post("/sessions", json{{"top_id", top}, {"mode", "human"}}.dump());
  ASSERT_EQ(s, 201);
  const std::string path = "/sessions/" + start.at("session_id").get<std::string>() + "/feedback";
  const auto first = post(path, R"({"score": 0.3, "idempotency_key": "a"})");
  const auto retry = post(path, R"({"score": 0.3, "idempotency_key": "a"})");
  EXPECT_EQ(first, retry);
  EXPECT_EQ(first.second.at("recorded").at("bottom_id"), start.at("bottom").at("id"));
  EXPECT_EQ(post(path, R"({"score": 2})").first, 400);
}

}  // namespace
}  // namespace igrec::service
