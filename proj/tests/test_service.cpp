#include <gtest/gtest.h>

#include <filesystem>
#include <thread>

#include "sem/audit.hpp"
#include "sem/http_service.hpp"

using namespace sem;

namespace {

json market(const char* name) { return json::parse(read_file(std::string(SEM_MARKETS_DIR) + "/" + name)); }

json create_body(const char* name, std::uint64_t seed = 1) { return {{"market", market(name)}, {"seed", seed}}; }

json arrivals(const std::vector<json>& list) {
  json a = json::array();
  for (const auto& j : list) a.push_back(j);
  return {{"arrivals", a}};
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("sem-test-" + name + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  return p;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::numerical;
}

json play_impossibility(SessionManager& m, const std::string& id) {
  m.post_arrivals(id, arrivals({{{"type", "a"}}}));
  m.realize(id);
  m.post_arrivals(id, arrivals({{{"type", "b"}}}));
  m.realize(id);
  return m.trace(id);
}

}  // namespace

TEST(Sessions, CreateStartsAtFullSupply) {
  SessionManager m;
  const auto v = m.create(create_body("foster_homes.json"));
  EXPECT_EQ(v["period"], 1);
  EXPECT_EQ(v["status"], "open");
  EXPECT_EQ(v["remaining"]["a"], 2);
  EXPECT_EQ(v["remaining"]["b"], 2);
  EXPECT_EQ(v["periods_completed"], 0);
}

TEST(Sessions, InvalidSpecCarriesFieldPath) {
  SessionManager m;
  auto body = create_body("foster_homes.json");
  body["market"]["arrivals"]["stationary"]["c1"] = 0.9;
  try {
    m.create(body);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_spec);
    EXPECT_FALSE(e.path().empty());
  }
  EXPECT_EQ(code_of([&] { m.create(json{{"seed", 1}}); }), ErrorCode::invalid_spec);
}

TEST(Sessions, IdsAreIndependentAndUnique) {
  SessionManager m;
  const auto a = m.create(create_body("foster_homes.json", 1));
  const auto b = m.create(create_body("foster_homes.json", 2));
  EXPECT_NE(a["id"], b["id"]);
  auto named = create_body("foster_homes.json");
  named["id"] = "ward-7";
  EXPECT_EQ(m.create(named)["id"], "ward-7");
  EXPECT_EQ(code_of([&] { m.create(named); }), ErrorCode::conflict);
  named["id"] = "../etc";
  EXPECT_EQ(code_of([&] { m.create(named); }), ErrorCode::invalid_argument);
  m.post_arrivals(a["id"], arrivals({{{"type", "c1"}}}));
  EXPECT_EQ(m.view(b["id"]).count("pending"), 0u);
}

TEST(Sessions, ImpossibilityInstanceEndToEnd) {
  SessionManager m;
  const std::string id = m.create(create_body("impossibility.json"))["id"];
  const auto r = m.post_arrivals(id, arrivals({{{"type", "a"}}}));
  const auto& lot = r["lotteries"][0]["lottery"];
  EXPECT_NEAR(lot["x"].get<double>() + lot["y"].get<double>(), 1.0, 1e-9);
  const auto done = m.realize(id);
  const std::string got = done["assignment"][0]["object"];
  EXPECT_TRUE(got == "x" || got == "y");
  EXPECT_EQ(done["remaining"][got], 0);
  EXPECT_EQ(done["next_period"], 2);
  m.post_arrivals(id, arrivals({{{"type", "b"}}}));
  EXPECT_EQ(m.realize(id)["status"], "terminated");
  const auto trace = trace_from_json(m.trace(id));
  ASSERT_EQ(trace.periods.size(), 2u);
  EXPECT_TRUE(greedy_check(trace.periods).holds);
  EXPECT_TRUE(envy_check(trace.periods).holds);
  EXPECT_EQ(code_of([&] { m.post_arrivals(id, arrivals({{{"type", "c"}}})); }), ErrorCode::terminated);
  EXPECT_EQ(code_of([&] { m.realize(id); }), ErrorCode::terminated);
  EXPECT_EQ(code_of([&] { m.whatif(id, arrivals({})); }), ErrorCode::terminated);
}

TEST(Sessions, EmptyArrivalsGiveForecastPrices) {
  SessionManager m;
  const std::string id = m.create(create_body("foster_homes_unit.json"))["id"];
  const auto r = m.post_arrivals(id, arrivals({}));
  EXPECT_TRUE(r["lotteries"].empty());
  EXPECT_TRUE(r["converged"].get<bool>());
  EXPECT_GT(r["prices"]["a"].get<double>(), 0.0);
  EXPECT_EQ(m.realize(id)["next_period"], 2);
}

TEST(Sessions, ExhaustedFavoriteForcesNull) {
  SessionManager m;
  const std::string id = m.create(create_body("impossibility.json"))["id"];
  const json only_x = {{"label", "only-x"}, {"tiers", {{"x"}, {"o"}, {"y"}}}};
  const auto first = m.post_arrivals(id, arrivals({only_x}));
  EXPECT_NEAR(first["lotteries"][0]["lottery"]["x"].get<double>(), 1.0, 1e-9);
  m.realize(id);
  const auto second = m.post_arrivals(id, arrivals({only_x}));
  EXPECT_NEAR(second["lotteries"][0]["lottery"]["o"].get<double>(), 1.0, 1e-9);
}

TEST(Sessions, RepostingReplacesPendingAndRealizeNeedsPending) {
  SessionManager m;
  const std::string id = m.create(create_body("foster_homes.json"))["id"];
  EXPECT_EQ(code_of([&] { m.realize(id); }), ErrorCode::conflict);
  const auto a = m.post_arrivals(id, arrivals({{{"type", "c1"}}}));
  EXPECT_EQ(m.post_arrivals(id, arrivals({{{"type", "c1"}}})), a);
  m.post_arrivals(id, arrivals({{{"type", "c2"}}, {{"type", "c2"}}}));
  EXPECT_EQ(m.view(id)["pending"]["arrival_count"], 2);
  EXPECT_EQ(m.realize(id)["assignment"].size(), 2u);
}

TEST(Sessions, WhatIfMatchesPostAndNeverMutates) {
  SessionManager m;
  auto body = create_body("foster_homes.json");
  body["market"]["replicas"] = 5;
  for (auto& o : body["market"]["objects"])
    if (o.contains("supply")) o["supply"] = 10;
  const std::string id = m.create(body)["id"];
  const auto base = arrivals({{{"type", "c1"}}, {{"type", "c1"}}, {{"type", "c2"}}, {{"type", "c1"}}, {{"type", "c2"}}});
  const auto before_view = m.view(id);
  const auto before_trace = m.trace(id);
  const auto probe = m.whatif(id, base);
  EXPECT_EQ(m.view(id), before_view);
  EXPECT_EQ(m.trace(id), before_trace);
  EXPECT_EQ(m.post_arrivals(id, base), probe);
  auto more = base;
  more["arrivals"].push_back({{"type", "c1"}});
  const auto extra = m.whatif(id, more);
  EXPECT_GE(extra["prices"]["a"].get<double>(), probe["prices"]["a"].get<double>() - 0.01);
  const auto pending = m.view(id)["pending"];
  EXPECT_EQ(pending["arrival_count"], 5);
  const auto empty = m.whatif(id, arrivals({}));
  EXPECT_TRUE(empty["lotteries"].empty());
}

TEST(Sessions, AdHocReports) {
  SessionManager m;
  const std::string id = m.create(create_body("foster_homes.json"))["id"];
  const auto r = m.post_arrivals(id, arrivals({{{"label", "picky"}, {"tiers", {{"b"}}}}}));
  EXPECT_NEAR(r["lotteries"][0]["lottery"]["b"].get<double>(), 1.0, 1e-9);
  EXPECT_EQ(code_of([&] { m.post_arrivals(id, arrivals({{{"label", "c1"}, {"tiers", {{"b"}}}}})); }),
            ErrorCode::conflict);
  EXPECT_EQ(code_of([&] { m.post_arrivals(id, arrivals({{{"tiers", {{"nowhere"}}}}})); }),
            ErrorCode::invalid_argument);
  EXPECT_EQ(code_of([&] { m.post_arrivals(id, arrivals({{{"type", "c9"}}})); }), ErrorCode::invalid_argument);
  const auto many = m.post_arrivals(id, arrivals({{{"type", "c1"}}, {{"type", "c1"}}, {{"type", "c1"}}}));
  EXPECT_TRUE(many["count_deviation"].get<bool>());
}

TEST(Sessions, ReplayFromDiskReconstructsState) {
  const auto dir = temp_dir("replay");
  std::string id;
  json trace, view;
  {
    SessionManager m({dir.string(), {}, 2.0});
    id = m.create(create_body("impossibility.json", 9))["id"];
    trace = play_impossibility(m, id);
    view = m.view(id);
    EXPECT_EQ(m.with_session(id, [](Session& s) { return s.log().size(); }), 5u);
  }
  SessionManager again({dir.string(), {}, 2.0});
  EXPECT_EQ(again.trace(id), trace);
  EXPECT_EQ(again.view(id), view);
  std::filesystem::remove_all(dir);
}

TEST(Sessions, SameSeedSameAssignments) {
  SessionManager a, b;
  const std::string ia = a.create(create_body("impossibility.json", 4))["id"];
  const std::string ib = b.create(create_body("impossibility.json", 4))["id"];
  EXPECT_EQ(play_impossibility(a, ia), play_impossibility(b, ib));
}

TEST(Sessions, FullRunTracesPassAudits) {
  SessionManager m;
  auto body = create_body("foster_homes.json", 3);
  body["market"]["replicas"] = 5;
  for (auto& o : body["market"]["objects"])
    if (o.contains("supply")) o["supply"] = 10;
  const std::string id = m.create(body)["id"];
  const auto spec = market_spec_from_json(body["market"]);
  for (int t = 1; t <= spec.horizon() && m.view(id)["status"] == "open"; ++t) {
    json list = json::array();
    for (const auto& a : draw_arrivals(spec, t, 3)) list.push_back({{"type", spec.types[a.type].id}});
    m.post_arrivals(id, {{"arrivals", list}});
    m.realize(id);
  }
  EXPECT_EQ(m.view(id)["status"], "terminated");
  const auto trace = trace_from_json(m.trace(id));
  EXPECT_TRUE(greedy_check(trace.periods).holds);
  EXPECT_TRUE(envy_check(trace.periods).holds);
}

TEST(Sessions, ConcurrentSessionsDoNotInterfere) {
  SessionManager m;
  std::vector<std::string> ids;
  for (int k = 0; k < 4; ++k) ids.push_back(m.create(create_body("impossibility.json", 5))["id"]);
  std::vector<json> traces(4);
  std::vector<std::thread> pool;
  for (int k = 0; k < 4; ++k) pool.emplace_back([&, k] { traces[k] = play_impossibility(m, ids[k]); });
  for (auto& t : pool) t.join();
  for (int k = 1; k < 4; ++k) EXPECT_EQ(traces[k], traces[0]);
}

class HttpTest : public ::testing::Test {
 protected:
  void start(std::string token = {}) {
    http_ = std::make_unique<HttpService>(sessions_, std::move(token));
    port_ = http_->bind_any("127.0.0.1");
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { http_->listen_after_bind(); });
    http_->server().wait_until_ready();
  }
  void TearDown() override {
    if (http_) http_->stop();
    if (thread_.joinable()) thread_.join();
  }
  httplib::Client client() { return httplib::Client("127.0.0.1", port_); }

  SessionManager sessions_;
  std::unique_ptr<HttpService> http_;
  std::thread thread_;
  int port_ = 0;
};

TEST_F(HttpTest, ImpossibilityOverHttp) {
  start();
  auto c = client();
  auto r = c.Post("/sessions", create_body("impossibility.json").dump(), "application/json");
  ASSERT_TRUE(r);
  ASSERT_EQ(r->status, 201);
  const std::string id = json::parse(r->body)["id"];
  r = c.Post("/sessions/" + id + "/arrivals", arrivals({{{"type", "a"}}}).dump(), "application/json");
  ASSERT_EQ(r->status, 200);
  const auto lot = json::parse(r->body)["lotteries"][0]["lottery"];
  EXPECT_NEAR(lot["x"].get<double>() + lot["y"].get<double>(), 1.0, 1e-9);
  r = c.Post("/sessions/" + id + "/whatif", arrivals({{{"type", "a"}}}).dump(), "application/json");
  EXPECT_EQ(json::parse(r->body)["lotteries"][0]["lottery"], lot);
  EXPECT_EQ(c.Post("/sessions/" + id + "/realize", "", "application/json")->status, 200);
  c.Post("/sessions/" + id + "/arrivals", arrivals({{{"type", "c"}}}).dump(), "application/json");
  r = c.Post("/sessions/" + id + "/realize", "", "application/json");
  EXPECT_EQ(json::parse(r->body)["status"], "terminated");
  r = c.Get("/sessions/" + id + "/trace");
  ASSERT_EQ(r->status, 200);
  EXPECT_EQ(json::parse(r->body)["periods"].size(), 2u);
  r = c.Get("/sessions/" + id);
  EXPECT_EQ(json::parse(r->body)["status"], "terminated");
  r = c.Post("/sessions/" + id + "/realize", "", "application/json");
  EXPECT_EQ(r->status, 409);
  EXPECT_EQ(json::parse(r->body)["error"]["code"], "terminated");
}

TEST_F(HttpTest, ErrorsCarryCodes) {
  start();
  auto c = client();
  auto r = c.Get("/sessions/nope");
  EXPECT_EQ(r->status, 404);
  EXPECT_EQ(json::parse(r->body)["error"]["code"], "not_found");
  r = c.Post("/sessions", "{not json", "application/json");
  EXPECT_EQ(r->status, 400);
  EXPECT_EQ(json::parse(r->body)["error"]["code"], "invalid_argument");
  auto bad = create_body("foster_homes.json");
  bad["market"]["objects"][0]["supply"] = -1;
  r = c.Post("/sessions", bad.dump(), "application/json");
  EXPECT_EQ(r->status, 400);
  const auto err = json::parse(r->body)["error"];
  EXPECT_EQ(err["code"], "invalid_spec");
  EXPECT_TRUE(err.contains("path"));
  r = c.Get("/health");
  EXPECT_EQ(r->status, 200);
}

TEST_F(HttpTest, BearerTokenRequiredWhenConfigured) {
  start("s3cret");
  auto c = client();
  EXPECT_EQ(c.Get("/sessions")->status, 401);
  httplib::Headers h{{"Authorization", "Bearer s3cret"}};
  EXPECT_EQ(c.Get("/sessions", h)->status, 200);
}
