#include <doctest.h>
#include <httplib.h>

#include <cmath>
#include <thread>

#include "capfuse/error.hpp"
#include "capfuse/study.hpp"
#include "capfuse/study_server.hpp"
#include "tempdir.hpp"

using namespace capfuse;
using testing_support::TempDir;

namespace {

const std::map<std::string, std::string> kSixCaptions{
    {"BLIP-2", "a cup of utensils"},     {"OFA", "scissors in a cup"},       {"GIT", "a metal cup"},
    {"ExpNet-v2", "a cup on a table"},   {"ViT-GPT2", "a vase with flowers"}, {"fusion", "A metal cup with scissors."}};

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no capfuse::Error thrown");
  return Errc::ConfigError;
}

std::string model_of(const IssuedBallot& b, std::size_t position) {
  return b.key_to_model.at(b.ballot.options[position].option_key);
}

std::string key_for(const IssuedBallot& b, const std::string& model) {
  for (const auto& [k, m] : b.key_to_model) {
    if (m == model) return k;
  }
  FAIL("model not on ballot");
  return {};
}

}  // namespace

TEST_CASE("make_ballot is seed-deterministic and complete") {
  const ImageEntry img{"img", "x.jpg", {}};
  Rng a(42), b(42);
  const auto x = make_ballot(img, kSixCaptions, a);
  const auto y = make_ballot(img, kSixCaptions, b);
  REQUIRE(x.ballot.options.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) CHECK(model_of(x, i) == model_of(y, i));
  std::set<std::string> models;
  for (std::size_t i = 0; i < 6; ++i) models.insert(model_of(x, i));
  CHECK(models.size() == 6);
  CHECK(x.ballot.image_uri == "/api/image/img");
  for (const auto& o : x.ballot.options) {
    CHECK(o.option_key.size() == 16);
    CHECK(kSixCaptions.count(o.option_key) == 0);
  }
  CHECK(code_of([&] { make_ballot(img, {{"only", "x"}}, a); }) == Errc::TooFewOptions);
}

TEST_CASE("two options appear in both orders about equally") {
  const ImageEntry img{"img", "x.jpg", {}};
  Rng rng(7);
  int a_first = 0;
  const int draws = 1000;
  for (int i = 0; i < draws; ++i) {
    a_first += make_ballot(img, {{"A", "x"}, {"B", "y"}}, rng).ballot.options[0].text == "x";
  }
  const double sigma = std::sqrt(draws * 0.25);
  CHECK(a_first > 0);
  CHECK(a_first < draws);
  CHECK(std::abs(a_first - draws / 2.0) <= 4 * sigma);
}

TEST_CASE("each option visits each position with frequency 1/6") {
  const ImageEntry img{"img", "x.jpg", {}};
  Rng rng(2024);
  const int draws = 10000;
  std::map<std::pair<std::string, std::size_t>, int> hits;
  for (int i = 0; i < draws; ++i) {
    const auto b = make_ballot(img, kSixCaptions, rng);
    for (std::size_t p = 0; p < 6; ++p) ++hits[{model_of(b, p), p}];
  }
  const double expect = draws / 6.0;
  const double sigma = std::sqrt(draws * (1.0 / 6) * (5.0 / 6));
  CHECK(hits.size() == 36);
  for (const auto& [cell, n] : hits) CHECK_MESSAGE(std::abs(n - expect) <= 4 * sigma, cell.first << "@" << cell.second);
}

TEST_CASE("summarize_votes") {
  const std::map<std::string, std::string> keys{{"ka", "A"}, {"kb", "B"}, {"kc", "C"}};
  std::vector<Vote> g3{{"b1", "w1", WorkerClass::Generic, "ka", 1},
                       {"b2", "w2", WorkerClass::Generic, "ka", 2},
                       {"b3", "w3", WorkerClass::Generic, "ka", 3}};
  auto s = summarize_votes(g3, keys);
  CHECK(*s.models["A"].generic_pct == 100.0);
  CHECK(*s.models["B"].generic_pct == 0.0);
  CHECK_FALSE(s.models["A"].expert_pct.has_value());
  CHECK(s.models["A"].average_pct == 100.0);

  std::vector<Vote> mixed{{"b1", "w1", WorkerClass::Generic, "ka", 1},
                          {"b2", "w2", WorkerClass::Generic, "kb", 2},
                          {"b3", "e1", WorkerClass::Expert, "ka", 3},
                          {"b4", "e2", WorkerClass::Expert, "ka", 4}};
  s = summarize_votes(mixed, keys);
  CHECK(s.models["A"].average_pct == 75.0);
  CHECK(s.models["B"].average_pct == 25.0);
  CHECK(s.models["C"].average_pct == 0.0);
  double g = 0, e = 0, avg = 0;
  for (const auto& [m, row] : s.models) {
    g += *row.generic_pct;
    e += *row.expert_pct;
    avg += row.average_pct;
  }
  CHECK(std::abs(g - 100) <= 1e-9);
  CHECK(std::abs(e - 100) <= 1e-9);
  CHECK(std::abs(avg - 100) <= 1e-9);

  std::vector<Vote> bad{{"b", "w", WorkerClass::Generic, "nope", 0}};
  CHECK(code_of([&] { summarize_votes(bad, keys); }) == Errc::UnresolvableKey);
}

TEST_CASE("agreement_histogram") {
  CHECK(agreement_histogram({{"i", {"M1", "M1", "M2"}}}) == std::map<int, std::size_t>{{2, 1}});
  CHECK(agreement_histogram({{"i", std::vector<std::string>(6, "M1")}}) == std::map<int, std::size_t>{{6, 1}});
  const std::map<std::string, std::vector<std::string>> engineered{
      {"i1", {"A", "A", "B", "C", "D", "E"}},
      {"i2", {"B", "B", "A", "C", "D", "E"}},
      {"i3", {"C", "C", "C", "A", "B", "D"}},
      {"i4", {"D", "D", "D", "D", "A", "B"}},
      {"i5", {"E", "E", "E", "E", "E", "A"}}};
  CHECK(agreement_histogram(engineered) == std::map<int, std::size_t>{{2, 2}, {3, 1}, {4, 1}, {5, 1}});
}

TEST_CASE("store enforces ballot, quota and repeat rules") {
  TempDir dir;
  const std::vector<ImageEntry> images{{"img", "x.jpg", {}}};
  StudyStore store(images, {{"img", kSixCaptions}}, dir / "votes.jsonl", {3, 1});

  std::vector<Ballot> ballots;
  for (int w = 0; w < 4; ++w) ballots.push_back(*store.issue("w" + std::to_string(w), WorkerClass::Generic));
  auto vote = [&](const Ballot& b, std::size_t option) {
    return store.record(Vote{b.ballot_id, "", WorkerClass::Generic, b.options[option].option_key, 0});
  };

  const auto rec = vote(ballots[0], 0);
  CHECK(store.votes()->size() == 1);
  CHECK(rec.vote.worker_id == "w0");
  CHECK(kSixCaptions.count(rec.model_id) == 1);
  CHECK(code_of([&] { vote(ballots[0], 1); }) == Errc::DuplicateVote);
  vote(ballots[1], 2);
  vote(ballots[2], 3);
  CHECK(code_of([&] { vote(ballots[3], 0); }) == Errc::ClassQuotaExceeded);
  CHECK(store.votes()->size() == 3);

  // Quota reached: generic workers get nothing, experts still do.
  CHECK_FALSE(store.issue("w9", WorkerClass::Generic).has_value());
  const auto ex = store.issue("e1", WorkerClass::Expert);
  REQUIRE(ex.has_value());
  CHECK(code_of([&] { store.record(Vote{ex->ballot_id, "", WorkerClass::Generic, "0000000000000000", 0}); }) ==
        Errc::InvalidChoice);
  CHECK(code_of([&] { store.record(Vote{"unknown", "", WorkerClass::Generic, "x", 0}); }) == Errc::UnknownBallot);

  // A worker holding two ballots for one image can only use one of them.
  const auto e2a = *store.issue("e2", WorkerClass::Expert);
  const auto e2b = *store.issue("e2", WorkerClass::Expert);
  store.record(Vote{e2a.ballot_id, "", WorkerClass::Expert, e2a.options[0].option_key, 0});
  CHECK(code_of([&] { store.record(Vote{e2b.ballot_id, "", WorkerClass::Expert, e2b.options[0].option_key, 0}); }) ==
        Errc::RepeatRater);
  CHECK_FALSE(store.issue("e2", WorkerClass::Expert).has_value());
}

TEST_CASE("class and identity come from the issued ballot") {
  TempDir dir;
  StudyStore store({{"img", "x.jpg", {}}}, {{"img", kSixCaptions}}, dir / "votes.jsonl", {3, 5});
  const auto b = *store.issue("generic-worker", WorkerClass::Generic);
  const auto rec = store.record(Vote{b.ballot_id, "spoofed", WorkerClass::Expert, b.options[0].option_key, 0});
  CHECK(rec.vote.worker_id == "generic-worker");
  CHECK(rec.vote.worker_class == WorkerClass::Generic);
}

TEST_CASE("the vote log is append-only and replays to the same summary") {
  TempDir dir;
  const auto log = dir / "votes.jsonl";
  const std::vector<ImageEntry> images{{"i1", "1.jpg", {}}, {"i2", "2.jpg", {}}};
  const std::map<std::string, std::map<std::string, std::string>> caps{{"i1", kSixCaptions}, {"i2", kSixCaptions}};
  std::string before;
  json summary;
  std::map<int, std::size_t> hist;
  {
    StudyStore store(images, caps, log, {3, 9});
    for (int w = 0; w < 4; ++w) {
      const auto cls = w % 2 ? WorkerClass::Expert : WorkerClass::Generic;
      while (auto b = store.issue("w" + std::to_string(w), cls)) {
        store.record(Vote{b->ballot_id, "", cls, b->options[static_cast<std::size_t>(w) % 6].option_key, 0});
        if (before.empty()) before = testing_support::slurp(log);
      }
    }
    summary = to_json(store.summary());
    hist = store.histogram();
    CHECK(store.votes()->size() == 8);
  }
  const auto after = testing_support::slurp(log);
  CHECK(after.compare(0, before.size(), before) == 0);

  StudyStore replay(images, caps, log, {3, 1});
  CHECK(to_json(replay.summary()) == summary);
  CHECK(replay.histogram() == hist);
  CHECK(replay.summary().models.size() == 6);
  CHECK_FALSE(replay.issue("w0", WorkerClass::Generic).has_value());
}

TEST_CASE("study HTTP API") {
  TempDir dir;
  const auto image_path = dir.write("pic.jpg", "JPEGBYTES");
  const std::vector<ImageEntry> images{{"img-1", image_path.string(), {}}, {"img-2", "https://example.org/i.jpg", {}}};
  StudyStore store(images, {{"img-1", kSixCaptions}, {"img-2", kSixCaptions}}, dir / "votes.jsonl", {1, 3});
  StudyServer server(store, {"s3cret", std::nullopt});
  const int port = server.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client cli("127.0.0.1", port);
  std::vector<std::string> bodies;
  auto get = [&](const std::string& path) {
    auto r = cli.Get(path);
    REQUIRE(r);
    bodies.push_back(r->body);
    return r;
  };
  auto post = [&](const json& body) {
    auto r = cli.Post("/api/vote", body.dump(), "application/json");
    REQUIRE(r);
    bodies.push_back(r->body);
    return r;
  };

  CHECK(get("/api/health")->status == 200);
  CHECK(get("/api/task")->status == 400);
  CHECK(get("/api/task?worker=w1&class=boss")->status == 400);

  auto r = get("/api/task?worker=w1&class=generic");
  REQUIRE(r->status == 200);
  const auto ballot = json::parse(r->body);
  CHECK(ballot["options"].size() == 6);
  CHECK(ballot["image_id"] == "img-1");
  const auto key = ballot["options"][0]["option_key"].get<std::string>();
  const auto id = ballot["ballot_id"].get<std::string>();

  // Reloading the same image gives a fresh ballot.
  const auto reload = json::parse(get("/api/task?worker=w1&class=generic")->body);
  CHECK(reload["ballot_id"] != ballot["ballot_id"]);

  CHECK(post({{"ballot_id", id}, {"choice", "bogus"}})->status == 400);
  CHECK(post({{"ballot_id", id}, {"choice", key}})->status == 200);
  CHECK(post({{"ballot_id", id}, {"choice", key}})->status == 409);
  CHECK(post({{"ballot_id", "nope"}, {"choice", key}})->status == 410);
  CHECK(post({{"ballot_id", reload["ballot_id"]}, {"choice", reload["options"][1]["option_key"]}})->status == 409);
  auto raw = cli.Post("/api/vote", "not json", "application/json");
  REQUIRE(raw);
  CHECK(raw->status == 400);

  const auto next = json::parse(get("/api/task?worker=w1&class=generic")->body);
  CHECK(next["image_id"] == "img-2");
  const auto other = json::parse(get("/api/task?worker=w2&class=generic")->body);
  CHECK(other["image_id"] == "img-2");
  CHECK(post({{"ballot_id", next["ballot_id"]}, {"choice", next["options"][0]["option_key"]}})->status == 200);
  CHECK(post({{"ballot_id", other["ballot_id"]}, {"choice", other["options"][0]["option_key"]}})->status == 409);
  CHECK(json::parse(get("/api/task?worker=w3&class=generic")->body)["done"] == true);

  auto img = get("/api/image/img-1");
  CHECK(img->status == 200);
  CHECK(img->body == "JPEGBYTES");
  CHECK(get("/api/image/img-2")->status == 302);
  CHECK(get("/api/image/missing")->status == 404);

  CHECK(get("/api/results")->status == 403);
  httplib::Headers wrong{{"Authorization", "Bearer nope"}};
  auto denied = cli.Get("/api/results", wrong);
  REQUIRE(denied);
  CHECK(denied->status == 403);
  bodies.push_back(denied->body);

  for (const auto& body : bodies) {
    for (const auto& [model, text] : kSixCaptions) CHECK_MESSAGE(body.find(model) == std::string::npos, body);
  }

  httplib::Headers admin{{"Authorization", "Bearer s3cret"}};
  auto results = cli.Get("/api/results", admin);
  REQUIRE(results);
  CHECK(results->status == 200);
  const auto j = json::parse(results->body);
  CHECK(j["votes"] == 2);
  CHECK(j["summary"]["models"].size() == 6);
  CHECK(j["agreement_histogram"]["1"] == 2);

  server.stop();
  t.join();
}
