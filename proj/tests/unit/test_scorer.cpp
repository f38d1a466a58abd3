#include <doctest.h>
#include <httplib.h>

#include <cmath>
#include <numeric>
#include <thread>

#include "capfuse/error.hpp"
#include "capfuse/scorer.hpp"
#include "tempdir.hpp"

using namespace capfuse;

namespace {

ScoredCaption sc(std::string model, double blip) { return {std::move(model), "t", {0.0, 0.0}, blip}; }

std::vector<ScoredCaption> figure3() {
  const std::vector<std::tuple<std::string, double, double>> rows{
      {"ViT-GPT2", 0.0689, 0.3646}, {"GIT", 0.7402, 0.4180}, {"BLIP-2", 0.9907, 0.4846},
      {"ExpNet-v2", 0.5186, 0.4272}, {"OFA", 0.9745, 0.4891}};
  std::vector<ScoredCaption> out;
  for (const auto& [m, p, s] : rows) {
    ItmScore itm{p, s};
    out.push_back({m, m + " caption", itm, blip_score(itm)});
  }
  return out;
}

}  // namespace

TEST_CASE("cosine on unit vectors") {
  CHECK(cosine({{1, 0}, {1, 0}}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cosine({{1, 0}, {0, 1}}) == doctest::Approx(0.0));
  CHECK(cosine({{0.6, 0.8}, {0.8, 0.6}}) == doctest::Approx(0.96).epsilon(1e-12));
  CHECK_THROWS_AS(cosine({{1, 0}, {1, 0, 0}}), Error);
  try {
    cosine({{1, 1}, {1, 0}});
    FAIL("expected NotNormalized");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NotNormalized);
  }
}

TEST_CASE("blip_score is the mean of the two ITM outputs") {
  CHECK(std::abs(blip_score({0.9907, 0.4846}) - 0.73765) < 1e-12);
  CHECK(std::abs(blip_score({0.0689, 0.3646}) - 0.21675) < 1e-12);
  CHECK(blip_score({0.0, 0.0}) == 0.0);
  CHECK_THROWS_AS(blip_score({1.5, 0.0}), Error);
  CHECK_THROWS_AS(blip_score({0.5, -1.5}), Error);
}

TEST_CASE("blip_score is monotone in each field") {
  Rng rng(11);
  auto u = [&] { return static_cast<double>(uniform_below(rng, 1000001)) / 1e6; };
  for (int i = 0; i < 2000; ++i) {
    const double p = u(), s = 2 * u() - 1, dp = u() * (1 - p), ds = u() * (1 - s);
    CHECK(blip_score({p + dp, s}) >= blip_score({p, s}));
    CHECK(blip_score({p, s + ds}) >= blip_score({p, s}));
  }
}

TEST_CASE("figure 3 ranking") {
  const auto ranked = rank("cup", figure3());
  std::vector<std::string> models;
  for (auto i : ranked.order) models.push_back(ranked.scored[i].model_id);
  CHECK(models == std::vector<std::string>{"BLIP-2", "OFA", "GIT", "ExpNet-v2", "ViT-GPT2"});
  CHECK(ranked.top2.first.model_id == "BLIP-2");
  CHECK(ranked.top2.second.model_id == "OFA");
  const std::vector<double> printed{0.7376, 0.7318, 0.5791, 0.4729, 0.2167};
  for (std::size_t k = 0; k < printed.size(); ++k) {
    CHECK(std::abs(ranked.scored[ranked.order[k]].blip_score - printed[k]) <= 5e-5 + 1e-12);
  }
}

TEST_CASE("rank tie-break and small cases") {
  auto r = rank({sc("b", 0.5), sc("a", 0.5)});
  CHECK(r.scored[r.order[0]].model_id == "a");
  r = rank({sc("x", 0.1), sc("y", 0.9)});
  CHECK(r.order == std::vector<std::size_t>{1, 0});
  CHECK_THROWS_AS(rank({sc("x", 0.1)}), Error);
}

TEST_CASE("rank properties on random sets") {
  Rng rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const auto n = 2 + uniform_below(rng, 6);
    std::vector<ScoredCaption> v;
    for (std::size_t i = 0; i < n; ++i) {
      v.push_back(sc("m" + std::to_string(i), static_cast<double>(uniform_below(rng, 5)) / 4.0));
    }
    const auto r = rank(v);
    auto perm = r.order;
    std::sort(perm.begin(), perm.end());
    std::vector<std::size_t> expect(n);
    std::iota(expect.begin(), expect.end(), 0);
    CHECK(perm == expect);
    for (std::size_t k = 1; k < n; ++k) {
      CHECK(r.scored[r.order[k - 1]].blip_score >= r.scored[r.order[k]].blip_score);
    }
    // Re-ranking the already ordered list is idempotent.
    std::vector<ScoredCaption> ordered;
    for (auto i : r.order) ordered.push_back(r.scored[i]);
    const auto again = rank(ordered);
    std::vector<std::size_t> identity(n);
    std::iota(identity.begin(), identity.end(), 0);
    CHECK(again.order == identity);
    // A common offset leaves the order alone.
    auto shifted = v;
    for (auto& s : shifted) s.blip_score += 0.25;
    CHECK(rank(shifted).order == r.order);
  }
}

TEST_CASE("pair_frequency") {
  auto set = [](std::string a, std::string b) {
    RankedSet r;
    r.top2 = {sc(std::move(a), 1), sc(std::move(b), 0.5)};
    return r;
  };
  std::vector<RankedSet> sets{set("B", "O"), set("B", "O"), set("G", "O")};
  auto f = pair_frequency(sets);
  CHECK(f.size() == 2);
  CHECK(f[make_model_pair("B", "O")] == doctest::Approx(200.0 / 3));
  CHECK(f[make_model_pair("G", "O")] == doctest::Approx(100.0 / 3));

  std::vector<RankedSet> one{set("B", "O")};
  CHECK(pair_frequency(one)[make_model_pair("O", "B")] == 100.0);

  std::vector<RankedSet> mixed{set("B", "O"), set("O", "B")};
  CHECK(pair_frequency(mixed).size() == 1);
  CHECK_THROWS_AS(pair_frequency(std::vector<RankedSet>{}), Error);

  Rng rng(5);
  std::vector<RankedSet> many;
  for (int i = 0; i < 997; ++i) {
    const auto a = uniform_below(rng, 5), b = (a + 1 + uniform_below(rng, 4)) % 5;
    many.push_back(set("m" + std::to_string(a), "m" + std::to_string(b)));
  }
  double sum = 0;
  for (const auto& [k, v] : pair_frequency(many)) sum += v;
  CHECK(std::abs(sum - 100.0) <= 1e-9);
}

TEST_CASE("quantiles use the midpoint convention") {
  auto d = score_distribution({{"a", {0, 1}}, {"b", {1, 1, 1}}, {"c", {4, 2, 1, 3}}});
  CHECK(d["a"].median == doctest::Approx(0.5));
  CHECK(d["b"].min == 1);
  CHECK(d["b"].q1 == 1);
  CHECK(d["b"].median == 1);
  CHECK(d["b"].q3 == 1);
  CHECK(d["b"].max == 1);
  CHECK(d["c"].q1 == doctest::Approx(1.5));
  CHECK(d["c"].median == doctest::Approx(2.5));
  CHECK(d["c"].q3 == doctest::Approx(3.5));
  CHECK(d["c"].mean == doctest::Approx(2.5));
  CHECK(d["c"].count == 4);
  CHECK_THROWS_AS(score_distribution({{"e", {}}}), Error);
}

TEST_CASE("file backend, direct and embedding modes") {
  testing_support::TempDir dir;
  const double s = 0.6 * 0.8 + 0.8 * 0.6;
  const auto p = dir.write("scores.jsonl",
                           R"({"image_id":"i","model_id":"direct","matching_probability":1.0,"cosine_similarity":0.96})"
                           "\n"
                           R"({"image_id":"i","model_id":"emb","matching_probability":1.0,"image_embedding":[0.6,0.8],"text_embedding":[0.8,0.6]})"
                           "\n"
                           R"({"image_id":"i","model_id":"same","matching_probability":1.0,"image_embedding":[1,0],"text_embedding":[1,0]})"
                           "\n");
  FileScorerBackend backend(p);
  CHECK(backend.size() == 3);
  ImageEntry img{"i", "i.jpg", {}};
  CandidateSet set{"i", {{"direct", "x"}, {"emb", "y"}, {"same", "z"}}};
  const auto scored = score_candidates(img, set, backend);
  REQUIRE(scored.size() == 3);
  CHECK(std::abs(scored[0].blip_score - scored[1].blip_score) <= 1e-9);
  CHECK(scored[1].itm.cosine_similarity == doctest::Approx(s));
  CHECK(scored[2].blip_score == doctest::Approx(1.0));

  CandidateSet missing{"i", {{"direct", "x"}, {"nope", "y"}}};
  try {
    score_candidates(img, missing, backend);
    FAIL("expected MissingScore");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::MissingScore);
  }
}

TEST_CASE("http backend wire contract") {
  httplib::Server srv;
  json last;
  srv.Post("/score", [&](const httplib::Request& req, httplib::Response& res) {
    last = json::parse(req.body);
    if (last["caption"] == "fail") {
      res.status = 503;
      return;
    }
    res.set_content(R"({"matching_probability":0.8,"cosine_similarity":0.4})", "application/json");
  });
  const int port = srv.bind_to_any_port("127.0.0.1");
  std::thread t([&] { srv.listen_after_bind(); });
  srv.wait_until_ready();

  HttpScorerBackend backend("http://127.0.0.1:" + std::to_string(port) + "/", std::chrono::seconds(5));
  const auto r = backend.score({"i", "file:///x.jpg", "m", "a dog"});
  CHECK(r.matching_probability == doctest::Approx(0.8));
  CHECK(*r.cosine_similarity == doctest::Approx(0.4));
  CHECK(last["image_uri"] == "file:///x.jpg");
  CHECK(last["caption"] == "a dog");
  try {
    backend.score({"i", "u", "m", "fail"});
    FAIL("expected BackendUnavailable");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::BackendUnavailable);
  }
  srv.stop();
  t.join();

  HttpScorerBackend dead("http://127.0.0.1:" + std::to_string(port), std::chrono::milliseconds(300));
  CHECK_THROWS_AS(dead.score({"i", "u", "m", "x"}), Error);
}

TEST_CASE("ranked set json round-trip") {
  const auto r = rank("cup", figure3());
  const auto back = ranked_set_from_json(to_json(r));
  CHECK(back.order == r.order);
  CHECK(back.top2.first.model_id == r.top2.first.model_id);
  CHECK(to_json(back).dump() == to_json(r).dump());
}
