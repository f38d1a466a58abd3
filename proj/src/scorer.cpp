#include "capfuse/scorer.hpp"

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "capfuse/error.hpp"
#include "capfuse/http_url.hpp"

namespace capfuse {

namespace {

double l2_norm(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

double cosine(const EmbeddingPair& pair) {
  const auto& a = pair.image_embedding;
  const auto& b = pair.text_embedding;
  if (a.size() != b.size() || a.empty()) {
    throw Error(Errc::DimensionMismatch, std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  for (const auto* v : {&a, &b}) {
    const double norm = l2_norm(*v);
    if (!(std::abs(norm - 1.0) <= kUnitNormTolerance)) throw Error(Errc::NotNormalized, fmt_double(norm));
  }
  const double dot = std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
  return std::clamp(dot, -1.0, 1.0);
}

double blip_score(const ItmScore& itm) {
  if (!(itm.matching_probability >= 0.0 && itm.matching_probability <= 1.0)) {
    throw Error(Errc::OutOfRange, "matching_probability=" + fmt_double(itm.matching_probability));
  }
  if (!(itm.cosine_similarity >= -1.0 && itm.cosine_similarity <= 1.0)) {
    throw Error(Errc::OutOfRange, "cosine_similarity=" + fmt_double(itm.cosine_similarity));
  }
  return (itm.cosine_similarity + itm.matching_probability) / 2.0;
}

BackendScore backend_score_from_json(const json& record) {
  BackendScore out;
  auto p = record.find("matching_probability");
  if (p == record.end() || !p->is_number()) throw Error(Errc::MalformedRecord, "missing matching_probability");
  out.matching_probability = p->get<double>();
  if (auto s = record.find("cosine_similarity"); s != record.end() && !s->is_null()) {
    if (!s->is_number()) throw Error(Errc::MalformedRecord, "cosine_similarity is not a number");
    out.cosine_similarity = s->get<double>();
  }
  auto img = record.find("image_embedding");
  auto txt = record.find("text_embedding");
  if (img != record.end() && txt != record.end()) {
    try {
      out.embeddings = EmbeddingPair{img->get<std::vector<double>>(), txt->get<std::vector<double>>()};
    } catch (const json::exception& e) {
      throw Error(Errc::MalformedRecord, std::string("bad embedding: ") + e.what());
    }
  }
  if (!out.cosine_similarity && !out.embeddings) {
    throw Error(Errc::MalformedRecord, "record has neither cosine_similarity nor embeddings");
  }
  return out;
}

FileScorerBackend::FileScorerBackend(const std::filesystem::path& path) {
  for (const auto& line : read_jsonl(path)) {
    const auto& rec = line.value;
    try {
      auto key = std::make_pair(rec.at("image_id").get<std::string>(), rec.at("model_id").get<std::string>());
      if (!table_.emplace(std::move(key), backend_score_from_json(rec)).second) {
        throw Error(Errc::MalformedRecord, "duplicate score record");
      }
    } catch (const json::exception& e) {
      throw Error(Errc::MalformedRecord, path.string() + ":" + std::to_string(line.line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ":" + std::to_string(line.line_no) + ": " + e.detail());
    }
  }
}

BackendScore FileScorerBackend::score(const ScoreRequest& request) {
  auto it = table_.find({request.image_id, request.model_id});
  if (it == table_.end()) throw Error(Errc::MissingScore, request.image_id + "/" + request.model_id);
  return it->second;
}

HttpScorerBackend::HttpScorerBackend(std::string base_url, std::chrono::milliseconds timeout,
                                     std::size_t max_concurrency)
    : base_url_(std::move(base_url)), timeout_(timeout), max_concurrency_(max_concurrency) {}

BackendScore HttpScorerBackend::score(const ScoreRequest& request) {
  const auto url = split_http_url(base_url_);
  httplib::Client client(url.origin);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  const json body{{"image_uri", request.image_uri}, {"caption", request.caption}};
  auto res = client.Post(url.path + "/score", dump_compact(body), "application/json");
  if (!res) {
    throw Error(Errc::BackendUnavailable, base_url_ + ": " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw Error(Errc::BackendUnavailable, base_url_ + ": HTTP " + std::to_string(res->status));
  }
  try {
    return backend_score_from_json(json::parse(res->body));
  } catch (const json::exception& e) {
    throw Error(Errc::BackendUnavailable, base_url_ + ": bad response body: " + e.what());
  }
}

std::vector<ScoredCaption> score_candidates(const ImageEntry& image, const CandidateSet& set,
                                            ScorerBackend& backend) {
  std::vector<ScoredCaption> out;
  out.reserve(set.candidates.size());
  for (const auto& cand : set.candidates) {
    const ScoreRequest req{image.image_id, image.uri, cand.model_id, cand.text};
    try {
      const auto resp = backend.score(req);
      ItmScore itm;
      itm.matching_probability = resp.matching_probability;
      itm.cosine_similarity = resp.cosine_similarity ? *resp.cosine_similarity : cosine(*resp.embeddings);
      out.push_back({cand.model_id, cand.text, itm, blip_score(itm)});
    } catch (const Error& e) {
      if (e.code() == Errc::MissingScore) throw;
      throw Error(e.code(), image.image_id + "/" + cand.model_id + ": " + e.detail());
    }
  }
  return out;
}

RankedSet rank(std::string image_id, std::vector<ScoredCaption> scored) {
  if (scored.size() < 2) throw Error(Errc::TooFewCandidates, image_id.empty() ? "<unnamed>" : image_id);
  RankedSet out;
  out.image_id = std::move(image_id);
  out.order.resize(scored.size());
  std::iota(out.order.begin(), out.order.end(), std::size_t{0});
  std::stable_sort(out.order.begin(), out.order.end(), [&](std::size_t a, std::size_t b) {
    if (scored[a].blip_score != scored[b].blip_score) return scored[a].blip_score > scored[b].blip_score;
    return scored[a].model_id < scored[b].model_id;
  });
  out.top2 = {scored[out.order[0]], scored[out.order[1]]};
  out.scored = std::move(scored);
  return out;
}

RankedSet rank(std::vector<ScoredCaption> scored) { return rank(std::string{}, std::move(scored)); }

ModelPair make_model_pair(const std::string& a, const std::string& b) {
  return a < b ? ModelPair{a, b} : ModelPair{b, a};
}

std::map<ModelPair, double> pair_frequency(std::span<const RankedSet> ranked) {
  if (ranked.empty()) throw Error(Errc::EmptyInput, "pair_frequency needs at least one ranked set");
  std::map<ModelPair, std::size_t> counts;
  for (const auto& r : ranked) ++counts[make_model_pair(r.top2.first.model_id, r.top2.second.model_id)];
  std::map<ModelPair, double> out;
  const double total = static_cast<double>(ranked.size());
  for (const auto& [pair, n] : counts) out[pair] = 100.0 * static_cast<double>(n) / total;
  return out;
}

double quantile_midpoint(std::span<const double> sorted, double p) {
  const auto n = sorted.size();
  if (n == 0) throw Error(Errc::EmptyGroup, "quantile of empty sample");
  const double h = static_cast<double>(n) * p + 0.5;  // 1-based position
  if (h <= 1.0) return sorted.front();
  if (h >= static_cast<double>(n)) return sorted.back();
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const double frac = h - static_cast<double>(lo);
  return sorted[lo - 1] + frac * (sorted[lo] - sorted[lo - 1]);
}

std::map<std::string, ScoreSummary> score_distribution(const std::map<std::string, std::vector<double>>& by_model) {
  std::map<std::string, ScoreSummary> out;
  for (const auto& [model, values] : by_model) {
    if (values.empty()) throw Error(Errc::EmptyGroup, model);
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    ScoreSummary s;
    s.count = sorted.size();
    s.min = sorted.front();
    s.max = sorted.back();
    s.q1 = quantile_midpoint(sorted, 0.25);
    s.median = quantile_midpoint(sorted, 0.5);
    s.q3 = quantile_midpoint(sorted, 0.75);
    // Input order keeps the sum reproducible.
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    out.emplace(model, s);
  }
  return out;
}

json to_json(const ScoredCaption& s) {
  return json{{"model_id", s.model_id},
              {"text", s.text},
              {"matching_probability", s.itm.matching_probability},
              {"cosine_similarity", s.itm.cosine_similarity},
              {"blip_score", s.blip_score}};
}

ScoredCaption scored_caption_from_json(const json& r) {
  ScoredCaption s;
  s.model_id = r.at("model_id").get<std::string>();
  s.text = r.at("text").get<std::string>();
  s.itm.matching_probability = r.at("matching_probability").get<double>();
  s.itm.cosine_similarity = r.at("cosine_similarity").get<double>();
  s.blip_score = r.at("blip_score").get<double>();
  return s;
}

json to_json(const RankedSet& r) {
  json scored = json::array();
  for (const auto& s : r.scored) scored.push_back(to_json(s));
  return json{{"image_id", r.image_id},
              {"scored", std::move(scored)},
              {"order", r.order},
              {"top2", {r.top2.first.model_id, r.top2.second.model_id}}};
}

RankedSet ranked_set_from_json(const json& r) {
  std::vector<ScoredCaption> scored;
  for (const auto& s : r.at("scored")) scored.push_back(scored_caption_from_json(s));
  return rank(r.at("image_id").get<std::string>(), std::move(scored));
}

}  // namespace capfuse
