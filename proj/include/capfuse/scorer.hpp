#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "capfuse/corpus.hpp"

namespace capfuse {

// Image-text matching outputs for one (image, caption) pair.
struct ItmScore {
  double matching_probability = 0.0;  // in [0, 1]
  double cosine_similarity = 0.0;     // in [-1, 1]
};

// Projected [CLS] embeddings. Both must already be unit norm.
struct EmbeddingPair {
  std::vector<double> image_embedding;
  std::vector<double> text_embedding;
};

struct ScoredCaption {
  std::string model_id;
  std::string text;
  ItmScore itm;
  double blip_score = 0.0;
};

struct RankedSet {
  std::string image_id;
  std::vector<ScoredCaption> scored;  // input order
  std::vector<std::size_t> order;     // indices into scored, best first
  std::pair<ScoredCaption, ScoredCaption> top2;
};

inline constexpr double kUnitNormTolerance = 1e-6;

double cosine(const EmbeddingPair& pair);

// Mean of cosine similarity and matching probability.
double blip_score(const ItmScore& itm);

// What a backend answers for one pair: either a direct cosine similarity or
// the embeddings that produce it. A direct value wins when both are present.
struct BackendScore {
  double matching_probability = 0.0;
  std::optional<double> cosine_similarity;
  std::optional<EmbeddingPair> embeddings;
};

struct ScoreRequest {
  std::string image_id;
  std::string image_uri;
  std::string model_id;
  std::string caption;
};

class ScorerBackend {
 public:
  virtual ~ScorerBackend() = default;
  virtual BackendScore score(const ScoreRequest& request) = 0;
  // 0 means the backend accepts any number of concurrent requests.
  virtual std::size_t max_concurrency() const { return 0; }
};

// Precomputed scores keyed by (image_id, model_id), read from scores.jsonl.
class FileScorerBackend final : public ScorerBackend {
 public:
  explicit FileScorerBackend(const std::filesystem::path& path);
  FileScorerBackend(std::map<std::pair<std::string, std::string>, BackendScore> table)
      : table_(std::move(table)) {}

  BackendScore score(const ScoreRequest& request) override;
  std::size_t size() const { return table_.size(); }

 private:
  std::map<std::pair<std::string, std::string>, BackendScore> table_;
};

// POST {base_url}/score with {"image_uri", "caption"}.
class HttpScorerBackend final : public ScorerBackend {
 public:
  HttpScorerBackend(std::string base_url, std::chrono::milliseconds timeout = std::chrono::seconds(30),
                    std::size_t max_concurrency = 0);

  BackendScore score(const ScoreRequest& request) override;
  std::size_t max_concurrency() const override { return max_concurrency_; }

 private:
  std::string base_url_;
  std::chrono::milliseconds timeout_;
  std::size_t max_concurrency_;
};

BackendScore backend_score_from_json(const json& record);

std::vector<ScoredCaption> score_candidates(const ImageEntry& image, const CandidateSet& set,
                                            ScorerBackend& backend);

// Sort by blip_score descending; ties go to the lexicographically smaller model_id.
RankedSet rank(std::string image_id, std::vector<ScoredCaption> scored);
RankedSet rank(std::vector<ScoredCaption> scored);

// Unordered model pair, stored as (smaller, larger).
using ModelPair = std::pair<std::string, std::string>;
ModelPair make_model_pair(const std::string& a, const std::string& b);

// Share of sets (in percent) whose top-2 came from each model pair.
std::map<ModelPair, double> pair_frequency(std::span<const RankedSet> ranked);

struct ScoreSummary {
  std::size_t count = 0;
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double mean = 0.0;
};

// Quantile at probability p using midpoint-knot linear interpolation
// (Hyndman-Fan type 5: position n*p + 1/2, clamped to the sample range).
double quantile_midpoint(std::span<const double> sorted, double p);

std::map<std::string, ScoreSummary> score_distribution(const std::map<std::string, std::vector<double>>& by_model);

json to_json(const ScoredCaption& scored);
ScoredCaption scored_caption_from_json(const json& record);
json to_json(const RankedSet& ranked);
RankedSet ranked_set_from_json(const json& record);

}  // namespace capfuse
