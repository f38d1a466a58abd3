#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "capfuse/corpus.hpp"
#include "capfuse/fuser.hpp"
#include "capfuse/metrics.hpp"
#include "capfuse/pos.hpp"
#include "capfuse/scorer.hpp"

namespace capfuse {

inline constexpr const char* kBestRow = "Our (Best)";
inline constexpr const char* kFusionRow = "Our (Fusion)";
inline constexpr const char* kGroundTruthColumn = "Ground-Truth";
// model_id under which a scorer backend may provide scores for fused captions.
inline constexpr const char* kFusionModelId = "fusion";

struct QualityRow {
  std::string model;
  std::size_t images = 0;
  std::optional<double> bleu4;
  std::optional<double> cider;
  std::optional<double> blip_score_mean;
  std::size_t blip_score_count = 0;
  std::optional<double> mbleu;
  std::optional<double> div1;
  std::optional<double> div2;
  std::vector<std::string> best;    // column names where this row is best
  std::vector<std::string> second;  // column names where this row is second best
};

struct EvalReport {
  std::vector<QualityRow> quality;
  std::vector<std::string> richness_columns;
  std::map<std::string, RichnessRow> richness;
  std::map<ModelPair, double> pair_frequency;
  std::map<std::string, ScoreSummary> score_distribution;
  json conventions;
};

struct EvalConfig {
  CiderOptions cider;
  bool diversity = true;
  bool richness = true;
  PosTagger* tagger = nullptr;  // LexiconTagger when null
};

struct EvalInputs {
  std::vector<ImageEntry> corpus;
  std::vector<CandidateSet> candidates;
  std::vector<RankedSet> ranked;          // optional; enables BLIPScore and "Our (Best)"
  std::vector<FusedRecord> fused;         // optional; enables "Our (Fusion)"
  std::map<std::string, double> fusion_blip_scores;  // image_id -> BLIPScore of the fused caption
};

EvalReport eval_report(const EvalInputs& inputs, const EvalConfig& config = {});

json to_json(const EvalReport& report);
std::string render_markdown(const EvalReport& report);
// Rebuilds the markdown rendering from report.json.
std::string render_markdown(const json& report);

}  // namespace capfuse
