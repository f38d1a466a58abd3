#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "capfuse/error.hpp"
#include "capfuse/fuser.hpp"
#include "capfuse/metrics.hpp"
#include "capfuse/report.hpp"
#include "capfuse/scorer.hpp"

namespace capfuse {

struct ScorerSpec {
  std::string kind = "file";  // file | http
  std::filesystem::path path;  // scores.jsonl for kind=file
  std::string url;
  int timeout_ms = 30000;
  std::size_t max_concurrency = 0;
};

struct FusionSpec {
  std::string kind = "mock";  // mock | http
  std::filesystem::path path;  // mock rules (optional)
  std::string fallback = "refuse";  // mock only: refuse | join
  std::string url;
  std::optional<std::string> prompt_template;
  double temperature = 0.7;
  int max_tokens = 60;
  bool skip_on_collapse = false;
  std::vector<std::string> prefixes = default_prefixes();
  int attempts = 3;
  int backoff_ms = 500;
  int timeout_ms = 60000;
  std::size_t max_concurrency = 4;
};

struct MetricsSpec {
  std::string cider_variant = "cider-d";  // cider-d | cider
  double cider_sigma = 6.0;
  bool diversity = true;
  bool richness = true;
  std::string tagger_command;  // empty: built-in lexicon tagger
};

struct PipelineConfig {
  std::filesystem::path corpus;
  std::filesystem::path candidates;
  std::filesystem::path output_dir = "out";
  ScorerSpec scorer;
  FusionSpec fusion;
  MetricsSpec metrics;
  std::optional<std::uint64_t> seed;
  std::size_t workers = 0;  // 0: hardware concurrency
  bool deterministic = false;
  bool force = false;
};

// Reads a JSON config; relative paths resolve against the config's directory.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig config_from_json(const json& j, const std::filesystem::path& base_dir = {});
json to_json(const PipelineConfig& config);

// Throws Error(ConfigError) on missing inputs or, in deterministic mode, a missing seed.
void validate_config(const PipelineConfig& config);

// SHA-256 of the canonical config JSON (force excluded).
std::string config_hash(const PipelineConfig& config);

std::unique_ptr<ScorerBackend> make_scorer(const ScorerSpec& spec);
std::unique_ptr<FusionClient> make_fusion_client(const FusionSpec& spec);
FuseConfig make_fuse_config(const FusionSpec& spec);
EvalConfig make_eval_config(const MetricsSpec& spec);

// Names of the files a run writes under output_dir.
inline constexpr const char* kScoredFile = "scored.jsonl";
inline constexpr const char* kRankedFile = "ranked.jsonl";
inline constexpr const char* kFusedFile = "fused.jsonl";
inline constexpr const char* kReportJson = "report.json";
inline constexpr const char* kReportMarkdown = "report.md";
inline constexpr const char* kManifestFile = "manifest.json";

// Thrown when one image fails inside a stage.
class StageError : public Error {
 public:
  StageError(const Error& cause, std::string image_id, std::string stage)
      : Error(cause.code(), stage + " failed for image " + image_id + ": " + cause.detail()),
        image_id_(std::move(image_id)),
        stage_(std::move(stage)) {}

  const std::string& image_id() const { return image_id_; }
  const std::string& stage() const { return stage_; }

 private:
  std::string image_id_;
  std::string stage_;
};

// Runs fn(i) for i in [0, n) on up to `workers` threads. Exceptions are kept
// per index; the caller decides what to do with them.
std::vector<std::exception_ptr> parallel_for(std::size_t n, std::size_t workers,
                                             const std::function<void(std::size_t)>& fn);

std::size_t effective_workers(const PipelineConfig& config, std::size_t backend_limit, std::size_t client_limit);

// Individual subcommands; each reads its inputs from config paths / output_dir.
json stage_ingest(const PipelineConfig& config);
json stage_score(const PipelineConfig& config);
json stage_rank(const PipelineConfig& config);
json stage_fuse(const PipelineConfig& config);
EvalReport stage_eval(const PipelineConfig& config);

// score -> rank -> fuse -> eval. Images already present in fused.jsonl are
// skipped unless config.force. Returns the manifest that was written.
json run_pipeline(const PipelineConfig& config);

}  // namespace capfuse
