#include "capfuse/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <map>
#include <set>
#include <thread>

#include "capfuse/corpus.hpp"
#include "capfuse/error.hpp"

namespace capfuse {

namespace {

using Clock = std::chrono::steady_clock;

[[noreturn]] void config_error(const std::string& what) { throw Error(Errc::ConfigError, what); }

void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& section) {
  if (!j.is_object()) config_error(section + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      config_error("unknown key '" + key + "' in " + section);
    }
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path.lexically_normal();
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    config_error(std::string("bad value for '") + key + "': " + e.what());
  }
}

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

struct JoinedImage {
  ImageEntry image;
  CandidateSet candidates;
};

std::vector<JoinedImage> load_joined(const PipelineConfig& config) {
  auto corpus = load_corpus(config.corpus);
  auto sets = load_candidates(config.candidates);
  std::map<std::string, CandidateSet> by_id;
  for (auto& s : sets) by_id.emplace(s.image_id, std::move(s));
  std::vector<JoinedImage> out;
  out.reserve(corpus.size());
  for (auto& img : corpus) {
    auto it = by_id.find(img.image_id);
    if (it == by_id.end()) throw Error(Errc::KeyMismatch, "no candidates for image " + img.image_id);
    out.push_back({std::move(img), std::move(it->second)});
    by_id.erase(it);
  }
  if (!by_id.empty()) throw Error(Errc::KeyMismatch, "candidates for unknown image " + by_id.begin()->first);
  return out;
}

template <typename T, typename Parse>
std::map<std::string, T> read_keyed(const std::filesystem::path& path, Parse parse) {
  std::map<std::string, T> out;
  if (!std::filesystem::exists(path)) return out;
  for (const auto& line : read_jsonl(path)) {
    try {
      T value = parse(line.value);
      auto id = line.value.at("image_id").template get<std::string>();
      out.insert_or_assign(std::move(id), std::move(value));
    } catch (const json::exception& e) {
      throw Error(Errc::MalformedRecord, path.string() + ":" + std::to_string(line.line_no) + ": " + e.what());
    }
  }
  return out;
}

// Rethrows the first failure in index order as a StageError.
void raise_first(const std::vector<std::exception_ptr>& errors, const std::vector<std::string>& ids,
                 const std::vector<std::string>& stages) {
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const StageError&) {
      throw;
    } catch (const Error& e) {
      throw StageError(e, ids[i], stages[i]);
    } catch (const std::exception& e) {
      throw StageError(Error(Errc::BackendUnavailable, e.what()), ids[i], stages[i]);
    }
  }
}

std::size_t min_nonzero(std::size_t a, std::size_t b) {
  if (a == 0) return b;
  if (b == 0) return a;
  return std::min(a, b);
}

json previous_manifest(const std::filesystem::path& dir) {
  const auto path = dir / kManifestFile;
  if (!std::filesystem::exists(path)) return json::object();
  std::ifstream in(path);
  try {
    return json::parse(in);
  } catch (const json::exception&) {
    return json::object();
  }
}

}  // namespace

PipelineConfig config_from_json(const json& j, const std::filesystem::path& base) {
  reject_unknown_keys(j, {"corpus", "candidates", "output_dir", "scorer", "fusion", "metrics", "seed", "workers",
                          "deterministic"},
                      "config");
  PipelineConfig c;
  c.corpus = resolve(base, get_or<std::string>(j, "corpus", ""));
  c.candidates = resolve(base, get_or<std::string>(j, "candidates", ""));
  c.output_dir = resolve(base, get_or<std::string>(j, "output_dir", "out"));
  if (auto it = j.find("seed"); it != j.end() && !it->is_null()) c.seed = get_or<std::uint64_t>(j, "seed", 0);
  c.workers = get_or<std::size_t>(j, "workers", 0);
  c.deterministic = get_or<bool>(j, "deterministic", false);

  if (auto it = j.find("scorer"); it != j.end()) {
    const auto& s = *it;
    reject_unknown_keys(s, {"kind", "path", "url", "timeout_ms", "max_concurrency"}, "scorer");
    c.scorer.kind = get_or<std::string>(s, "kind", "file");
    c.scorer.path = resolve(base, get_or<std::string>(s, "path", ""));
    c.scorer.url = get_or<std::string>(s, "url", "");
    c.scorer.timeout_ms = get_or<int>(s, "timeout_ms", c.scorer.timeout_ms);
    c.scorer.max_concurrency = get_or<std::size_t>(s, "max_concurrency", 0);
  }
  if (auto it = j.find("fusion"); it != j.end()) {
    const auto& f = *it;
    reject_unknown_keys(f, {"kind", "path", "fallback", "url", "template", "temperature", "max_tokens",
                            "skip_on_collapse", "prefixes", "attempts", "backoff_ms", "timeout_ms",
                            "max_concurrency"},
                        "fusion");
    c.fusion.kind = get_or<std::string>(f, "kind", "mock");
    c.fusion.path = resolve(base, get_or<std::string>(f, "path", ""));
    c.fusion.fallback = get_or<std::string>(f, "fallback", "refuse");
    c.fusion.url = get_or<std::string>(f, "url", "");
    if (auto t = f.find("template"); t != f.end() && !t->is_null()) c.fusion.prompt_template = t->get<std::string>();
    c.fusion.temperature = get_or<double>(f, "temperature", c.fusion.temperature);
    c.fusion.max_tokens = get_or<int>(f, "max_tokens", c.fusion.max_tokens);
    c.fusion.skip_on_collapse = get_or<bool>(f, "skip_on_collapse", false);
    c.fusion.prefixes = get_or<std::vector<std::string>>(f, "prefixes", c.fusion.prefixes);
    c.fusion.attempts = get_or<int>(f, "attempts", c.fusion.attempts);
    c.fusion.backoff_ms = get_or<int>(f, "backoff_ms", c.fusion.backoff_ms);
    c.fusion.timeout_ms = get_or<int>(f, "timeout_ms", c.fusion.timeout_ms);
    c.fusion.max_concurrency = get_or<std::size_t>(f, "max_concurrency", c.fusion.max_concurrency);
  }
  if (auto it = j.find("metrics"); it != j.end()) {
    const auto& m = *it;
    reject_unknown_keys(m, {"cider_variant", "cider_sigma", "diversity", "richness", "tagger_command"}, "metrics");
    c.metrics.cider_variant = get_or<std::string>(m, "cider_variant", c.metrics.cider_variant);
    c.metrics.cider_sigma = get_or<double>(m, "cider_sigma", c.metrics.cider_sigma);
    c.metrics.diversity = get_or<bool>(m, "diversity", true);
    c.metrics.richness = get_or<bool>(m, "richness", true);
    c.metrics.tagger_command = get_or<std::string>(m, "tagger_command", "");
  }
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    config_error(path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

json to_json(const PipelineConfig& c) {
  return json{
      {"corpus", c.corpus.string()},
      {"candidates", c.candidates.string()},
      {"output_dir", c.output_dir.string()},
      {"seed", c.seed ? json(*c.seed) : json(nullptr)},
      {"workers", c.workers},
      {"deterministic", c.deterministic},
      {"scorer",
       {{"kind", c.scorer.kind},
        {"path", c.scorer.path.string()},
        {"url", c.scorer.url},
        {"timeout_ms", c.scorer.timeout_ms},
        {"max_concurrency", c.scorer.max_concurrency}}},
      {"fusion",
       {{"kind", c.fusion.kind},
        {"path", c.fusion.path.string()},
        {"fallback", c.fusion.fallback},
        {"url", c.fusion.url},
        {"template", c.fusion.prompt_template ? json(*c.fusion.prompt_template) : json(nullptr)},
        {"temperature", c.fusion.temperature},
        {"max_tokens", c.fusion.max_tokens},
        {"skip_on_collapse", c.fusion.skip_on_collapse},
        {"prefixes", c.fusion.prefixes},
        {"attempts", c.fusion.attempts},
        {"backoff_ms", c.fusion.backoff_ms},
        {"timeout_ms", c.fusion.timeout_ms},
        {"max_concurrency", c.fusion.max_concurrency}}},
      {"metrics",
       {{"cider_variant", c.metrics.cider_variant},
        {"cider_sigma", c.metrics.cider_sigma},
        {"diversity", c.metrics.diversity},
        {"richness", c.metrics.richness},
        {"tagger_command", c.metrics.tagger_command}}},
  };
}

std::string config_hash(const PipelineConfig& config) { return sha256_hex(to_json(config).dump()); }

void validate_config(const PipelineConfig& c) {
  auto need_file = [](const std::filesystem::path& p, const char* what) {
    if (p.empty()) config_error(std::string(what) + " path is not set");
    if (!std::filesystem::is_regular_file(p)) config_error(std::string(what) + " not found: " + p.string());
  };
  need_file(c.corpus, "corpus");
  need_file(c.candidates, "candidates");
  if (c.scorer.kind == "file") {
    need_file(c.scorer.path, "scorer scores file");
  } else if (c.scorer.kind == "http") {
    if (c.scorer.url.empty()) config_error("scorer.url is required for kind=http");
  } else {
    config_error("unknown scorer kind '" + c.scorer.kind + "'");
  }
  if (c.fusion.kind == "mock") {
    if (!c.fusion.path.empty()) need_file(c.fusion.path, "fusion mock rules");
    if (c.fusion.fallback != "refuse" && c.fusion.fallback != "join") {
      config_error("fusion.fallback must be refuse or join");
    }
  } else if (c.fusion.kind == "http") {
    if (c.fusion.url.empty()) config_error("fusion.url is required for kind=http");
  } else {
    config_error("unknown fusion kind '" + c.fusion.kind + "'");
  }
  if (c.fusion.prompt_template) PromptTemplate{*c.fusion.prompt_template};
  if (c.metrics.cider_variant != "cider-d" && c.metrics.cider_variant != "cider") {
    config_error("metrics.cider_variant must be cider-d or cider");
  }
  if (!(c.metrics.cider_sigma > 0.0)) config_error("metrics.cider_sigma must be positive");
  if (c.deterministic && !c.seed) config_error("--deterministic requires an explicit seed");
}

std::unique_ptr<ScorerBackend> make_scorer(const ScorerSpec& spec) {
  if (spec.kind == "http") {
    return std::make_unique<HttpScorerBackend>(spec.url, std::chrono::milliseconds(spec.timeout_ms),
                                               spec.max_concurrency);
  }
  return std::make_unique<FileScorerBackend>(spec.path);
}

std::unique_ptr<FusionClient> make_fusion_client(const FusionSpec& spec) {
  if (spec.kind == "http") {
    return std::make_unique<HttpFusionClient>(spec.url, std::chrono::milliseconds(spec.timeout_ms),
                                              spec.max_concurrency);
  }
  const auto fallback = spec.fallback == "join" ? MockFusionClient::Fallback::Join : MockFusionClient::Fallback::Refuse;
  if (spec.path.empty()) return std::make_unique<MockFusionClient>(std::map<std::string, std::string>{}, fallback);
  return std::make_unique<MockFusionClient>(MockFusionClient::read_responses(spec.path), fallback);
}

FuseConfig make_fuse_config(const FusionSpec& spec) {
  FuseConfig fc;
  if (spec.prompt_template) fc.prompt_template = PromptTemplate(*spec.prompt_template);
  fc.temperature = spec.temperature;
  fc.max_tokens = spec.max_tokens;
  fc.skip_on_collapse = spec.skip_on_collapse;
  fc.prefixes = spec.prefixes;
  fc.attempts = spec.attempts;
  fc.backoff = std::chrono::milliseconds(spec.backoff_ms);
  return fc;
}

EvalConfig make_eval_config(const MetricsSpec& spec) {
  EvalConfig ec;
  ec.cider.variant = spec.cider_variant == "cider" ? CiderVariant::Cider : CiderVariant::CiderD;
  ec.cider.sigma = spec.cider_sigma;
  ec.diversity = spec.diversity;
  ec.richness = spec.richness;
  return ec;
}

std::vector<std::exception_ptr> parallel_for(std::size_t n, std::size_t workers,
                                             const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  if (n == 0) return errors;
  workers = std::clamp<std::size_t>(workers, 1, n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
    return errors;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  pool.clear();  // joins
  return errors;
}

std::size_t effective_workers(const PipelineConfig& config, std::size_t backend_limit, std::size_t client_limit) {
  std::size_t workers = config.workers;
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  return min_nonzero(workers, min_nonzero(backend_limit, client_limit));
}

json stage_ingest(const PipelineConfig& config) {
  validate_config(config);
  const auto joined = load_joined(config);
  std::vector<ImageEntry> corpus;
  std::vector<CandidateSet> sets;
  std::set<std::string> models;
  std::size_t ground_truths = 0;
  for (const auto& j : joined) {
    corpus.push_back(j.image);
    sets.push_back(j.candidates);
    ground_truths += j.image.ground_truths.size();
    for (const auto& c : j.candidates.candidates) models.insert(c.model_id);
  }
  write_corpus(config.output_dir / "corpus.jsonl", corpus);
  write_candidates(config.output_dir / "candidates.jsonl", sets);
  return json{{"images", corpus.size()}, {"ground_truths", ground_truths}, {"models", models}};
}

json stage_score(const PipelineConfig& config) {
  validate_config(config);
  const auto joined = load_joined(config);
  auto backend = make_scorer(config.scorer);
  std::vector<std::vector<ScoredCaption>> results(joined.size());
  const auto errors = parallel_for(joined.size(), effective_workers(config, backend->max_concurrency(), 0),
                                   [&](std::size_t i) {
                                     results[i] = score_candidates(joined[i].image, joined[i].candidates, *backend);
                                   });
  std::vector<json> lines;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < joined.size(); ++i) {
    ids.push_back(joined[i].image.image_id);
    if (errors[i]) continue;
    json scored = json::array();
    for (const auto& s : results[i]) scored.push_back(to_json(s));
    lines.push_back({{"image_id", joined[i].image.image_id}, {"scored", std::move(scored)}});
  }
  write_file_atomic(config.output_dir / kScoredFile, to_jsonl(lines));
  raise_first(errors, ids, std::vector<std::string>(ids.size(), "score"));
  return json{{"scored", lines.size()}};
}

json stage_rank(const PipelineConfig& config) {
  const auto path = config.output_dir / kScoredFile;
  std::vector<json> lines;
  for (const auto& line : read_jsonl(path)) {
    const auto& rec = line.value;
    std::string image_id;
    try {
      image_id = rec.at("image_id").get<std::string>();
      std::vector<ScoredCaption> scored;
      for (const auto& s : rec.at("scored")) scored.push_back(scored_caption_from_json(s));
      lines.push_back(to_json(rank(image_id, std::move(scored))));
    } catch (const json::exception& e) {
      throw Error(Errc::MalformedRecord, path.string() + ":" + std::to_string(line.line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw StageError(e, image_id, "rank");
    }
  }
  write_file_atomic(config.output_dir / kRankedFile, to_jsonl(lines));
  return json{{"ranked", lines.size()}};
}

json stage_fuse(const PipelineConfig& config) {
  validate_config(config);
  std::vector<RankedSet> ranked;
  for (const auto& line : read_jsonl(config.output_dir / kRankedFile)) {
    ranked.push_back(ranked_set_from_json(line.value));
  }
  std::map<std::string, FusedRecord> existing;
  if (!config.force) existing = read_keyed<FusedRecord>(config.output_dir / kFusedFile, fused_record_from_json);

  auto client = make_fusion_client(config.fusion);
  const auto fuse_config = make_fuse_config(config.fusion);
  std::vector<std::optional<FusedRecord>> results(ranked.size());
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (auto it = existing.find(ranked[i].image_id); it != existing.end()) {
      results[i] = it->second;
      ++skipped;
    }
  }
  const auto errors =
      parallel_for(ranked.size(), effective_workers(config, 0, client->max_concurrency()), [&](std::size_t i) {
        if (results[i]) return;
        const auto& [first, second] = ranked[i].top2;
        results[i] = FusedRecord{ranked[i].image_id, first.text, second.text,
                                 fuse(first.text, second.text, *client, fuse_config)};
      });
  std::vector<json> lines;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    ids.push_back(ranked[i].image_id);
    if (!errors[i] && results[i]) lines.push_back(to_json(*results[i]));
  }
  write_file_atomic(config.output_dir / kFusedFile, to_jsonl(lines));
  raise_first(errors, ids, std::vector<std::string>(ids.size(), "fuse"));
  return json{{"fused", lines.size() - skipped}, {"skipped", skipped}};
}

EvalReport stage_eval(const PipelineConfig& config) {
  validate_config(config);
  EvalInputs in;
  for (auto& j : load_joined(config)) {
    in.corpus.push_back(std::move(j.image));
    in.candidates.push_back(std::move(j.candidates));
  }
  const auto ranked_path = config.output_dir / kRankedFile;
  if (std::filesystem::exists(ranked_path)) {
    for (const auto& line : read_jsonl(ranked_path)) in.ranked.push_back(ranked_set_from_json(line.value));
  }
  const auto fused_path = config.output_dir / kFusedFile;
  if (std::filesystem::exists(fused_path)) {
    for (const auto& line : read_jsonl(fused_path)) in.fused.push_back(fused_record_from_json(line.value));
  }

  if (!in.fused.empty()) {
    auto backend = make_scorer(config.scorer);
    std::map<std::string, const ImageEntry*> images;
    for (const auto& e : in.corpus) images[e.image_id] = &e;
    for (const auto& f : in.fused) {
      auto img = images.find(f.image_id);
      if (img == images.end()) throw Error(Errc::KeyMismatch, "fused output for unknown image " + f.image_id);
      try {
        const auto resp = backend->score({f.image_id, img->second->uri, kFusionModelId, f.result.cleaned});
        ItmScore itm{resp.matching_probability,
                     resp.cosine_similarity ? *resp.cosine_similarity : cosine(*resp.embeddings)};
        in.fusion_blip_scores[f.image_id] = blip_score(itm);
      } catch (const Error& e) {
        if (e.code() != Errc::MissingScore) throw;
      }
    }
  }

  auto eval_config = make_eval_config(config.metrics);
  std::unique_ptr<PosTagger> external;
  if (!config.metrics.tagger_command.empty()) {
    external = std::make_unique<ExternalPosTagger>(config.metrics.tagger_command);
    eval_config.tagger = external.get();
  }
  auto report = eval_report(in, eval_config);
  const auto report_json = to_json(report);
  write_file_atomic(config.output_dir / kReportJson, report_json.dump(2) + "\n");
  write_file_atomic(config.output_dir / kReportMarkdown, render_markdown(report_json));
  return report;
}

json run_pipeline(const PipelineConfig& config) {
  const auto t0 = Clock::now();
  validate_config(config);
  std::filesystem::create_directories(config.output_dir);
  const auto prior = previous_manifest(config.output_dir);

  const auto joined = load_joined(config);
  auto backend = make_scorer(config.scorer);
  auto client = make_fusion_client(config.fusion);
  const auto fuse_config = make_fuse_config(config.fusion);

  std::map<std::string, json> old_ranked;
  std::map<std::string, FusedRecord> old_fused;
  if (!config.force) {
    old_ranked = read_keyed<json>(config.output_dir / kRankedFile, [](const json& j) { return j; });
    old_fused = read_keyed<FusedRecord>(config.output_dir / kFusedFile, fused_record_from_json);
  }

  const auto n = joined.size();
  std::vector<std::optional<json>> ranked_out(n);
  std::vector<std::optional<FusedRecord>> fused_out(n);
  std::vector<std::string> stage(n, "score");
  std::size_t resumed = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& id = joined[i].image.image_id;
    auto r = old_ranked.find(id);
    auto f = old_fused.find(id);
    if (r != old_ranked.end() && f != old_fused.end()) {
      ranked_out[i] = r->second;
      fused_out[i] = f->second;
      ++resumed;
    }
  }

  const auto t_work = Clock::now();
  const auto workers = effective_workers(config, backend->max_concurrency(), client->max_concurrency());
  const auto errors = parallel_for(n, workers, [&](std::size_t i) {
    if (fused_out[i]) return;
    const auto& job = joined[i];
    auto scored = score_candidates(job.image, job.candidates, *backend);
    stage[i] = "rank";
    auto ranked = rank(job.image.image_id, std::move(scored));
    stage[i] = "fuse";
    const auto& [first, second] = ranked.top2;
    auto fused = fuse(first.text, second.text, *client, fuse_config);
    ranked_out[i] = to_json(ranked);
    fused_out[i] = FusedRecord{job.image.image_id, first.text, second.text, std::move(fused)};
  });
  const double work_ms = ms_since(t_work);

  std::vector<json> ranked_lines;
  std::vector<json> fused_lines;
  std::vector<std::string> ids;
  std::size_t collapsed = 0;
  std::size_t prefix_stripped = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ids.push_back(joined[i].image.image_id);
    if (errors[i] || !fused_out[i]) continue;
    ranked_lines.push_back(*ranked_out[i]);
    fused_lines.push_back(to_json(*fused_out[i]));
    collapsed += fused_out[i]->result.flags.collapsed ? 1 : 0;
    prefix_stripped += fused_out[i]->result.flags.prefix_stripped ? 1 : 0;
  }
  write_file_atomic(config.output_dir / kRankedFile, to_jsonl(ranked_lines));
  write_file_atomic(config.output_dir / kFusedFile, to_jsonl(fused_lines));

  json manifest{
      {"run", prior.value("run", 0) + 1},
      {"config_hash", config_hash(config)},
      {"seed", config.seed ? json(*config.seed) : json(nullptr)},
      {"deterministic", config.deterministic},
      {"force", config.force},
      {"workers", workers},
      {"counts",
       {{"images", n},
        {"processed", fused_lines.size() - std::min(fused_lines.size(), resumed)},
        {"resumed", resumed},
        {"written", fused_lines.size()},
        {"collapsed", collapsed},
        {"prefix_stripped", prefix_stripped}}},
  };

  const bool failed = std::any_of(errors.begin(), errors.end(), [](const auto& e) { return e != nullptr; });
  if (failed) {
    manifest["status"] = "failed";
    manifest["timing_ms"] = {{"pipeline", work_ms}, {"total", ms_since(t0)}};
    write_file_atomic(config.output_dir / kManifestFile, manifest.dump(2) + "\n");
    raise_first(errors, ids, stage);
  }

  const auto t_eval = Clock::now();
  const auto report = stage_eval(config);
  double pct_sum = 0.0;
  for (const auto& [pair, pct] : report.pair_frequency) pct_sum += pct;

  manifest["status"] = "ok";
  manifest["pair_frequency_total"] = pct_sum;
  manifest["outputs"] = {kRankedFile, kFusedFile, kReportJson, kReportMarkdown};
  manifest["timing_ms"] = {{"pipeline", work_ms}, {"eval", ms_since(t_eval)}, {"total", ms_since(t0)}};
  write_file_atomic(config.output_dir / kManifestFile, manifest.dump(2) + "\n");
  return manifest;
}

}  // namespace capfuse
