// capfuse command line driver.
//
// Every option can also come from the environment: --seed is CAPFUSE_SEED,
// --workers is CAPFUSE_WORKERS and so on (see README). Command line wins over
// environment, environment wins over the config file.

#include <CLI11.hpp>

#include <pthread.h>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <thread>

#include "capfuse/corpus.hpp"
#include "capfuse/error.hpp"
#include "capfuse/pipeline.hpp"
#include "capfuse/study_server.hpp"

namespace {

using namespace capfuse;

struct GlobalFlags {
  std::string config_path;
  bool deterministic = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  bool force = false;
};

PipelineConfig resolved_config(const GlobalFlags& flags) {
  if (flags.config_path.empty()) throw Error(Errc::ConfigError, "--config is required");
  auto config = load_config(flags.config_path);
  if (flags.seed) config.seed = flags.seed;
  if (flags.workers) config.workers = *flags.workers;
  config.deterministic = config.deterministic || flags.deterministic;
  config.force = flags.force;
  return config;
}

void print_json(const json& j) { std::cout << j.dump(2) << "\n"; }

int serve_study(const PipelineConfig& config, const std::string& host, int port, std::string votes_path,
                std::string admin_token, const std::string& static_dir, std::size_t votes_per_class,
                bool with_fusion) {
  auto corpus = load_corpus(config.corpus);
  std::map<std::string, std::map<std::string, std::string>> captions;
  for (const auto& set : load_candidates(config.candidates)) {
    for (const auto& c : set.candidates) captions[set.image_id][c.model_id] = c.text;
  }
  const auto fused_path = config.output_dir / kFusedFile;
  if (with_fusion && std::filesystem::exists(fused_path)) {
    for (const auto& line : read_jsonl(fused_path)) {
      const auto rec = fused_record_from_json(line.value);
      captions[rec.image_id][kFusionModelId] = rec.result.cleaned;
    }
  }
  if (votes_path.empty()) votes_path = (config.output_dir / "votes.jsonl").string();
  if (admin_token.empty()) {
    std::random_device rd;
    Rng rng((static_cast<std::uint64_t>(rd()) << 32) | rd());
    admin_token = random_hex_token(rng);
    std::cerr << "admin token: " << admin_token << "\n";
  }

  StudyOptions opts;
  opts.votes_per_class = votes_per_class;
  opts.seed = config.deterministic ? config.seed : std::nullopt;
  StudyStore store(std::move(corpus), std::move(captions), votes_path, opts);

  StudyServerOptions server_opts;
  server_opts.admin_token = admin_token;
  if (!static_dir.empty()) server_opts.static_dir = static_dir;
  StudyServer server(store, server_opts);

  // Signals are taken synchronously by this thread; the server threads inherit the mask.
  sigset_t sigs;
  sigemptyset(&sigs);
  sigaddset(&sigs, SIGINT);
  sigaddset(&sigs, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &sigs, nullptr);

  const int bound = server.bind(host, port);
  if (bound <= 0) throw Error(Errc::ConfigError, "cannot bind " + host + ":" + std::to_string(port));
  std::cerr << "study server listening on http://" << host << ":" << bound << "\n";
  std::thread listener([&] { server.listen_after_bind(); });
  int sig = 0;
  sigwait(&sigs, &sig);
  server.stop();
  listener.join();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"capfuse: caption reranking, fusion, evaluation and blinded human study"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_help_all_flag("--help-all");

  GlobalFlags flags;
  app.add_option("--config", flags.config_path, "Pipeline config (JSON)")->envname("CAPFUSE_CONFIG");
  app.add_flag("--deterministic", flags.deterministic, "Require explicit seeds")->envname("CAPFUSE_DETERMINISTIC");
  app.add_option("--seed", flags.seed, "Seed for every random draw")->envname("CAPFUSE_SEED");
  app.add_option("--workers", flags.workers, "Worker pool size (default: logical CPUs)")
      ->envname("CAPFUSE_WORKERS")
      ->check(CLI::PositiveNumber);
  app.add_flag("--force", flags.force, "Recompute images that already have outputs")->envname("CAPFUSE_FORCE");

  auto* ingest = app.add_subcommand("ingest", "Validate corpus and candidates, write normalized copies");
  auto* score = app.add_subcommand("score", "Score every candidate caption");
  auto* rank_cmd = app.add_subcommand("rank", "Rank scored candidates by BLIPScore");
  auto* fuse_cmd = app.add_subcommand("fuse", "Fuse the top-2 captions of each image");
  auto* eval = app.add_subcommand("eval", "Compute metrics and write report.json / report.md");
  auto* run = app.add_subcommand("run", "score -> rank -> fuse -> eval");

  auto* report = app.add_subcommand("report", "Render report.md from report.json");
  std::string report_in;
  std::string report_out;
  report->add_option("--input", report_in, "report.json (default: <output_dir>/report.json)");
  report->add_option("--output", report_out, "Markdown destination (default: stdout)");

  auto* split = app.add_subcommand("split", "Seeded train/val/test splits over corpus image ids");
  std::vector<std::size_t> split_sizes{3500, 500, 1000};
  std::size_t split_count = 1;
  std::string split_out;
  split->add_option("--sizes", split_sizes, "train val test")->expected(3)->delimiter(',');
  split->add_option("--count", split_count, "Number of splits (seeds seed, seed+1, ...)")->check(CLI::PositiveNumber);
  split->add_option("--output", split_out, "Destination (default: <output_dir>/splits.json)");

  auto* serve = app.add_subcommand("serve-study", "Serve the blinded human-evaluation API");
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string votes_path;
  std::string admin_token;
  std::string static_dir;
  std::size_t votes_per_class = 3;
  bool with_fusion = true;
  serve->add_option("--host", host)->envname("CAPFUSE_HOST");
  serve->add_option("--port", port)->envname("CAPFUSE_PORT");
  serve->add_option("--votes", votes_path, "Vote log (default: <output_dir>/votes.jsonl)")->envname("CAPFUSE_VOTES");
  serve->add_option("--admin-token", admin_token, "Bearer token for /api/results (random if unset)")
      ->envname("CAPFUSE_ADMIN_TOKEN");
  serve->add_option("--static-dir", static_dir, "Judge UI assets")->envname("CAPFUSE_STATIC_DIR");
  serve->add_option("--votes-per-class", votes_per_class)->check(CLI::PositiveNumber);
  serve->add_flag("!--no-fusion", with_fusion, "Leave the fused caption off the ballots");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ErrorClass::Config);
  }

  try {
    // A standalone render of an existing report needs no config.
    const bool needs_config = !(report->parsed() && !report_in.empty() && flags.config_path.empty());
    const auto config = needs_config ? resolved_config(flags) : PipelineConfig{};
    if (ingest->parsed()) print_json(stage_ingest(config));
    if (score->parsed()) print_json(stage_score(config));
    if (rank_cmd->parsed()) print_json(stage_rank(config));
    if (fuse_cmd->parsed()) print_json(stage_fuse(config));
    if (eval->parsed()) {
      validate_config(config);
      stage_eval(config);
      print_json(json{{"report", (config.output_dir / kReportJson).string()},
                      {"markdown", (config.output_dir / kReportMarkdown).string()}});
    }
    if (run->parsed()) print_json(run_pipeline(config));
    if (report->parsed()) {
      const std::filesystem::path in = report_in.empty() ? config.output_dir / kReportJson : std::filesystem::path(report_in);
      std::ifstream is(in);
      if (!is) throw Error(Errc::MissingFile, in.string());
      json j;
      try {
        j = json::parse(is);
      } catch (const json::exception& e) {
        throw Error(Errc::MalformedRecord, in.string() + ": " + e.what());
      }
      const auto md = render_markdown(j);
      if (report_out.empty()) {
        std::cout << md;
      } else {
        write_file_atomic(report_out, md);
      }
    }
    if (split->parsed()) {
      if (!config.seed) throw Error(Errc::ConfigError, "split needs --seed (or a seed in the config)");
      std::vector<std::string> ids;
      for (const auto& e : load_corpus(config.corpus)) ids.push_back(e.image_id);
      const SplitSizes sizes{split_sizes[0], split_sizes[1], split_sizes[2]};
      json out = json::array();
      for (std::size_t k = 0; k < split_count; ++k) out.push_back(to_json(make_splits(ids, sizes, *config.seed + k)));
      const std::filesystem::path dest = split_out.empty() ? config.output_dir / "splits.json" : std::filesystem::path(split_out);
      write_file_atomic(dest, out.dump(2) + "\n");
      print_json(json{{"splits", split_count}, {"output", dest.string()}});
    }
    if (serve->parsed()) {
      return serve_study(config, host, port, votes_path, admin_token, static_dir, votes_per_class, with_fusion);
    }
  } catch (const Error& e) {
    std::cerr << "error [" << errc_name(e.code()) << "]: " << e.what() << "\n";
    return static_cast<int>(error_class(e.code()));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorClass::Data);
  }
  return 0;
}
