#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "capfuse/corpus.hpp"
#include "capfuse/util.hpp"

namespace capfuse {

enum class WorkerClass { Generic, Expert };

std::string_view worker_class_name(WorkerClass c);
std::optional<WorkerClass> parse_worker_class(std::string_view name);

struct BallotOption {
  std::string option_key;  // random nonce; says nothing about the model
  std::string text;
};

struct Ballot {
  std::string ballot_id;
  std::string image_id;
  std::string image_uri;
  std::vector<BallotOption> options;
  std::string issued_to;
};

// A ballot plus the server-side secrets that must never leave the service.
struct IssuedBallot {
  Ballot ballot;
  WorkerClass worker_class = WorkerClass::Generic;
  std::map<std::string, std::string> key_to_model;
};

// Options are the captions in a uniformly random order (Fisher-Yates over
// rng); keys and the ballot id are drawn from the same generator.
IssuedBallot make_ballot(const ImageEntry& image, const std::map<std::string, std::string>& captions, Rng& rng,
                         const std::string& worker_id = {}, WorkerClass worker_class = WorkerClass::Generic);

json to_json(const Ballot& ballot);

struct Vote {
  std::string ballot_id;
  std::string worker_id;
  WorkerClass worker_class = WorkerClass::Generic;
  std::string choice;  // option_key
  std::int64_t timestamp_ms = 0;
};

// One line of votes.log.
struct VoteRecord {
  Vote vote;
  std::string image_id;
  std::string model_id;
};

json to_json(const VoteRecord& record);
VoteRecord vote_record_from_json(const json& j);

struct ModelVotes {
  std::optional<double> generic_pct;
  std::optional<double> expert_pct;
  double average_pct = 0.0;
};

struct VoteSummary {
  std::map<std::string, ModelVotes> models;
  std::size_t generic_votes = 0;
  std::size_t expert_votes = 0;
};

// Percentages per class; the average of the two classes, or the only class
// that has votes. Every model in key_mapping gets a row.
VoteSummary summarize_votes(std::span<const Vote> votes, const std::map<std::string, std::string>& key_mapping);

json to_json(const VoteSummary& summary);

// For each image, the largest number of votes any single model received;
// returns level -> number of images.
std::map<int, std::size_t> agreement_histogram(const std::map<std::string, std::vector<std::string>>& votes_by_image);

struct StudyOptions {
  std::size_t votes_per_class = 3;
  std::optional<std::uint64_t> seed;  // nullopt: seeded from std::random_device
};

// Ballot registry plus append-only vote log. All methods are thread safe;
// writes are serialized, reads work on immutable snapshots.
class StudyStore {
 public:
  StudyStore(std::vector<ImageEntry> images, std::map<std::string, std::map<std::string, std::string>> captions,
             std::filesystem::path votes_log, StudyOptions options = {});

  // Next image this worker may still rate, with a freshly shuffled ballot.
  std::optional<Ballot> issue(const std::string& worker_id, WorkerClass worker_class);

  // Registers an externally built ballot (tests, tools).
  void register_ballot(IssuedBallot issued);

  VoteRecord record(Vote vote);

  std::shared_ptr<const std::vector<VoteRecord>> votes() const;
  VoteSummary summary() const;
  std::map<int, std::size_t> histogram() const;

  const ImageEntry* image(const std::string& image_id) const;

 private:
  std::vector<ImageEntry> images_;
  std::map<std::string, std::size_t> image_index_;
  std::map<std::string, std::map<std::string, std::string>> captions_;
  std::filesystem::path log_path_;
  StudyOptions options_;

  mutable std::mutex mu_;
  Rng rng_;
  std::ofstream log_;
  std::map<std::string, IssuedBallot> ballots_;
  std::map<std::pair<std::string, WorkerClass>, std::size_t> class_votes_;  // (image, class) -> votes
  std::map<std::pair<std::string, std::string>, bool> rated_;               // (worker, image)
  std::map<std::string, bool> answered_;                                    // ballot ids with a vote
  std::shared_ptr<const std::vector<VoteRecord>> snapshot_;
};

VoteRecord record_vote(const Vote& vote, StudyStore& store);

}  // namespace capfuse
