#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "capfuse/util.hpp"

namespace capfuse {

struct ImageEntry {
  std::string image_id;
  std::string uri;
  std::vector<std::string> ground_truths;

  bool operator==(const ImageEntry&) const = default;
};

struct Candidate {
  std::string model_id;
  std::string text;

  bool operator==(const Candidate&) const = default;
};

struct CandidateSet {
  std::string image_id;
  std::vector<Candidate> candidates;

  bool operator==(const CandidateSet&) const = default;
};

struct SplitSizes {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

struct SplitAssignment {
  std::uint64_t seed = 0;
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;
  std::vector<std::string> test_ids;

  bool operator==(const SplitAssignment&) const = default;
};

// corpus.jsonl: {"image_id", "uri", "ground_truths": [...]} per line.
std::vector<ImageEntry> load_corpus(const std::filesystem::path& path);
void write_corpus(const std::filesystem::path& path, const std::vector<ImageEntry>& entries);

// candidates.jsonl: {"image_id", "candidates": [{"model_id", "text"}, ...]} per line.
std::vector<CandidateSet> load_candidates(const std::filesystem::path& path);
void write_candidates(const std::filesystem::path& path, const std::vector<CandidateSet>& sets);

// Record-level conversions, shared by loaders and the Python bindings.
ImageEntry image_entry_from_json(const json& record);
json to_json(const ImageEntry& entry);
CandidateSet candidate_set_from_json(const json& record);
json to_json(const CandidateSet& set);

// Shuffles ids with a seeded mt19937_64 Fisher-Yates pass and slices the
// permutation into train/val/test prefixes.
SplitAssignment make_splits(const std::vector<std::string>& ids, SplitSizes sizes, std::uint64_t seed);

json to_json(const SplitAssignment& split);
SplitAssignment split_from_json(const json& record);

}  // namespace capfuse
