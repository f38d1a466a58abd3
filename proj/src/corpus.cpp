#include "capfuse/corpus.hpp"

#include <unordered_set>

#include "capfuse/error.hpp"

namespace capfuse {

namespace {

const json& require(const json& record, const char* key, json::value_t type) {
  auto it = record.find(key);
  if (it == record.end()) throw Error(Errc::MalformedRecord, std::string("missing field '") + key + "'");
  if (it->type() != type) throw Error(Errc::MalformedRecord, std::string("field '") + key + "' has wrong type");
  return *it;
}

std::string require_string(const json& record, const char* key) {
  return require(record, key, json::value_t::string).get<std::string>();
}

template <typename F>
auto with_line(const std::filesystem::path& path, std::size_t line_no, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() != Errc::MalformedRecord) throw;
    throw Error(Errc::MalformedRecord, path.string() + ":" + std::to_string(line_no) + ": " + e.detail());
  }
}

}  // namespace

ImageEntry image_entry_from_json(const json& record) {
  if (!record.is_object()) throw Error(Errc::MalformedRecord, "record is not an object");
  ImageEntry entry;
  entry.image_id = require_string(record, "image_id");
  if (trim(entry.image_id).empty()) throw Error(Errc::MalformedRecord, "empty image_id");
  entry.uri = require_string(record, "uri");
  if (record.contains("ground_truths")) {
    for (const auto& gt : require(record, "ground_truths", json::value_t::array)) {
      if (!gt.is_string()) throw Error(Errc::MalformedRecord, "ground truth is not a string");
      auto text = gt.get<std::string>();
      if (trim(text).empty()) throw Error(Errc::MalformedRecord, "empty ground truth for " + entry.image_id);
      entry.ground_truths.push_back(std::move(text));
    }
  }
  return entry;
}

json to_json(const ImageEntry& entry) {
  return json{{"image_id", entry.image_id}, {"uri", entry.uri}, {"ground_truths", entry.ground_truths}};
}

CandidateSet candidate_set_from_json(const json& record) {
  if (!record.is_object()) throw Error(Errc::MalformedRecord, "record is not an object");
  CandidateSet set;
  set.image_id = require_string(record, "image_id");
  if (trim(set.image_id).empty()) throw Error(Errc::MalformedRecord, "empty image_id");
  std::unordered_set<std::string> seen;
  for (const auto& c : require(record, "candidates", json::value_t::array)) {
    if (!c.is_object()) throw Error(Errc::MalformedRecord, "candidate is not an object");
    Candidate cand{require_string(c, "model_id"), require_string(c, "text")};
    if (!seen.insert(cand.model_id).second) {
      throw Error(Errc::DuplicateModelId, set.image_id + "/" + cand.model_id);
    }
    set.candidates.push_back(std::move(cand));
  }
  if (set.candidates.size() < 2) throw Error(Errc::TooFewCandidates, set.image_id);
  return set;
}

json to_json(const CandidateSet& set) {
  json cands = json::array();
  for (const auto& c : set.candidates) cands.push_back({{"model_id", c.model_id}, {"text", c.text}});
  return json{{"image_id", set.image_id}, {"candidates", std::move(cands)}};
}

std::vector<ImageEntry> load_corpus(const std::filesystem::path& path) {
  std::vector<ImageEntry> entries;
  std::unordered_set<std::string> ids;
  for (const auto& line : read_jsonl(path)) {
    auto entry = with_line(path, line.line_no, [&] { return image_entry_from_json(line.value); });
    if (!ids.insert(entry.image_id).second) throw Error(Errc::DuplicateImageId, entry.image_id);
    entries.push_back(std::move(entry));
  }
  return entries;
}

void write_corpus(const std::filesystem::path& path, const std::vector<ImageEntry>& entries) {
  std::vector<json> records;
  records.reserve(entries.size());
  for (const auto& e : entries) records.push_back(to_json(e));
  write_file_atomic(path, to_jsonl(records));
}

std::vector<CandidateSet> load_candidates(const std::filesystem::path& path) {
  std::vector<CandidateSet> sets;
  std::unordered_set<std::string> ids;
  for (const auto& line : read_jsonl(path)) {
    auto set = with_line(path, line.line_no, [&] { return candidate_set_from_json(line.value); });
    if (!ids.insert(set.image_id).second) throw Error(Errc::DuplicateImageId, set.image_id);
    sets.push_back(std::move(set));
  }
  return sets;
}

void write_candidates(const std::filesystem::path& path, const std::vector<CandidateSet>& sets) {
  std::vector<json> records;
  records.reserve(sets.size());
  for (const auto& s : sets) records.push_back(to_json(s));
  write_file_atomic(path, to_jsonl(records));
}

SplitAssignment make_splits(const std::vector<std::string>& ids, SplitSizes sizes, std::uint64_t seed) {
  if (sizes.train + sizes.val + sizes.test != ids.size()) {
    throw Error(Errc::SizeMismatch, "sizes sum to " + std::to_string(sizes.train + sizes.val + sizes.test) +
                                        " but " + std::to_string(ids.size()) + " ids given");
  }
  std::unordered_set<std::string> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) throw Error(Errc::DuplicateId, id);
  }

  std::vector<std::string> perm = ids;
  Rng rng(seed);
  shuffle(std::span<std::string>(perm), rng);

  SplitAssignment out;
  out.seed = seed;
  const auto train_end = perm.begin() + static_cast<std::ptrdiff_t>(sizes.train);
  const auto val_end = train_end + static_cast<std::ptrdiff_t>(sizes.val);
  out.train_ids.assign(perm.begin(), train_end);
  out.val_ids.assign(train_end, val_end);
  out.test_ids.assign(val_end, perm.end());
  return out;
}

json to_json(const SplitAssignment& split) {
  return json{{"seed", split.seed}, {"train", split.train_ids}, {"val", split.val_ids}, {"test", split.test_ids}};
}

SplitAssignment split_from_json(const json& record) {
  SplitAssignment s;
  s.seed = record.at("seed").get<std::uint64_t>();
  s.train_ids = record.at("train").get<std::vector<std::string>>();
  s.val_ids = record.at("val").get<std::vector<std::string>>();
  s.test_ids = record.at("test").get<std::vector<std::string>>();
  return s;
}

}  // namespace capfuse
