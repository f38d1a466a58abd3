#include "capfuse/study.hpp"

#include <algorithm>
#include <chrono>
#include <random>

#include "capfuse/error.hpp"

namespace capfuse {

std::string_view worker_class_name(WorkerClass c) { return c == WorkerClass::Expert ? "expert" : "generic"; }

std::optional<WorkerClass> parse_worker_class(std::string_view name) {
  if (name == "generic") return WorkerClass::Generic;
  if (name == "expert") return WorkerClass::Expert;
  return std::nullopt;
}

IssuedBallot make_ballot(const ImageEntry& image, const std::map<std::string, std::string>& captions, Rng& rng,
                         const std::string& worker_id, WorkerClass worker_class) {
  if (captions.size() < 2) throw Error(Errc::TooFewOptions, image.image_id);
  std::vector<std::pair<std::string, std::string>> entries(captions.begin(), captions.end());
  shuffle(std::span(entries), rng);

  IssuedBallot out;
  out.worker_class = worker_class;
  out.ballot.ballot_id = random_hex_token(rng);
  out.ballot.image_id = image.image_id;
  out.ballot.image_uri = "/api/image/" + image.image_id;
  out.ballot.issued_to = worker_id;
  for (auto& [model, text] : entries) {
    auto key = random_hex_token(rng);
    while (out.key_to_model.count(key)) key = random_hex_token(rng);
    out.key_to_model.emplace(key, model);
    out.ballot.options.push_back({std::move(key), std::move(text)});
  }
  return out;
}

json to_json(const Ballot& b) {
  json options = json::array();
  for (const auto& o : b.options) options.push_back({{"option_key", o.option_key}, {"text", o.text}});
  return json{{"ballot_id", b.ballot_id},
              {"image_id", b.image_id},
              {"image_uri", b.image_uri},
              {"options", std::move(options)},
              {"issued_to", b.issued_to}};
}

json to_json(const VoteRecord& r) {
  return json{{"ballot_id", r.vote.ballot_id},     {"worker_id", r.vote.worker_id},
              {"worker_class", worker_class_name(r.vote.worker_class)}, {"choice", r.vote.choice},
              {"timestamp_ms", r.vote.timestamp_ms}, {"image_id", r.image_id},
              {"model_id", r.model_id}};
}

VoteRecord vote_record_from_json(const json& j) {
  VoteRecord r;
  r.vote.ballot_id = j.at("ballot_id").get<std::string>();
  r.vote.worker_id = j.at("worker_id").get<std::string>();
  auto cls = parse_worker_class(j.at("worker_class").get<std::string>());
  if (!cls) throw Error(Errc::MalformedRecord, "bad worker_class");
  r.vote.worker_class = *cls;
  r.vote.choice = j.at("choice").get<std::string>();
  r.vote.timestamp_ms = j.value("timestamp_ms", std::int64_t{0});
  r.image_id = j.at("image_id").get<std::string>();
  r.model_id = j.at("model_id").get<std::string>();
  return r;
}

VoteSummary summarize_votes(std::span<const Vote> votes, const std::map<std::string, std::string>& key_mapping) {
  VoteSummary out;
  std::map<std::string, std::size_t> generic;
  std::map<std::string, std::size_t> expert;
  for (const auto& [key, model] : key_mapping) out.models[model];
  for (const auto& v : votes) {
    auto it = key_mapping.find(v.choice);
    if (it == key_mapping.end()) throw Error(Errc::UnresolvableKey, v.choice);
    if (v.worker_class == WorkerClass::Expert) {
      ++expert[it->second];
      ++out.expert_votes;
    } else {
      ++generic[it->second];
      ++out.generic_votes;
    }
  }
  auto pct = [](const std::map<std::string, std::size_t>& counts, const std::string& model, std::size_t total) {
    auto it = counts.find(model);
    const double n = it == counts.end() ? 0.0 : static_cast<double>(it->second);
    return 100.0 * n / static_cast<double>(total);
  };
  for (auto& [model, row] : out.models) {
    if (out.generic_votes) row.generic_pct = pct(generic, model, out.generic_votes);
    if (out.expert_votes) row.expert_pct = pct(expert, model, out.expert_votes);
    if (row.generic_pct && row.expert_pct) {
      row.average_pct = (*row.generic_pct + *row.expert_pct) / 2.0;
    } else if (row.generic_pct) {
      row.average_pct = *row.generic_pct;
    } else if (row.expert_pct) {
      row.average_pct = *row.expert_pct;
    }
  }
  return out;
}

json to_json(const VoteSummary& s) {
  json models = json::object();
  for (const auto& [model, row] : s.models) {
    models[model] = {{"generic_pct", row.generic_pct ? json(*row.generic_pct) : json(nullptr)},
                     {"expert_pct", row.expert_pct ? json(*row.expert_pct) : json(nullptr)},
                     {"average_pct", row.average_pct}};
  }
  return json{{"models", std::move(models)}, {"generic_votes", s.generic_votes}, {"expert_votes", s.expert_votes}};
}

std::map<int, std::size_t> agreement_histogram(const std::map<std::string, std::vector<std::string>>& votes_by_image) {
  std::map<int, std::size_t> out;
  for (const auto& [image, models] : votes_by_image) {
    if (models.empty()) continue;
    std::map<std::string, int> counts;
    int best = 0;
    for (const auto& m : models) best = std::max(best, ++counts[m]);
    ++out[best];
  }
  return out;
}

StudyStore::StudyStore(std::vector<ImageEntry> images,
                       std::map<std::string, std::map<std::string, std::string>> captions,
                       std::filesystem::path votes_log, StudyOptions options)
    : images_(std::move(images)),
      captions_(std::move(captions)),
      log_path_(std::move(votes_log)),
      options_(options),
      rng_(options.seed ? *options.seed : (std::uint64_t{std::random_device{}()} << 32) ^ std::random_device{}()) {
  for (std::size_t i = 0; i < images_.size(); ++i) image_index_.emplace(images_[i].image_id, i);

  auto replay = std::make_shared<std::vector<VoteRecord>>();
  if (std::filesystem::exists(log_path_)) {
    for (const auto& line : read_jsonl(log_path_)) {
      try {
        auto rec = vote_record_from_json(line.value);
        ++class_votes_[{rec.image_id, rec.vote.worker_class}];
        rated_[{rec.vote.worker_id, rec.image_id}] = true;
        answered_[rec.vote.ballot_id] = true;
        replay->push_back(std::move(rec));
      } catch (const json::exception& e) {
        throw Error(Errc::MalformedRecord, log_path_.string() + ":" + std::to_string(line.line_no) + ": " + e.what());
      }
    }
  }
  snapshot_ = std::move(replay);
  if (log_path_.has_parent_path()) std::filesystem::create_directories(log_path_.parent_path());
  log_.open(log_path_, std::ios::binary | std::ios::app);
  if (!log_) throw Error(Errc::MissingFile, "cannot open " + log_path_.string());
}

std::optional<Ballot> StudyStore::issue(const std::string& worker_id, WorkerClass worker_class) {
  std::lock_guard lock(mu_);
  for (const auto& img : images_) {
    auto caps = captions_.find(img.image_id);
    if (caps == captions_.end() || caps->second.size() < 2) continue;
    if (rated_.count({worker_id, img.image_id})) continue;
    auto votes = class_votes_.find({img.image_id, worker_class});
    if (votes != class_votes_.end() && votes->second >= options_.votes_per_class) continue;
    auto issued = make_ballot(img, caps->second, rng_, worker_id, worker_class);
    while (ballots_.count(issued.ballot.ballot_id)) issued.ballot.ballot_id = random_hex_token(rng_);
    Ballot out = issued.ballot;
    ballots_.emplace(out.ballot_id, std::move(issued));
    return out;
  }
  return std::nullopt;
}

void StudyStore::register_ballot(IssuedBallot issued) {
  std::lock_guard lock(mu_);
  auto id = issued.ballot.ballot_id;
  ballots_.insert_or_assign(std::move(id), std::move(issued));
}

VoteRecord StudyStore::record(Vote vote) {
  std::lock_guard lock(mu_);
  auto it = ballots_.find(vote.ballot_id);
  if (it == ballots_.end()) throw Error(Errc::UnknownBallot, vote.ballot_id);
  const auto& issued = it->second;
  if (answered_.count(vote.ballot_id)) throw Error(Errc::DuplicateVote, vote.ballot_id);
  auto model = issued.key_to_model.find(vote.choice);
  if (model == issued.key_to_model.end()) throw Error(Errc::InvalidChoice, vote.choice);

  // Identity and class come from the issuance, not the request.
  vote.worker_id = issued.ballot.issued_to;
  vote.worker_class = issued.worker_class;
  const auto& image_id = issued.ballot.image_id;
  if (rated_.count({vote.worker_id, image_id})) throw Error(Errc::RepeatRater, vote.worker_id + "/" + image_id);
  auto& count = class_votes_[{image_id, vote.worker_class}];
  if (count >= options_.votes_per_class) {
    throw Error(Errc::ClassQuotaExceeded, image_id + "/" + std::string(worker_class_name(vote.worker_class)));
  }
  if (vote.timestamp_ms == 0) {
    vote.timestamp_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::system_clock::now().time_since_epoch())
                            .count();
  }

  VoteRecord rec{vote, image_id, model->second};
  const auto line = dump_compact(to_json(rec)) + "\n";
  log_.write(line.data(), static_cast<std::streamsize>(line.size()));
  log_.flush();
  if (!log_) throw Error(Errc::MissingFile, "failed to append to " + log_path_.string());

  ++count;
  rated_[{vote.worker_id, image_id}] = true;
  answered_[vote.ballot_id] = true;
  auto next = std::make_shared<std::vector<VoteRecord>>(*snapshot_);
  next->push_back(rec);
  snapshot_ = std::move(next);
  return rec;
}

std::shared_ptr<const std::vector<VoteRecord>> StudyStore::votes() const {
  std::lock_guard lock(mu_);
  return snapshot_;
}

VoteSummary StudyStore::summary() const {
  const auto snap = votes();
  // Keys in the log are per ballot; resolve through the recorded model id.
  std::vector<Vote> votes;
  std::map<std::string, std::string> mapping;
  for (const auto& r : *snap) {
    votes.push_back(r.vote);
    mapping[r.vote.choice] = r.model_id;
  }
  for (const auto& [image, caps] : captions_) {
    for (const auto& [model, text] : caps) {
      // Models with no votes still get a row; keys cannot collide with 16-hex nonces.
      mapping.emplace("model:" + model, model);
    }
  }
  return summarize_votes(votes, mapping);
}

std::map<int, std::size_t> StudyStore::histogram() const {
  const auto snap = votes();
  std::map<std::string, std::vector<std::string>> by_image;
  for (const auto& r : *snap) by_image[r.image_id].push_back(r.model_id);
  return agreement_histogram(by_image);
}

const ImageEntry* StudyStore::image(const std::string& image_id) const {
  auto it = image_index_.find(image_id);
  return it == image_index_.end() ? nullptr : &images_[it->second];
}

VoteRecord record_vote(const Vote& vote, StudyStore& store) { return store.record(vote); }

}  // namespace capfuse
