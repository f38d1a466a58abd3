#include "capfuse/metrics.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <limits>
#include <set>

#include "capfuse/error.hpp"

namespace capfuse {

TokenStream tokenize(std::string_view text, bool keep_punct) {
  TokenStream out;
  out.punctuation_removed = !keep_punct;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.tokens.push_back(std::move(word));
    word.clear();
  };
  for (unsigned char c : text) {
    if (c < 0x80 && std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      if (keep_punct) out.tokens.emplace_back(1, static_cast<char>(c));
    } else {
      word.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
    }
  }
  flush();
  return out;
}

std::vector<TokenStream> tokenize_all(std::span<const std::string> texts, bool keep_punct) {
  std::vector<TokenStream> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(tokenize(t, keep_punct));
  return out;
}

int NGramCounts::total() const {
  int sum = 0;
  for (const auto& [gram, c] : counts) sum += c;
  return sum;
}

NGramCounts count_ngrams(std::span<const std::string> tokens, int n) {
  NGramCounts out;
  out.n = n;
  if (n < 1 || tokens.size() < static_cast<std::size_t>(n)) return out;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i) {
    ++out.counts[NGram(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                       tokens.begin() + static_cast<std::ptrdiff_t>(i) + n)];
  }
  return out;
}

namespace {

struct BleuStats {
  std::vector<std::size_t> matches;
  std::vector<std::size_t> totals;
  std::size_t candidate_length = 0;
  std::size_t reference_length = 0;

  explicit BleuStats(int max_n) : matches(static_cast<std::size_t>(max_n)), totals(static_cast<std::size_t>(max_n)) {}
};

std::size_t shortest_reference_length(std::span<const TokenStream> refs) {
  std::size_t best = refs.front().size();
  for (const auto& r : refs) best = std::min(best, r.size());
  return best;
}

void accumulate_bleu(BleuStats& stats, const TokenStream& cand, std::span<const TokenStream> refs, int max_n) {
  stats.candidate_length += cand.size();
  stats.reference_length += shortest_reference_length(refs);
  for (int n = 1; n <= max_n; ++n) {
    const auto cand_counts = count_ngrams(cand, n);
    std::map<NGram, int> max_ref;
    for (const auto& r : refs) {
      for (const auto& [gram, c] : count_ngrams(r, n).counts) {
        auto& slot = max_ref[gram];
        slot = std::max(slot, c);
      }
    }
    std::size_t matched = 0;
    for (const auto& [gram, c] : cand_counts.counts) {
      auto it = max_ref.find(gram);
      if (it != max_ref.end()) matched += static_cast<std::size_t>(std::min(c, it->second));
    }
    stats.matches[static_cast<std::size_t>(n - 1)] += matched;
    stats.totals[static_cast<std::size_t>(n - 1)] += static_cast<std::size_t>(cand_counts.total());
  }
}

double brevity_penalty(std::size_t c, std::size_t r) {
  if (c >= r) return 1.0;
  return std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
}

void check_max_n(int max_n) {
  if (max_n < 1) throw Error(Errc::OutOfRange, "max_n must be >= 1");
}

}  // namespace

double bleu_corpus(std::span<const TokenStream> candidates, std::span<const ReferenceSet> references, int max_n) {
  check_max_n(max_n);
  if (candidates.empty()) throw Error(Errc::EmptyCandidateList, "no candidates");
  if (candidates.size() != references.size()) {
    throw Error(Errc::LengthMismatch, std::to_string(candidates.size()) + " candidates vs " +
                                          std::to_string(references.size()) + " reference sets");
  }
  BleuStats stats(max_n);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (references[i].empty()) throw Error(Errc::EmptyReferenceSet, std::to_string(i));
    accumulate_bleu(stats, candidates[i], references[i], max_n);
  }
  if (stats.candidate_length == 0) return 0.0;

  double log_sum = 0.0;
  int orders = 0;
  for (int n = 0; n < max_n; ++n) {
    const auto idx = static_cast<std::size_t>(n);
    if (stats.totals[idx] == 0) break;
    if (stats.matches[idx] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(stats.matches[idx]) / static_cast<double>(stats.totals[idx]));
    ++orders;
  }
  return std::exp(log_sum / orders) * brevity_penalty(stats.candidate_length, stats.reference_length);
}

double bleu_sentence(const TokenStream& candidate, std::span<const TokenStream> references, int max_n) {
  check_max_n(max_n);
  if (references.empty()) throw Error(Errc::EmptyReferences, "sentence BLEU needs at least one reference");
  if (candidate.size() == 0) return 0.0;
  BleuStats stats(max_n);
  accumulate_bleu(stats, candidate, references, max_n);

  const int orders = std::min<int>(max_n, static_cast<int>(candidate.size()));
  double log_sum = 0.0;
  for (int n = 0; n < orders; ++n) {
    const auto idx = static_cast<std::size_t>(n);
    double p = static_cast<double>(stats.matches[idx]) / static_cast<double>(stats.totals[idx]);
    log_sum += std::log(std::max(p, kSentenceBleuFloor));
  }
  return std::exp(log_sum / orders) * brevity_penalty(stats.candidate_length, stats.reference_length);
}

DocumentFrequency::DocumentFrequency(std::span<const ReferenceSet> references, int max_n)
    : num_documents_(references.size()),
      log_documents_(references.empty() ? 0.0 : std::log(static_cast<double>(references.size()))) {
  for (const auto& refs : references) {
    std::set<NGram> seen;
    for (const auto& r : refs) {
      for (int n = 1; n <= max_n; ++n) {
        for (const auto& [gram, c] : count_ngrams(r, n).counts) seen.insert(gram);
      }
    }
    for (const auto& gram : seen) ++df_[gram];
  }
}

double DocumentFrequency::idf(const NGram& gram) const {
  auto it = df_.find(gram);
  const double df = it == df_.end() ? 0.0 : static_cast<double>(it->second);
  return log_documents_ - std::log(std::max(1.0, df));
}

namespace {

struct TfIdfVector {
  std::map<NGram, double> weights;
  double norm = 0.0;
};

std::vector<TfIdfVector> tfidf(const TokenStream& s, const IdfFunction& idf, int max_n) {
  std::vector<TfIdfVector> out(static_cast<std::size_t>(max_n));
  for (int n = 1; n <= max_n; ++n) {
    auto& vec = out[static_cast<std::size_t>(n - 1)];
    double sq = 0.0;
    for (const auto& [gram, c] : count_ngrams(s, n).counts) {
      const double w = static_cast<double>(c) * idf(gram);
      vec.weights.emplace(gram, w);
      sq += w * w;
    }
    vec.norm = std::sqrt(sq);
  }
  return out;
}

double pair_similarity(const TfIdfVector& cand, const TfIdfVector& ref, bool clip) {
  if (cand.norm == 0.0 || ref.norm == 0.0) return 0.0;
  double dot = 0.0;
  for (const auto& [gram, wc] : cand.weights) {
    auto it = ref.weights.find(gram);
    if (it == ref.weights.end()) continue;
    dot += (clip ? std::min(wc, it->second) : wc) * it->second;
  }
  return dot / (cand.norm * ref.norm);
}

}  // namespace

std::vector<double> cider_scores(std::span<const TokenStream> candidates, std::span<const ReferenceSet> references,
                                 const IdfFunction& idf, const CiderOptions& options) {
  if (references.empty()) throw Error(Errc::EmptyCorpus, "no reference sets");
  if (candidates.size() != references.size()) {
    throw Error(Errc::LengthMismatch, std::to_string(candidates.size()) + " candidates vs " +
                                          std::to_string(references.size()) + " reference sets");
  }
  const bool cider_d = options.variant == CiderVariant::CiderD;
  const int max_n = options.max_n;
  std::vector<double> out;
  out.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (references[i].empty()) throw Error(Errc::EmptyReferenceSet, std::to_string(i));
    const auto cand_vecs = tfidf(candidates[i], idf, max_n);
    std::vector<double> per_order(static_cast<std::size_t>(max_n), 0.0);
    for (const auto& ref : references[i]) {
      const auto ref_vecs = tfidf(ref, idf, max_n);
      double penalty = 1.0;
      if (cider_d) {
        const double delta = static_cast<double>(candidates[i].size()) - static_cast<double>(ref.size());
        penalty = std::exp(-(delta * delta) / (2.0 * options.sigma * options.sigma));
      }
      for (std::size_t n = 0; n < per_order.size(); ++n) {
        per_order[n] += pair_similarity(cand_vecs[n], ref_vecs[n], cider_d) * penalty;
      }
    }
    double score = 0.0;
    for (double v : per_order) score += v;
    score /= static_cast<double>(max_n);
    score /= static_cast<double>(references[i].size());
    if (cider_d) score *= 10.0;
    out.push_back(score);
  }
  return out;
}

double cider(std::span<const TokenStream> candidates, std::span<const ReferenceSet> references,
             const CiderOptions& options) {
  if (candidates.empty() && references.empty()) throw Error(Errc::EmptyCorpus, "no reference sets");
  const DocumentFrequency df(references, options.max_n);
  const auto scores = cider_scores(candidates, references, [&](const NGram& g) { return df.idf(g); }, options);
  double sum = 0.0;
  for (double s : scores) sum += s;
  return sum / static_cast<double>(scores.size());
}

double mbleu(std::span<const std::vector<TokenStream>> caption_sets, int max_n) {
  if (caption_sets.empty()) throw Error(Errc::EmptySet, "no caption sets");
  double total = 0.0;
  for (std::size_t img = 0; img < caption_sets.size(); ++img) {
    const auto& set = caption_sets[img];
    if (set.size() < 2) throw Error(Errc::SetTooSmall, std::to_string(img));
    double image_sum = 0.0;
    std::vector<TokenStream> others;
    others.reserve(set.size() - 1);
    for (std::size_t i = 0; i < set.size(); ++i) {
      others.clear();
      for (std::size_t j = 0; j < set.size(); ++j) {
        if (j != i) others.push_back(set[j]);
      }
      image_sum += bleu_sentence(set[i], others, max_n);
    }
    total += image_sum / static_cast<double>(set.size());
  }
  return total / static_cast<double>(caption_sets.size());
}

double div_n(std::span<const std::vector<TokenStream>> caption_sets, int n) {
  if (n < 1) throw Error(Errc::OutOfRange, "n must be >= 1");
  if (caption_sets.empty()) throw Error(Errc::EmptySet, "no caption sets");
  double total = 0.0;
  for (std::size_t img = 0; img < caption_sets.size(); ++img) {
    const auto& set = caption_sets[img];
    std::set<NGram> distinct;
    std::size_t tokens = 0;
    for (const auto& caption : set) {
      tokens += caption.size();
      for (const auto& [gram, c] : count_ngrams(caption, n).counts) distinct.insert(gram);
    }
    if (tokens == 0) throw Error(Errc::EmptySet, std::to_string(img));
    total += static_cast<double>(distinct.size()) / static_cast<double>(tokens);
  }
  return total / static_cast<double>(caption_sets.size());
}

}  // namespace capfuse
