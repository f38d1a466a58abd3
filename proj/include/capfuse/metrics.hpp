#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace capfuse {

struct TokenStream {
  std::vector<std::string> tokens;
  bool punctuation_removed = true;

  std::size_t size() const { return tokens.size(); }
  bool operator==(const TokenStream&) const = default;
};

// Lowercases ASCII, splits on whitespace and makes every ASCII punctuation
// character its own token. With keep_punct == false those tokens are dropped.
TokenStream tokenize(std::string_view text, bool keep_punct = false);

using NGram = std::vector<std::string>;

struct NGramCounts {
  int n = 1;
  std::map<NGram, int> counts;

  int total() const;
};

NGramCounts count_ngrams(std::span<const std::string> tokens, int n);
inline NGramCounts count_ngrams(const TokenStream& stream, int n) { return count_ngrams(stream.tokens, n); }

using ReferenceSet = std::vector<TokenStream>;

inline constexpr int kBleuMaxOrder = 4;
inline constexpr double kSentenceBleuFloor = 1e-9;

// Corpus BLEU with clipped n-gram precisions summed over the corpus. The
// brevity penalty uses the shortest reference of each image, so adding a
// reference can never lower the score.
// Orders longer than every candidate contribute no n-grams and are left out of
// the geometric mean.
double bleu_corpus(std::span<const TokenStream> candidates, std::span<const ReferenceSet> references,
                   int max_n = kBleuMaxOrder);

// Sentence BLEU over orders 1..min(max_n, |candidate|); zero precisions are
// floored at kSentenceBleuFloor.
double bleu_sentence(const TokenStream& candidate, std::span<const TokenStream> references,
                     int max_n = kBleuMaxOrder);

enum class CiderVariant { CiderD, Cider };

struct CiderOptions {
  CiderVariant variant = CiderVariant::CiderD;
  double sigma = 6.0;
  int max_n = 4;
};

// Document frequencies over a reference corpus; one document per image.
class DocumentFrequency {
 public:
  explicit DocumentFrequency(std::span<const ReferenceSet> references, int max_n = 4);

  // log(|images|) - log(max(1, df(gram)))
  double idf(const NGram& gram) const;
  std::size_t num_documents() const { return num_documents_; }

 private:
  std::size_t num_documents_ = 0;
  double log_documents_ = 0.0;
  std::map<NGram, std::size_t> df_;
};

using IdfFunction = std::function<double(const NGram&)>;

// Per-image CIDEr scores with caller-supplied IDF weights.
std::vector<double> cider_scores(std::span<const TokenStream> candidates, std::span<const ReferenceSet> references,
                                 const IdfFunction& idf, const CiderOptions& options = {});

// Corpus CIDEr: mean of per-image scores, IDF from the references themselves.
double cider(std::span<const TokenStream> candidates, std::span<const ReferenceSet> references,
             const CiderOptions& options = {});

// Mean over images of the mean leave-one-out sentence BLEU within each set.
double mbleu(std::span<const std::vector<TokenStream>> caption_sets, int max_n = kBleuMaxOrder);

// Mean over images of distinct n-grams in the set / total tokens in the set.
double div_n(std::span<const std::vector<TokenStream>> caption_sets, int n);

std::vector<TokenStream> tokenize_all(std::span<const std::string> texts, bool keep_punct = false);

}  // namespace capfuse
