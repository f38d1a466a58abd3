#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace capfuse {

// Universal POS tagset (17 tags).
enum class Upos { ADJ, ADP, ADV, AUX, CCONJ, DET, INTJ, NOUN, NUM, PART, PRON, PROPN, PUNCT, SCONJ, SYM, VERB, X };

inline constexpr std::size_t kUposCount = 17;

std::string_view upos_name(Upos tag);
std::optional<Upos> parse_upos(std::string_view name);

// Rows of the richness table. Tags outside these (INTJ, PUNCT, SYM, X) are
// counted as uncategorized.
enum class PosCategory { Adjective, Adposition, Adverb, Conjunction, Determiner, Noun, Numeral, Particles, Pronouns, Verb };

inline constexpr std::array<PosCategory, 10> kPosCategories{
    PosCategory::Adjective, PosCategory::Adposition, PosCategory::Adverb,    PosCategory::Conjunction,
    PosCategory::Determiner, PosCategory::Noun,      PosCategory::Numeral, PosCategory::Particles,
    PosCategory::Pronouns,  PosCategory::Verb};

std::string_view category_name(PosCategory category);
std::optional<PosCategory> category_of(Upos tag);

class PosTagger {
 public:
  virtual ~PosTagger() = default;
  // Exactly one tag per token.
  virtual std::vector<Upos> tag(const std::vector<std::string>& tokens) = 0;
  virtual std::vector<std::vector<Upos>> tag_batch(const std::vector<std::vector<std::string>>& captions);
};

// Closed-class lexicon plus suffix rules. Deterministic and dependency free;
// the word lists are reproduced in docs/pos_lexicon.md.
class LexiconTagger final : public PosTagger {
 public:
  LexiconTagger();
  std::vector<Upos> tag(const std::vector<std::string>& tokens) override;
  Upos tag_word(std::string_view word) const;

  const std::map<std::string, Upos, std::less<>>& lexicon() const { return lexicon_; }

 private:
  std::map<std::string, Upos, std::less<>> lexicon_;
};

// Runs `command` once per batch. Input on stdin: one token per line, a blank
// line after each caption. Expected output: `token<TAB>TAG` lines in the same
// layout.
class ExternalPosTagger final : public PosTagger {
 public:
  explicit ExternalPosTagger(std::string command) : command_(std::move(command)) {}
  std::vector<Upos> tag(const std::vector<std::string>& tokens) override;
  std::vector<std::vector<Upos>> tag_batch(const std::vector<std::vector<std::string>>& captions) override;

 private:
  std::string command_;
};

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // population
  std::size_t count = 0;
};

MeanStd mean_std(const std::vector<double>& values);

struct RichnessRow {
  std::size_t captions = 0;
  MeanStd tokens;
  std::map<PosCategory, MeanStd> categories;  // only categories that occurred
};

// Token counts exclude punctuation; captions are tokenized with tokenize().
std::map<std::string, RichnessRow> pos_profile(const std::map<std::string, std::vector<std::string>>& captions_by_model,
                                               PosTagger& tagger);

}  // namespace capfuse
