#include "capfuse/pos.hpp"

#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "capfuse/error.hpp"
#include "capfuse/metrics.hpp"
#include "capfuse/util.hpp"

namespace capfuse {

namespace {

constexpr std::array<std::string_view, kUposCount> kUposNames{
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
    "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X"};

struct LexiconClass {
  Upos tag;
  std::string_view words;
};

// Keep in sync with docs/pos_lexicon.md (checked by test_pos).
constexpr LexiconClass kLexicon[] = {
    {Upos::DET, "a an the this that these those some each every another no any all both either neither"},
    {Upos::ADP,
     "of in on at with by for from to into onto near behind under over above across along around through beside "
     "besides between inside outside underneath beneath against toward towards among atop during after before past "
     "via like amid upon down up off out"},
    {Upos::CCONJ, "and or but nor yet plus"},
    {Upos::SCONJ, "while as because if although though whereas since until unless whether"},
    {Upos::PRON,
     "he she it they them him her his hers its their theirs we us our ours you your yours i me my mine who whom "
     "whose what which there something someone somebody anything nothing everything everyone itself himself "
     "herself themselves"},
    {Upos::PART, "not n't s 's"},
    {Upos::AUX, "is are was were be been being am has have had do does did can could will would may might must should shall"},
    {Upos::VERB,
     "stand stands stood sit sits sat hold holds held ride rides rode run runs ran walk walks eat eats ate look looks "
     "play plays lie lies lay lays fly flies flew wait waits carry carries cross crosses drive drives graze grazes "
     "make makes made take takes took get gets got go goes went see sees saw rest rests hang hangs hung contain "
     "contains create creates pose poses perch perches swim swims throw throws threw catch catches caught hit hits "
     "kick kicks cut cuts fill fills cook cooks prepare prepares talk talks read reads use uses wear wears wore "
     "stare stares surround surrounds lean leans try tries appear appears seem seems"},
    {Upos::ADJ,
     "red orange yellow green blue purple pink brown black white gray grey silver gold golden colorful big small "
     "large little tiny huge giant tall short long old young new empty full open closed busy clean dirty dark bright "
     "wet dry hot cold warm sunny cloudy snowy rainy grassy sandy rocky wooden plastic metallic several many few "
     "other different same various single double high low wide narrow thick thin fresh ripe good nice pretty cute "
     "fluffy furry striped spotted stuffed crowded next first second third last vivid vibrant friendly lovely curly "
     "silly elderly"},
    {Upos::ADV, "very together away here just also too almost still quite really nearby only"},
    {Upos::NUM,
     "zero one two three four five six seven eight nine ten eleven twelve thirteen fourteen fifteen sixteen "
     "seventeen eighteen nineteen twenty thirty forty fifty sixty seventy eighty ninety hundred thousand"},
    {Upos::INTJ, "hello hi oh wow yes"},
    // Nouns that the suffix rules would otherwise misread.
    {Upos::NOUN,
     "building ceiling thing clothing king ring wing swing spring string evening morning painting railing awning "
     "icing frosting topping stuffing sibling pudding bedding wedding dumpling bed shed sled seed speed weed feed "
     "breed reed family belly jelly lily butterfly dragonfly assembly supply traffic music picnic clinic topic "
     "mosaic animal hospital signal terminal festival pedestal sandal capital medal pedal petal metal canal rental "
     "portal crystal cereal mammal"},
};

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool is_number_like(std::string_view w) {
  bool digit = false;
  for (char c : w) {
    if (std::isdigit(static_cast<unsigned char>(c))) {
      digit = true;
    } else if (c != ',' && c != '.') {
      return false;
    }
  }
  return digit;
}

bool is_punct_token(std::string_view w) {
  if (w.empty()) return false;
  for (char c : w) {
    const auto u = static_cast<unsigned char>(c);
    if (u >= 0x80 || !std::ispunct(u)) return false;
  }
  return true;
}

}  // namespace

std::string_view upos_name(Upos tag) { return kUposNames[static_cast<std::size_t>(tag)]; }

std::optional<Upos> parse_upos(std::string_view name) {
  for (std::size_t i = 0; i < kUposNames.size(); ++i) {
    if (kUposNames[i] == name) return static_cast<Upos>(i);
  }
  return std::nullopt;
}

std::string_view category_name(PosCategory category) {
  switch (category) {
    case PosCategory::Adjective: return "Adjective";
    case PosCategory::Adposition: return "Adposition";
    case PosCategory::Adverb: return "Adverb";
    case PosCategory::Conjunction: return "Conjunction";
    case PosCategory::Determiner: return "Determiner";
    case PosCategory::Noun: return "Noun";
    case PosCategory::Numeral: return "Numeral";
    case PosCategory::Particles: return "Particles";
    case PosCategory::Pronouns: return "Pronouns";
    case PosCategory::Verb: return "Verb";
  }
  return "?";
}

std::optional<PosCategory> category_of(Upos tag) {
  switch (tag) {
    case Upos::ADJ: return PosCategory::Adjective;
    case Upos::ADP: return PosCategory::Adposition;
    case Upos::ADV: return PosCategory::Adverb;
    case Upos::CCONJ:
    case Upos::SCONJ: return PosCategory::Conjunction;
    case Upos::DET: return PosCategory::Determiner;
    case Upos::NOUN:
    case Upos::PROPN: return PosCategory::Noun;
    case Upos::NUM: return PosCategory::Numeral;
    case Upos::PART: return PosCategory::Particles;
    case Upos::PRON: return PosCategory::Pronouns;
    case Upos::AUX:
    case Upos::VERB: return PosCategory::Verb;
    default: return std::nullopt;
  }
}

std::vector<std::vector<Upos>> PosTagger::tag_batch(const std::vector<std::vector<std::string>>& captions) {
  std::vector<std::vector<Upos>> out;
  out.reserve(captions.size());
  for (const auto& c : captions) out.push_back(tag(c));
  return out;
}

LexiconTagger::LexiconTagger() {
  for (const auto& cls : kLexicon) {
    std::istringstream words{std::string(cls.words)};
    std::string w;
    while (words >> w) lexicon_.emplace(w, cls.tag);
  }
}

Upos LexiconTagger::tag_word(std::string_view word) const {
  if (auto it = lexicon_.find(word); it != lexicon_.end()) return it->second;
  if (is_punct_token(word)) return Upos::PUNCT;
  if (is_number_like(word)) return Upos::NUM;
  const auto len = word.size();
  if (len > 4 && ends_with(word, "ly")) return Upos::ADV;
  if (len > 4 && ends_with(word, "ing")) return Upos::VERB;
  if (len > 3 && ends_with(word, "ed")) return Upos::VERB;
  for (std::string_view suffix : {"ous", "ful", "able", "ible", "less"}) {
    if (len > suffix.size() + 2 && ends_with(word, suffix)) return Upos::ADJ;
  }
  if (len > 5 && (ends_with(word, "ive") || ends_with(word, "ish") || ends_with(word, "al"))) return Upos::ADJ;
  return Upos::NOUN;
}

std::vector<Upos> LexiconTagger::tag(const std::vector<std::string>& tokens) {
  std::vector<Upos> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(tag_word(t));
  return out;
}

std::vector<Upos> ExternalPosTagger::tag(const std::vector<std::string>& tokens) {
  return tag_batch({tokens}).front();
}

std::vector<std::vector<Upos>> ExternalPosTagger::tag_batch(const std::vector<std::vector<std::string>>& captions) {
  static std::atomic<unsigned> counter{0};
  const auto dir = std::filesystem::temp_directory_path();
  const auto stem = "capfuse_tagger_" + std::to_string(::getpid()) + "_" + std::to_string(counter++);
  const auto in_path = dir / (stem + ".in");
  const auto out_path = dir / (stem + ".out");
  {
    std::ofstream in(in_path, std::ios::binary);
    for (const auto& caption : captions) {
      for (const auto& tok : caption) in << tok << '\n';
      in << '\n';
    }
  }
  const std::string cmd = command_ + " < '" + in_path.string() + "' > '" + out_path.string() + "'";
  const int status = std::system(cmd.c_str());
  std::filesystem::remove(in_path);
  if (status != 0) {
    std::filesystem::remove(out_path);
    throw Error(Errc::TaggerFailure, "tagger command exited with status " + std::to_string(status));
  }

  std::ifstream out(out_path, std::ios::binary);
  std::vector<std::vector<Upos>> result;
  std::vector<Upos> current;
  std::string line;
  auto next_caption = [&] {
    const auto idx = result.size();
    if (idx >= captions.size() || current.size() != captions[idx].size()) {
      const auto& expected = idx < captions.size() ? captions[idx] : std::vector<std::string>{};
      const auto at = std::min(current.size(), expected.size());
      throw Error(Errc::TaggerFailure, at < expected.size() ? expected[at] : std::string("<extra output>"));
    }
    result.push_back(std::move(current));
    current.clear();
  };
  try {
    while (std::getline(out, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) {
        next_caption();
        continue;
      }
      const auto tab = line.find('\t');
      const auto token = line.substr(0, tab);
      const auto tag = tab == std::string::npos ? std::optional<Upos>{} : parse_upos(line.substr(tab + 1));
      if (!tag) throw Error(Errc::TaggerFailure, token);
      current.push_back(*tag);
    }
    if (!current.empty()) next_caption();
    while (result.size() < captions.size() && captions[result.size()].empty()) result.emplace_back();
    if (result.size() != captions.size()) throw Error(Errc::TaggerFailure, "tagger returned too few captions");
  } catch (...) {
    out.close();
    std::filesystem::remove(out_path);
    throw;
  }
  out.close();
  std::filesystem::remove(out_path);
  return result;
}

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd out;
  out.count = values.size();
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - out.mean) * (v - out.mean);
  out.stddev = std::sqrt(sq / static_cast<double>(values.size()));
  return out;
}

std::map<std::string, RichnessRow> pos_profile(const std::map<std::string, std::vector<std::string>>& captions_by_model,
                                               PosTagger& tagger) {
  if (captions_by_model.empty()) throw Error(Errc::EmptySet, "no models");
  std::map<std::string, RichnessRow> out;
  for (const auto& [model, captions] : captions_by_model) {
    if (captions.empty()) throw Error(Errc::EmptySet, model);
    std::vector<std::vector<std::string>> tokens;
    tokens.reserve(captions.size());
    for (const auto& c : captions) tokens.push_back(tokenize(c, false).tokens);
    const auto tags = tagger.tag_batch(tokens);
    if (tags.size() != tokens.size()) throw Error(Errc::TaggerFailure, "batch size mismatch");

    std::vector<double> token_counts;
    std::map<PosCategory, std::vector<double>> per_category;
    for (auto cat : kPosCategories) per_category[cat].assign(captions.size(), 0.0);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (tags[i].size() != tokens[i].size()) {
        throw Error(Errc::TaggerFailure, tokens[i].empty() ? std::string("<empty>") : tokens[i].front());
      }
      token_counts.push_back(static_cast<double>(tokens[i].size()));
      for (auto tag : tags[i]) {
        if (auto cat = category_of(tag)) per_category[*cat][i] += 1.0;
      }
    }

    RichnessRow row;
    row.captions = captions.size();
    row.tokens = mean_std(token_counts);
    for (const auto& [cat, counts] : per_category) {
      double total = 0.0;
      for (double c : counts) total += c;
      if (total > 0.0) row.categories.emplace(cat, mean_std(counts));
    }
    out.emplace(model, std::move(row));
  }
  return out;
}

}  // namespace capfuse
