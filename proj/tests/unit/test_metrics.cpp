#include <doctest.h>

#include <cmath>

#include "capfuse/error.hpp"
#include "capfuse/metrics.hpp"
#include "oracle.hpp"

using namespace capfuse;

namespace {

TokenStream ts(std::string_view text) { return tokenize(text); }
TokenStream ts(const oracle::Sentence& s) { return TokenStream{s, true}; }

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no capfuse::Error thrown");
  return Errc::ConfigError;
}

}  // namespace

TEST_CASE("tokenize") {
  CHECK(tokenize("A herd of sheep.").tokens == std::vector<std::string>{"a", "herd", "of", "sheep"});
  CHECK(tokenize("").tokens.empty());
  CHECK(tokenize("Queen Street!", true).tokens == std::vector<std::string>{"queen", "street", "!"});
  CHECK(tokenize("it's a dog-like thing").tokens == std::vector<std::string>{"it", "s", "a", "dog", "like", "thing"});
  CHECK(tokenize("Café ÉTÉ").tokens == std::vector<std::string>{"café", "ÉtÉ"});
}

TEST_CASE("corpus BLEU worked example") {
  std::vector<TokenStream> c{ts("the cat sat")};
  std::vector<ReferenceSet> r{{ts("the cat sat down")}};
  CHECK(std::abs(bleu_corpus(c, r, 3) - std::exp(-1.0 / 3.0)) < 1e-12);
  CHECK(std::abs(bleu_corpus(c, r) - std::exp(-1.0 / 3.0)) < 1e-12);
}

TEST_CASE("corpus BLEU identity and zero overlap") {
  std::vector<TokenStream> c{ts("a man riding a horse on the beach")};
  std::vector<ReferenceSet> r{{ts("a man riding a horse on the beach")}};
  CHECK(bleu_corpus(c, r) == 1.0);
  std::vector<ReferenceSet> disjoint{{ts("two cats sleeping together")}};
  CHECK(bleu_corpus(c, disjoint) == 0.0);
}

TEST_CASE("corpus BLEU errors") {
  std::vector<TokenStream> none;
  std::vector<ReferenceSet> refs{{ts("x")}};
  CHECK(code_of([&] { bleu_corpus(none, std::vector<ReferenceSet>{}); }) == Errc::EmptyCandidateList);
  std::vector<TokenStream> two{ts("a"), ts("b")};
  CHECK(code_of([&] { bleu_corpus(two, refs); }) == Errc::LengthMismatch);
  std::vector<TokenStream> one{ts("a")};
  std::vector<ReferenceSet> empty_set{{}};
  CHECK(code_of([&] { bleu_corpus(one, empty_set); }) == Errc::EmptyReferenceSet);
}

TEST_CASE("sentence BLEU") {
  const std::vector<TokenStream> self{ts("a b c d e")};
  CHECK(bleu_sentence(ts("a b c d e"), self) == doctest::Approx(1.0).epsilon(1e-15));

  const std::vector<TokenStream> disjoint{ts("x y z")};
  CHECK(bleu_sentence(ts("a b c"), disjoint) <= 1e-8);
  CHECK(bleu_sentence(ts("a b c"), disjoint) > 0.0);

  const std::vector<TokenStream> r{ts("a b x y")};
  const double expect = std::pow(0.5 * (1.0 / 3.0) * 1e-9 * 1e-9, 0.25);
  CHECK(std::abs(bleu_sentence(ts("a b c d"), r) - expect) < 1e-15);
  CHECK(std::abs(bleu_sentence(ts("a b c d"), r) - oracle::bleu_sentence({"a", "b", "c", "d"}, {{"a", "b", "x", "y"}})) <
        1e-15);

  CHECK(bleu_sentence(ts(""), r) == 0.0);
  CHECK(code_of([] { bleu_sentence(ts("a"), std::vector<TokenStream>{}); }) == Errc::EmptyReferences);
}

TEST_CASE("CIDEr-D identity on a disjoint two-image corpus") {
  std::vector<TokenStream> c{ts("a red double decker bus"), ts("two cats sleeping on sofa")};
  std::vector<ReferenceSet> r{{ts("a red double decker bus")}, {ts("two cats sleeping on sofa")}};
  CHECK(std::abs(cider(c, r) - 10.0) < 1e-12);
  std::vector<TokenStream> off{ts("green trees"), ts("a tall giraffe")};
  CHECK(cider(off, r) == 0.0);
}

TEST_CASE("CIDEr-D toy corpus with one shared unigram") {
  // Image 1: candidate "a b x" against "a b c d"; image 2 matches exactly.
  std::vector<TokenStream> c{ts("a b x"), ts("a e f g")};
  std::vector<ReferenceSet> r{{ts("a b c d")}, {ts("a e f g")}};
  const double image1 = 5.0 / std::sqrt(6.0) * std::exp(-1.0 / 72.0);
  const double expect = (image1 + 10.0) / 2.0;
  CHECK(std::abs(cider(c, r) - expect) < 1e-12);
  const auto per_image = oracle::cider({{"a", "b", "x"}, {"a", "e", "f", "g"}}, {{{"a", "b", "c", "d"}}, {{"a", "e", "f", "g"}}});
  CHECK(std::abs(per_image[0] - image1) < 1e-12);
}

TEST_CASE("plain CIDEr skips clipping and length penalty") {
  std::vector<TokenStream> c{ts("a b b"), ts("c d")};
  std::vector<ReferenceSet> r{{ts("a b")}, {ts("c d e f g h i j k l")}};
  CiderOptions plain;
  plain.variant = CiderVariant::Cider;
  const auto expect = oracle::cider({{"a", "b", "b"}, {"c", "d"}}, {{{"a", "b"}}, {{"c", "d", "e", "f", "g", "h", "i", "j", "k", "l"}}},
                                    false);
  CHECK(std::abs(cider(c, r, plain) - (expect[0] + expect[1]) / 2) < 1e-12);
}

TEST_CASE("CIDEr-D is invariant to uniform IDF scaling") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const int images = 1 + static_cast<int>(rng() % 4);
    std::vector<TokenStream> c;
    std::vector<ReferenceSet> r;
    for (int i = 0; i < images; ++i) {
      c.push_back(ts(oracle::random_sentence(rng, 1, 8)));
      ReferenceSet refs;
      for (int k = 0; k < 1 + static_cast<int>(rng() % 4); ++k) refs.push_back(ts(oracle::random_sentence(rng, 1, 8)));
      r.push_back(refs);
    }
    const DocumentFrequency df(r);
    const auto base = cider_scores(c, r, [&](const NGram& g) { return df.idf(g); });
    for (double k : {0.001, 0.5, 3.0, 1e4}) {
      const auto scaled = cider_scores(c, r, [&](const NGram& g) { return k * df.idf(g); });
      for (std::size_t i = 0; i < base.size(); ++i) CHECK(std::abs(scaled[i] - base[i]) <= 1e-9);
    }
  }
}

TEST_CASE("metrics match the brute-force oracle on random micro-corpora") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const int images = 1 + static_cast<int>(rng() % 5);
    std::vector<oracle::Sentence> oc;
    std::vector<std::vector<oracle::Sentence>> orefs;
    std::vector<TokenStream> c;
    std::vector<ReferenceSet> r;
    for (int i = 0; i < images; ++i) {
      oc.push_back(oracle::random_sentence(rng, 1, 8));
      c.push_back(ts(oc.back()));
      const int n = 2 + static_cast<int>(rng() % 5);
      orefs.emplace_back();
      r.emplace_back();
      for (int k = 0; k < n; ++k) {
        orefs.back().push_back(oracle::random_sentence(rng, 1, 8));
        r.back().push_back(ts(orefs.back().back()));
      }
    }
    CHECK(std::abs(bleu_corpus(c, r) - oracle::bleu_corpus(oc, orefs)) <= 1e-9);
    CHECK(std::abs(bleu_sentence(c[0], r[0]) - oracle::bleu_sentence(oc[0], orefs[0])) <= 1e-9);
    const auto oracle_cider = oracle::cider(oc, orefs);
    double mean = 0;
    for (double v : oracle_cider) mean += v;
    CHECK(std::abs(cider(c, r) - mean / images) <= 1e-9);
    CHECK(std::abs(mbleu(r) - oracle::mbleu(orefs)) <= 1e-9);
    CHECK(std::abs(div_n(r, 1) - oracle::div_n(orefs, 1)) <= 1e-9);
    CHECK(std::abs(div_n(r, 2) - oracle::div_n(orefs, 2)) <= 1e-9);
  }
}

TEST_CASE("BLEU never drops when a reference is added") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 300; ++trial) {
    const int images = 1 + static_cast<int>(rng() % 4);
    std::vector<TokenStream> c;
    std::vector<ReferenceSet> r;
    for (int i = 0; i < images; ++i) {
      c.push_back(ts(oracle::random_sentence(rng, 1, 8)));
      r.push_back({ts(oracle::random_sentence(rng, 1, 8))});
    }
    const double before = bleu_corpus(c, r);
    r[rng() % r.size()].push_back(ts(oracle::random_sentence(rng, 1, 8)));
    CHECK(bleu_corpus(c, r) >= before);
  }
}

TEST_CASE("mBLEU") {
  std::vector<std::vector<TokenStream>> same{{ts("a dog runs fast"), ts("a dog runs fast"), ts("a dog runs fast")}};
  CHECK(mbleu(same) == doctest::Approx(1.0).epsilon(1e-15));
  std::vector<std::vector<TokenStream>> disjoint{{ts("a b c"), ts("x y z")}};
  CHECK(mbleu(disjoint) < 1e-8);
  std::vector<std::vector<TokenStream>> pair{{ts("a b c d"), ts("a b x y")}};
  const double each = std::pow(0.5 * (1.0 / 3.0) * 1e-9 * 1e-9, 0.25);
  CHECK(std::abs(mbleu(pair) - each) < 1e-15);

  std::vector<std::vector<TokenStream>> three{{ts("a b c"), ts("a c d e"), ts("b c d")}};
  std::vector<std::vector<TokenStream>> permuted{{ts("b c d"), ts("a b c"), ts("a c d e")}};
  CHECK(std::abs(mbleu(three) - mbleu(permuted)) < 1e-15);

  std::vector<std::vector<TokenStream>> lonely{{ts("a b")}};
  CHECK(code_of([&] { mbleu(lonely); }) == Errc::SetTooSmall);
}

TEST_CASE("Div-n") {
  std::vector<std::vector<TokenStream>> twice{{ts("a b c"), ts("a b c")}};
  CHECK(div_n(twice, 1) == doctest::Approx(0.5));
  std::vector<std::vector<TokenStream>> once{{ts("a b c")}};
  CHECK(div_n(once, 1) == doctest::Approx(1.0));
  CHECK(div_n(once, 2) == doctest::Approx(2.0 / 3.0));
  std::vector<std::vector<TokenStream>> distinct{
      {ts("a b c d"), ts("e f g h"), ts("i j k l"), ts("m n o p"), ts("q r s t")}};
  CHECK(div_n(distinct, 1) == doctest::Approx(1.0));

  std::vector<std::vector<TokenStream>> none;
  CHECK(code_of([&] { div_n(none, 1); }) == Errc::EmptySet);
  std::vector<std::vector<TokenStream>> empty_caps{{ts("")}};
  CHECK(code_of([&] { div_n(empty_caps, 1); }) == Errc::EmptySet);

  std::mt19937_64 rng(4);
  for (int t = 0; t < 100; ++t) {
    std::vector<TokenStream> set;
    double grams = 0, tokens = 0;
    for (int k = 0; k < 1 + static_cast<int>(rng() % 5); ++k) {
      set.push_back(ts(oracle::random_sentence(rng, 1, 8)));
      tokens += static_cast<double>(set.back().size());
      grams += std::max(0.0, static_cast<double>(set.back().size()) - 1);
    }
    std::vector<std::vector<TokenStream>> one_set{set};
    auto reversed = set;
    std::reverse(reversed.begin(), reversed.end());
    std::vector<std::vector<TokenStream>> rev_set{reversed};
    CHECK(div_n(one_set, 2) == div_n(rev_set, 2));
    CHECK(div_n(one_set, 2) <= grams / tokens);
  }
}
