#include "capfuse/report.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>

#include "capfuse/error.hpp"

namespace capfuse {

namespace {

struct Column {
  const char* name;
  std::optional<double> QualityRow::*field;
  bool higher_is_better;
};

const Column kColumns[] = {
    {"B@4", &QualityRow::bleu4, true},          {"C", &QualityRow::cider, true},
    {"BLIPScore", &QualityRow::blip_score_mean, true}, {"mBLEU", &QualityRow::mbleu, false},
    {"Div-1", &QualityRow::div1, true},         {"Div-2", &QualityRow::div2, true},
};

// One caption per image for a row, tagged with the image's position.
struct RowCaptions {
  std::vector<std::size_t> image_index;
  std::vector<std::string> text;
  std::vector<double> blip;  // parallel to text when known
};

void check_keys(const std::vector<std::string>& expected, std::vector<std::string> got, const char* what) {
  std::vector<std::string> want = expected;
  std::sort(want.begin(), want.end());
  std::sort(got.begin(), got.end());
  if (want == got) return;
  std::vector<std::string> diff;
  std::set_symmetric_difference(want.begin(), want.end(), got.begin(), got.end(), std::back_inserter(diff));
  throw Error(Errc::KeyMismatch, std::string(what) + ": " + (diff.empty() ? std::string("duplicate ids") : diff.front()));
}

QualityRow quality_row(const std::string& name, const RowCaptions& rows, const std::vector<ReferenceSet>& gt_tokens,
                       const EvalConfig& config) {
  QualityRow row;
  row.model = name;
  row.images = rows.text.size();

  std::vector<TokenStream> cands;
  std::vector<ReferenceSet> refs;
  std::vector<std::vector<TokenStream>> diversity_sets;
  for (std::size_t k = 0; k < rows.text.size(); ++k) {
    const auto& gts = gt_tokens[rows.image_index[k]];
    if (gts.empty()) continue;
    auto cand = tokenize(rows.text[k], false);
    cands.push_back(cand);
    refs.push_back(gts);
    if (config.diversity) {
      std::vector<TokenStream> set{std::move(cand)};
      set.insert(set.end(), gts.begin(), gts.end());
      diversity_sets.push_back(std::move(set));
    }
  }
  if (!cands.empty()) {
    row.bleu4 = bleu_corpus(cands, refs, 4);
    row.cider = cider(cands, refs, config.cider);
  }
  if (!diversity_sets.empty()) {
    row.mbleu = mbleu(diversity_sets);
    row.div1 = div_n(diversity_sets, 1);
    row.div2 = div_n(diversity_sets, 2);
  }
  if (!rows.blip.empty()) {
    double sum = 0.0;
    for (double b : rows.blip) sum += b;
    row.blip_score_mean = sum / static_cast<double>(rows.blip.size());
    row.blip_score_count = rows.blip.size();
  }
  return row;
}

void mark_best(std::vector<QualityRow>& rows) {
  for (const auto& col : kColumns) {
    std::set<double, std::function<bool(double, double)>> values(
        [&](double a, double b) { return col.higher_is_better ? a > b : a < b; });
    for (const auto& r : rows) {
      if (r.*col.field) values.insert(*(r.*col.field));
    }
    if (values.empty()) continue;
    auto it = values.begin();
    const double best = *it;
    const bool has_second = values.size() > 1;
    const double second = has_second ? *std::next(it) : best;
    for (auto& r : rows) {
      const auto& v = r.*col.field;
      if (!v) continue;
      if (*v == best) r.best.emplace_back(col.name);
      else if (has_second && *v == second) r.second.emplace_back(col.name);
    }
  }
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json to_json(const MeanStd& m) { return json{{"mean", m.mean}, {"std", m.stddev}, {"count", m.count}}; }

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

}  // namespace

EvalReport eval_report(const EvalInputs& in, const EvalConfig& config) {
  std::vector<std::string> ids;
  std::map<std::string, std::size_t> index;
  for (const auto& e : in.corpus) {
    index.emplace(e.image_id, ids.size());
    ids.push_back(e.image_id);
  }
  {
    std::vector<std::string> got;
    for (const auto& s : in.candidates) got.push_back(s.image_id);
    check_keys(ids, got, "candidates");
  }
  if (!in.ranked.empty()) {
    std::vector<std::string> got;
    for (const auto& r : in.ranked) got.push_back(r.image_id);
    check_keys(ids, got, "ranked");
  }
  if (!in.fused.empty()) {
    std::vector<std::string> got;
    for (const auto& f : in.fused) got.push_back(f.image_id);
    check_keys(ids, got, "fused");
  }

  std::vector<ReferenceSet> gt_tokens(ids.size());
  std::vector<std::string> all_ground_truths;
  for (std::size_t i = 0; i < in.corpus.size(); ++i) {
    gt_tokens[i] = tokenize_all(in.corpus[i].ground_truths, false);
    all_ground_truths.insert(all_ground_truths.end(), in.corpus[i].ground_truths.begin(),
                             in.corpus[i].ground_truths.end());
  }

  std::map<std::string, const RankedSet*> ranked_by_id;
  for (const auto& r : in.ranked) ranked_by_id[r.image_id] = &r;

  // Per-model captions in corpus order.
  std::map<std::string, RowCaptions> by_model;
  std::vector<const CandidateSet*> sets(ids.size());
  for (const auto& s : in.candidates) sets[index.at(s.image_id)] = &s;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto* ranked = in.ranked.empty() ? nullptr : ranked_by_id.at(ids[i]);
    for (const auto& c : sets[i]->candidates) {
      auto& row = by_model[c.model_id];
      row.image_index.push_back(i);
      row.text.push_back(c.text);
      if (ranked) {
        for (const auto& sc : ranked->scored) {
          if (sc.model_id == c.model_id) row.blip.push_back(sc.blip_score);
        }
      }
    }
  }

  EvalReport report;
  std::map<std::string, std::vector<double>> distributions;
  for (const auto& [model, rows] : by_model) {
    report.quality.push_back(quality_row(model, rows, gt_tokens, config));
    if (!rows.blip.empty()) distributions[model] = rows.blip;
  }

  std::map<std::string, std::vector<std::string>> richness_input;
  for (const auto& [model, rows] : by_model) {
    richness_input[model] = rows.text;
    report.richness_columns.push_back(model);
  }

  if (!in.ranked.empty()) {
    RowCaptions best;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const auto& top = ranked_by_id.at(ids[i])->top2.first;
      best.image_index.push_back(i);
      best.text.push_back(top.text);
      best.blip.push_back(top.blip_score);
    }
    report.quality.push_back(quality_row(kBestRow, best, gt_tokens, config));
    distributions[kBestRow] = best.blip;
    richness_input[kBestRow] = best.text;
    report.richness_columns.emplace_back(kBestRow);
    report.pair_frequency = pair_frequency(in.ranked);
  }

  if (!in.fused.empty()) {
    std::map<std::string, const FusedRecord*> fused_by_id;
    for (const auto& f : in.fused) fused_by_id[f.image_id] = &f;
    RowCaptions fusion;
    bool all_scored = true;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      fusion.image_index.push_back(i);
      fusion.text.push_back(fused_by_id.at(ids[i])->result.cleaned);
      if (auto it = in.fusion_blip_scores.find(ids[i]); it != in.fusion_blip_scores.end()) {
        fusion.blip.push_back(it->second);
      } else {
        all_scored = false;
      }
    }
    // A partial BLIPScore column would not be comparable with the other rows.
    if (!all_scored) fusion.blip.clear();
    report.quality.push_back(quality_row(kFusionRow, fusion, gt_tokens, config));
    if (!fusion.blip.empty()) distributions[kFusionRow] = fusion.blip;
    richness_input[kFusionRow] = fusion.text;
    report.richness_columns.emplace_back(kFusionRow);
  }

  if (!all_ground_truths.empty()) {
    richness_input[kGroundTruthColumn] = all_ground_truths;
    report.richness_columns.emplace_back(kGroundTruthColumn);
  }

  mark_best(report.quality);

  if (config.richness) {
    LexiconTagger builtin;
    PosTagger& tagger = config.tagger ? *config.tagger : builtin;
    report.richness = pos_profile(richness_input, tagger);
  } else {
    report.richness_columns.clear();
  }
  if (!distributions.empty()) report.score_distribution = score_distribution(distributions);

  report.conventions = json{
      {"tokenizer", "ASCII lowercase, punctuation removed"},
      {"bleu", "corpus BLEU@4, shortest-reference brevity penalty"},
      {"cider", config.cider.variant == CiderVariant::CiderD ? "CIDEr-D, sigma " + fixed(config.cider.sigma, 1) + ", x10"
                                                              : std::string("CIDEr (no clipping, no length penalty)")},
      {"idf", "log(images) - log(max(1, df)), one document per image"},
      {"diversity_set", "model caption plus the image's ground truths"},
      {"sentence_bleu_floor", kSentenceBleuFloor},
      {"std", "population"},
      {"quantiles", "Hyndman-Fan type 5 (midpoint knots)"},
      {"markdown_scale", "B@4 and C shown x100"},
  };
  return report;
}

json to_json(const EvalReport& r) {
  json quality = json::array();
  for (const auto& q : r.quality) {
    quality.push_back({{"model", q.model},
                       {"images", q.images},
                       {"bleu4", optional_json(q.bleu4)},
                       {"cider", optional_json(q.cider)},
                       {"blip_score_mean", optional_json(q.blip_score_mean)},
                       {"blip_score_count", q.blip_score_count},
                       {"mbleu", optional_json(q.mbleu)},
                       {"div1", optional_json(q.div1)},
                       {"div2", optional_json(q.div2)},
                       {"best", q.best},
                       {"second", q.second}});
  }
  json richness = json::array();
  for (const auto& col : r.richness_columns) {
    auto it = r.richness.find(col);
    if (it == r.richness.end()) continue;
    json cats = json::object();
    for (const auto& [cat, ms] : it->second.categories) cats[std::string(category_name(cat))] = to_json(ms);
    richness.push_back({{"model", col},
                        {"captions", it->second.captions},
                        {"tokens", to_json(it->second.tokens)},
                        {"categories", std::move(cats)}});
  }
  json pairs = json::array();
  for (const auto& [pair, pct] : r.pair_frequency) {
    pairs.push_back({{"models", {pair.first, pair.second}}, {"percent", pct}});
  }
  json dist = json::array();
  for (const auto& [model, s] : r.score_distribution) {
    dist.push_back({{"model", model},
                    {"count", s.count},
                    {"min", s.min},
                    {"q1", s.q1},
                    {"median", s.median},
                    {"q3", s.q3},
                    {"max", s.max},
                    {"mean", s.mean}});
  }
  return json{{"quality", std::move(quality)},
              {"richness", std::move(richness)},
              {"pair_frequency", std::move(pairs)},
              {"score_distribution", std::move(dist)},
              {"conventions", r.conventions}};
}

std::string render_markdown(const EvalReport& report) { return render_markdown(to_json(report)); }

std::string render_markdown(const json& report) {
  std::ostringstream md;
  auto cell = [](const json& row, const char* key, const char* column, double scale, int decimals) {
    const auto& v = row.at(key);
    if (v.is_null()) return std::string("-");
    std::string text = fixed(v.get<double>() * scale, decimals);
    auto has = [&](const char* list) {
      const auto& l = row.at(list);
      return std::find(l.begin(), l.end(), column) != l.end();
    };
    if (has("best")) return "**" + text + "**";
    if (has("second")) return "_" + text + "_";
    return text;
  };

  md << "## Quality and diversity\n\n";
  md << "| Model | B@4 | M | C | S | BLIPScore | mBLEU | Div-1 | Div-2 |\n";
  md << "|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& row : report.at("quality")) {
    md << "| " << row.at("model").get<std::string>() << " | " << cell(row, "bleu4", "B@4", 100.0, 1) << " | - | "
       << cell(row, "cider", "C", 100.0, 1) << " | - | " << cell(row, "blip_score_mean", "BLIPScore", 1.0, 4) << " | "
       << cell(row, "mbleu", "mBLEU", 1.0, 2) << " | " << cell(row, "div1", "Div-1", 1.0, 2) << " | "
       << cell(row, "div2", "Div-2", 1.0, 2) << " |\n";
  }
  md << "\nM (METEOR) and S (SPICE) are external scorers and are not computed. "
        "Best per column in bold, second best in italics; mBLEU is lower-is-better.\n";

  const auto& richness = report.at("richness");
  if (!richness.empty()) {
    md << "\n## Tokens and POS tags\n\n| |";
    for (const auto& col : richness) md << ' ' << col.at("model").get<std::string>() << " |";
    md << "\n|---|";
    for (std::size_t i = 0; i < richness.size(); ++i) md << "---|";
    md << '\n';
    auto ms = [](const json& m) { return fixed(m.at("mean").get<double>(), 2) + "±" + fixed(m.at("std").get<double>(), 2); };
    md << "| Token |";
    for (const auto& col : richness) md << ' ' << ms(col.at("tokens")) << " |";
    md << '\n';
    for (auto cat : kPosCategories) {
      const std::string name(category_name(cat));
      bool occurs = false;
      for (const auto& col : richness) occurs = occurs || col.at("categories").contains(name);
      if (!occurs) continue;
      md << "| " << name << " |";
      for (const auto& col : richness) {
        const auto& cats = col.at("categories");
        md << ' ' << (cats.contains(name) ? ms(cats.at(name)) : std::string("0.00±0.00")) << " |";
      }
      md << '\n';
    }
    md << "\nTags that never occurred are omitted. Standard deviations are population standard deviations.\n";
  }

  const auto& pairs = report.at("pair_frequency");
  if (!pairs.empty()) {
    md << "\n## Top-2 pair selection\n\n| Pair | % of images |\n|---|---|\n";
    for (const auto& p : pairs) {
      md << "| " << p.at("models").at(0).get<std::string>() << " + " << p.at("models").at(1).get<std::string>()
         << " | " << fixed(p.at("percent").get<double>(), 2) << " |\n";
    }
  }

  const auto& dist = report.at("score_distribution");
  if (!dist.empty()) {
    md << "\n## BLIPScore distribution\n\n| Model | n | min | q1 | median | q3 | max | mean |\n"
          "|---|---|---|---|---|---|---|---|\n";
    for (const auto& d : dist) {
      md << "| " << d.at("model").get<std::string>() << " | " << d.at("count").get<std::size_t>();
      for (const char* k : {"min", "q1", "median", "q3", "max", "mean"}) md << " | " << fixed(d.at(k).get<double>(), 4);
      md << " |\n";
    }
  }
  return md.str();
}

}  // namespace capfuse
