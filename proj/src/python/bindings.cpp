#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "capfuse/corpus.hpp"
#include "capfuse/error.hpp"
#include "capfuse/fuser.hpp"
#include "capfuse/metrics.hpp"
#include "capfuse/scorer.hpp"
#include "capfuse/study.hpp"

namespace py = pybind11;
using namespace capfuse;

namespace {

// Python callers pass raw caption strings; tokenization happens here.
std::vector<TokenStream> streams(const std::vector<std::string>& texts) { return tokenize_all(texts); }

std::vector<ReferenceSet> reference_sets(const std::vector<std::vector<std::string>>& refs) {
  std::vector<ReferenceSet> out;
  out.reserve(refs.size());
  for (const auto& r : refs) out.push_back(tokenize_all(r));
  return out;
}

void check_aligned(std::size_t a, std::size_t b) {
  if (a != b) throw py::value_error("candidates and references must have the same length");
}

py::dict ranked_dict(const RankedSet& r) {
  py::list order, scored;
  for (auto i : r.order) order.append(r.scored[i].model_id);
  for (const auto& s : r.scored) scored.append(py::make_tuple(s.model_id, s.text, s.blip_score));
  py::dict d;
  d["image_id"] = r.image_id;
  d["order"] = order;
  d["scored"] = scored;
  d["top2"] = py::make_tuple(r.top2.first.model_id, r.top2.second.model_id);
  return d;
}

}  // namespace

PYBIND11_MODULE(_capfuse, m) {
  m.doc() = "Caption scoring, fusion helpers and caption metrics";

  static py::exception<Error> exc(m, "CapfuseError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(exc.ptr(), (std::string(errc_name(e.code())) + ": " + e.what()).c_str());
    }
  });

  m.def("blip_score", [](double p, double s) { return blip_score({p, s}); }, py::arg("matching_probability"),
        py::arg("cosine_similarity"));
  m.def("cosine", [](std::vector<double> image, std::vector<double> text) {
    return cosine({std::move(image), std::move(text)});
  });

  m.def(
      "rank",
      [](const std::vector<std::tuple<std::string, std::string, double, double>>& rows, const std::string& image_id) {
        std::vector<ScoredCaption> scored;
        for (const auto& [model, text, p, s] : rows) {
          ScoredCaption sc{model, text, {p, s}, 0.0};
          sc.blip_score = blip_score(sc.itm);
          scored.push_back(std::move(sc));
        }
        return ranked_dict(rank(image_id, std::move(scored)));
      },
      py::arg("rows"), py::arg("image_id") = "",
      "rows: (model_id, text, matching_probability, cosine_similarity) tuples");

  m.def(
      "pair_frequency",
      [](const std::vector<std::pair<std::string, std::string>>& top2s) {
        std::vector<RankedSet> sets;
        for (const auto& [a, b] : top2s) {
          RankedSet r;
          r.top2.first.model_id = a;
          r.top2.second.model_id = b;
          sets.push_back(std::move(r));
        }
        return pair_frequency(sets);
      },
      py::arg("top2s"));

  m.def(
      "tokenize", [](const std::string& text, bool keep_punct) { return tokenize(text, keep_punct).tokens; },
      py::arg("text"), py::arg("keep_punct") = false);

  m.def(
      "bleu_corpus",
      [](const std::vector<std::string>& cands, const std::vector<std::vector<std::string>>& refs, int max_n) {
        check_aligned(cands.size(), refs.size());
        return bleu_corpus(streams(cands), reference_sets(refs), max_n);
      },
      py::arg("candidates"), py::arg("references"), py::arg("max_n") = kBleuMaxOrder);
  m.def(
      "bleu_sentence",
      [](const std::string& cand, const std::vector<std::string>& refs, int max_n) {
        return bleu_sentence(tokenize(cand), streams(refs), max_n);
      },
      py::arg("candidate"), py::arg("references"), py::arg("max_n") = kBleuMaxOrder);
  m.def(
      "cider",
      [](const std::vector<std::string>& cands, const std::vector<std::vector<std::string>>& refs,
         const std::string& variant, double sigma) {
        check_aligned(cands.size(), refs.size());
        CiderOptions opts;
        if (variant == "cider") {
          opts.variant = CiderVariant::Cider;
        } else if (variant != "cider-d") {
          throw py::value_error("variant must be cider-d or cider");
        }
        opts.sigma = sigma;
        return cider(streams(cands), reference_sets(refs), opts);
      },
      py::arg("candidates"), py::arg("references"), py::arg("variant") = "cider-d", py::arg("sigma") = 6.0);
  m.def(
      "mbleu",
      [](const std::vector<std::vector<std::string>>& sets, int max_n) { return mbleu(reference_sets(sets), max_n); },
      py::arg("caption_sets"), py::arg("max_n") = kBleuMaxOrder);
  m.def(
      "div_n", [](const std::vector<std::vector<std::string>>& sets, int n) { return div_n(reference_sets(sets), n); },
      py::arg("caption_sets"), py::arg("n"));

  m.def(
      "render_prompt",
      [](const std::string& c1, const std::string& c2, std::optional<std::string> tmpl) {
        return tmpl ? render_prompt(c1, c2, PromptTemplate(*tmpl)) : render_prompt(c1, c2);
      },
      py::arg("caption1"), py::arg("caption2"), py::arg("template") = py::none());
  m.def(
      "postprocess",
      [](const std::string& raw, std::optional<std::vector<std::string>> prefixes) {
        const auto r = prefixes ? postprocess(raw, *prefixes) : postprocess(raw);
        py::dict d;
        d["cleaned"] = r.cleaned;
        d["prefix_stripped"] = r.flags.prefix_stripped;
        d["truncated"] = r.flags.truncated;
        return d;
      },
      py::arg("raw"), py::arg("prefixes") = py::none());
  m.def("detect_collapse", [](const std::string& a, const std::string& b) { return detect_collapse(a, b); });

  m.def(
      "make_splits",
      [](const std::vector<std::string>& ids, std::size_t train, std::size_t val, std::size_t test,
         std::uint64_t seed) {
        const auto s = make_splits(ids, {train, val, test}, seed);
        py::dict d;
        d["seed"] = s.seed;
        d["train"] = s.train_ids;
        d["val"] = s.val_ids;
        d["test"] = s.test_ids;
        return d;
      },
      py::arg("ids"), py::arg("train"), py::arg("val"), py::arg("test"), py::arg("seed"));

  m.def(
      "summarize_votes",
      [](const std::vector<std::pair<std::string, std::string>>& votes,
         const std::map<std::string, std::string>& key_mapping) {
        std::vector<Vote> vs;
        for (const auto& [cls, choice] : votes) {
          const auto wc = parse_worker_class(cls);
          if (!wc) throw py::value_error("worker class must be generic or expert");
          Vote v;
          v.worker_class = *wc;
          v.choice = choice;
          vs.push_back(std::move(v));
        }
        std::map<std::string, py::dict> out;
        for (const auto& [model, mv] : summarize_votes(vs, key_mapping).models) {
          py::dict d;
          d["generic_pct"] = mv.generic_pct ? py::cast(*mv.generic_pct) : py::none();
          d["expert_pct"] = mv.expert_pct ? py::cast(*mv.expert_pct) : py::none();
          d["average_pct"] = mv.average_pct;
          out[model] = d;
        }
        return out;
      },
      py::arg("votes"), py::arg("key_mapping"), "votes: (worker_class, option_key) pairs");
  m.def("agreement_histogram", &agreement_histogram, py::arg("votes_by_image"));
}
