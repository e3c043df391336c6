/**
 * @file py_core.cpp
 * Python bindings for the main operations: tier assignment, deterministic
 * judging, scoring, scaling fits and size estimation, trend tests, pairwise
 * fingerprints, and the synthetic pipeline. File-shaped interfaces stay on
 * the CLI; these bindings expose the in-memory math.
 */

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ikp/calibration.hpp"
#include "ikp/corpus.hpp"
#include "ikp/fingerprint.hpp"
#include "ikp/judge.hpp"
#include "ikp/scoring.hpp"
#include "ikp/simlab.hpp"
#include "ikp/stats.hpp"
#include "ikp/trend.hpp"

namespace py = pybind11;

namespace {

ikp::VerdictLabel label_from_name(const std::string& name) {
  for (ikp::VerdictLabel l : {ikp::VerdictLabel::CorrectStrong, ikp::VerdictLabel::CorrectWeak,
                              ikp::VerdictLabel::Refusal, ikp::VerdictLabel::Wrong,
                              ikp::VerdictLabel::JudgeError}) {
    if (ikp::verdict_label_name(l) == name) return l;
  }
  throw ikp::Error("unknown verdict label: '" + name + "'");
}

// (tier, label) pairs are enough for scoring: build synthetic probes so the
// corpus-side tier lookup sees one probe id per verdict.
py::dict summarize_pairs(const std::string& model,
                         const std::vector<std::pair<int, std::string>>& tier_labels,
                         double lambda) {
  ikp::Corpus corpus;
  std::vector<ikp::Verdict> verdicts;
  int i = 0;
  for (const auto& [tier, label] : tier_labels) {
    ikp::Probe p;
    p.id = "p" + std::to_string(i++);
    p.tier = tier;
    p.question = p.id;
    p.gold_answer = "x";
    corpus.probes.push_back(std::move(p));
    ikp::Verdict v;
    v.model = model;
    v.probe_id = corpus.probes.back().id;
    v.label = label_from_name(label);
    verdicts.push_back(std::move(v));
  }
  ikp::ModelEvaluation ev = ikp::summarize(model, verdicts, corpus, {lambda});
  py::list tiers;
  for (const auto& t : ev.tiers) {
    py::dict d;
    d["tier"] = t.tier;
    d["n"] = t.n;
    d["strong"] = t.strong;
    d["weak"] = t.weak;
    d["refusal"] = t.refusal;
    d["wrong"] = t.wrong;
    d["judge_error"] = t.judge_error;
    d["pen_score"] = t.pen_score;
    d["raw_score"] = t.raw_score;
    if (t.hallucination_rate) d["hallucination_rate"] = *t.hallucination_rate;
    tiers.append(d);
  }
  py::dict out;
  out["model"] = ev.model;
  out["lambda"] = ev.lambda;
  out["pen_acc"] = ev.pen_acc;
  out["raw_acc"] = ev.raw_acc;
  if (ev.hallucination_rate) out["hallucination_rate"] = *ev.hallucination_rate;
  out["judge_errors"] = ev.judge_errors;
  out["tiers"] = tiers;
  return out;
}

py::dict fit_to_dict(const ikp::ScalingFit& fit) {
  py::dict d;
  d["alpha"] = fit.alpha;
  d["beta"] = fit.beta;
  d["r2"] = fit.r2;
  d["rmse"] = fit.rmse;
  d["residual_se"] = fit.residual_se;
  d["n"] = fit.n;
  d["residuals"] = fit.residuals;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "tiered factual-probe evaluation core";

  py::register_exception<ikp::Error>(m, "IkpError");

  m.def(
      "assign_tier",
      [](const std::vector<bool>& landmarks) -> py::object {
        if (landmarks.size() != 6) throw ikp::Error("assign_tier expects 6 booleans");
        std::array<bool, 6> arr{};
        std::copy(landmarks.begin(), landmarks.end(), arr.begin());
        auto t = ikp::assign_tier(arr);
        if (!t) return py::none();
        return py::int_(*t);
      },
      py::arg("landmarks"),
      "Tier from a 6-landmark pass vector; None when the vector is not monotone.");

  m.def("normalize_text", &ikp::normalize_text, py::arg("text"));
  m.def("normalize_answer", &ikp::normalize_answer, py::arg("text"),
        "normalize_text plus the single-distinct-year reduction used by fingerprints.");

  m.def(
      "judge_exact",
      [](const std::string& gold, const std::string& response) {
        ikp::Probe p;
        p.id = "probe";
        p.tier = 1;
        p.question = "q";
        p.gold_answer = gold;
        return ikp::verdict_label_name(ikp::judge_exact(p, response));
      },
      py::arg("gold"), py::arg("response"),
      "Deterministic three-way judge: substring match, refusal lexicon, else wrong.");

  m.def("summarize", &summarize_pairs, py::arg("model"), py::arg("tier_labels"),
        py::arg("lambda_") = -1.0,
        "Score (tier, label) pairs; labels are 'correct_strong', 'correct_weak', "
        "'refusal', 'wrong', 'judge_error'.");

  m.def(
      "fit_scaling",
      [](const std::vector<double>& params_b, const std::vector<double>& accuracy) {
        return fit_to_dict(ikp::fit_scaling(params_b, accuracy));
      },
      py::arg("params_b"), py::arg("accuracy"),
      "Log-linear fit: accuracy ~ alpha * log10(params_B) + beta.");

  m.def(
      "estimate_size",
      [](const std::vector<double>& params_b, const std::vector<double>& accuracy,
         double target, double pi_level) {
        ikp::ScalingFit fit = ikp::fit_scaling(params_b, accuracy);
        ikp::EstimateInterval est = ikp::estimate_size(fit, target, pi_level);
        py::dict d;
        d["point_b"] = est.point_b;
        d["lo_b"] = est.lo_b;
        d["hi_b"] = est.hi_b;
        d["pi_factor"] = est.pi_factor;
        d["pi_level"] = est.pi_level;
        return d;
      },
      py::arg("params_b"), py::arg("accuracy"), py::arg("target"), py::arg("pi_level") = 0.90,
      "Invert the scaling fit at a target accuracy with a prediction interval.");

  m.def(
      "loo_cv",
      [](const std::vector<double>& params_b, const std::vector<double>& accuracy) {
        ikp::LooReport r = ikp::loo_cv(params_b, accuracy);
        py::list folds;
        for (const auto& f : r.folds) {
          py::dict d;
          d["slug"] = f.slug;
          d["actual_b"] = f.actual_b;
          d["predicted_b"] = f.predicted_b;
          d["fold_error"] = f.fold_error;
          folds.append(d);
        }
        py::dict d;
        d["folds"] = folds;
        d["median_fold_error"] = r.median_fold_error;
        d["frac_within_2x"] = r.frac_within_2x;
        d["frac_within_3x"] = r.frac_within_3x;
        d["pi90_factor"] = r.pi90_factor;
        return d;
      },
      py::arg("params_b"), py::arg("accuracy"));

  m.def(
      "densing_test",
      [](const std::vector<py::dict>& rows, const std::string& spec, int replicates,
         std::uint64_t seed) {
        std::vector<ikp::TrendRow> trs;
        for (const auto& r : rows) {
          ikp::TrendRow tr;
          tr.slug = py::cast<std::string>(r["slug"]);
          tr.params_b = py::cast<double>(r["params_b"]);
          tr.months = py::cast<double>(r["months"]);
          tr.pen_acc = py::cast<double>(r["pen_acc"]);
          if (r.contains("is_thinking")) tr.is_thinking = py::cast<bool>(r["is_thinking"]);
          if (r.contains("is_moe")) tr.is_moe = py::cast<bool>(r["is_moe"]);
          trs.push_back(std::move(tr));
        }
        ikp::SlopeTest t =
            ikp::densing_test(trs, ikp::trend_spec_from_name(spec), replicates, seed);
        py::dict d;
        d["beta2_hat"] = t.beta2_hat;
        d["se"] = t.se;
        d["t_vs_zero"] = t.t_vs_zero;
        d["p_vs_zero"] = t.p_vs_zero;
        d["densing_target"] = t.densing_target;
        d["t_vs_densing"] = t.t_vs_densing;
        d["p_vs_densing"] = t.p_vs_densing;
        d["ci_lo"] = t.ci_lo;
        d["ci_hi"] = t.ci_hi;
        d["replicates"] = t.replicates;
        d["failed_replicates"] = t.failed_replicates;
        return d;
      },
      py::arg("rows"), py::arg("spec") = "M1", py::arg("replicates") = 1000,
      py::arg("seed") = 0,
      "Months-slope test; rows are dicts with slug, params_b, months, pen_acc.");

  m.def(
      "pair_metrics",
      [](const std::vector<std::string>& states_a, const std::vector<std::string>& states_b,
         const std::vector<std::string>& answers_a, const std::vector<std::string>& answers_b) {
        if (states_a.size() != states_b.size())
          throw ikp::Error("state vectors differ in length");
        auto parse_state = [](const std::string& s) {
          if (s == "correct") return ikp::CellState::Correct;
          if (s == "wrong") return ikp::CellState::Wrong;
          if (s == "refusal") return ikp::CellState::Refusal;
          if (s == "missing") return ikp::CellState::Missing;
          throw ikp::Error("unknown cell state: '" + s + "'");
        };
        ikp::AnswerMatrix matrix;
        matrix.models = {"a", "b"};
        matrix.cells.resize(2);
        for (std::size_t i = 0; i < states_a.size(); ++i) {
          matrix.probe_ids.push_back("p" + std::to_string(i));
          ikp::MatrixCell ca, cb;
          ca.state = parse_state(states_a[i]);
          cb.state = parse_state(states_b[i]);
          if (ca.state == ikp::CellState::Wrong && i < answers_a.size())
            ca.wrong_answer = ikp::normalize_answer(answers_a[i]);
          if (cb.state == ikp::CellState::Wrong && i < answers_b.size())
            cb.wrong_answer = ikp::normalize_answer(answers_b[i]);
          matrix.cells[0].push_back(std::move(ca));
          matrix.cells[1].push_back(std::move(cb));
        }
        ikp::PairFingerprint fp = ikp::pair_metrics(matrix, 0, 1);
        py::dict d;
        d["both_attempted"] = fp.both_attempted;
        d["correct_a"] = fp.correct_a;
        d["correct_b"] = fp.correct_b;
        d["correct_both"] = fp.correct_both;
        d["correct_union"] = fp.correct_union;
        d["both_wrong"] = fp.both_wrong;
        d["same_wrong"] = fp.same_wrong;
        d["jaccard"] = fp.jaccard;
        d["lift"] = fp.lift ? py::cast(*fp.lift) : py::none();
        d["hss"] = fp.hss ? py::cast(*fp.hss) : py::none();
        d["regime"] = ikp::regime_name(ikp::classify_regime(fp, {}));
        return d;
      },
      py::arg("states_a"), py::arg("states_b"),
      py::arg("answers_a") = std::vector<std::string>{},
      py::arg("answers_b") = std::vector<std::string>{},
      "Pairwise overlap metrics from per-probe states 'correct' | 'wrong' | "
      "'refusal' | 'missing'; wrong-answer texts enable the same-wrong rate.");

  m.def(
      "simulate",
      [](const std::filesystem::path& out_dir, int n_models, double decades, double p_min_b,
         std::uint64_t seed, double bluff_rate, bool noiseless, int n_facts) {
        ikp::SimOptions opts;
        opts.n_models = n_models;
        opts.decades = decades;
        opts.p_min_b = p_min_b;
        opts.master_seed = seed;
        opts.bluff_rate = bluff_rate;
        opts.noiseless = noiseless;
        opts.n_facts = n_facts;
        ikp::run_simulation(opts, out_dir);
      },
      py::arg("out_dir"), py::arg("n_models") = 12, py::arg("decades") = 4.0,
      py::arg("p_min_b") = 0.5, py::arg("seed") = 7, py::arg("bluff_rate") = 0.2,
      py::arg("noiseless") = false, py::arg("n_facts") = 1400,
      "Write the six synthetic pipeline files to out_dir.");
}
