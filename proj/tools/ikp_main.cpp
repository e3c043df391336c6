/**
 * @file ikp_main.cpp
 * `ikp` command line. Subcommands cover the full pipeline: run (query a
 * model over the corpus), judge, score, calibrate/estimate/loo/sweep-lambda,
 * densing, benchcmp, fingerprint, simulate, and report.
 *
 * Configuration precedence: command-line flag > environment variable
 * (IKP_API_KEY, IKP_BASE_URL) > ikp.toml > built-in default. Paths inside a
 * config file resolve relative to that file's directory.
 *
 * Exit codes: 0 full success, 2 completed with partial failures, 1 fatal.
 */

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>

#include "ikp/calibration.hpp"
#include "ikp/corpus.hpp"
#include "ikp/fingerprint.hpp"
#include "ikp/gateway.hpp"
#include "ikp/judge.hpp"
#include "ikp/scoring.hpp"
#include "ikp/simlab.hpp"
#include "ikp/stats.hpp"
#include "ikp/toml.hpp"
#include "ikp/trend.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFatal = 1;
constexpr int kExitPartial = 2;

struct CliConfig {
  std::string base_url;
  std::string api_key;
  std::string cache_dir = "cache";
  int concurrency = 4;
  int max_attempts = 4;
  int backoff_ms = 250;
  std::string corpus_path;
  std::string registry_path;
  std::string judge_model;
  int judge_max_tokens = 512;
  std::string system_prompt = ikp::kDefaultSystemPrompt;
  int run_max_tokens = 1024;
  int repeat_count = 1;
  int ladder_retry_count = 1;  // re-asks per landmark before a flake sticks
  double lambda = -1.0;
  double pi_level = 0.90;
  int retrained_min_both_wrong = 10;
  std::uint64_t seed = 0;
};

std::string resolve_rel(const fs::path& base_dir, const std::string& p) {
  if (p.empty()) return p;
  fs::path path(p);
  if (path.is_absolute()) return p;
  return (base_dir / path).string();
}

/// Layer 1 of precedence: the config file over built-in defaults.
CliConfig load_config(const std::string& config_flag) {
  CliConfig cfg;
  fs::path path = config_flag.empty() ? fs::path("ikp.toml") : fs::path(config_flag);
  if (config_flag.empty() && !fs::exists(path)) return cfg;
  if (!fs::exists(path)) throw ikp::Error("config file not found: " + path.string());
  auto doc = ikp::toml::parse_file(path);
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");

  if (const auto* t = doc.find("gateway")) {
    if (auto v = ikp::toml::get_string(*t, "base_url")) cfg.base_url = *v;
    if (auto v = ikp::toml::get_string(*t, "api_key")) cfg.api_key = *v;
    if (auto v = ikp::toml::get_string(*t, "cache_dir")) cfg.cache_dir = resolve_rel(base, *v);
    if (auto v = ikp::toml::get_int(*t, "concurrency")) cfg.concurrency = static_cast<int>(*v);
    if (auto v = ikp::toml::get_int(*t, "max_attempts")) cfg.max_attempts = static_cast<int>(*v);
    if (auto v = ikp::toml::get_int(*t, "backoff_ms")) cfg.backoff_ms = static_cast<int>(*v);
  }
  if (const auto* t = doc.find("paths")) {
    if (auto v = ikp::toml::get_string(*t, "corpus")) cfg.corpus_path = resolve_rel(base, *v);
    if (auto v = ikp::toml::get_string(*t, "registry")) cfg.registry_path = resolve_rel(base, *v);
  }
  if (const auto* t = doc.find("judge")) {
    if (auto v = ikp::toml::get_string(*t, "model")) cfg.judge_model = *v;
    if (auto v = ikp::toml::get_int(*t, "max_tokens")) cfg.judge_max_tokens = static_cast<int>(*v);
  }
  if (const auto* t = doc.find("run")) {
    if (auto v = ikp::toml::get_string(*t, "system_prompt")) cfg.system_prompt = *v;
    if (auto v = ikp::toml::get_int(*t, "max_tokens")) cfg.run_max_tokens = static_cast<int>(*v);
    if (auto v = ikp::toml::get_int(*t, "repeat_count")) cfg.repeat_count = static_cast<int>(*v);
  }
  if (const auto* t = doc.find("ladder")) {
    if (auto v = ikp::toml::get_int(*t, "retry_count"))
      cfg.ladder_retry_count = static_cast<int>(*v);
  }
  if (const auto* t = doc.find("scoring")) {
    if (auto v = ikp::toml::get_number(*t, "lambda")) cfg.lambda = *v;
  }
  if (const auto* t = doc.find("calibration")) {
    if (auto v = ikp::toml::get_number(*t, "pi_level")) cfg.pi_level = *v;
  }
  if (const auto* t = doc.find("fingerprint")) {
    if (auto v = ikp::toml::get_int(*t, "retrained_min_both_wrong"))
      cfg.retrained_min_both_wrong = static_cast<int>(*v);
  }
  if (const auto* t = doc.find("misc")) {
    if (auto v = ikp::toml::get_int(*t, "seed")) cfg.seed = static_cast<std::uint64_t>(*v);
  }
  return cfg;
}

/// Layer 2: environment over config file.
void apply_env(CliConfig& cfg) {
  if (const char* v = std::getenv("IKP_BASE_URL")) cfg.base_url = v;
  if (const char* v = std::getenv("IKP_API_KEY")) cfg.api_key = v;
}

ikp::GatewayConfig gateway_config(const CliConfig& cfg) {
  ikp::GatewayConfig g;
  g.base_url = cfg.base_url;
  g.api_key = cfg.api_key;
  g.cache_dir = cfg.cache_dir;
  g.concurrency = cfg.concurrency;
  g.retry.max_attempts = cfg.max_attempts;
  g.retry.initial_backoff_ms = cfg.backoff_ms;
  return g;
}

std::vector<double> parse_lambda_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    char* end = nullptr;
    double v = std::strtod(item.c_str(), &end);
    if (!end || *end != '\0') throw ikp::Error("bad lambda value: '" + item + "'");
    if (v > 0)
      throw ikp::Error("lambda must be <= 0, got '" + item + "' (a positive penalty would reward wrong answers)");
    out.push_back(v);
  }
  if (out.empty()) throw ikp::Error("no lambda values given");
  return out;
}

json fit_to_json(const ikp::ScalingFit& fit) {
  return json{{"slope", fit.alpha},       {"intercept", fit.beta}, {"r2", fit.r2},
              {"rmse", fit.rmse},         {"residual_se", fit.residual_se},
              {"n", fit.n}};
}

// ====== run ======

int cmd_run(const CliConfig& cfg, const std::string& model, const std::string& corpus_path,
            const std::string& out_path, bool json_out) {
  if (model.empty()) throw ikp::Error("run: --model is required");
  if (corpus_path.empty()) throw ikp::Error("run: no corpus given (flag or [paths].corpus)");
  ikp::Corpus corpus = ikp::load_corpus(corpus_path);

  ikp::GatewayClient client(gateway_config(cfg));
  auto specs = ikp::evaluation_specs(corpus, model, cfg.system_prompt, cfg.run_max_tokens,
                                     cfg.repeat_count);
  if (cfg.api_key.empty()) {
    // Cache-only mode: every spec must already be cached.
    std::size_t missing = 0;
    for (const auto& s : specs)
      if (!client.cached(s)) ++missing;
    if (missing > 0)
      throw ikp::Error("cold cache for " + std::to_string(missing) + " queries (cache at " +
                       cfg.cache_dir +
                       ") and no API key: set IKP_API_KEY to run against an endpoint, "
                       "or provide a warmed cache for offline runs");
  }

  ikp::RunOutcome outcome = ikp::run_evaluation(client, corpus, model, cfg.system_prompt,
                                                cfg.run_max_tokens, cfg.repeat_count, out_path);
  if (json_out) {
    json j{{"model", model},
           {"completed", outcome.completed},
           {"failed", outcome.failed},
           {"failures", outcome.failures},
           {"network_calls", client.network_calls()},
           {"transcripts", out_path}};
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "model " << model << ": " << outcome.completed << " completed, "
              << outcome.failed << " failed; " << client.network_calls()
              << " network calls; transcripts at " << out_path << "\n";
  }
  for (const auto& f : outcome.failures) std::cerr << "failed " << f << "\n";
  if (outcome.completed == 0 && outcome.failed > 0) return kExitFatal;
  return outcome.failed > 0 ? kExitPartial : kExitOk;
}

// ====== judge ======

int cmd_judge(const CliConfig& cfg, const std::string& corpus_path,
              const std::string& transcripts_path, const std::string& out_path, bool exact,
              bool json_out) {
  if (corpus_path.empty()) throw ikp::Error("judge: no corpus given");
  ikp::Corpus corpus = ikp::load_corpus(corpus_path);
  auto transcripts = ikp::load_transcripts(transcripts_path);

  std::map<std::string, const ikp::Probe*> by_question;
  for (const auto& p : corpus.probes) by_question.emplace(p.question, &p);

  std::optional<ikp::GatewayClient> client;
  ikp::JudgeConfig jcfg{cfg.judge_model, cfg.judge_max_tokens};
  if (!exact) {
    if (cfg.judge_model.empty())
      throw ikp::Error("judge: set --judge-model (or [judge].model), or pass --exact");
    client.emplace(gateway_config(cfg));
  }

  std::vector<ikp::Verdict> verdicts;
  int judge_errors = 0;
  for (const auto& rec : transcripts) {
    auto it = by_question.find(rec.spec.user_prompt);
    if (it == by_question.end())
      throw ikp::Error("judge: transcript question does not match any probe: '" +
                       rec.spec.user_prompt.substr(0, 60) + "...'");
    const ikp::Probe& probe = *it->second;
    ikp::Verdict v;
    v.model = rec.spec.model;
    v.probe_id = probe.id;
    if (exact) {
      v.label = ikp::judge_deterministic(probe, rec.response_text);
      v.judge_model = "exact";
    } else {
      try {
        ikp::JudgeOutcome out = ikp::judge_with_llm(*client, jcfg, probe, rec.response_text);
        v.label = out.label;
        v.raw_judge_output = out.raw_output;
      } catch (const ikp::Error& e) {
        v.label = ikp::VerdictLabel::JudgeError;
        v.raw_judge_output = std::string("gateway error: ") + e.what();
      }
      v.judge_model = cfg.judge_model;
    }
    if (v.label == ikp::VerdictLabel::JudgeError) ++judge_errors;
    verdicts.push_back(std::move(v));
  }
  ikp::save_verdicts(verdicts, out_path);
  if (json_out) {
    std::cout << json{{"verdicts", verdicts.size()},
                      {"judge_errors", judge_errors},
                      {"out", out_path}}
                     .dump(2)
              << "\n";
  } else {
    std::cout << verdicts.size() << " verdicts (" << judge_errors << " judge errors) at "
              << out_path << "\n";
  }
  return judge_errors > 0 ? kExitPartial : kExitOk;
}

// ====== score ======

int cmd_score(const CliConfig& cfg, const std::string& corpus_path,
              const std::string& verdicts_path, const std::string& out_path, bool json_out) {
  ikp::Corpus corpus = ikp::load_corpus(corpus_path);
  auto by_model = ikp::verdicts_by_model(ikp::load_verdicts(verdicts_path));
  if (by_model.empty()) throw ikp::Error("score: no verdicts in " + verdicts_path);
  std::vector<ikp::ModelEvaluation> evals;
  for (const auto& [model, verdicts] : by_model)
    evals.push_back(ikp::summarize(model, verdicts, corpus, {cfg.lambda}));
  ikp::write_scores_csv(evals, out_path);
  if (json_out) {
    json arr = json::array();
    for (const auto& ev : evals)
      arr.push_back({{"model", ev.model},
                     {"pen_acc", ev.pen_acc},
                     {"raw_acc", ev.raw_acc},
                     {"judge_errors", ev.judge_errors}});
    std::cout << json{{"lambda", cfg.lambda}, {"models", arr}, {"out", out_path}}.dump(2) << "\n";
  } else {
    for (const auto& ev : evals)
      std::cout << ev.model << ": pen_acc " << ikp::csv_num(ev.pen_acc) << ", raw_acc "
                << ikp::csv_num(ev.raw_acc) << "\n";
    std::cout << "scores at " << out_path << "\n";
  }
  return kExitOk;
}

// ====== calibrate ======

int cmd_calibrate(const std::string& data_path, const std::string& out_path, bool json_out) {
  auto rows = ikp::load_calibration_csv(data_path);
  ikp::SubsetReport report = ikp::fit_scaling_variants(rows);
  for (const auto& w : report.warnings) std::cerr << "notice: " << w << "\n";

  std::ostringstream csv;
  csv << "subset,n,slope,intercept,r2_pen,rmse_pen,residual_se_pen,r2_raw\n";
  for (const auto& sf : report.fits)
    csv << ikp::subset_name(sf.kind) << ',' << sf.pen_fit.n << ','
        << ikp::csv_num(sf.pen_fit.alpha) << ',' << ikp::csv_num(sf.pen_fit.beta) << ','
        << ikp::csv_num(sf.pen_fit.r2) << ',' << ikp::csv_num(sf.pen_fit.rmse) << ','
        << ikp::csv_num(sf.pen_fit.residual_se) << ',' << ikp::csv_num(sf.raw_fit.r2) << '\n';
  if (!out_path.empty()) ikp::atomic_write_file(out_path, csv.str());

  if (json_out) {
    json fits = json::array();
    for (const auto& sf : report.fits) {
      json f = fit_to_json(sf.pen_fit);
      f["subset"] = ikp::subset_name(sf.kind);
      f["r2_raw"] = sf.raw_fit.r2;
      fits.push_back(std::move(f));
    }
    std::cout << json{{"fits", fits}, {"warnings", report.warnings}}.dump(2) << "\n";
  } else {
    std::cout << csv.str();
  }
  return kExitOk;
}

// ====== estimate ======

int cmd_estimate(const CliConfig& cfg, const std::string& data_path, double accuracy,
                 const std::string& slug, bool json_out) {
  auto rows = ikp::load_calibration_csv(data_path);
  double target = accuracy;
  if (!slug.empty()) {
    const ikp::CalibrationRow* found = nullptr;
    for (const auto& r : rows)
      if (r.slug == slug) found = &r;
    if (!found) throw ikp::Error("estimate: slug '" + slug + "' is not in " + data_path);
    if (found->landmark_tier)
      throw ikp::Error("estimate: '" + slug +
                       "' is a landmark ladder model; it anchors the tier definitions and is "
                       "not a valid estimation target");
    target = found->pen_acc;
  }
  std::vector<double> params, pen;
  std::vector<std::string> slugs;
  for (const auto& r : rows) {
    params.push_back(r.params_total_b);
    pen.push_back(r.pen_acc);
    slugs.push_back(r.slug);
  }
  ikp::ScalingFit fit = ikp::fit_scaling(params, pen, slugs);
  const auto [lo_it, hi_it] = std::minmax_element(pen.begin(), pen.end());
  if (target < *lo_it || target > *hi_it)
    std::cerr << "notice: accuracy " << ikp::csv_num(target) << " is outside the fitted range ["
              << ikp::csv_num(*lo_it) << ", " << ikp::csv_num(*hi_it)
              << "]; the estimate is an extrapolation\n";
  ikp::EstimateInterval est = ikp::estimate_size(fit, target, cfg.pi_level);
  if (json_out) {
    std::cout << json{{"accuracy", target},
                      {"point_b", est.point_b},
                      {"lo_b", est.lo_b},
                      {"hi_b", est.hi_b},
                      {"pi_factor", est.pi_factor},
                      {"pi_level", est.pi_level},
                      {"fit", fit_to_json(fit)}}
                     .dump(2)
              << "\n";
  } else {
    std::cout << "accuracy " << ikp::csv_num(target) << " -> " << ikp::csv_num(est.point_b)
              << "B  [" << ikp::csv_num(est.lo_b) << "B, " << ikp::csv_num(est.hi_b) << "B] at "
              << ikp::csv_num(100 * est.pi_level) << "% (x" << ikp::csv_num(est.pi_factor)
              << ")\n";
  }
  return kExitOk;
}

// ====== loo ======

int cmd_loo(const std::string& data_path, const std::string& out_path, bool json_out) {
  auto rows = ikp::load_calibration_csv(data_path);
  std::vector<double> params, pen;
  std::vector<std::string> slugs;
  for (const auto& r : rows) {
    params.push_back(r.params_total_b);
    pen.push_back(r.pen_acc);
    slugs.push_back(r.slug);
  }
  ikp::LooReport report = ikp::loo_cv(params, pen, slugs);
  if (!out_path.empty()) {
    std::ostringstream csv;
    csv << "slug,actual_b,predicted_b,fold_error\n";
    for (const auto& f : report.folds)
      csv << ikp::csv_field(f.slug) << ',' << ikp::csv_num(f.actual_b) << ','
          << ikp::csv_num(f.predicted_b) << ',' << ikp::csv_num(f.fold_error) << '\n';
    ikp::atomic_write_file(out_path, csv.str());
  }
  if (json_out) {
    std::cout << json{{"median_fold_error", report.median_fold_error},
                      {"frac_within_2x", report.frac_within_2x},
                      {"frac_within_3x", report.frac_within_3x},
                      {"pi90_factor", report.pi90_factor},
                      {"folds", report.folds.size()}}
                     .dump(2)
              << "\n";
  } else {
    std::cout << "LOO over " << report.folds.size() << " folds: median "
              << ikp::csv_num(report.median_fold_error) << "x, within 2x "
              << ikp::csv_num(100 * report.frac_within_2x) << "%, within 3x "
              << ikp::csv_num(100 * report.frac_within_3x) << "%, PI90 x"
              << ikp::csv_num(report.pi90_factor) << "\n";
  }
  return kExitOk;
}

// ====== sweep-lambda ======

int cmd_sweep_lambda(const std::string& corpus_path, const std::string& verdicts_path,
                     const std::string& data_path, const std::string& lambdas_csv,
                     const std::string& out_path, bool json_out) {
  ikp::Corpus corpus = ikp::load_corpus(corpus_path);
  auto by_model = ikp::verdicts_by_model(ikp::load_verdicts(verdicts_path));
  auto rows = ikp::load_calibration_csv(data_path);
  auto lambdas = parse_lambda_list(lambdas_csv);
  auto sweep = ikp::lambda_sweep(by_model, corpus, rows, lambdas);
  if (!out_path.empty()) ikp::write_lambda_sweep_csv(sweep, out_path);
  if (json_out) {
    json arr = json::array();
    for (const auto& r : sweep)
      arr.push_back({{"lambda", r.lambda},
                     {"r2", r.r2},
                     {"rmse", r.rmse},
                     {"slope", r.slope},
                     {"loo_median", r.loo_median},
                     {"frac_within_2x", r.frac_within_2x},
                     {"frac_within_3x", r.frac_within_3x},
                     {"pi90_factor", r.pi90_factor}});
    std::cout << arr.dump(2) << "\n";
  } else {
    std::cout << "lambda  r2      slope   loo_median\n";
    for (const auto& r : sweep)
      std::cout << ikp::csv_num(r.lambda) << "  " << ikp::csv_num(r.r2) << "  "
                << ikp::csv_num(r.slope) << "  " << ikp::csv_num(r.loo_median) << "\n";
  }
  return kExitOk;
}

// ====== densing ======

int cmd_densing(const std::string& data_path, const std::string& spec_name, int replicates,
                std::uint64_t seed, bool use_active, int date_jitter_days,
                const std::string& out_path, bool json_out) {
  auto cal_rows = ikp::load_calibration_csv(data_path);
  auto rows = ikp::trend_rows_from_calibration(cal_rows, use_active);
  ikp::TrendSpec spec = ikp::trend_spec_from_name(spec_name);

  json fits = json::object();
  for (ikp::TrendSpec s : {ikp::TrendSpec::M0, ikp::TrendSpec::M1, ikp::TrendSpec::M2,
                           ikp::TrendSpec::M3, ikp::TrendSpec::Mt}) {
    try {
      ikp::TrendFit f = ikp::fit_trend(rows, s);
      json coef = json::object(), se = json::object();
      for (const auto& [k, v] : f.coefficients) coef[k] = v;
      for (const auto& [k, v] : f.standard_errors) se[k] = v;
      fits[ikp::trend_spec_name(s)] =
          json{{"n", f.n}, {"r2", f.r2}, {"rmse", f.rmse}, {"coefficients", coef},
               {"standard_errors", se}};
    } catch (const ikp::Error& e) {
      fits[ikp::trend_spec_name(s)] = json{{"error", e.what()}};
    }
  }

  ikp::SlopeTest test = ikp::densing_test(rows, spec, replicates, seed);
  for (const auto& w : test.warnings) std::cerr << "notice: " << w << "\n";
  json jt{{"spec", spec_name},
          {"beta2_hat", test.beta2_hat},
          {"se", test.se},
          {"t_vs_zero", test.t_vs_zero},
          {"p_vs_zero", test.p_vs_zero},
          {"densing_target", test.densing_target},
          {"t_vs_densing", test.t_vs_densing},
          {"p_vs_densing", test.p_vs_densing},
          {"bootstrap", json{{"replicates", test.replicates},
                             {"failed_replicates", test.failed_replicates},
                             {"seed", test.seed},
                             {"ci95_lo", test.ci_lo},
                             {"ci95_hi", test.ci_hi}}}};

  json report{{"fits", fits}, {"slope_test", jt}};

  if (date_jitter_days > 0) {
    // Robustness probe: re-run the test with release dates jittered
    // uniformly by up to +/- jitter days. Output is informational.
    std::mt19937_64 rng(ikp::mix64(seed, 0x6a69747465726aULL));
    std::uniform_real_distribution<double> jitter(-date_jitter_days, date_jitter_days);
    auto jittered = rows;
    for (auto& r : jittered) r.months += jitter(rng) / 30.4375;
    ikp::SlopeTest jt2 = ikp::densing_test(jittered, spec, replicates, seed);
    report["slope_test_jittered"] =
        json{{"jitter_days", date_jitter_days},
             {"beta2_hat", jt2.beta2_hat},
             {"p_vs_zero", jt2.p_vs_zero},
             {"p_vs_densing", jt2.p_vs_densing},
             {"ci95_lo", jt2.ci_lo},
             {"ci95_hi", jt2.ci_hi}};
  }

  if (!out_path.empty()) ikp::atomic_write_file(out_path, report.dump(2) + "\n");
  if (json_out) {
    std::cout << report.dump(2) << "\n";
  } else {
    std::cout << "months slope " << ikp::csv_num(test.beta2_hat) << " (se "
              << ikp::csv_num(test.se) << "), p vs zero " << ikp::csv_num(test.p_vs_zero)
              << ", target " << ikp::csv_num(test.densing_target) << ", p vs target "
              << ikp::csv_num(test.p_vs_densing) << ", CI95 [" << ikp::csv_num(test.ci_lo)
              << ", " << ikp::csv_num(test.ci_hi) << "]\n";
  }
  return kExitOk;
}

// ====== benchcmp ======

int cmd_benchcmp(const std::string& benchmarks_path, const std::string& data_path,
                 const std::string& out_path, bool json_out) {
  auto benchmarks = ikp::load_benchmark_csv(benchmarks_path);
  auto rows = ikp::trend_rows_from_calibration(ikp::load_calibration_csv(data_path));
  ikp::ProxyCompareReport report = ikp::benchmark_proxy_compare(benchmarks, rows);
  for (const auto& s : report.skipped) std::cerr << "notice: " << s << "\n";

  std::ostringstream csv;
  csv << "metric,n,r2_vs_scale,own_r2_same_subset,time_slope_pp_per_month\n";
  for (const auto& r : report.rows)
    csv << ikp::csv_field(r.metric) << ',' << r.n << ',' << ikp::csv_num(r.r2_vs_scale) << ','
        << (r.own_r2_same_subset ? ikp::csv_num(*r.own_r2_same_subset) : "") << ','
        << ikp::csv_num(r.time_slope_pp_per_month) << '\n';
  if (!out_path.empty()) ikp::atomic_write_file(out_path, csv.str());
  if (json_out) {
    json arr = json::array();
    for (const auto& r : report.rows) {
      json j{{"metric", r.metric},
             {"n", r.n},
             {"r2_vs_scale", r.r2_vs_scale},
             {"time_slope_pp_per_month", r.time_slope_pp_per_month}};
      if (r.own_r2_same_subset) j["own_r2_same_subset"] = *r.own_r2_same_subset;
      arr.push_back(std::move(j));
    }
    std::cout << json{{"rows", arr}, {"skipped", report.skipped}}.dump(2) << "\n";
  } else {
    std::cout << csv.str();
  }
  return report.skipped.empty() ? kExitOk : kExitPartial;
}

// ====== fingerprint ======

int cmd_fingerprint(const CliConfig& cfg, const std::string& corpus_path,
                    const std::string& verdicts_path, const std::string& transcripts_path,
                    const std::string& registry_path, const std::string& out_path,
                    const std::string& family_csv, bool cross_vendor, double hss_min,
                    bool json_out) {
  ikp::Corpus corpus = ikp::load_corpus(corpus_path);
  auto by_model = ikp::verdicts_by_model(ikp::load_verdicts(verdicts_path));

  std::map<std::string, const ikp::Probe*> by_question;
  for (const auto& p : corpus.probes) by_question.emplace(p.question, &p);
  std::map<std::string, std::map<std::string, std::string>> responses;
  for (const auto& rec : ikp::load_transcripts(transcripts_path)) {
    auto it = by_question.find(rec.spec.user_prompt);
    if (it == by_question.end()) continue;
    responses[rec.spec.model].emplace(it->second->id, rec.response_text);
  }

  ikp::AnswerMatrix matrix = ikp::build_answer_matrix(corpus, by_model, responses);
  ikp::RegimeThresholds thresholds;
  thresholds.retrained_min_both_wrong = cfg.retrained_min_both_wrong;

  std::vector<ikp::PairFingerprint> fps;
  if (!family_csv.empty()) {
    std::vector<std::string> slugs;
    std::stringstream ss(family_csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) slugs.push_back(item);
    }
    fps = ikp::family_scan(matrix, slugs);
  } else if (cross_vendor) {
    if (registry_path.empty())
      throw ikp::Error("fingerprint: --cross-vendor needs a registry (--registry)");
    ikp::Registry registry = ikp::load_registry(registry_path);
    fps = ikp::cross_vendor_outliers(matrix, registry, hss_min,
                                     cfg.retrained_min_both_wrong);
  } else {
    for (std::size_t a = 0; a < matrix.models.size(); ++a)
      for (std::size_t b = a + 1; b < matrix.models.size(); ++b)
        fps.push_back(ikp::pair_metrics(matrix, a, b));
  }
  ikp::write_fingerprints_csv(fps, thresholds, out_path);
  if (json_out) {
    json arr = json::array();
    for (const auto& fp : fps) {
      json j{{"model_a", fp.model_a},
             {"model_b", fp.model_b},
             {"jaccard", fp.jaccard},
             {"both_wrong", fp.both_wrong},
             {"regime", ikp::regime_name(ikp::classify_regime(fp, thresholds))}};
      if (fp.lift) j["lift"] = *fp.lift;
      if (fp.hss) j["hss"] = *fp.hss;
      arr.push_back(std::move(j));
    }
    std::cout << arr.dump(2) << "\n";
  } else {
    std::cout << fps.size() << " pairs at " << out_path << "\n";
  }
  return kExitOk;
}

// ====== simulate ======

int cmd_simulate(const ikp::SimOptions& opts, const std::string& out_dir, bool json_out) {
  ikp::run_simulation(opts, out_dir);
  const char* files[] = {"probes.jsonl", "models.toml",  "transcripts.jsonl",
                         "verdicts.jsonl", "scores.csv", "calibration.csv"};
  if (json_out) {
    json arr = json::array();
    for (const char* f : files) arr.push_back((fs::path(out_dir) / f).string());
    std::cout << json{{"out_dir", out_dir}, {"files", arr}}.dump(2) << "\n";
  } else {
    std::cout << "synthetic pipeline written to " << out_dir << " (";
    for (std::size_t i = 0; i < 6; ++i) std::cout << (i ? ", " : "") << files[i];
    std::cout << ")\n";
  }
  return kExitOk;
}

// ====== report ======

int cmd_report(const CliConfig& cfg, const std::string& in_dir, const std::string& out_dir,
               const std::string& lambdas_csv, bool json_out) {
  const fs::path in(in_dir), out(out_dir);
  fs::create_directories(out);
  std::vector<std::string> written, notices;

  auto have = [&](const char* name) { return fs::exists(in / name); };

  std::optional<ikp::Corpus> corpus;
  if (have("probes.jsonl")) corpus = ikp::load_corpus(in / "probes.jsonl");
  std::map<std::string, std::vector<ikp::Verdict>> by_model;
  if (have("verdicts.jsonl"))
    by_model = ikp::verdicts_by_model(ikp::load_verdicts(in / "verdicts.jsonl"));
  std::vector<ikp::CalibrationRow> cal_rows;
  if (have("calibration.csv")) cal_rows = ikp::load_calibration_csv(in / "calibration.csv");

  // 1. scaling fits
  if (!cal_rows.empty()) {
    ikp::SubsetReport sr = ikp::fit_scaling_variants(cal_rows);
    std::ostringstream csv;
    csv << "subset,n,slope,intercept,r2_pen,rmse_pen,residual_se_pen,r2_raw\n";
    for (const auto& sf : sr.fits)
      csv << ikp::subset_name(sf.kind) << ',' << sf.pen_fit.n << ','
          << ikp::csv_num(sf.pen_fit.alpha) << ',' << ikp::csv_num(sf.pen_fit.beta) << ','
          << ikp::csv_num(sf.pen_fit.r2) << ',' << ikp::csv_num(sf.pen_fit.rmse) << ','
          << ikp::csv_num(sf.pen_fit.residual_se) << ',' << ikp::csv_num(sf.raw_fit.r2) << '\n';
    ikp::atomic_write_file(out / "scaling_fits.csv", csv.str());
    written.push_back("scaling_fits.csv");
  } else {
    notices.push_back("scaling_fits.csv skipped: no calibration.csv");
  }

  // 2. LOO scatter
  if (!cal_rows.empty()) {
    std::vector<double> params, pen;
    std::vector<std::string> slugs;
    for (const auto& r : cal_rows) {
      params.push_back(r.params_total_b);
      pen.push_back(r.pen_acc);
      slugs.push_back(r.slug);
    }
    ikp::LooReport loo = ikp::loo_cv(params, pen, slugs);
    std::ostringstream csv;
    csv << "slug,actual_b,predicted_b,fold_error\n";
    for (const auto& f : loo.folds)
      csv << ikp::csv_field(f.slug) << ',' << ikp::csv_num(f.actual_b) << ','
          << ikp::csv_num(f.predicted_b) << ',' << ikp::csv_num(f.fold_error) << '\n';
    ikp::atomic_write_file(out / "loo_scatter.csv", csv.str());
    written.push_back("loo_scatter.csv");
  } else {
    notices.push_back("loo_scatter.csv skipped: no calibration.csv");
  }

  // 3. tier heatmap
  if (corpus && !by_model.empty()) {
    std::ostringstream csv;
    csv << "model,tier,n,pen_score,raw_score\n";
    for (const auto& [model, verdicts] : by_model) {
      ikp::ModelEvaluation ev = ikp::summarize(model, verdicts, *corpus, {cfg.lambda});
      for (const auto& ts : ev.tiers)
        csv << ikp::csv_field(model) << ',' << ts.tier << ',' << ts.n << ','
            << ikp::csv_num(ts.pen_score) << ',' << ikp::csv_num(ts.raw_score) << '\n';
    }
    ikp::atomic_write_file(out / "tier_heatmap.csv", csv.str());
    written.push_back("tier_heatmap.csv");
  } else {
    notices.push_back("tier_heatmap.csv skipped: need probes.jsonl and verdicts.jsonl");
  }

  // 4. densing residuals
  if (!cal_rows.empty() && !cal_rows.front().release_date.empty()) {
    auto rows = ikp::trend_rows_from_calibration(cal_rows);
    ikp::TrendFit fit = ikp::fit_trend(rows, ikp::TrendSpec::M1);
    std::ostringstream csv;
    csv << "slug,months,log10_params,pen_acc,residual\n";
    for (std::size_t i = 0; i < rows.size(); ++i)
      csv << ikp::csv_field(rows[i].slug) << ',' << ikp::csv_num(rows[i].months) << ','
          << ikp::csv_num(std::log10(rows[i].params_b)) << ',' << ikp::csv_num(rows[i].pen_acc)
          << ',' << ikp::csv_num(fit.residuals[i]) << '\n';
    ikp::atomic_write_file(out / "densing_residuals.csv", csv.str());
    written.push_back("densing_residuals.csv");
  } else {
    notices.push_back("densing_residuals.csv skipped: calibration rows lack release dates");
  }

  // 5. fingerprint matrix
  if (corpus && !by_model.empty() && have("transcripts.jsonl")) {
    std::map<std::string, const ikp::Probe*> by_question;
    for (const auto& p : corpus->probes) by_question.emplace(p.question, &p);
    std::map<std::string, std::map<std::string, std::string>> responses;
    for (const auto& rec : ikp::load_transcripts(in / "transcripts.jsonl")) {
      auto it = by_question.find(rec.spec.user_prompt);
      if (it == by_question.end()) continue;
      responses[rec.spec.model].emplace(it->second->id, rec.response_text);
    }
    ikp::AnswerMatrix matrix = ikp::build_answer_matrix(*corpus, by_model, responses);
    std::vector<ikp::PairFingerprint> fps;
    for (std::size_t a = 0; a < matrix.models.size(); ++a)
      for (std::size_t b = a + 1; b < matrix.models.size(); ++b)
        fps.push_back(ikp::pair_metrics(matrix, a, b));
    ikp::RegimeThresholds thresholds;
    thresholds.retrained_min_both_wrong = cfg.retrained_min_both_wrong;
    ikp::write_fingerprints_csv(fps, thresholds, out / "fingerprint_matrix.csv");
    written.push_back("fingerprint_matrix.csv");
  } else {
    notices.push_back("fingerprint_matrix.csv skipped: need probes, verdicts, and transcripts");
  }

  // 6. lambda sweep
  if (corpus && !by_model.empty() && !cal_rows.empty()) {
    auto sweep = ikp::lambda_sweep(by_model, *corpus, cal_rows, parse_lambda_list(lambdas_csv));
    ikp::write_lambda_sweep_csv(sweep, out / "lambda_sweep.csv");
    written.push_back("lambda_sweep.csv");
  } else {
    notices.push_back("lambda_sweep.csv skipped: need probes, verdicts, and calibration rows");
  }

  for (const auto& n : notices) std::cerr << "notice: " << n << "\n";
  if (json_out) {
    std::cout << json{{"out_dir", out_dir}, {"written", written}, {"skipped", notices}}.dump(2)
              << "\n";
  } else {
    std::cout << written.size() << " report files in " << out_dir << "\n";
  }
  return notices.empty() ? kExitOk : kExitPartial;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tiered factual-probe evaluation toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  bool json_out = false;
  app.add_option("--config", config_path, "config file (default: ./ikp.toml when present)");
  app.add_flag("--json", json_out, "machine-readable output");

  // Shared option storage; each subcommand registers what it uses.
  std::string model, corpus_path, out_path, transcripts_path, verdicts_path, data_path;
  std::string registry_path, judge_model, slug, family_csv, benchmarks_path, in_dir, out_dir;
  std::string spec_name = "M1";
  std::string lambdas_csv = "0,-0.25,-0.5,-1,-1.5,-2,-3";
  std::string base_url, api_key, cache_dir, system_prompt;
  double accuracy = std::numeric_limits<double>::quiet_NaN();
  double lambda_flag = std::numeric_limits<double>::quiet_NaN();
  double pi_level_flag = std::numeric_limits<double>::quiet_NaN();
  double hss_min = 0.25;
  bool exact_judge = false, cross_vendor = false, use_active = false, noiseless = false;
  int replicates = 4000, date_jitter_days = 0;
  std::int64_t seed_flag = -1;
  int n_models = 12, n_facts = 1400;
  double decades = 4.0, bluff = 0.2, p_min = 0.5;
  int repeat_flag = 0, concurrency_flag = 0;

  auto* c_run = app.add_subcommand("run", "query a model over the corpus (cache-aware)");
  c_run->add_option("--model", model)->required();
  c_run->add_option("--corpus", corpus_path);
  c_run->add_option("--out", out_path)->required();
  c_run->add_option("--base-url", base_url);
  c_run->add_option("--api-key", api_key);
  c_run->add_option("--cache-dir", cache_dir);
  c_run->add_option("--system-prompt", system_prompt);
  c_run->add_option("--repeat", repeat_flag);
  c_run->add_option("--concurrency", concurrency_flag);

  auto* c_judge = app.add_subcommand("judge", "classify transcripts into verdicts");
  c_judge->add_option("--corpus", corpus_path);
  c_judge->add_option("--transcripts", transcripts_path)->required();
  c_judge->add_option("--out", out_path)->required();
  c_judge->add_option("--judge-model", judge_model);
  c_judge->add_flag("--exact", exact_judge, "deterministic offline judge");
  c_judge->add_option("--base-url", base_url);
  c_judge->add_option("--api-key", api_key);
  c_judge->add_option("--cache-dir", cache_dir);

  auto* c_score = app.add_subcommand("score", "aggregate verdicts into tier scores");
  c_score->add_option("--corpus", corpus_path);
  c_score->add_option("--verdicts", verdicts_path)->required();
  c_score->add_option("--out", out_path)->required();
  c_score->add_option("--lambda", lambda_flag);

  auto* c_cal = app.add_subcommand("calibrate", "fit scaling lines over model subsets");
  c_cal->add_option("--data", data_path)->required();
  c_cal->add_option("--out", out_path);

  auto* c_est = app.add_subcommand("estimate", "invert the scaling fit at an accuracy");
  c_est->add_option("--data", data_path)->required();
  c_est->add_option("--accuracy", accuracy);
  c_est->add_option("--slug", slug, "estimate for a model row (landmarks are refused)");
  c_est->add_option("--pi-level", pi_level_flag);

  auto* c_loo = app.add_subcommand("loo", "leave-one-out cross-validation");
  c_loo->add_option("--data", data_path)->required();
  c_loo->add_option("--out", out_path);

  auto* c_sweep = app.add_subcommand("sweep-lambda", "rescore and refit across penalties");
  c_sweep->add_option("--corpus", corpus_path);
  c_sweep->add_option("--verdicts", verdicts_path)->required();
  c_sweep->add_option("--data", data_path)->required();
  c_sweep->add_option("--lambdas", lambdas_csv);
  c_sweep->add_option("--out", out_path);

  auto* c_dens = app.add_subcommand("densing", "time-trend slope tests with bootstrap");
  c_dens->add_option("--data", data_path)->required();
  c_dens->add_option("--spec", spec_name, "M1, M2, or M3");
  c_dens->add_option("--replicates", replicates);
  c_dens->add_option("--seed", seed_flag);
  c_dens->add_flag("--use-active", use_active, "active parameters for MoE rows");
  c_dens->add_option("--date-jitter-days", date_jitter_days);
  c_dens->add_option("--out", out_path);

  auto* c_bench = app.add_subcommand("benchcmp", "benchmark proxy comparison");
  c_bench->add_option("--benchmarks", benchmarks_path)->required();
  c_bench->add_option("--data", data_path)->required();
  c_bench->add_option("--out", out_path);

  auto* c_fp = app.add_subcommand("fingerprint", "pairwise knowledge fingerprints (T5-T6)");
  c_fp->add_option("--corpus", corpus_path);
  c_fp->add_option("--verdicts", verdicts_path)->required();
  c_fp->add_option("--transcripts", transcripts_path)->required();
  c_fp->add_option("--registry", registry_path);
  c_fp->add_option("--out", out_path)->required();
  c_fp->add_option("--family", family_csv, "comma-separated release chain");
  c_fp->add_flag("--cross-vendor", cross_vendor);
  c_fp->add_option("--hss-min", hss_min);

  auto* c_sim = app.add_subcommand("simulate", "synthetic end-to-end pipeline");
  c_sim->add_option("--out-dir", out_dir)->required();
  c_sim->add_option("--models", n_models);
  c_sim->add_option("--decades", decades);
  c_sim->add_option("--p-min", p_min);
  c_sim->add_option("--seed", seed_flag);
  c_sim->add_option("--bluff", bluff);
  c_sim->add_flag("--noiseless", noiseless);
  c_sim->add_option("--n-facts", n_facts);

  auto* c_rep = app.add_subcommand("report", "emit CSV/JSON bundles from pipeline artifacts");
  c_rep->add_option("--in-dir", in_dir)->required();
  c_rep->add_option("--out-dir", out_dir)->required();
  c_rep->add_option("--lambdas", lambdas_csv);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    // Flag and subcommand mistakes share the fatal exit code so callers see
    // only the documented 0/2/1 set.
    std::cerr << "error: " << e.what() << " (run with --help for usage)\n";
    return kExitFatal;
  }

  try {
    CliConfig cfg = load_config(config_path);
    apply_env(cfg);
    // Layer 3: flags over everything.
    if (!base_url.empty()) cfg.base_url = base_url;
    if (!api_key.empty()) cfg.api_key = api_key;
    if (!cache_dir.empty()) cfg.cache_dir = cache_dir;
    if (!system_prompt.empty()) cfg.system_prompt = system_prompt;
    if (!judge_model.empty()) cfg.judge_model = judge_model;
    if (repeat_flag > 0) cfg.repeat_count = repeat_flag;
    if (concurrency_flag > 0) cfg.concurrency = concurrency_flag;
    if (!std::isnan(lambda_flag)) cfg.lambda = lambda_flag;
    if (cfg.lambda > 0)
      throw ikp::Error("lambda must be <= 0 (a positive penalty would reward wrong answers)");
    if (!std::isnan(pi_level_flag)) cfg.pi_level = pi_level_flag;
    if (seed_flag >= 0) cfg.seed = static_cast<std::uint64_t>(seed_flag);
    if (corpus_path.empty()) corpus_path = cfg.corpus_path;
    if (registry_path.empty()) registry_path = cfg.registry_path;

    if (app.got_subcommand(c_run))
      return cmd_run(cfg, model, corpus_path, out_path, json_out);
    if (app.got_subcommand(c_judge))
      return cmd_judge(cfg, corpus_path, transcripts_path, out_path, exact_judge, json_out);
    if (app.got_subcommand(c_score))
      return cmd_score(cfg, corpus_path, verdicts_path, out_path, json_out);
    if (app.got_subcommand(c_cal)) return cmd_calibrate(data_path, out_path, json_out);
    if (app.got_subcommand(c_est)) {
      if (std::isnan(accuracy) && slug.empty())
        throw ikp::Error("estimate: pass --accuracy or --slug");
      return cmd_estimate(cfg, data_path, accuracy, slug, json_out);
    }
    if (app.got_subcommand(c_loo)) return cmd_loo(data_path, out_path, json_out);
    if (app.got_subcommand(c_sweep))
      return cmd_sweep_lambda(corpus_path, verdicts_path, data_path, lambdas_csv, out_path,
                              json_out);
    if (app.got_subcommand(c_dens))
      return cmd_densing(data_path, spec_name, replicates, cfg.seed, use_active,
                         date_jitter_days, out_path, json_out);
    if (app.got_subcommand(c_bench))
      return cmd_benchcmp(benchmarks_path, data_path, out_path, json_out);
    if (app.got_subcommand(c_fp))
      return cmd_fingerprint(cfg, corpus_path, verdicts_path, transcripts_path, registry_path,
                             out_path, family_csv, cross_vendor, hss_min, json_out);
    if (app.got_subcommand(c_sim)) {
      ikp::SimOptions opts;
      opts.n_models = n_models;
      opts.decades = decades;
      opts.p_min_b = p_min;
      opts.master_seed = seed_flag >= 0 ? static_cast<std::uint64_t>(seed_flag) : 7;
      opts.bluff_rate = bluff;
      opts.noiseless = noiseless;
      opts.n_facts = n_facts;
      return cmd_simulate(opts, out_dir, json_out);
    }
    if (app.got_subcommand(c_rep))
      return cmd_report(cfg, in_dir, out_dir, lambdas_csv, json_out);
    throw ikp::Error("no subcommand dispatched");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFatal;
  }
}
