#include "ikp/trend.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace ikp {

std::vector<TrendRow> trend_rows_from_calibration(const std::vector<CalibrationRow>& rows,
                                                  bool use_active_params) {
  std::vector<TrendRow> out;
  for (const auto& r : rows) {
    if (r.release_date.empty())
      throw Error("trend rows need release dates; model '" + r.slug + "' has none");
    TrendRow t;
    t.slug = r.slug;
    t.params_b = r.params_total_b;
    if (use_active_params && r.is_moe) {
      if (!r.params_active_b)
        throw Error("active-parameter trend: model '" + r.slug + "' has no params_active_b");
      t.params_b = *r.params_active_b;
    }
    t.months = months_since_epoch(r.release_date);
    t.is_thinking = r.is_thinking;
    t.is_moe = r.is_moe;
    t.pen_acc = r.pen_acc;
    out.push_back(std::move(t));
  }
  return out;
}

std::string trend_spec_name(TrendSpec s) {
  switch (s) {
    case TrendSpec::M0: return "M0";
    case TrendSpec::M1: return "M1";
    case TrendSpec::M2: return "M2";
    case TrendSpec::M3: return "M3";
    case TrendSpec::Mt: return "Mt";
  }
  throw Error("unreachable trend spec");
}

TrendSpec trend_spec_from_name(const std::string& name) {
  if (name == "M0") return TrendSpec::M0;
  if (name == "M1") return TrendSpec::M1;
  if (name == "M2") return TrendSpec::M2;
  if (name == "M3") return TrendSpec::M3;
  if (name == "Mt") return TrendSpec::Mt;
  throw Error("unknown trend spec '" + name + "' (expected M0, M1, M2, M3, or Mt)");
}

TrendFit fit_trend(const std::vector<TrendRow>& rows, TrendSpec spec) {
  const std::size_t n = rows.size();
  if (n < 3) throw Error("fit_trend: need at least 3 rows");
  std::vector<double> y(n), log_params(n), months(n), thinking(n), moe(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].params_b <= 0)
      throw Error("fit_trend: params_b must be positive ('" + rows[i].slug + "')");
    y[i] = rows[i].pen_acc;
    log_params[i] = std::log10(rows[i].params_b);
    months[i] = rows[i].months;
    thinking[i] = rows[i].is_thinking ? 1.0 : 0.0;
    moe[i] = rows[i].is_moe ? 1.0 : 0.0;
  }
  std::vector<std::vector<double>> cols;
  std::vector<std::string> names;
  switch (spec) {
    case TrendSpec::M0:
      cols = {log_params};
      names = {"log10_params"};
      break;
    case TrendSpec::M1:
      cols = {log_params, months};
      names = {"log10_params", "months"};
      break;
    case TrendSpec::M2:
      cols = {log_params, months, thinking};
      names = {"log10_params", "months", "thinking"};
      break;
    case TrendSpec::M3:
      cols = {log_params, months, thinking, moe};
      names = {"log10_params", "months", "thinking", "moe"};
      break;
    case TrendSpec::Mt:
      cols = {months};
      names = {"months"};
      break;
  }
  // A constant column duplicates the intercept; report it by name instead of
  // surfacing a bare rank error.
  for (std::size_t c = 0; c < cols.size(); ++c) {
    const auto& col = cols[c];
    if (std::all_of(col.begin(), col.end(), [&](double v) { return v == col.front(); }))
      throw Error("fit_trend: column '" + names[c] +
                  "' is constant and collinear with the intercept");
  }
  OlsFit ols = ols_fit(y, cols, names);
  TrendFit fit;
  fit.spec = spec;
  fit.n = ols.n;
  fit.dof = ols.dof();
  for (std::size_t j = 0; j < ols.names.size(); ++j) {
    fit.coefficients[ols.names[j]] = ols.coefficients[j];
    fit.standard_errors[ols.names[j]] = ols.standard_errors[j];
  }
  fit.r2 = ols.r2;
  fit.rmse = ols.rmse;
  fit.residuals = ols.residuals;
  for (const auto& r : rows) fit.slugs.push_back(r.slug);
  return fit;
}

SlopeTest densing_test(const std::vector<TrendRow>& rows, TrendSpec spec, int replicates,
                       std::uint64_t seed) {
  if (spec != TrendSpec::M1 && spec != TrendSpec::M2 && spec != TrendSpec::M3)
    throw Error("densing_test: spec must include both log10_params and months (M1, M2, or M3)");
  if (replicates < 1) throw Error("densing_test: replicates must be >= 1");

  TrendFit fit = fit_trend(rows, spec);
  SlopeTest test;
  test.seed = seed;
  test.replicates = replicates;
  if (replicates < 100)
    test.warnings.push_back("bootstrap with fewer than 100 replicates is unstable (got " +
                            std::to_string(replicates) + ")");

  test.beta2_hat = fit.coefficients.at("months");
  test.se = fit.standard_errors.at("months");
  if (test.se <= 0) throw Error("densing_test: months coefficient has zero standard error");
  test.t_vs_zero = test.beta2_hat / test.se;
  test.p_vs_zero = t_two_sided_p(test.t_vs_zero, fit.dof);
  // Doubling effective scale every 3.5 months advances accuracy by
  // beta1 * log10(2) per doubling, i.e. beta1 * log10(2) / 3.5 per month.
  test.densing_target = fit.coefficients.at("log10_params") * std::log10(2.0) / 3.5;
  test.t_vs_densing = (test.beta2_hat - test.densing_target) / test.se;
  test.p_vs_densing = t_two_sided_p(test.t_vs_densing, fit.dof);

  // Case-resampling bootstrap; replicate r draws its own generator from the
  // master seed so results are independent of execution order.
  const std::size_t n = rows.size();
  std::vector<double> boot;
  boot.reserve(static_cast<std::size_t>(replicates));
  for (int r = 0; r < replicates; ++r) {
    std::mt19937_64 rng(mix64(seed, static_cast<std::uint64_t>(r) + 1));
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<TrendRow> sample;
    sample.reserve(n);
    for (std::size_t i = 0; i < n; ++i) sample.push_back(rows[pick(rng)]);
    try {
      TrendFit f = fit_trend(sample, spec);
      boot.push_back(f.coefficients.at("months"));
    } catch (const Error&) {
      test.failed_replicates++;  // collinear resample; skip
    }
  }
  if (boot.empty()) throw Error("densing_test: every bootstrap replicate was degenerate");
  test.ci_lo = quantile_type7(boot, 0.025);
  test.ci_hi = quantile_type7(boot, 0.975);
  return test;
}

// ====== benchmark proxies ======

std::vector<BenchmarkRow> load_benchmark_csv(const std::filesystem::path& path) {
  std::vector<BenchmarkRow> rows;
  std::map<std::string, std::size_t> col;
  for_each_line(path, [&](std::size_t lineno, const std::string& line) {
    auto fields = csv_split(line);
    if (col.empty()) {
      for (std::size_t i = 0; i < fields.size(); ++i) col[fields[i]] = i;
      for (const char* required : {"metric", "slug", "score"})
        if (!col.count(required))
          throw Error(path.string() + ": missing required column '" + std::string(required) + "'");
      return;
    }
    if (fields.size() < 3)
      throw Error(path.string() + ":" + std::to_string(lineno) + ": short row");
    BenchmarkRow r;
    r.metric = fields[col.at("metric")];
    r.slug = fields[col.at("slug")];
    const std::string& s = fields[col.at("score")];
    char* end = nullptr;
    r.score = std::strtod(s.c_str(), &end);
    if (!end || *end != '\0')
      throw Error(path.string() + ":" + std::to_string(lineno) + ": bad score '" + s + "'");
    rows.push_back(std::move(r));
  });
  if (rows.empty()) throw Error(path.string() + ": no benchmark rows");
  return rows;
}

ProxyCompareReport benchmark_proxy_compare(const std::vector<BenchmarkRow>& benchmarks,
                                           const std::vector<TrendRow>& rows) {
  std::map<std::string, const TrendRow*> by_slug;
  for (const auto& r : rows) by_slug[r.slug] = &r;

  std::map<std::string, std::vector<const BenchmarkRow*>> by_metric;
  std::vector<std::string> metric_order;
  for (const auto& b : benchmarks) {
    if (!by_metric.count(b.metric)) metric_order.push_back(b.metric);
    by_metric[b.metric].push_back(&b);
  }

  ProxyCompareReport report;
  for (const auto& metric : metric_order) {
    std::vector<TrendRow> joint;
    std::vector<double> params, scores, own_acc;
    for (const BenchmarkRow* b : by_metric.at(metric)) {
      auto it = by_slug.find(b->slug);
      if (it == by_slug.end()) continue;
      TrendRow jr = *it->second;
      jr.pen_acc = b->score;  // the metric's score rides in the response slot
      joint.push_back(jr);
      params.push_back(it->second->params_b);
      scores.push_back(b->score);
      own_acc.push_back(it->second->pen_acc);
    }
    if (joint.size() < 3) {
      report.skipped.push_back("metric '" + metric + "' skipped (joined n=" +
                               std::to_string(joint.size()) + " < 3)");
      continue;
    }
    ProxyCompareRow row;
    row.metric = metric;
    row.n = static_cast<int>(joint.size());
    row.r2_vs_scale = fit_scaling(params, scores).r2;
    try {
      row.own_r2_same_subset = fit_scaling(params, own_acc).r2;
    } catch (const Error&) {
      row.own_r2_same_subset = std::nullopt;  // own scores constant on this subset
    }
    TrendFit joint_fit = fit_trend(joint, TrendSpec::M1);
    row.time_slope_pp_per_month = 100.0 * joint_fit.coefficients.at("months");
    report.rows.push_back(std::move(row));
  }
  return report;
}

// ====== thinking-variant deltas ======

VariantReport variant_delta(
    const std::vector<std::pair<ModelEvaluation, ModelEvaluation>>& base_variant_pairs) {
  if (base_variant_pairs.empty()) throw Error("variant_delta: no pairs");
  VariantReport report;
  double sum = 0.0;
  report.min_delta = std::numeric_limits<double>::infinity();
  report.max_delta = -std::numeric_limits<double>::infinity();
  for (const auto& [base, variant] : base_variant_pairs) {
    VariantDelta d;
    d.base_slug = base.model;
    d.variant_slug = variant.model;
    d.delta_pen_acc = variant.pen_acc - base.pen_acc;
    for (std::size_t t = 0; t < 7; ++t)
      d.tier_deltas[t] = variant.tiers[t].pen_score - base.tiers[t].pen_score;
    if (d.delta_pen_acc > 0) report.improved++;
    if (d.delta_pen_acc < 0) report.regressed++;
    sum += d.delta_pen_acc;
    report.min_delta = std::min(report.min_delta, d.delta_pen_acc);
    report.max_delta = std::max(report.max_delta, d.delta_pen_acc);
    report.pairs.push_back(std::move(d));
  }
  report.mean_delta = sum / static_cast<double>(base_variant_pairs.size());
  return report;
}

}  // namespace ikp
