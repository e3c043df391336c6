#pragma once

/**
 * @file trend.hpp
 * Time-trend regressions over dated evaluations. The nested specification
 * ladder adds covariates to the scale term one at a time; the headline test
 * asks whether the residual time slope matches the efficiency-doubling
 * target implied by the scale coefficient, or zero.
 */

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ikp/calibration.hpp"
#include "ikp/stats.hpp"

namespace ikp {

struct TrendRow {
  std::string slug;
  double params_b = 0.0;
  double months = 0.0;  // months since the 2024-01-01 epoch (exact days / 30.4375)
  bool is_thinking = false;
  bool is_moe = false;
  double pen_acc = 0.0;
};

/// Builds trend rows from calibration rows; models without a release date
/// are rejected (the error names the slug). `use_active_params` swaps in
/// active parameters for MoE rows.
std::vector<TrendRow> trend_rows_from_calibration(const std::vector<CalibrationRow>& rows,
                                                  bool use_active_params = false);

/// Covariate ladders. M0: log10(params). M1: + months. M2: + thinking.
/// M3: + MoE. Mt: months only.
enum class TrendSpec { M0, M1, M2, M3, Mt };
std::string trend_spec_name(TrendSpec s);
TrendSpec trend_spec_from_name(const std::string& name);

struct TrendFit {
  TrendSpec spec = TrendSpec::M0;
  int n = 0;
  int dof = 0;
  std::map<std::string, double> coefficients;    // keys: intercept, log10_params, months, thinking, moe
  std::map<std::string, double> standard_errors;
  double r2 = 0.0;
  double rmse = 0.0;
  std::vector<double> residuals;
  std::vector<std::string> slugs;
};

/// OLS for the given spec. Collinear designs raise an error naming the
/// offending columns. M0 on the same rows returns bit-identical slope and
/// intercept to fit_scaling.
TrendFit fit_trend(const std::vector<TrendRow>& rows, TrendSpec spec);

struct SlopeTest {
  double beta2_hat = 0.0;        // months coefficient
  double se = 0.0;
  double t_vs_zero = 0.0;
  double p_vs_zero = 0.0;        // two-sided, Student-t at n-k dof
  double densing_target = 0.0;   // beta1 * log10(2) / 3.5 per month
  double t_vs_densing = 0.0;
  double p_vs_densing = 0.0;
  double ci_lo = 0.0;            // bootstrap percentile CI for beta2
  double ci_hi = 0.0;
  int replicates = 0;
  int failed_replicates = 0;     // degenerate resamples skipped
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;
};

/// Tests the months coefficient against zero and against the
/// capability-density doubling target (3.5-month doubling of effective
/// scale). The CI is a seeded nonparametric case-resampling bootstrap;
/// identical seeds give identical intervals. Requires a spec containing
/// both months and log10_params (M1, M2, or M3).
SlopeTest densing_test(const std::vector<TrendRow>& rows, TrendSpec spec, int replicates,
                       std::uint64_t seed);

// ====== benchmark proxies ======

struct BenchmarkRow {
  std::string metric;
  std::string slug;
  double score = 0.0;
};

std::vector<BenchmarkRow> load_benchmark_csv(const std::filesystem::path& path);

struct ProxyCompareRow {
  std::string metric;
  int n = 0;
  double r2_vs_scale = 0.0;                    // metric score ~ log10(params)
  std::optional<double> own_r2_same_subset;    // pen_acc ~ log10(params), same models
  double time_slope_pp_per_month = 0.0;        // months coefficient * 100 from joint fit
};

struct ProxyCompareReport {
  std::vector<ProxyCompareRow> rows;
  std::vector<std::string> skipped;  // metrics with too few joined models
};

/// Each metric joins to its own subset of the trend rows by slug; metrics
/// whose joined subset is smaller than 3 are skipped with a notice.
ProxyCompareReport benchmark_proxy_compare(const std::vector<BenchmarkRow>& benchmarks,
                                           const std::vector<TrendRow>& rows);

// ====== thinking-variant deltas ======

struct VariantDelta {
  std::string base_slug;
  std::string variant_slug;
  double delta_pen_acc = 0.0;           // variant minus base
  std::array<double, 7> tier_deltas{};
};

struct VariantReport {
  std::vector<VariantDelta> pairs;
  int improved = 0;   // delta > 0
  int regressed = 0;  // delta < 0
  double mean_delta = 0.0;
  double min_delta = 0.0;
  double max_delta = 0.0;
};

VariantReport variant_delta(
    const std::vector<std::pair<ModelEvaluation, ModelEvaluation>>& base_variant_pairs);

}  // namespace ikp
