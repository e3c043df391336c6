#pragma once

/**
 * @file calibration.hpp
 * Log-linear scaling fits and their inverse. Accuracy regresses on
 * log10(parameters in billions); inverting the line turns a measured
 * accuracy into a parameter estimate with a multiplicative prediction
 * interval. Leave-one-out cross-validation reports fold errors as
 * max(pred/actual, actual/pred).
 */

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ikp/corpus.hpp"
#include "ikp/scoring.hpp"
#include "ikp/stats.hpp"

namespace ikp {

/// One calibration observation (typically from calibration.csv).
struct CalibrationRow {
  std::string slug;
  double params_total_b = 0.0;
  std::optional<double> params_active_b;
  bool is_moe = false;
  bool is_thinking = false;
  std::string release_date;  // may be empty for pure scaling fits
  double pen_acc = 0.0;
  double raw_acc = 0.0;
  std::optional<int> landmark_tier;
};

std::vector<CalibrationRow> load_calibration_csv(const std::filesystem::path& path);
void write_calibration_csv(const std::vector<CalibrationRow>& rows,
                           const std::filesystem::path& path);

struct ScalingFit {
  double alpha = 0.0;        // slope per decade of parameters
  double beta = 0.0;         // intercept
  double r2 = 0.0;
  double rmse = 0.0;         // sqrt(SSE / n)
  double residual_se = 0.0;  // sqrt(SSE / (n - 2))
  int n = 0;
  std::vector<std::string> slugs;
  std::vector<double> log10_params;
  std::vector<double> accuracy;
  std::vector<double> residuals;
  double predict(double params_b) const;
};

/// OLS of accuracy on log10(params_b). Preconditions: n >= 3, at least two
/// distinct parameter counts, non-constant accuracy.
ScalingFit fit_scaling(const std::vector<double>& params_b, const std::vector<double>& accuracy,
                       const std::vector<std::string>& slugs = {});

struct EstimateInterval {
  double point_b = 0.0;
  double lo_b = 0.0;
  double hi_b = 0.0;
  double pi_factor = 0.0;  // hi / point == point / lo
  double pi_level = 0.90;
};

/// Inverts the fit at a measured accuracy. The interval is symmetric in
/// log10 space with half-width z((1+level)/2) * residual_se / alpha, the
/// normal-quantile form used throughout. Requires alpha > 0.
EstimateInterval estimate_size(const ScalingFit& fit, double accuracy, double pi_level = 0.90);

struct LooFold {
  std::string slug;
  double actual_b = 0.0;
  double predicted_b = 0.0;
  double fold_error = 0.0;  // max(pred/actual, actual/pred)
};

struct LooReport {
  std::vector<LooFold> folds;
  double median_fold_error = 0.0;
  double frac_within_2x = 0.0;
  double frac_within_3x = 0.0;
  double pi90_factor = 0.0;  // from the full-data fit
};

LooReport loo_cv(const std::vector<double>& params_b, const std::vector<double>& accuracy,
                 const std::vector<std::string>& slugs = {});

// ====== registry-driven subsets ======

enum class SubsetKind { AllOpen, DenseOnly, DenseNonThinking, MoeTotal, MoeActive };
std::string subset_name(SubsetKind k);

struct SubsetFit {
  SubsetKind kind;
  ScalingFit pen_fit;
  ScalingFit raw_fit;
};

struct SubsetReport {
  std::vector<SubsetFit> fits;
  std::vector<std::string> warnings;  // subsets skipped for n < 3
};

/// Fits the standard subset family. MoE rows enter AllOpen at total
/// parameters; MoeActive uses active parameters instead.
SubsetReport fit_scaling_variants(const std::vector<CalibrationRow>& rows);

// ====== lambda sweep ======

struct LambdaSweepRow {
  double lambda = 0.0;
  double r2 = 0.0;
  double rmse = 0.0;
  double slope = 0.0;
  double loo_median = 0.0;
  double frac_within_2x = 0.0;
  double frac_within_3x = 0.0;
  double pi90_factor = 0.0;
};

/// Rescoring-only sweep: per lambda, every model's verdicts are rescored and
/// the AllOpen fit plus LOO summary recomputed. No judging or network.
std::vector<LambdaSweepRow> lambda_sweep(
    const std::map<std::string, std::vector<Verdict>>& verdicts_per_model, const Corpus& corpus,
    const std::vector<CalibrationRow>& rows, const std::vector<double>& lambdas);

void write_lambda_sweep_csv(const std::vector<LambdaSweepRow>& rows,
                            const std::filesystem::path& path);

// ====== per-tier structure ======

struct TierLine {
  int tier = 0;
  int n = 0;
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::optional<double> spearman_vs_overall;
};

/// Per-tier regressions of tier score on log10(params), plus the Spearman
/// correlation of each tier's scores with the overall pen_acc ranking.
std::vector<TierLine> fit_tier_lines(const std::vector<double>& params_b,
                                     const std::vector<std::array<double, 7>>& tier_scores);

struct SigmoidFit {
  double L = 0.0;  // ceiling in (0, 1]
  double k = 0.0;  // steepness, > 0
  double m = 0.0;  // midpoint in log10(params)
  double sse = 0.0;
  bool converged = false;
  int starts_converged = 0;
};

/// Fits score = L / (1 + exp(-k (log10 N - m))) by bounded least squares
/// from 8 deterministic multi-starts. Throws on n < 4 or a flat response.
SigmoidFit fit_tier_sigmoid(const std::vector<double>& params_b,
                            const std::vector<double>& scores);

/// Smallest params_b where a fitted line reaches `target` accuracy.
/// Requires slope > 0.
double threshold_crossing_line(double slope, double intercept, double target);

/// Smallest params_b where the sigmoid reaches `target`. Requires
/// target < L (otherwise the target is above the ceiling).
double threshold_crossing_sigmoid(const SigmoidFit& fit, double target);

}  // namespace ikp
