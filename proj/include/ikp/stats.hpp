#pragma once

/**
 * @file stats.hpp
 * Regression and distribution helpers shared by the calibration and trend
 * modules. A single OLS kernel backs both, so fits on identical rows agree
 * bit-for-bit across modules.
 */

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ikp {

struct OlsFit {
  std::vector<std::string> names;   // coefficient names, intercept first
  std::vector<double> coefficients;
  std::vector<double> standard_errors;
  std::vector<double> fitted;
  std::vector<double> residuals;
  double r2 = 0.0;
  double rmse = 0.0;       // sqrt(SSE / n)
  double sse = 0.0;
  double sst = 0.0;
  double sigma2 = 0.0;     // SSE / (n - k)
  int n = 0;
  int k = 0;               // columns incl. intercept
  int dof() const { return n - k; }
};

/// Least squares of y on [1, columns...] via column-pivoted QR.
/// `names` labels the non-intercept columns and sizes must match.
/// Throws Error on n <= k or rank deficiency; the rank message names the
/// offending columns.
OlsFit ols_fit(const std::vector<double>& y,
               const std::vector<std::vector<double>>& columns,
               const std::vector<std::string>& names);

double pearson(const std::vector<double>& x, const std::vector<double>& y);

/// Spearman rank correlation with average ranks on ties.
/// Empty when either side is constant (ranks undefined).
std::optional<double> spearman(const std::vector<double>& x, const std::vector<double>& y);

/// Phi^-1(p) for the standard normal.
double normal_quantile(double p);

/// Two-sided p-value for a t statistic at `dof` degrees of freedom.
double t_two_sided_p(double t, int dof);

}  // namespace ikp
