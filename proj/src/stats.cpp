#include "ikp/stats.hpp"

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ikp/util.hpp"

namespace ikp {

OlsFit ols_fit(const std::vector<double>& y,
               const std::vector<std::vector<double>>& columns,
               const std::vector<std::string>& names) {
  if (names.size() != columns.size())
    throw Error("ols_fit: names/columns size mismatch");
  const int n = static_cast<int>(y.size());
  const int k = static_cast<int>(columns.size()) + 1;
  for (const auto& c : columns)
    if (static_cast<int>(c.size()) != n) throw Error("ols_fit: ragged design matrix");
  if (n <= k)
    throw Error("ols_fit: need more rows than coefficients (n=" + std::to_string(n) +
                ", k=" + std::to_string(k) + ")");

  Eigen::MatrixXd X(n, k);
  Eigen::VectorXd Y(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    for (int j = 1; j < k; ++j) X(i, j) = columns[static_cast<std::size_t>(j - 1)][i];
    Y(i) = y[i];
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < k) {
    // Column permutation puts dependent columns last; name them.
    std::vector<std::string> all = {"intercept"};
    all.insert(all.end(), names.begin(), names.end());
    const auto& perm = qr.colsPermutation().indices();
    std::ostringstream msg;
    msg << "ols_fit: design matrix is rank deficient (collinear columns:";
    for (int j = qr.rank(); j < k; ++j) msg << ' ' << all[static_cast<std::size_t>(perm[j])];
    msg << ")";
    throw Error(msg.str());
  }

  Eigen::VectorXd beta = qr.solve(Y);
  Eigen::VectorXd fit = X * beta;
  Eigen::VectorXd res = Y - fit;

  OlsFit out;
  out.n = n;
  out.k = k;
  out.names = {"intercept"};
  out.names.insert(out.names.end(), names.begin(), names.end());
  out.coefficients.assign(beta.data(), beta.data() + k);
  out.fitted.assign(fit.data(), fit.data() + n);
  out.residuals.assign(res.data(), res.data() + n);
  out.sse = res.squaredNorm();
  const double mean = Y.mean();
  out.sst = (Y.array() - mean).matrix().squaredNorm();
  if (out.sst <= 0.0)
    throw Error("ols_fit: response is constant (R^2 undefined)");
  out.r2 = 1.0 - out.sse / out.sst;
  out.rmse = std::sqrt(out.sse / n);
  out.sigma2 = out.sse / (n - k);

  Eigen::MatrixXd xtx_inv =
      (X.transpose() * X).ldlt().solve(Eigen::MatrixXd::Identity(k, k));
  out.standard_errors.resize(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j)
    out.standard_errors[static_cast<std::size_t>(j)] =
        std::sqrt(std::max(0.0, out.sigma2 * xtx_inv(j, j)));
  return out;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error("pearson: need paired samples");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0 || syy <= 0) throw Error("pearson: constant input");
  return sxy / std::sqrt(sxx * syy);
}

namespace {
std::vector<double> average_ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0u);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = avg;
    i = j + 1;
  }
  return ranks;
}
}  // namespace

std::optional<double> spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error("spearman: need paired samples");
  auto constant = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [&](double e) { return e == v.front(); });
  };
  if (constant(x) || constant(y)) return std::nullopt;
  return pearson(average_ranks(x), average_ranks(y));
}

double normal_quantile(double p) {
  boost::math::normal_distribution<double> d;
  return boost::math::quantile(d, p);
}

double t_two_sided_p(double t, int dof) {
  if (dof < 1) throw Error("t_two_sided_p: dof must be >= 1");
  boost::math::students_t_distribution<double> d(dof);
  return 2.0 * boost::math::cdf(d, -std::fabs(t));
}

}  // namespace ikp
