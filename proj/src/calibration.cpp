#include "ikp/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace ikp {

namespace {

double parse_num(const std::string& s, const std::string& ctx) {
  if (s.empty()) throw Error("empty numeric field for " + ctx);
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (!end || *end != '\0') throw Error("bad numeric field for " + ctx + ": '" + s + "'");
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0" || s.empty()) return false;
  throw Error("bad boolean field: '" + s + "'");
}

}  // namespace

std::vector<CalibrationRow> load_calibration_csv(const std::filesystem::path& path) {
  std::vector<CalibrationRow> rows;
  std::map<std::string, std::size_t> col;
  for_each_line(path, [&](std::size_t lineno, const std::string& line) {
    auto fields = csv_split(line);
    if (col.empty()) {
      for (std::size_t i = 0; i < fields.size(); ++i) col[fields[i]] = i;
      for (const char* required : {"slug", "params_total_b", "pen_acc"})
        if (!col.count(required))
          throw Error(path.string() + ": missing required column '" + std::string(required) + "'");
      return;
    }
    auto get = [&](const char* name) -> std::string {
      auto it = col.find(name);
      if (it == col.end() || it->second >= fields.size()) return "";
      return fields[it->second];
    };
    CalibrationRow r;
    r.slug = get("slug");
    if (r.slug.empty())
      throw Error(path.string() + ":" + std::to_string(lineno) + ": empty slug");
    r.params_total_b = parse_num(get("params_total_b"), r.slug + ".params_total_b");
    if (auto s = get("params_active_b"); !s.empty())
      r.params_active_b = parse_num(s, r.slug + ".params_active_b");
    r.is_moe = parse_bool(get("is_moe"));
    r.is_thinking = parse_bool(get("is_thinking"));
    r.release_date = get("release_date");
    r.pen_acc = parse_num(get("pen_acc"), r.slug + ".pen_acc");
    if (auto s = get("raw_acc"); !s.empty()) r.raw_acc = parse_num(s, r.slug + ".raw_acc");
    if (auto s = get("landmark_tier"); !s.empty())
      r.landmark_tier = static_cast<int>(parse_num(s, r.slug + ".landmark_tier"));
    rows.push_back(std::move(r));
  });
  if (rows.empty()) throw Error(path.string() + ": no calibration rows");
  return rows;
}

void write_calibration_csv(const std::vector<CalibrationRow>& rows,
                           const std::filesystem::path& path) {
  std::ostringstream out;
  out << "slug,params_total_b,params_active_b,is_moe,is_thinking,release_date,pen_acc,raw_acc,"
         "landmark_tier\n";
  for (const auto& r : rows) {
    out << csv_field(r.slug) << ',' << csv_num(r.params_total_b) << ','
        << (r.params_active_b ? csv_num(*r.params_active_b) : "") << ','
        << (r.is_moe ? "true" : "false") << ',' << (r.is_thinking ? "true" : "false") << ','
        << r.release_date << ',' << csv_num(r.pen_acc) << ',' << csv_num(r.raw_acc) << ','
        << (r.landmark_tier ? std::to_string(*r.landmark_tier) : "") << '\n';
  }
  atomic_write_file(path, out.str());
}

double ScalingFit::predict(double params_b) const {
  if (params_b <= 0) throw Error("predict: params_b must be positive");
  return beta + alpha * std::log10(params_b);
}

ScalingFit fit_scaling(const std::vector<double>& params_b, const std::vector<double>& accuracy,
                       const std::vector<std::string>& slugs) {
  const std::size_t n = params_b.size();
  if (accuracy.size() != n) throw Error("fit_scaling: params/accuracy size mismatch");
  if (!slugs.empty() && slugs.size() != n) throw Error("fit_scaling: slugs size mismatch");
  if (n < 3) throw Error("fit_scaling: need at least 3 models, got " + std::to_string(n));
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (params_b[i] <= 0)
      throw Error("fit_scaling: params_b must be positive (row " + std::to_string(i) + ")");
    x[i] = std::log10(params_b[i]);
  }
  if (std::set<double>(x.begin(), x.end()).size() < 2)
    throw Error("fit_scaling: all models have the same parameter count");
  if (std::set<double>(accuracy.begin(), accuracy.end()).size() < 2)
    throw Error("fit_scaling: accuracy is constant");

  OlsFit ols = ols_fit(accuracy, {x}, {"log10_params"});
  ScalingFit fit;
  fit.beta = ols.coefficients[0];
  fit.alpha = ols.coefficients[1];
  fit.r2 = ols.r2;
  fit.rmse = ols.rmse;
  fit.residual_se = std::sqrt(ols.sse / (ols.n - 2));
  fit.n = ols.n;
  fit.slugs = slugs;
  fit.log10_params = std::move(x);
  fit.accuracy = accuracy;
  fit.residuals = ols.residuals;
  return fit;
}

EstimateInterval estimate_size(const ScalingFit& fit, double accuracy, double pi_level) {
  if (fit.alpha <= 0)
    throw Error("estimate_size: slope is not positive; scale is uninformative here");
  if (pi_level <= 0 || pi_level >= 1) throw Error("estimate_size: pi_level must be in (0,1)");
  EstimateInterval est;
  est.pi_level = pi_level;
  const double log_n = (accuracy - fit.beta) / fit.alpha;
  const double half_width = normal_quantile(0.5 + pi_level / 2.0) * fit.residual_se / fit.alpha;
  est.point_b = std::pow(10.0, log_n);
  est.lo_b = std::pow(10.0, log_n - half_width);
  est.hi_b = std::pow(10.0, log_n + half_width);
  est.pi_factor = std::pow(10.0, half_width);
  return est;
}

LooReport loo_cv(const std::vector<double>& params_b, const std::vector<double>& accuracy,
                 const std::vector<std::string>& slugs) {
  const std::size_t n = params_b.size();
  if (n < 4) throw Error("loo_cv: need at least 4 models");
  LooReport report;
  for (std::size_t hold = 0; hold < n; ++hold) {
    std::vector<double> px, py;
    px.reserve(n - 1);
    py.reserve(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
      if (i == hold) continue;
      px.push_back(params_b[i]);
      py.push_back(accuracy[i]);
    }
    ScalingFit sub = fit_scaling(px, py);
    if (sub.alpha <= 0)
      throw Error("loo_cv: fold " + std::to_string(hold) + " has a non-positive slope");
    LooFold fold;
    fold.slug = slugs.empty() ? "row" + std::to_string(hold) : slugs[hold];
    fold.actual_b = params_b[hold];
    fold.predicted_b = std::pow(10.0, (accuracy[hold] - sub.beta) / sub.alpha);
    fold.fold_error = std::max(fold.predicted_b / fold.actual_b, fold.actual_b / fold.predicted_b);
    report.folds.push_back(std::move(fold));
  }
  std::vector<double> errs;
  errs.reserve(n);
  int within2 = 0, within3 = 0;
  for (const auto& f : report.folds) {
    errs.push_back(f.fold_error);
    if (f.fold_error <= 2.0) ++within2;
    if (f.fold_error <= 3.0) ++within3;
  }
  report.median_fold_error = median_of(errs);
  report.frac_within_2x = static_cast<double>(within2) / static_cast<double>(n);
  report.frac_within_3x = static_cast<double>(within3) / static_cast<double>(n);
  ScalingFit full = fit_scaling(params_b, accuracy, slugs);
  if (full.alpha > 0) report.pi90_factor = estimate_size(full, 0.5, 0.90).pi_factor;
  return report;
}

// ====== registry-driven subsets ======

std::string subset_name(SubsetKind k) {
  switch (k) {
    case SubsetKind::AllOpen: return "all-open";
    case SubsetKind::DenseOnly: return "dense-only";
    case SubsetKind::DenseNonThinking: return "dense-non-thinking";
    case SubsetKind::MoeTotal: return "moe-total";
    case SubsetKind::MoeActive: return "moe-active";
  }
  throw Error("unreachable subset kind");
}

SubsetReport fit_scaling_variants(const std::vector<CalibrationRow>& rows) {
  SubsetReport report;
  const SubsetKind kinds[] = {SubsetKind::AllOpen, SubsetKind::DenseOnly,
                              SubsetKind::DenseNonThinking, SubsetKind::MoeTotal,
                              SubsetKind::MoeActive};
  for (SubsetKind kind : kinds) {
    std::vector<double> params, pen, raw;
    std::vector<std::string> slugs;
    for (const auto& r : rows) {
      bool in = false;
      double p = r.params_total_b;  // MoE rows enter AllOpen at total params
      switch (kind) {
        case SubsetKind::AllOpen: in = true; break;
        case SubsetKind::DenseOnly: in = !r.is_moe; break;
        case SubsetKind::DenseNonThinking: in = !r.is_moe && !r.is_thinking; break;
        case SubsetKind::MoeTotal: in = r.is_moe; break;
        case SubsetKind::MoeActive:
          in = r.is_moe;
          if (in) {
            if (!r.params_active_b)
              throw Error("moe-active subset: model '" + r.slug + "' has no params_active_b");
            p = *r.params_active_b;
          }
          break;
      }
      if (!in) continue;
      params.push_back(p);
      pen.push_back(r.pen_acc);
      raw.push_back(r.raw_acc);
      slugs.push_back(r.slug);
    }
    if (params.size() < 3) {
      report.warnings.push_back("subset " + subset_name(kind) + " skipped (n=" +
                                std::to_string(params.size()) + " < 3)");
      continue;
    }
    SubsetFit sf{kind, fit_scaling(params, pen, slugs), fit_scaling(params, raw, slugs)};
    report.fits.push_back(std::move(sf));
  }
  return report;
}

// ====== lambda sweep ======

std::vector<LambdaSweepRow> lambda_sweep(
    const std::map<std::string, std::vector<Verdict>>& verdicts_per_model, const Corpus& corpus,
    const std::vector<CalibrationRow>& rows, const std::vector<double>& lambdas) {
  if (lambdas.empty()) throw Error("lambda_sweep: no lambda values given");
  for (const auto& r : rows)
    if (!verdicts_per_model.count(r.slug))
      throw Error("lambda_sweep: no verdicts for calibration model '" + r.slug + "'");

  std::vector<LambdaSweepRow> out;
  for (double lambda : lambdas) {
    std::vector<double> params, pen;
    std::vector<std::string> slugs;
    for (const auto& r : rows) {
      ModelEvaluation ev = rescore(r.slug, verdicts_per_model.at(r.slug), corpus, lambda);
      params.push_back(r.params_total_b);
      pen.push_back(ev.pen_acc);
      slugs.push_back(r.slug);
    }
    ScalingFit fit = fit_scaling(params, pen, slugs);
    LooReport loo = loo_cv(params, pen, slugs);
    LambdaSweepRow row;
    row.lambda = lambda;
    row.r2 = fit.r2;
    row.rmse = fit.rmse;
    row.slope = fit.alpha;
    row.loo_median = loo.median_fold_error;
    row.frac_within_2x = loo.frac_within_2x;
    row.frac_within_3x = loo.frac_within_3x;
    row.pi90_factor = loo.pi90_factor;
    out.push_back(row);
  }
  return out;
}

void write_lambda_sweep_csv(const std::vector<LambdaSweepRow>& rows,
                            const std::filesystem::path& path) {
  std::ostringstream out;
  out << "lambda,r2,rmse,slope,loo_median,frac_within_2x,frac_within_3x,pi90_factor\n";
  for (const auto& r : rows)
    out << csv_num(r.lambda) << ',' << csv_num(r.r2) << ',' << csv_num(r.rmse) << ','
        << csv_num(r.slope) << ',' << csv_num(r.loo_median) << ',' << csv_num(r.frac_within_2x)
        << ',' << csv_num(r.frac_within_3x) << ',' << csv_num(r.pi90_factor) << '\n';
  atomic_write_file(path, out.str());
}

// ====== per-tier structure ======

std::vector<TierLine> fit_tier_lines(const std::vector<double>& params_b,
                                     const std::vector<std::array<double, 7>>& tier_scores) {
  const std::size_t n = params_b.size();
  if (tier_scores.size() != n) throw Error("fit_tier_lines: size mismatch");
  if (n < 3) throw Error("fit_tier_lines: need at least 3 models");
  std::vector<double> overall(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (double s : tier_scores[i]) overall[i] += s;
    overall[i] /= 7.0;
  }
  std::vector<TierLine> lines;
  for (int t = 0; t < 7; ++t) {
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = tier_scores[i][static_cast<std::size_t>(t)];
    TierLine line;
    line.tier = t + 1;
    line.n = static_cast<int>(n);
    const bool flat = std::set<double>(y.begin(), y.end()).size() < 2;
    if (flat) {
      // Saturated or empty tier: the line degenerates to a constant.
      line.slope = 0.0;
      line.intercept = y[0];
      line.r2 = std::numeric_limits<double>::quiet_NaN();
      line.spearman_vs_overall = std::nullopt;
    } else {
      ScalingFit fit = fit_scaling(params_b, y);
      line.slope = fit.alpha;
      line.intercept = fit.beta;
      line.r2 = fit.r2;
      line.spearman_vs_overall = spearman(y, overall);
    }
    lines.push_back(line);
  }
  return lines;
}

// ====== sigmoid ======

namespace {

struct SigmoidParams {
  double u, v, m;  // L = logistic(u), k = exp(v)
};

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double sigmoid_sse(const SigmoidParams& p, const std::vector<double>& x,
                   const std::vector<double>& y) {
  const double L = logistic(p.u), k = std::exp(p.v);
  double sse = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = L * logistic(k * (x[i] - p.m));
    sse += (f - y[i]) * (f - y[i]);
  }
  return sse;
}

/// Levenberg-Marquardt on the transformed parameters; returns true when the
/// gradient or step drops below tolerance.
bool lm_minimize(SigmoidParams& p, const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mu = 1e-3;
  double sse = sigmoid_sse(p, x, y);
  for (int iter = 0; iter < 800; ++iter) {
    const double L = logistic(p.u), k = std::exp(p.v);
    double JtJ[3][3] = {};
    double Jtr[3] = {};
    for (std::size_t i = 0; i < n; ++i) {
      const double s = logistic(k * (x[i] - p.m));
      const double r = L * s - y[i];
      const double dU = s * L * (1.0 - L);
      const double dV = L * s * (1.0 - s) * (x[i] - p.m) * k;
      const double dM = -L * s * (1.0 - s) * k;
      const double J[3] = {dU, dV, dM};
      for (int a = 0; a < 3; ++a) {
        Jtr[a] += J[a] * r;
        for (int b = 0; b < 3; ++b) JtJ[a][b] += J[a] * J[b];
      }
    }
    const double gnorm = std::max({std::fabs(Jtr[0]), std::fabs(Jtr[1]), std::fabs(Jtr[2])});
    if (gnorm < 1e-13) return true;

    // Solve (JtJ + mu I) step = -Jtr by Gaussian elimination.
    double A[3][4];
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) A[a][b] = JtJ[a][b] + (a == b ? mu : 0.0);
      A[a][3] = -Jtr[a];
    }
    bool singular = false;
    for (int c = 0; c < 3; ++c) {
      int piv = c;
      for (int rIdx = c + 1; rIdx < 3; ++rIdx)
        if (std::fabs(A[rIdx][c]) > std::fabs(A[piv][c])) piv = rIdx;
      if (std::fabs(A[piv][c]) < 1e-300) {
        singular = true;
        break;
      }
      std::swap(A[c], A[piv]);
      for (int rIdx = 0; rIdx < 3; ++rIdx) {
        if (rIdx == c) continue;
        const double f = A[rIdx][c] / A[c][c];
        for (int cc = c; cc < 4; ++cc) A[rIdx][cc] -= f * A[c][cc];
      }
    }
    if (singular) {
      mu *= 10;
      continue;
    }
    const double step[3] = {A[0][3] / A[0][0], A[1][3] / A[1][1], A[2][3] / A[2][2]};
    SigmoidParams cand{p.u + step[0], p.v + step[1], p.m + step[2]};
    const double cand_sse = sigmoid_sse(cand, x, y);
    if (cand_sse < sse) {
      const double step_norm = std::max({std::fabs(step[0]), std::fabs(step[1]),
                                         std::fabs(step[2])});
      p = cand;
      const bool tiny_step = step_norm < 1e-12 * (1.0 + std::fabs(p.m));
      const bool tiny_gain = sse - cand_sse < 1e-18 * (1.0 + sse);
      sse = cand_sse;
      mu = std::max(mu * 0.3, 1e-12);
      if (tiny_step || tiny_gain) return true;
    } else {
      mu *= 10;
      if (mu > 1e12) return false;
    }
  }
  return false;
}

}  // namespace

SigmoidFit fit_tier_sigmoid(const std::vector<double>& params_b,
                            const std::vector<double>& scores) {
  const std::size_t n = params_b.size();
  if (scores.size() != n) throw Error("fit_tier_sigmoid: size mismatch");
  if (n < 4) throw Error("fit_tier_sigmoid: need at least 4 points");
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (params_b[i] <= 0) throw Error("fit_tier_sigmoid: params_b must be positive");
    x[i] = std::log10(params_b[i]);
  }
  const auto [ymin_it, ymax_it] = std::minmax_element(scores.begin(), scores.end());
  if (*ymax_it - *ymin_it <= 0)
    throw Error("fit_tier_sigmoid: flat response, nothing to fit");

  const double xmin = *std::min_element(x.begin(), x.end());
  const double xmax = *std::max_element(x.begin(), x.end());
  const double ymax = std::min(0.999, std::max(0.05, *ymax_it * 1.02));
  auto logit = [](double q) { return std::log(q / (1.0 - q)); };

  // 8 deterministic starts: {ceiling guess} x {steepness} x {midpoint}.
  const double l0s[2] = {logit(ymax), logit(0.9)};
  const double v0s[2] = {std::log(1.0), std::log(3.0)};
  const double m0s[2] = {median_of(x), (xmin + xmax) / 2.0};

  SigmoidFit best;
  best.sse = std::numeric_limits<double>::infinity();
  for (double u0 : l0s) {
    for (double v0 : v0s) {
      for (double m0 : m0s) {
        SigmoidParams p{u0, v0, m0};
        const bool ok = lm_minimize(p, x, scores);
        if (!ok) continue;
        const double sse = sigmoid_sse(p, x, scores);
        best.starts_converged++;
        if (sse < best.sse) {
          best.sse = sse;
          best.L = logistic(p.u);
          best.k = std::exp(p.v);
          best.m = p.m;
          best.converged = true;
        }
      }
    }
  }
  if (!best.converged)
    throw Error("fit_tier_sigmoid: no start converged (response may be degenerate)");
  return best;
}

double threshold_crossing_line(double slope, double intercept, double target) {
  if (slope <= 0) throw Error("threshold_crossing: slope must be positive");
  return std::pow(10.0, (target - intercept) / slope);
}

double threshold_crossing_sigmoid(const SigmoidFit& fit, double target) {
  if (!(target > 0)) throw Error("threshold_crossing: target must be positive");
  if (target >= fit.L)
    throw Error("threshold_crossing: target " + csv_num(target) +
                " is at or above the fitted ceiling " + csv_num(fit.L));
  const double xcross = fit.m - std::log(fit.L / target - 1.0) / fit.k;
  return std::pow(10.0, xcross);
}

}  // namespace ikp
