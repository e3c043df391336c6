#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "ikp/calibration.hpp"
#include "ikp/scoring.hpp"
#include "ikp/stats.hpp"

using namespace ikp;
namespace fs = std::filesystem;

namespace {

/// Independent 2-parameter least squares via closed-form normal equations.
std::pair<double, double> simple_ols(const std::vector<double>& x,
                                     const std::vector<double>& y) {
  const std::size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  double denom = n * sxx - sx * sx;
  double slope = (n * sxy - sx * sy) / denom;
  double intercept = (sy - slope * sx) / n;
  return {slope, intercept};
}

}  // namespace

TEST_CASE("fit_scaling recovers an exact log-linear law") {
  // acc = 0.15 * log10(N) + 0.05
  std::vector<double> params{1, 10, 100, 1000, 10000};
  std::vector<double> acc;
  for (double p : params) acc.push_back(0.15 * std::log10(p) + 0.05);
  ScalingFit fit = fit_scaling(params, acc, {"a", "b", "c", "d", "e"});
  CHECK(fit.alpha == doctest::Approx(0.15).epsilon(1e-12));
  CHECK(fit.beta == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.residual_se == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(fit.n == 5);
  CHECK(fit.predict(100.0) == doctest::Approx(0.35).epsilon(1e-12));
}

TEST_CASE("fit_scaling matches the normal-equations oracle on noisy data") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> ux(-0.5, 4.0), noise(-0.05, 0.05);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> params, acc, logs;
    int n = 5 + static_cast<int>(rng() % 20);
    for (int i = 0; i < n; ++i) {
      double lx = ux(rng);
      logs.push_back(lx);
      params.push_back(std::pow(10.0, lx));
      acc.push_back(0.2 * lx + 0.1 + noise(rng));
    }
    ScalingFit fit = fit_scaling(params, acc);
    auto [slope, intercept] = simple_ols(logs, acc);
    CHECK(fit.alpha == doctest::Approx(slope).epsilon(1e-9));
    CHECK(fit.beta == doctest::Approx(intercept).epsilon(1e-9));
    // residual_se is the n-2 dof estimate.
    double sse = 0;
    for (int i = 0; i < n; ++i) {
      double r = acc[i] - (slope * logs[i] + intercept);
      sse += r * r;
    }
    CHECK(fit.residual_se == doctest::Approx(std::sqrt(sse / (n - 2))).epsilon(1e-9));
  }
}

TEST_CASE("fit_scaling input validation") {
  CHECK_THROWS_AS((void)fit_scaling({1, 10}, {0.1, 0.2}), Error);          // n < 3
  CHECK_THROWS_AS((void)fit_scaling({1, 10, -5}, {0.1, 0.2, 0.3}), Error); // nonpositive params
  CHECK_THROWS_AS((void)fit_scaling({5, 5, 5}, {0.1, 0.2, 0.3}), Error);   // no x spread
  CHECK_THROWS_AS((void)fit_scaling({1, 10, 100}, {0.2, 0.2, 0.2}), Error);  // constant y
}

TEST_CASE("estimate_size inverts the fit with a symmetric log interval") {
  std::vector<double> params{1, 10, 100, 1000};
  std::vector<double> acc{0.12, 0.24, 0.41, 0.52};
  ScalingFit fit = fit_scaling(params, acc);

  EstimateInterval est = estimate_size(fit, 0.35, 0.90);
  CHECK(std::log10(est.point_b) ==
        doctest::Approx((0.35 - fit.beta) / fit.alpha).epsilon(1e-12));
  CHECK(est.hi_b / est.point_b == doctest::Approx(est.point_b / est.lo_b).epsilon(1e-9));
  CHECK(est.pi_factor == doctest::Approx(est.hi_b / est.point_b).epsilon(1e-9));
  CHECK(est.pi_factor >= 1.0);

  // Round-trip: predict at N, invert, get N back.
  for (double n_b : {2.0, 47.0, 314.0}) {
    EstimateInterval rt = estimate_size(fit, fit.predict(n_b), 0.90);
    CHECK(rt.point_b == doctest::Approx(n_b).epsilon(1e-9));
  }
}

TEST_CASE("prediction interval factor reproduces the published-scale example") {
  // residual_se 0.042, slope 0.147, 90% -> 10^(1.645 * 0.042 / 0.147)
  ScalingFit fit;
  fit.alpha = 0.147;
  fit.beta = 0.0;
  fit.residual_se = 0.042;
  EstimateInterval est = estimate_size(fit, 0.5, 0.90);
  CHECK(est.pi_factor == doctest::Approx(2.9509250503685442).epsilon(1e-12));
  // Within 5% of the published 3.00x factor.
  CHECK(std::fabs(est.pi_factor - 3.00) / 3.00 < 0.05);
}

TEST_CASE("estimate_size validates inputs") {
  ScalingFit fit;
  fit.alpha = -0.1;
  fit.beta = 0.5;
  fit.residual_se = 0.01;
  CHECK_THROWS_AS((void)estimate_size(fit, 0.3, 0.90), Error);  // slope must be positive
  fit.alpha = 0.1;
  CHECK_THROWS_AS((void)estimate_size(fit, 0.3, 0.0), Error);   // level in (0,1)
  CHECK_THROWS_AS((void)estimate_size(fit, 0.3, 1.0), Error);
}

TEST_CASE("loo_cv equals a brute-force per-fold refit at n=4") {
  std::vector<double> params{2, 30, 400, 6000};
  std::vector<double> acc{0.15, 0.33, 0.42, 0.58};
  std::vector<std::string> slugs{"a", "b", "c", "d"};
  LooReport report = loo_cv(params, acc, slugs);
  REQUIRE(report.folds.size() == 4);

  for (std::size_t hold = 0; hold < 4; ++hold) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < 4; ++i) {
      if (i == hold) continue;
      lx.push_back(std::log10(params[i]));
      ly.push_back(acc[i]);
    }
    auto [slope, intercept] = simple_ols(lx, ly);
    double predicted = std::pow(10.0, (acc[hold] - intercept) / slope);
    CHECK(report.folds[hold].slug == slugs[hold]);
    CHECK(report.folds[hold].predicted_b == doctest::Approx(predicted).epsilon(1e-9));
    double fe = std::max(predicted / params[hold], params[hold] / predicted);
    CHECK(report.folds[hold].fold_error == doctest::Approx(fe).epsilon(1e-9));
    CHECK(report.folds[hold].fold_error >= 1.0);
  }
  CHECK(report.pi90_factor == doctest::Approx(
            estimate_size(fit_scaling(params, acc), 0.5, 0.90).pi_factor).epsilon(1e-12));
}

TEST_CASE("loo_cv on a noiseless line gives unit fold errors") {
  std::vector<double> params{1, 10, 100, 1000, 10000, 100000};
  std::vector<double> acc;
  for (double p : params) acc.push_back(0.1 * std::log10(p) + 0.2);
  LooReport report = loo_cv(params, acc);
  for (const auto& f : report.folds) CHECK(f.fold_error == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(report.median_fold_error == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(report.frac_within_2x == doctest::Approx(1.0));
  CHECK(report.frac_within_3x == doctest::Approx(1.0));
}

TEST_CASE("calibration CSV round-trip") {
  std::vector<CalibrationRow> rows(2);
  rows[0].slug = "alpha-7b";
  rows[0].params_total_b = 7;
  rows[0].pen_acc = 0.31;
  rows[0].raw_acc = 0.40;
  rows[0].release_date = "2024-05-01";
  rows[0].landmark_tier = 2;
  rows[1].slug = "mix-100b";
  rows[1].params_total_b = 100;
  rows[1].params_active_b = 12;
  rows[1].is_moe = true;
  rows[1].is_thinking = true;
  rows[1].pen_acc = 0.52;
  rows[1].raw_acc = 0.61;

  fs::path p = fs::temp_directory_path() / "cal_rt.csv";
  write_calibration_csv(rows, p);
  auto loaded = load_calibration_csv(p);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].slug == "alpha-7b");
  CHECK(loaded[0].landmark_tier == 2);
  CHECK(loaded[0].release_date == "2024-05-01");
  CHECK(loaded[1].is_moe);
  CHECK(loaded[1].is_thinking);
  REQUIRE(loaded[1].params_active_b.has_value());
  CHECK(*loaded[1].params_active_b == doctest::Approx(12.0));
  CHECK_FALSE(loaded[1].landmark_tier.has_value());
  fs::remove(p);
}

TEST_CASE("subset fits partition by architecture flags") {
  std::vector<CalibrationRow> rows;
  auto add = [&](const std::string& slug, double total, std::optional<double> active,
                 bool moe, bool thinking, double pen) {
    CalibrationRow r;
    r.slug = slug;
    r.params_total_b = total;
    r.params_active_b = active;
    r.is_moe = moe;
    r.is_thinking = thinking;
    r.pen_acc = pen;
    r.raw_acc = pen + 0.1;
    rows.push_back(r);
  };
  // 4 dense non-thinking, 1 dense thinking, 3 MoE.
  add("d1", 1, {}, false, false, 0.10);
  add("d2", 10, {}, false, false, 0.25);
  add("d3", 100, {}, false, false, 0.40);
  add("d4", 1000, {}, false, false, 0.55);
  add("dt", 300, {}, false, true, 0.50);
  add("m1", 50, 8.0, true, false, 0.33);
  add("m2", 500, 40.0, true, false, 0.50);
  add("m3", 2000, 100.0, true, true, 0.60);

  SubsetReport report = fit_scaling_variants(rows);
  CHECK(report.warnings.empty());
  REQUIRE(report.fits.size() == 5);

  auto find = [&](SubsetKind k) -> const SubsetFit& {
    for (const auto& f : report.fits)
      if (f.kind == k) return f;
    REQUIRE(false);
    return report.fits[0];
  };
  CHECK(find(SubsetKind::AllOpen).pen_fit.n == 8);
  CHECK(find(SubsetKind::DenseOnly).pen_fit.n == 5);
  CHECK(find(SubsetKind::DenseNonThinking).pen_fit.n == 4);
  CHECK(find(SubsetKind::MoeTotal).pen_fit.n == 3);
  CHECK(find(SubsetKind::MoeActive).pen_fit.n == 3);

  // MoE rows enter AllOpen at TOTAL params: the fit over slugs {m1,m2,m3}
  // at total equals MoeTotal's fit, and MoeActive differs from it.
  ScalingFit direct = fit_scaling({50, 500, 2000}, {0.33, 0.50, 0.60});
  CHECK(find(SubsetKind::MoeTotal).pen_fit.alpha == doctest::Approx(direct.alpha).epsilon(1e-12));
  ScalingFit active = fit_scaling({8, 40, 100}, {0.33, 0.50, 0.60});
  CHECK(find(SubsetKind::MoeActive).pen_fit.alpha == doctest::Approx(active.alpha).epsilon(1e-12));

  // Small subsets are skipped with a notice, not an error.
  std::vector<CalibrationRow> dense_only(rows.begin(), rows.begin() + 5);
  SubsetReport r3 = fit_scaling_variants(dense_only);
  CHECK(r3.fits.size() == 3);  // moe-total and moe-active skipped
  REQUIRE(r3.warnings.size() == 2);
  CHECK(r3.warnings[0].find("moe-total") != std::string::npos);
}

TEST_CASE("subset names are stable") {
  CHECK(subset_name(SubsetKind::AllOpen) == "all-open");
  CHECK(subset_name(SubsetKind::DenseOnly) == "dense-only");
  CHECK(subset_name(SubsetKind::DenseNonThinking) == "dense-non-thinking");
  CHECK(subset_name(SubsetKind::MoeTotal) == "moe-total");
  CHECK(subset_name(SubsetKind::MoeActive) == "moe-active");
}

namespace {

/// Five-model corpus + verdicts whose lambda = -1 pen_acc matches the
/// calibration rows exactly; used to pin the sweep against direct fits.
struct SweepFixture {
  Corpus corpus;
  std::map<std::string, std::vector<Verdict>> verdicts;
  std::vector<CalibrationRow> rows;
};

SweepFixture make_sweep_fixture() {
  SweepFixture fx;
  int next = 0;
  // 7 tiers x 4 probes.
  for (int t = 1; t <= 7; ++t) {
    for (int i = 0; i < 4; ++i) {
      Probe p;
      p.id = "p" + std::to_string(next++);
      p.tier = t;
      p.question = p.id;
      p.gold_answer = "g";
      p.source = "wikidata";
      fx.corpus.probes.push_back(p);
    }
  }
  std::mt19937_64 rng(7);
  const double sizes[5] = {1, 10, 100, 1000, 10000};
  for (int m = 0; m < 5; ++m) {
    std::string slug = "m" + std::to_string(m);
    std::vector<Verdict> vs;
    for (const auto& probe : fx.corpus.probes) {
      Verdict v;
      v.model = slug;
      v.probe_id = probe.id;
      // Bigger models answer more; spread labels deterministically.
      std::uint64_t h = rng();
      int roll = static_cast<int>(h % 10);
      if (roll < 2 + m) v.label = VerdictLabel::CorrectStrong;
      else if (roll < 3 + m) v.label = VerdictLabel::CorrectWeak;
      else if (roll < 6 + m / 2) v.label = VerdictLabel::Refusal;
      else v.label = VerdictLabel::Wrong;
      vs.push_back(v);
    }
    ModelEvaluation ev = summarize(slug, vs, fx.corpus, {-1.0});
    CalibrationRow row;
    row.slug = slug;
    row.params_total_b = sizes[m];
    row.pen_acc = ev.pen_acc;
    row.raw_acc = ev.raw_acc;
    fx.rows.push_back(row);
    fx.verdicts[slug] = std::move(vs);
  }
  return fx;
}

}  // namespace

TEST_CASE("lambda sweep equals direct rescoring plus refit") {
  SweepFixture fx = make_sweep_fixture();
  auto sweep = lambda_sweep(fx.verdicts, fx.corpus, fx.rows, {0.0, -1.0, -2.0});
  REQUIRE(sweep.size() == 3);

  // The lambda = -1 row reproduces the direct fit on the stored pen_acc.
  std::vector<double> params, pen;
  for (const auto& r : fx.rows) {
    params.push_back(r.params_total_b);
    pen.push_back(r.pen_acc);
  }
  ScalingFit direct = fit_scaling(params, pen);
  CHECK(sweep[1].lambda == doctest::Approx(-1.0));
  CHECK(sweep[1].r2 == doctest::Approx(direct.r2).epsilon(1e-12));
  CHECK(sweep[1].slope == doctest::Approx(direct.alpha).epsilon(1e-12));
  CHECK(sweep[1].loo_median == doctest::Approx(loo_cv(params, pen).median_fold_error)
                                   .epsilon(1e-12));

  // Other lambdas genuinely move the fit.
  CHECK(sweep[0].slope != doctest::Approx(sweep[2].slope).epsilon(1e-6));

  // A calibration row without verdicts is an error.
  CalibrationRow ghost;
  ghost.slug = "ghost";
  ghost.params_total_b = 5;
  ghost.pen_acc = 0.2;
  ghost.raw_acc = 0.3;
  auto rows2 = fx.rows;
  rows2.push_back(ghost);
  CHECK_THROWS_AS((void)lambda_sweep(fx.verdicts, fx.corpus, rows2, {-1.0}), Error);

  fs::path p = fs::temp_directory_path() / "sweep.csv";
  write_lambda_sweep_csv(sweep, p);
  std::string text = read_file(p);
  CHECK(text.rfind("lambda,", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);
  fs::remove(p);
}

TEST_CASE("per-tier lines recover constructed slopes") {
  // Tier t score = (0.02 * t) * log10(N) + 0.1, except tier 7 flat at 0.
  std::vector<double> params{1, 10, 100, 1000, 10000};
  std::vector<std::array<double, 7>> scores;
  for (double p : params) {
    std::array<double, 7> row{};
    for (int t = 0; t < 7; ++t)
      row[t] = t < 6 ? (0.02 * (t + 1)) * std::log10(p) + 0.1 : 0.0;
    scores.push_back(row);
  }
  auto lines = fit_tier_lines(params, scores);
  REQUIRE(lines.size() == 7);
  for (int t = 0; t < 6; ++t) {
    CHECK(lines[t].tier == t + 1);
    CHECK(lines[t].slope == doctest::Approx(0.02 * (t + 1)).epsilon(1e-9));
    CHECK(lines[t].r2 == doctest::Approx(1.0).epsilon(1e-9));
    REQUIRE(lines[t].spearman_vs_overall.has_value());
    CHECK(*lines[t].spearman_vs_overall == doctest::Approx(1.0).epsilon(1e-12));
  }
  // Flat tier: zero slope, intercept at the constant, undefined correlation.
  CHECK(lines[6].slope == doctest::Approx(0.0));
  CHECK(lines[6].intercept == doctest::Approx(0.0));
  CHECK_FALSE(lines[6].spearman_vs_overall.has_value());
}

TEST_CASE("sigmoid fit recovers known parameters and inverts") {
  const double L = 0.85, k = 1.7, m = 1.4;
  std::vector<double> params, scores;
  for (double lx = -0.5; lx <= 3.6; lx += 0.25) {
    params.push_back(std::pow(10.0, lx));
    scores.push_back(L / (1.0 + std::exp(-k * (lx - m))));
  }
  SigmoidFit fit = fit_tier_sigmoid(params, scores);
  REQUIRE(fit.converged);
  CHECK(fit.L == doctest::Approx(L).epsilon(1e-6));
  CHECK(fit.k == doctest::Approx(k).epsilon(1e-6));
  CHECK(fit.m == doctest::Approx(m).epsilon(1e-6));
  CHECK(fit.sse == doctest::Approx(0.0).epsilon(1e-10));

  // Crossing: sigmoid hits target at m - ln(L/target - 1)/k.
  double x = threshold_crossing_sigmoid(fit, 0.5);
  double expect_log = fit.m - std::log(fit.L / 0.5 - 1.0) / fit.k;
  CHECK(std::log10(x) == doctest::Approx(expect_log).epsilon(1e-9));
  CHECK_THROWS_AS((void)threshold_crossing_sigmoid(fit, 0.9), Error);  // above ceiling

  CHECK_THROWS_AS((void)fit_tier_sigmoid({1, 10, 100}, {0.1, 0.2, 0.3}), Error);  // n < 4
  CHECK_THROWS_AS((void)fit_tier_sigmoid({1, 10, 100, 1000}, {0.2, 0.2, 0.2, 0.2}),
                  Error);  // flat
}

TEST_CASE("threshold_crossing_line inverts the line") {
  // 0.1 * log10(N) + 0.2 = 0.5 at log10(N) = 3.
  CHECK(std::log10(threshold_crossing_line(0.1, 0.2, 0.5)) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK_THROWS_AS((void)threshold_crossing_line(-0.1, 0.2, 0.5), Error);
  CHECK_THROWS_AS((void)threshold_crossing_line(0.0, 0.2, 0.5), Error);
}
