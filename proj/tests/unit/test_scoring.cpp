#include <doctest.h>

#include <filesystem>

#include "ikp/scoring.hpp"

using namespace ikp;
namespace fs = std::filesystem;

namespace {

/// 70-verdict fixture, 10 per tier. Per-tier (strong, weak, refusal, wrong,
/// judge_error) counts, easy tiers mostly right, hard tiers mostly refused:
///   T1 (10,0,0,0,0)  T2 (6,2,1,1,0)  T3 (4,2,2,2,0)  T4 (2,2,3,2,1)
///   T5 (1,1,6,2,0)   T6 (0,1,7,2,0)  T7 (0,0,8,2,0)
constexpr int kFixture[7][5] = {{10, 0, 0, 0, 0}, {6, 2, 1, 1, 0}, {4, 2, 2, 2, 0},
                                {2, 2, 3, 2, 1},  {1, 1, 6, 2, 0}, {0, 1, 7, 2, 0},
                                {0, 0, 8, 2, 0}};

void build_fixture(Corpus& corpus, std::vector<Verdict>& verdicts) {
  int next_id = 0;
  for (int t = 0; t < 7; ++t) {
    const VerdictLabel labels[5] = {VerdictLabel::CorrectStrong, VerdictLabel::CorrectWeak,
                                    VerdictLabel::Refusal, VerdictLabel::Wrong,
                                    VerdictLabel::JudgeError};
    for (int li = 0; li < 5; ++li) {
      for (int k = 0; k < kFixture[t][li]; ++k) {
        Probe p;
        p.id = "p" + std::to_string(next_id++);
        p.tier = t + 1;
        p.question = p.id;
        p.gold_answer = "g";
        p.source = "wikidata";
        corpus.probes.push_back(p);
        Verdict v;
        v.model = "m";
        v.probe_id = p.id;
        v.label = labels[li];
        verdicts.push_back(v);
      }
    }
  }
}

}  // namespace

TEST_CASE("score_verdict implements the penalty scheme") {
  ScoringConfig cfg{-1.0};
  CHECK(score_verdict(VerdictLabel::CorrectStrong, cfg) == doctest::Approx(1.0));
  CHECK(score_verdict(VerdictLabel::CorrectWeak, cfg) == doctest::Approx(0.5));
  CHECK(score_verdict(VerdictLabel::Refusal, cfg) == doctest::Approx(0.0));
  CHECK(score_verdict(VerdictLabel::Wrong, cfg) == doctest::Approx(-1.0));
  CHECK(score_verdict(VerdictLabel::Wrong, {-2.0}) == doctest::Approx(-2.0));
  CHECK_THROWS_AS((void)score_verdict(VerdictLabel::JudgeError, cfg), Error);
  // Strict ordering of the reward scheme.
  CHECK(score_verdict(VerdictLabel::CorrectStrong, cfg) >
        score_verdict(VerdictLabel::CorrectWeak, cfg));
  CHECK(score_verdict(VerdictLabel::CorrectWeak, cfg) >
        score_verdict(VerdictLabel::Refusal, cfg));
  CHECK(score_verdict(VerdictLabel::Refusal, cfg) > score_verdict(VerdictLabel::Wrong, cfg));
}

TEST_CASE("70-verdict fixture reproduces the frozen aggregates") {
  Corpus corpus;
  std::vector<Verdict> verdicts;
  build_fixture(corpus, verdicts);
  REQUIRE(verdicts.size() == 70);

  ModelEvaluation ev = summarize("m", verdicts, corpus, {-1.0});

  // Tier means: 1, 3/5, 3/10, 1/9, -1/20, -3/20, -1/5 (not floored at zero).
  const double kExpectedPens[7] = {1.0, 0.6, 0.3, 1.0 / 9.0, -0.05, -0.15, -0.2};
  for (int t = 0; t < 7; ++t) {
    CHECK(ev.tiers[t].tier == t + 1);
    CHECK(ev.tiers[t].n == 10);
    CHECK(ev.tiers[t].pen_score == doctest::Approx(kExpectedPens[t]).epsilon(1e-12));
  }
  CHECK(ev.tiers[3].judge_error == 1);
  CHECK(ev.tiers[3].scoreable() == 9);

  // Unweighted mean of tier means: 29/126, 41/105; pooled hallucination 11/38.
  CHECK(ev.pen_acc == doctest::Approx(29.0 / 126.0).epsilon(1e-12));
  CHECK(ev.raw_acc == doctest::Approx(41.0 / 105.0).epsilon(1e-12));
  REQUIRE(ev.hallucination_rate.has_value());
  CHECK(*ev.hallucination_rate == doctest::Approx(11.0 / 38.0).epsilon(1e-12));
  CHECK(ev.judge_errors == 1);

  // Per-tier hallucination: T1 undefined (no wrong, no refusal), T2 = 1/2.
  CHECK_FALSE(ev.tiers[0].hallucination_rate.has_value());
  REQUIRE(ev.tiers[1].hallucination_rate.has_value());
  CHECK(*ev.tiers[1].hallucination_rate == doctest::Approx(0.5).epsilon(1e-12));

  // Harder penalty shifts pen_acc down; raw unchanged.
  ModelEvaluation ev2 = rescore("m", verdicts, corpus, -2.0);
  CHECK(ev2.pen_acc == doctest::Approx(22.0 / 315.0).epsilon(1e-12));
  CHECK(ev2.raw_acc == doctest::Approx(ev.raw_acc).epsilon(1e-12));

  // Lambda 0 collapses the penalized score onto the raw score.
  ModelEvaluation ev0 = rescore("m", verdicts, corpus, 0.0);
  CHECK(ev0.pen_acc == doctest::Approx(ev0.raw_acc).epsilon(1e-12));
}

TEST_CASE("summarize rejects unknown probes and unscoreable tiers") {
  Corpus corpus;
  std::vector<Verdict> verdicts;
  build_fixture(corpus, verdicts);

  std::vector<Verdict> bad = verdicts;
  bad[0].probe_id = "ghost";
  CHECK_THROWS_AS((void)summarize("m", bad, corpus, {}), Error);

  // Drop every tier-7 verdict: that tier has nothing scoreable.
  std::vector<Verdict> missing;
  for (const auto& v : verdicts)
    if (corpus.find(v.probe_id)->tier != 7) missing.push_back(v);
  try {
    (void)summarize("m", missing, corpus, {});
    FAIL("expected an unscoreable-tier error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("7") != std::string::npos);
  }
}

TEST_CASE("verdict NDJSON round-trip") {
  Corpus corpus;
  std::vector<Verdict> verdicts;
  build_fixture(corpus, verdicts);
  verdicts[0].judge_model = "judge-1";
  verdicts[0].raw_judge_output = "CORRECT\nextra";

  fs::path p = fs::temp_directory_path() / "verdicts_rt.jsonl";
  save_verdicts(verdicts, p);
  auto loaded = load_verdicts(p);
  REQUIRE(loaded.size() == verdicts.size());
  CHECK(loaded[0].judge_model == "judge-1");
  CHECK(loaded[0].raw_judge_output == "CORRECT\nextra");
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    CHECK(loaded[i].probe_id == verdicts[i].probe_id);
    CHECK(loaded[i].label == verdicts[i].label);
  }
  auto by_model = verdicts_by_model(loaded);
  CHECK(by_model.at("m").size() == 70);
  fs::remove(p);
}

TEST_CASE("scores CSV has per-tier rows plus an all row") {
  Corpus corpus;
  std::vector<Verdict> verdicts;
  build_fixture(corpus, verdicts);
  ModelEvaluation ev = summarize("m", verdicts, corpus, {-1.0});

  fs::path p = fs::temp_directory_path() / "scores_test.csv";
  write_scores_csv({ev}, p);
  std::string text = read_file(p);
  CHECK(text.rfind("model,tier,n,strong,weak,refusal,wrong,judge_error,pen_score,raw_score,"
                   "hallucination_rate\n", 0) == 0);
  // 1 header + 7 tier rows + 1 "all" row.
  CHECK(std::count(text.begin(), text.end(), '\n') == 9);
  CHECK(text.find("m,all,70,") != std::string::npos);
  fs::remove(p);
}

TEST_CASE("verdict label names round-trip") {
  CHECK(verdict_label_name(VerdictLabel::CorrectStrong) == "correct_strong");
  CHECK(verdict_label_name(VerdictLabel::CorrectWeak) == "correct_weak");
  CHECK(verdict_label_name(VerdictLabel::Refusal) == "refusal");
  CHECK(verdict_label_name(VerdictLabel::Wrong) == "wrong");
  CHECK(verdict_label_name(VerdictLabel::JudgeError) == "judge_error");
}
