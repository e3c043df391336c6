#pragma once

/**
 * @file scoring.hpp
 * Penalized accuracy over verdicts. Wrong answers cost lambda (default -1),
 * refusals cost nothing, weak correctness earns half credit. Per-tier means
 * are never floored at zero; the aggregate is the unweighted mean of the
 * seven tier means. Judge errors are excluded from every denominator.
 */

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ikp/corpus.hpp"

namespace ikp {

enum class VerdictLabel { CorrectStrong, CorrectWeak, Refusal, Wrong, JudgeError };

std::string verdict_label_name(VerdictLabel v);
VerdictLabel verdict_label_from_name(const std::string& name);

struct Verdict {
  std::string model;
  std::string probe_id;
  VerdictLabel label = VerdictLabel::JudgeError;
  std::string judge_model;
  std::string raw_judge_output;
};

struct ScoringConfig {
  double lambda = -1.0;  // wrong-answer penalty; 0 gives the raw accuracy scale
};

struct TierSummary {
  int tier = 0;
  int n = 0;  // all verdicts routed to this tier, judge errors included
  int strong = 0, weak = 0, refusal = 0, wrong = 0, judge_error = 0;
  double pen_score = 0.0;  // (strong + 0.5 weak + lambda * wrong) / scoreable
  double raw_score = 0.0;  // same with lambda = 0
  std::optional<double> hallucination_rate;  // wrong / (wrong + refusal)
  int scoreable() const { return n - judge_error; }
};

struct ModelEvaluation {
  std::string model;
  double lambda = -1.0;
  std::array<TierSummary, 7> tiers{};
  double pen_acc = 0.0;  // unweighted mean of the 7 tier pen_scores
  double raw_acc = 0.0;
  std::optional<double> hallucination_rate;  // pooled over all tiers
  int judge_errors = 0;
};

/// Score of one verdict under the config. Judge errors are not scoreable.
double score_verdict(VerdictLabel label, const ScoringConfig& cfg);

/// Aggregates one model's verdicts. Probe ids resolve tiers through the
/// corpus; unknown ids and tiers with zero scoreable verdicts are errors
/// (the message names the tier).
ModelEvaluation summarize(const std::string& model, const std::vector<Verdict>& verdicts,
                          const Corpus& corpus, const ScoringConfig& cfg = {});

/// summarize under a different lambda; no re-judging involved.
ModelEvaluation rescore(const std::string& model, const std::vector<Verdict>& verdicts,
                        const Corpus& corpus, double lambda);

// ====== verdict files ======

/// NDJSON, one verdict per line: {model, probe_id, label, judge_model,
/// raw_judge_output}.
std::vector<Verdict> load_verdicts(const std::filesystem::path& path);
void save_verdicts(const std::vector<Verdict>& verdicts, const std::filesystem::path& path);
std::map<std::string, std::vector<Verdict>> verdicts_by_model(std::vector<Verdict> verdicts);

/// scores.csv: one row per (model, tier) plus an `all` aggregate row per model.
void write_scores_csv(const std::vector<ModelEvaluation>& evals,
                      const std::filesystem::path& path);

}  // namespace ikp
