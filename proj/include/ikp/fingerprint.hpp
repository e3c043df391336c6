#pragma once

/**
 * @file fingerprint.hpp
 * Pairwise knowledge fingerprints over the hardest tiers (T5-T6). Two
 * models that share weights agree not only on what they know (Jaccard and
 * lift over correct sets) but on the specific wrong answers they produce
 * (hallucination-sharing score). All pair metrics are computed over the
 * probes both models attempted, so they are symmetric and share one sample
 * space.
 */

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ikp/corpus.hpp"
#include "ikp/scoring.hpp"

namespace ikp {

/// Lowercases, strips punctuation, collapses whitespace; when exactly one
/// distinct 4-digit token in [1000, 2099] remains, the answer reduces to
/// that token (year questions compare on the year alone).
std::string normalize_answer(const std::string& answer);

enum class CellState { Correct, Wrong, Refusal, Missing };

struct MatrixCell {
  CellState state = CellState::Missing;
  std::string wrong_answer;  // normalized; set iff state == Wrong
};

struct AnswerMatrix {
  std::vector<std::string> probe_ids;          // T5-T6 probes, corpus order
  std::vector<std::string> models;
  std::vector<std::vector<MatrixCell>> cells;  // [model][probe]
  std::size_t model_index(const std::string& slug) const;
};

/// Builds the matrix from verdicts plus the response texts (for wrong
/// answers). Correct = CorrectStrong or CorrectWeak; judge errors and
/// unevaluated probes are Missing.
AnswerMatrix build_answer_matrix(
    const Corpus& corpus, const std::map<std::string, std::vector<Verdict>>& verdicts_per_model,
    const std::map<std::string, std::map<std::string, std::string>>& responses_per_model);

struct PairFingerprint {
  std::string model_a;
  std::string model_b;
  int both_attempted = 0;    // pairwise non-missing probes (the sample space)
  int correct_a = 0;
  int correct_b = 0;
  int correct_both = 0;
  int correct_union = 0;
  int both_wrong = 0;
  int same_wrong = 0;        // identical normalized wrong answers
  double jaccard = 0.0;      // 0 when the union is empty
  std::optional<double> lift;  // undefined when either correct set is empty
  std::optional<double> hss;   // undefined when both_wrong == 0
};

PairFingerprint pair_metrics(const AnswerMatrix& matrix, std::size_t a, std::size_t b);

enum class Regime { SharedBase, Lineage, Retrained, Independent, Insufficient };
std::string regime_name(Regime r);

struct RegimeThresholds {
  double shared_base_hss = 0.30;
  double shared_base_jaccard = 0.60;
  double lineage_hss = 0.10;
  double lineage_jaccard = 0.50;
  double retrained_hss = 0.10;       // strictly below
  int retrained_min_both_wrong = 10;  // joint-wrong support needed to call Retrained
};

/// Decision chain: no joint wrongs -> Insufficient; shared-base gate;
/// lineage gate; low HSS -> Retrained given enough joint wrongs, otherwise
/// Insufficient; everything else Independent. Total and mutually exclusive.
Regime classify_regime(const PairFingerprint& fp, const RegimeThresholds& thresholds = {});

/// Fingerprints for consecutive pairs of an ordered model list (release
/// chains within one family).
std::vector<PairFingerprint> family_scan(const AnswerMatrix& matrix,
                                         const std::vector<std::string>& ordered_slugs);

/// Cross-vendor pairs with defined HSS >= hss_min and enough joint wrongs,
/// sorted by descending (hss, both_wrong). Pairs within one vendor are
/// excluded.
std::vector<PairFingerprint> cross_vendor_outliers(const AnswerMatrix& matrix,
                                                   const Registry& registry, double hss_min,
                                                   int min_both_wrong);

void write_fingerprints_csv(const std::vector<PairFingerprint>& fps,
                            const RegimeThresholds& thresholds,
                            const std::filesystem::path& path);

}  // namespace ikp
