#pragma once

/**
 * @file simlab.hpp
 * Synthetic end-to-end oracle. Facts carry Zipf-style ranks laid out on a
 * log grid inside seven decade bands; a synthetic model knows every fact
 * whose rank is below its cutoff (cutoff = c * params_B), refuses unknown
 * facts with probability 1 - bluff_rate, and otherwise emits a wrong answer
 * keyed deterministically by (seed, probe_id). Accuracy is therefore
 * log-linear in parameters by construction, which makes the full
 * run->judge->score->calibrate pipeline checkable.
 */

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ikp/corpus.hpp"

namespace ikp {

struct SyntheticModelSpec {
  std::string slug;
  double params_b = 0.0;
  std::uint64_t seed = 0;      // drives bluff coins and wrong-answer content
  double bluff_rate = 0.0;     // P(wrong | unknown); remainder refuses
  std::string release_date;    // synthetic, for dated artifacts
};

struct SimOptions {
  int n_models = 12;
  double decades = 4.0;        // parameter span of the fleet
  double p_min_b = 0.5;        // smallest model, billions
  std::uint64_t master_seed = 7;
  double bluff_rate = 0.2;
  bool noiseless = false;      // align cutoffs to band edges and disable bluffing
  int n_facts = 1400;          // 200 per tier at the default
  double rank_scale = 1000.0;  // r0: tier t spans ranks (10^(t-1) r0, 10^t r0]
  /// Cutoff per billion params; <= 0 derives the value that makes the
  /// smallest fleet model saturate exactly tier 1.
  double cutoff_per_b = 0.0;
};

double derived_cutoff_per_b(const SimOptions& opts);

struct SyntheticCorpus {
  Corpus corpus;
  std::map<std::string, long> rank_by_id;
};

/// Deterministic given options: `n_facts/7` facts per tier on a log grid,
/// strictly increasing integer ranks, gold answers salted by the seed.
SyntheticCorpus generate_corpus(const SimOptions& opts,
                                const std::array<std::string, 6>& landmark_slugs);

/// Log-spaced fleet over `decades`; noiseless mode snaps sizes to whole
/// decades so every cutoff lands exactly on a band edge.
std::vector<SyntheticModelSpec> generate_fleet(const SimOptions& opts);

Registry fleet_registry(const std::vector<SyntheticModelSpec>& fleet);

long cutoff_rank(const SyntheticModelSpec& model, const SimOptions& opts);

/// Known -> states the gold answer; unknown -> refuses or bluffs a wrong
/// claim, both decided by hashes of (seed, probe_id), so a model is
/// byte-reproducible and same-seed twins share their wrong answers.
std::string simulate_response(const SyntheticModelSpec& model, long rank,
                              const std::string& gold_answer, const std::string& probe_id,
                              const SimOptions& opts);

/// Runs the whole synthetic pipeline and writes probes.jsonl, models.toml,
/// transcripts.jsonl, verdicts.jsonl, scores.csv, and calibration.csv into
/// `out_dir`, mirroring the real pipeline's formats.
void run_simulation(const SimOptions& opts, const std::filesystem::path& out_dir);

}  // namespace ikp
