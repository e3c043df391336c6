#pragma once

/**
 * @file corpus.hpp
 * Tiered factual-probe corpus: NDJSON probe files with a landmark header,
 * the model registry, and landmark-ladder tier assignment.
 *
 * Tier semantics: a probe sits in tier k when landmark model k answers it
 * and landmark k-1 does not. Probes every landmark answers are T1; probes
 * no landmark answers are T7. Non-monotone ladder patterns are dropped.
 */

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ikp/util.hpp"

namespace ikp {

enum class JudgeKind { Threeway, Fourway };

struct TopWork {
  std::string title;
  int year = 0;
  long citations = 0;
};

/// Structured ground truth for researcher probes; every field list may be
/// empty except primary_subfield.
struct EvidenceBundle {
  std::string primary_subfield;
  std::vector<std::string> secondary_subfields;
  std::vector<std::string> affiliations;
  std::vector<std::string> named_systems;
  std::vector<std::string> venues;
  std::vector<std::string> co_authors;
  std::vector<TopWork> top_works;
};

struct Probe {
  std::string id;
  int tier = 0;  // 1..7
  std::string question;
  std::string gold_answer;
  std::string domain;
  std::string source;  // "wikidata" | "academic" | "github" | "researcher" | "synthetic" | ...
  JudgeKind judge_kind = JudgeKind::Threeway;
  std::optional<EvidenceBundle> evidence;  // present iff judge_kind == Fourway
};

struct Corpus {
  std::array<std::string, 6> landmarks{};  // header: ladder model slugs, smallest first
  std::vector<Probe> probes;
  const Probe* find(const std::string& id) const;
};

struct CorpusStats {
  std::array<int, 7> per_tier{};
  std::map<std::string, int> per_source;
  int total = 0;
};

/// Parses and validates a probe file. Validation failures carry the file
/// name and 1-based line number. Enforced: landmark header first, unique
/// ids, tier in 1..7, non-empty question/gold_answer, and
/// evidence present <=> judge_kind == "fourway" <=> source == "researcher".
Corpus load_corpus(const std::filesystem::path& path);

/// Canonical serialization (sorted keys, compact). load(save(c)) is
/// byte-identical to save(c)'s output.
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

CorpusStats corpus_stats(const Corpus& corpus);

// ====== registry ======

struct ModelRecord {
  std::string slug;
  std::string vendor;
  double params_total_b = 0.0;
  std::optional<double> params_active_b;  // MoE models only
  bool is_moe = false;
  bool is_thinking = false;
  std::string release_date;  // YYYY-MM-DD
  std::optional<int> landmark_tier;  // set for ladder models; refuses estimation targets
  bool calibration_eligible = true;
};

struct Registry {
  std::vector<ModelRecord> models;
  const ModelRecord* find(const std::string& slug) const;
};

/// Reads a models.toml registry: one [slug] table per model.
Registry load_registry(const std::filesystem::path& path);
void save_registry(const Registry& registry, const std::filesystem::path& path);

// ====== landmark ladder ======

/// Per-probe ladder outcome: correctness of the six landmark models,
/// smallest model first.
using LadderResult = std::array<bool, 6>;

/// Tier for a ladder pattern, or empty when the pattern is non-monotone
/// (the probe is dropped). All-true -> 1, all-false -> 7, first-correct at
/// index k (0-based) with everything after also correct -> k+1.
std::optional<int> assign_tier(const LadderResult& correct);

/// Fraction of ladder patterns that assign_tier drops. Errors on empty input.
double monotonic_drop_rate(const std::vector<LadderResult>& ladders);

}  // namespace ikp
