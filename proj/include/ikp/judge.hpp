#pragma once

/**
 * @file judge.hpp
 * Verdict classification. Three backends share one verdict vocabulary:
 *
 *  - judge_exact: normalized-substring match against the gold answer, with a
 *    refusal lexicon. Total and deterministic; never emits CorrectWeak.
 *  - judge_deterministic: adds the evidence-aware fourway rubric (subfield
 *    match splits strong/weak on whether any evidence item also matched).
 *    Used by offline runs, the simulation lab, and tests.
 *  - LLM judge (judge_threeway / judge_fourway): builds a rubric prompt, asks
 *    the judge model at temperature 0, and scans the last output line for
 *    exactly one verdict token. One re-ask on an unparseable reply, then a
 *    JudgeError verdict that preserves the raw output.
 */

#include <optional>
#include <string>

#include "ikp/corpus.hpp"
#include "ikp/gateway.hpp"
#include "ikp/scoring.hpp"

namespace ikp {

/// Normalized phrases that mark an abstention.
const std::vector<std::string>& refusal_lexicon();

/// True when the normalized response contains a refusal phrase.
bool is_refusal_text(const std::string& response);

/// CorrectStrong iff the normalized gold answer is a substring of the
/// normalized response; else Refusal iff the response matches the refusal
/// lexicon; else Wrong.
VerdictLabel judge_exact(const Probe& probe, const std::string& response);

/// Evidence matching for fourway probes: case-insensitive containment for
/// affiliations, named systems, venues, and co-authors (3+ chars), plus
/// consecutive 4-word fragment overlap for work titles (whole-title match
/// for shorter titles).
bool evidence_matches(const EvidenceBundle& evidence, const std::string& response);

/// True when the response names the primary or any secondary subfield.
bool subfield_matches(const EvidenceBundle& evidence, const std::string& response);

/// Deterministic rubric over both probe kinds. Threeway probes follow
/// judge_exact. Fourway probes: subfield match plus evidence match gives
/// CorrectStrong, subfield match alone CorrectWeak, refusal lexicon Refusal,
/// anything else Wrong.
VerdictLabel judge_deterministic(const Probe& probe, const std::string& response);

// ====== LLM judge ======

struct JudgeConfig {
  std::string judge_model;
  int max_tokens = 512;
};

struct JudgeOutcome {
  VerdictLabel label = VerdictLabel::JudgeError;
  std::string raw_output;  // last judge reply, kept for diagnostics
};

std::string threeway_judge_prompt(const Probe& probe, const std::string& response);
std::string fourway_judge_prompt(const Probe& probe, const std::string& response);

/// Scans the last non-empty line for exactly one valid verdict token.
/// Empty when the line has no token or more than one.
std::optional<VerdictLabel> parse_judge_token(const std::string& raw, JudgeKind kind);

JudgeOutcome judge_threeway(GatewayClient& client, const JudgeConfig& cfg, const Probe& probe,
                            const std::string& response);
JudgeOutcome judge_fourway(GatewayClient& client, const JudgeConfig& cfg, const Probe& probe,
                           const std::string& response);

/// Dispatches on probe.judge_kind.
JudgeOutcome judge_with_llm(GatewayClient& client, const JudgeConfig& cfg, const Probe& probe,
                            const std::string& response);

}  // namespace ikp
