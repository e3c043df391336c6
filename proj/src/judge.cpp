#include "ikp/judge.hpp"

#include <nlohmann/json.hpp>

#include <sstream>

namespace ikp {

using nlohmann::json;

const std::vector<std::string>& refusal_lexicon() {
  // Stored pre-normalized (normalize_text strips apostrophes).
  static const std::vector<std::string> kLexicon = {
      "i dont know",  "i do not know", "im not sure",    "i am not sure",
      "cannot",       "can not",       "no information", "not aware of",
      "unable to",    "i have no",     "no reliable information",
  };
  return kLexicon;
}

bool is_refusal_text(const std::string& response) {
  const std::string norm = normalize_text(response);
  for (const auto& phrase : refusal_lexicon())
    if (norm.find(phrase) != std::string::npos) return true;
  return false;
}

VerdictLabel judge_exact(const Probe& probe, const std::string& response) {
  const std::string norm_gold = normalize_text(probe.gold_answer);
  const std::string norm_resp = normalize_text(response);
  if (!norm_gold.empty() && norm_resp.find(norm_gold) != std::string::npos)
    return VerdictLabel::CorrectStrong;
  if (is_refusal_text(response)) return VerdictLabel::Refusal;
  return VerdictLabel::Wrong;
}

namespace {

bool normalized_contains(const std::string& norm_resp, const std::string& raw_item,
                         std::size_t min_len) {
  const std::string item = normalize_text(raw_item);
  if (item.size() < min_len) return false;
  return norm_resp.find(item) != std::string::npos;
}

bool title_fragment_match(const std::string& norm_resp, const std::string& title) {
  const auto words = split_words(normalize_text(title));
  if (words.size() < 4) {
    std::string whole;
    for (const auto& w : words) {
      if (!whole.empty()) whole.push_back(' ');
      whole += w;
    }
    return whole.size() >= 3 && norm_resp.find(whole) != std::string::npos;
  }
  for (std::size_t i = 0; i + 4 <= words.size(); ++i) {
    std::string gram = words[i];
    for (std::size_t j = 1; j < 4; ++j) gram += ' ' + words[i + j];
    if (norm_resp.find(gram) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

bool evidence_matches(const EvidenceBundle& evidence, const std::string& response) {
  const std::string norm = normalize_text(response);
  for (const auto* list :
       {&evidence.named_systems, &evidence.venues, &evidence.affiliations, &evidence.co_authors})
    for (const auto& item : *list)
      if (normalized_contains(norm, item, 3)) return true;
  for (const auto& work : evidence.top_works)
    if (title_fragment_match(norm, work.title)) return true;
  return false;
}

bool subfield_matches(const EvidenceBundle& evidence, const std::string& response) {
  const std::string norm = normalize_text(response);
  if (normalized_contains(norm, evidence.primary_subfield, 3)) return true;
  for (const auto& s : evidence.secondary_subfields)
    if (normalized_contains(norm, s, 3)) return true;
  return false;
}

VerdictLabel judge_deterministic(const Probe& probe, const std::string& response) {
  if (probe.judge_kind == JudgeKind::Threeway || !probe.evidence)
    return judge_exact(probe, response);
  const auto& ev = *probe.evidence;
  if (subfield_matches(ev, response))
    return evidence_matches(ev, response) ? VerdictLabel::CorrectStrong
                                          : VerdictLabel::CorrectWeak;
  if (is_refusal_text(response)) return VerdictLabel::Refusal;
  return VerdictLabel::Wrong;
}

// ====== LLM judge ======

std::string threeway_judge_prompt(const Probe& probe, const std::string& response) {
  std::ostringstream p;
  p << "You are grading a model's answer to a factual question.\n\n"
    << "Question: " << probe.question << "\n"
    << "Reference answer: " << probe.gold_answer << "\n"
    << "Model answer: " << response << "\n\n"
    << "Grade CORRECT if the model answer states the reference answer (alternate "
       "phrasings, spellings, or added detail are fine). Grade REFUSAL if the model "
       "declines to answer or says it does not know, with no competing claim. Grade "
       "WRONG if the model asserts something that contradicts the reference answer.\n\n"
       "Answer with exactly one token: CORRECT | REFUSAL | WRONG";
  return p.str();
}

std::string fourway_judge_prompt(const Probe& probe, const std::string& response) {
  json ev;
  if (probe.evidence) {
    const auto& e = *probe.evidence;
    ev["primary_subfield"] = e.primary_subfield;
    ev["secondary_subfields"] = e.secondary_subfields;
    ev["affiliations"] = e.affiliations;
    ev["named_systems"] = e.named_systems;
    ev["venues"] = e.venues;
    ev["co_authors"] = e.co_authors;
    json works = json::array();
    for (const auto& w : e.top_works)
      works.push_back({{"title", w.title}, {"year", w.year}, {"citations", w.citations}});
    ev["top_works"] = works;
  }
  std::ostringstream p;
  p << "You are grading a model's answer about a researcher.\n\n"
    << "Question: " << probe.question << "\n"
    << "Evidence bundle (ground truth): " << ev.dump() << "\n"
    << "Model answer: " << response << "\n\n"
    << "Grade CORRECT_STRONG if the answer names the researcher's subfield (the "
       "primary subfield, a listed secondary subfield, or an immediately adjacent "
       "area) AND cites at least one item matching the evidence bundle (a paper, "
       "system, venue, affiliation, or co-author). Grade CORRECT_WEAK if the answer "
       "names the subfield but cites no matching evidence item. Grade REFUSAL if the "
       "model declines or says it does not know this person, with no competing "
       "claim. Otherwise grade WRONG.\n\n"
       "Answer with exactly one token: CORRECT_STRONG | CORRECT_WEAK | REFUSAL | WRONG";
  return p.str();
}

std::optional<VerdictLabel> parse_judge_token(const std::string& raw, JudgeKind kind) {
  // Last non-empty line only; a verdict buried in prose does not count.
  std::string line;
  {
    std::istringstream in(raw);
    std::string cur;
    while (std::getline(in, cur)) {
      std::string trimmed;
      std::size_t b = cur.find_first_not_of(" \t\r");
      if (b == std::string::npos) continue;
      std::size_t e = cur.find_last_not_of(" \t\r");
      trimmed = cur.substr(b, e - b + 1);
      if (!trimmed.empty()) line = trimmed;
    }
  }
  if (line.empty()) return std::nullopt;

  struct TokenMap {
    const char* token;
    VerdictLabel label;
  };
  static const TokenMap kThree[] = {{"CORRECT", VerdictLabel::CorrectStrong},
                                    {"REFUSAL", VerdictLabel::Refusal},
                                    {"WRONG", VerdictLabel::Wrong}};
  static const TokenMap kFour[] = {{"CORRECT_STRONG", VerdictLabel::CorrectStrong},
                                   {"CORRECT_WEAK", VerdictLabel::CorrectWeak},
                                   {"REFUSAL", VerdictLabel::Refusal},
                                   {"WRONG", VerdictLabel::Wrong}};

  auto is_word_char = [](char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
  };
  auto count_token = [&](const char* token) {
    const std::string t(token);
    int hits = 0;
    std::size_t pos = 0;
    while ((pos = line.find(t, pos)) != std::string::npos) {
      const bool left_ok = pos == 0 || !is_word_char(line[pos - 1]);
      const std::size_t end = pos + t.size();
      const bool right_ok = end >= line.size() || !is_word_char(line[end]);
      if (left_ok && right_ok) ++hits;
      pos = end;
    }
    return hits;
  };

  std::optional<VerdictLabel> found;
  int total = 0;
  if (kind == JudgeKind::Threeway) {
    for (const auto& tm : kThree) {
      int c = count_token(tm.token);
      total += c;
      if (c > 0) found = tm.label;
    }
  } else {
    // CORRECT_STRONG / CORRECT_WEAK are matched on word boundaries, so the
    // bare CORRECT token cannot double-count inside them.
    for (const auto& tm : kFour) {
      int c = count_token(tm.token);
      total += c;
      if (c > 0) found = tm.label;
    }
  }
  if (total != 1) return std::nullopt;
  return found;
}

namespace {

JudgeOutcome ask_judge(GatewayClient& client, const JudgeConfig& cfg, const Probe& probe,
                       const std::string& prompt) {
  if (cfg.judge_model.empty()) throw Error("judge model is not configured");
  JudgeOutcome out;
  for (int attempt = 0; attempt < 2; ++attempt) {  // one re-ask on an unparseable reply
    QuerySpec spec;
    spec.model = cfg.judge_model;
    spec.system_prompt = "You are a strict grading assistant. Follow the rubric exactly.";
    spec.user_prompt = prompt;
    spec.max_tokens = cfg.max_tokens;
    spec.repeat_index = attempt;  // the re-ask must not reuse the cached miss
    TranscriptRecord rec = client.complete(spec);
    out.raw_output = rec.response_text;
    auto label = parse_judge_token(rec.response_text, probe.judge_kind);
    if (label) {
      out.label = *label;
      return out;
    }
  }
  out.label = VerdictLabel::JudgeError;
  return out;
}

}  // namespace

JudgeOutcome judge_threeway(GatewayClient& client, const JudgeConfig& cfg, const Probe& probe,
                            const std::string& response) {
  return ask_judge(client, cfg, probe, threeway_judge_prompt(probe, response));
}

JudgeOutcome judge_fourway(GatewayClient& client, const JudgeConfig& cfg, const Probe& probe,
                           const std::string& response) {
  return ask_judge(client, cfg, probe, fourway_judge_prompt(probe, response));
}

JudgeOutcome judge_with_llm(GatewayClient& client, const JudgeConfig& cfg, const Probe& probe,
                            const std::string& response) {
  return probe.judge_kind == JudgeKind::Fourway ? judge_fourway(client, cfg, probe, response)
                                                : judge_threeway(client, cfg, probe, response);
}

}  // namespace ikp
