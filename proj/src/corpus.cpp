#include "ikp/corpus.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "ikp/toml.hpp"

namespace ikp {

using nlohmann::json;

const Probe* Corpus::find(const std::string& id) const {
  for (const auto& p : probes)
    if (p.id == id) return &p;
  return nullptr;
}

namespace {

[[noreturn]] void fail_at(const std::filesystem::path& path, std::size_t lineno,
                          const std::string& what) {
  throw Error(path.string() + ":" + std::to_string(lineno) + ": " + what);
}

EvidenceBundle evidence_from_json(const json& j) {
  EvidenceBundle e;
  e.primary_subfield = j.at("primary_subfield").get<std::string>();
  auto strings = [&](const char* key, std::vector<std::string>& out) {
    if (j.contains(key)) out = j.at(key).get<std::vector<std::string>>();
  };
  strings("secondary_subfields", e.secondary_subfields);
  strings("affiliations", e.affiliations);
  strings("named_systems", e.named_systems);
  strings("venues", e.venues);
  strings("co_authors", e.co_authors);
  if (j.contains("top_works")) {
    for (const auto& w : j.at("top_works")) {
      TopWork tw;
      tw.title = w.at("title").get<std::string>();
      tw.year = w.value("year", 0);
      tw.citations = w.value("citations", 0L);
      e.top_works.push_back(std::move(tw));
    }
  }
  return e;
}

json evidence_to_json(const EvidenceBundle& e) {
  json j;
  j["primary_subfield"] = e.primary_subfield;
  j["secondary_subfields"] = e.secondary_subfields;
  j["affiliations"] = e.affiliations;
  j["named_systems"] = e.named_systems;
  j["venues"] = e.venues;
  j["co_authors"] = e.co_authors;
  json works = json::array();
  for (const auto& w : e.top_works)
    works.push_back({{"title", w.title}, {"year", w.year}, {"citations", w.citations}});
  j["top_works"] = works;
  return j;
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& path) {
  Corpus corpus;
  std::set<std::string> seen_ids;
  bool have_header = false;
  for_each_line(path, [&](std::size_t lineno, const std::string& line) {
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail_at(path, lineno, std::string("bad JSON: ") + e.what());
    }
    if (!have_header) {
      if (!j.contains("landmarks"))
        fail_at(path, lineno, "first record must be the landmark header");
      auto slugs = j.at("landmarks").get<std::vector<std::string>>();
      if (slugs.size() != 6)
        fail_at(path, lineno, "landmark header must name exactly 6 model slugs, got " +
                                  std::to_string(slugs.size()));
      for (std::size_t i = 0; i < 6; ++i) corpus.landmarks[i] = slugs[i];
      have_header = true;
      return;
    }
    Probe p;
    try {
      p.id = j.at("id").get<std::string>();
      p.tier = j.at("tier").get<int>();
      p.question = j.at("question").get<std::string>();
      p.gold_answer = j.at("gold_answer").get<std::string>();
      p.domain = j.value("domain", std::string());
      p.source = j.at("source").get<std::string>();
      const auto kind = j.at("judge_kind").get<std::string>();
      if (kind == "threeway") p.judge_kind = JudgeKind::Threeway;
      else if (kind == "fourway") p.judge_kind = JudgeKind::Fourway;
      else fail_at(path, lineno, "judge_kind must be 'threeway' or 'fourway', got '" + kind + "'");
      if (j.contains("evidence") && !j.at("evidence").is_null())
        p.evidence = evidence_from_json(j.at("evidence"));
    } catch (const json::exception& e) {
      fail_at(path, lineno, std::string("bad probe record: ") + e.what());
    }
    if (p.tier < 1 || p.tier > 7)
      fail_at(path, lineno, "tier out of range 1..7: " + std::to_string(p.tier));
    if (p.question.empty()) fail_at(path, lineno, "empty question");
    if (p.gold_answer.empty()) fail_at(path, lineno, "empty gold_answer");
    if (!seen_ids.insert(p.id).second) fail_at(path, lineno, "duplicate probe id: " + p.id);
    const bool fourway = p.judge_kind == JudgeKind::Fourway;
    if (fourway != p.evidence.has_value())
      fail_at(path, lineno, "evidence must be present exactly for fourway probes (id " + p.id + ")");
    if (fourway != (p.source == "researcher"))
      fail_at(path, lineno,
              "fourway judging is reserved for researcher-sourced probes (id " + p.id + ")");
    corpus.probes.push_back(std::move(p));
  });
  if (!have_header) {
    // Vacuous input: empty list with a warning, not an error.
    std::cerr << "warning: " << path.string() << ": empty corpus file\n";
  }
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ostringstream out;
  out << json{{"landmarks", corpus.landmarks}}.dump() << '\n';
  for (const auto& p : corpus.probes) {
    json j;
    j["id"] = p.id;
    j["tier"] = p.tier;
    j["question"] = p.question;
    j["gold_answer"] = p.gold_answer;
    j["domain"] = p.domain;
    j["source"] = p.source;
    j["judge_kind"] = p.judge_kind == JudgeKind::Fourway ? "fourway" : "threeway";
    if (p.evidence) j["evidence"] = evidence_to_json(*p.evidence);
    out << j.dump() << '\n';
  }
  atomic_write_file(path, out.str());
}

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats s;
  for (const auto& p : corpus.probes) {
    s.per_tier[static_cast<std::size_t>(p.tier - 1)]++;
    s.per_source[p.source]++;
    s.total++;
  }
  return s;
}

// ====== registry ======

const ModelRecord* Registry::find(const std::string& slug) const {
  for (const auto& m : models)
    if (m.slug == slug) return &m;
  return nullptr;
}

Registry load_registry(const std::filesystem::path& path) {
  auto doc = toml::parse_file(path);
  Registry reg;
  for (const auto& slug : doc.table_order) {
    const auto& t = doc.tables.at(slug);
    ModelRecord m;
    m.slug = slug;
    m.vendor = toml::get_string(t, "vendor").value_or("");
    auto total = toml::get_number(t, "params_total_b");
    if (!total || *total <= 0)
      throw Error(path.string() + ": model '" + slug + "' needs params_total_b > 0");
    m.params_total_b = *total;
    m.params_active_b = toml::get_number(t, "params_active_b");
    m.is_moe = toml::get_bool(t, "is_moe").value_or(false);
    m.is_thinking = toml::get_bool(t, "is_thinking").value_or(false);
    m.release_date = toml::get_string(t, "release_date").value_or("");
    if (!m.release_date.empty()) days_from_civil_str(m.release_date);  // validates format
    if (auto lt = toml::get_int(t, "landmark_tier")) {
      if (*lt < 1 || *lt > 6)
        throw Error(path.string() + ": model '" + slug + "' landmark_tier must be 1..6");
      m.landmark_tier = static_cast<int>(*lt);
    }
    m.calibration_eligible = toml::get_bool(t, "calibration_eligible").value_or(true);
    if (m.is_moe && !m.params_active_b)
      throw Error(path.string() + ": MoE model '" + slug + "' needs params_active_b");
    reg.models.push_back(std::move(m));
  }
  if (reg.models.empty()) throw Error(path.string() + ": registry has no model tables");
  return reg;
}

void save_registry(const Registry& registry, const std::filesystem::path& path) {
  std::ostringstream out;
  for (const auto& m : registry.models) {
    out << '[' << m.slug << "]\n";
    out << "vendor = \"" << m.vendor << "\"\n";
    out << "params_total_b = " << csv_num(m.params_total_b) << "\n";
    if (m.params_active_b) out << "params_active_b = " << csv_num(*m.params_active_b) << "\n";
    out << "is_moe = " << (m.is_moe ? "true" : "false") << "\n";
    out << "is_thinking = " << (m.is_thinking ? "true" : "false") << "\n";
    if (!m.release_date.empty()) out << "release_date = " << m.release_date << "\n";
    if (m.landmark_tier) out << "landmark_tier = " << *m.landmark_tier << "\n";
    out << "calibration_eligible = " << (m.calibration_eligible ? "true" : "false") << "\n\n";
  }
  atomic_write_file(path, out.str());
}

// ====== landmark ladder ======

std::optional<int> assign_tier(const LadderResult& correct) {
  int first_true = -1;
  for (int i = 0; i < 6; ++i) {
    if (correct[static_cast<std::size_t>(i)]) {
      first_true = i;
      break;
    }
  }
  if (first_true < 0) return 7;
  for (int i = first_true + 1; i < 6; ++i)
    if (!correct[static_cast<std::size_t>(i)]) return std::nullopt;  // non-monotone: dropped
  return first_true + 1;
}

double monotonic_drop_rate(const std::vector<LadderResult>& ladders) {
  if (ladders.empty()) throw Error("monotonic_drop_rate: no ladder results");
  std::size_t dropped = 0;
  for (const auto& l : ladders)
    if (!assign_tier(l)) ++dropped;
  return static_cast<double>(dropped) / static_cast<double>(ladders.size());
}

}  // namespace ikp
