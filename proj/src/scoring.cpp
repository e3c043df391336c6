#include "ikp/scoring.hpp"

#include <nlohmann/json.hpp>

#include <sstream>

namespace ikp {

using nlohmann::json;

std::string verdict_label_name(VerdictLabel v) {
  switch (v) {
    case VerdictLabel::CorrectStrong: return "correct_strong";
    case VerdictLabel::CorrectWeak: return "correct_weak";
    case VerdictLabel::Refusal: return "refusal";
    case VerdictLabel::Wrong: return "wrong";
    case VerdictLabel::JudgeError: return "judge_error";
  }
  throw Error("unreachable verdict label");
}

VerdictLabel verdict_label_from_name(const std::string& name) {
  if (name == "correct_strong") return VerdictLabel::CorrectStrong;
  if (name == "correct_weak") return VerdictLabel::CorrectWeak;
  if (name == "refusal") return VerdictLabel::Refusal;
  if (name == "wrong") return VerdictLabel::Wrong;
  if (name == "judge_error") return VerdictLabel::JudgeError;
  throw Error("unknown verdict label: '" + name + "'");
}

double score_verdict(VerdictLabel label, const ScoringConfig& cfg) {
  switch (label) {
    case VerdictLabel::CorrectStrong: return 1.0;
    case VerdictLabel::CorrectWeak: return 0.5;
    case VerdictLabel::Refusal: return 0.0;
    case VerdictLabel::Wrong: return cfg.lambda;
    case VerdictLabel::JudgeError:
      throw Error("judge_error verdicts are excluded from scoring");
  }
  throw Error("unreachable verdict label");
}

ModelEvaluation summarize(const std::string& model, const std::vector<Verdict>& verdicts,
                          const Corpus& corpus, const ScoringConfig& cfg) {
  std::map<std::string, int> tier_of;
  for (const auto& p : corpus.probes) tier_of[p.id] = p.tier;

  ModelEvaluation ev;
  ev.model = model;
  ev.lambda = cfg.lambda;
  for (int t = 0; t < 7; ++t) ev.tiers[static_cast<std::size_t>(t)].tier = t + 1;

  for (const auto& v : verdicts) {
    if (!v.model.empty() && v.model != model) continue;
    auto it = tier_of.find(v.probe_id);
    if (it == tier_of.end())
      throw Error("verdict references unknown probe id: '" + v.probe_id + "'");
    auto& ts = ev.tiers[static_cast<std::size_t>(it->second - 1)];
    ts.n++;
    switch (v.label) {
      case VerdictLabel::CorrectStrong: ts.strong++; break;
      case VerdictLabel::CorrectWeak: ts.weak++; break;
      case VerdictLabel::Refusal: ts.refusal++; break;
      case VerdictLabel::Wrong: ts.wrong++; break;
      case VerdictLabel::JudgeError: ts.judge_error++; break;
    }
  }

  double pen_sum = 0.0, raw_sum = 0.0;
  int wrong_total = 0, refusal_total = 0;
  for (auto& ts : ev.tiers) {
    if (ts.scoreable() <= 0)
      throw Error("tier " + std::to_string(ts.tier) + " has no scoreable verdicts for model '" +
                  model + "'");
    const double numer = ts.strong + 0.5 * ts.weak + cfg.lambda * ts.wrong;
    ts.pen_score = numer / ts.scoreable();
    ts.raw_score = (ts.strong + 0.5 * ts.weak) / ts.scoreable();
    if (ts.wrong + ts.refusal > 0)
      ts.hallucination_rate = static_cast<double>(ts.wrong) / (ts.wrong + ts.refusal);
    pen_sum += ts.pen_score;
    raw_sum += ts.raw_score;
    wrong_total += ts.wrong;
    refusal_total += ts.refusal;
    ev.judge_errors += ts.judge_error;
  }
  ev.pen_acc = pen_sum / 7.0;
  ev.raw_acc = raw_sum / 7.0;
  if (wrong_total + refusal_total > 0)
    ev.hallucination_rate = static_cast<double>(wrong_total) / (wrong_total + refusal_total);
  return ev;
}

ModelEvaluation rescore(const std::string& model, const std::vector<Verdict>& verdicts,
                        const Corpus& corpus, double lambda) {
  return summarize(model, verdicts, corpus, ScoringConfig{lambda});
}

std::vector<Verdict> load_verdicts(const std::filesystem::path& path) {
  std::vector<Verdict> out;
  for_each_line(path, [&](std::size_t lineno, const std::string& line) {
    json j;
    try {
      j = json::parse(line);
      Verdict v;
      v.model = j.value("model", std::string());
      v.probe_id = j.at("probe_id").get<std::string>();
      v.label = verdict_label_from_name(j.at("label").get<std::string>());
      v.judge_model = j.value("judge_model", std::string());
      v.raw_judge_output = j.value("raw_judge_output", std::string());
      out.push_back(std::move(v));
    } catch (const json::exception& e) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": bad verdict record: " +
                  e.what());
    }
  });
  return out;
}

void save_verdicts(const std::vector<Verdict>& verdicts, const std::filesystem::path& path) {
  std::ostringstream out;
  for (const auto& v : verdicts) {
    json j;
    j["model"] = v.model;
    j["probe_id"] = v.probe_id;
    j["label"] = verdict_label_name(v.label);
    j["judge_model"] = v.judge_model;
    j["raw_judge_output"] = v.raw_judge_output;
    out << j.dump() << '\n';
  }
  atomic_write_file(path, out.str());
}

std::map<std::string, std::vector<Verdict>> verdicts_by_model(std::vector<Verdict> verdicts) {
  std::map<std::string, std::vector<Verdict>> by_model;
  for (auto& v : verdicts) by_model[v.model].push_back(std::move(v));
  return by_model;
}

void write_scores_csv(const std::vector<ModelEvaluation>& evals,
                      const std::filesystem::path& path) {
  std::ostringstream out;
  out << "model,tier,n,strong,weak,refusal,wrong,judge_error,pen_score,raw_score,"
         "hallucination_rate\n";
  auto opt = [](const std::optional<double>& v) { return v ? csv_num(*v) : std::string(); };
  for (const auto& ev : evals) {
    for (const auto& ts : ev.tiers) {
      out << csv_field(ev.model) << ',' << ts.tier << ',' << ts.n << ',' << ts.strong << ','
          << ts.weak << ',' << ts.refusal << ',' << ts.wrong << ',' << ts.judge_error << ','
          << csv_num(ts.pen_score) << ',' << csv_num(ts.raw_score) << ','
          << opt(ts.hallucination_rate) << '\n';
    }
    int n = 0, s = 0, w = 0, r = 0, wr = 0, je = 0;
    for (const auto& ts : ev.tiers) {
      n += ts.n; s += ts.strong; w += ts.weak; r += ts.refusal; wr += ts.wrong;
      je += ts.judge_error;
    }
    out << csv_field(ev.model) << ",all," << n << ',' << s << ',' << w << ',' << r << ',' << wr
        << ',' << je << ',' << csv_num(ev.pen_acc) << ',' << csv_num(ev.raw_acc) << ','
        << opt(ev.hallucination_rate) << '\n';
  }
  atomic_write_file(path, out.str());
}

}  // namespace ikp
