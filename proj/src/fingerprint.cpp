#include "ikp/fingerprint.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace ikp {

std::string normalize_answer(const std::string& answer) {
  std::string norm = normalize_text(answer);
  // Year questions: when exactly one distinct plausible year remains, the
  // answer is that year ("founded in 1905, I believe 1905" -> "1905").
  std::set<std::string> years;
  const auto words = split_words(norm);
  for (const auto& w : words) {
    if (w.size() != 4) continue;
    if (!std::all_of(w.begin(), w.end(), [](char c) { return c >= '0' && c <= '9'; })) continue;
    const int v = std::stoi(w);
    if (v >= 1000 && v <= 2099) years.insert(w);
  }
  if (years.size() == 1) return *years.begin();
  return norm;
}

std::size_t AnswerMatrix::model_index(const std::string& slug) const {
  for (std::size_t i = 0; i < models.size(); ++i)
    if (models[i] == slug) return i;
  throw Error("model '" + slug + "' is not in the answer matrix");
}

AnswerMatrix build_answer_matrix(
    const Corpus& corpus, const std::map<std::string, std::vector<Verdict>>& verdicts_per_model,
    const std::map<std::string, std::map<std::string, std::string>>& responses_per_model) {
  AnswerMatrix matrix;
  std::map<std::string, std::size_t> probe_pos;
  for (const auto& p : corpus.probes) {
    if (p.tier != 5 && p.tier != 6) continue;  // fingerprints live on T5-T6
    probe_pos[p.id] = matrix.probe_ids.size();
    matrix.probe_ids.push_back(p.id);
  }
  if (matrix.probe_ids.empty()) throw Error("answer matrix: corpus has no T5 or T6 probes");

  for (const auto& [model, verdicts] : verdicts_per_model) {
    std::vector<MatrixCell> row(matrix.probe_ids.size());
    const auto resp_it = responses_per_model.find(model);
    for (const auto& v : verdicts) {
      auto it = probe_pos.find(v.probe_id);
      if (it == probe_pos.end()) continue;  // not a T5/T6 probe
      MatrixCell& cell = row[it->second];
      switch (v.label) {
        case VerdictLabel::CorrectStrong:
        case VerdictLabel::CorrectWeak:
          cell.state = CellState::Correct;
          break;
        case VerdictLabel::Refusal:
          cell.state = CellState::Refusal;
          break;
        case VerdictLabel::Wrong: {
          cell.state = CellState::Wrong;
          std::string text;
          if (resp_it != responses_per_model.end()) {
            auto rit = resp_it->second.find(v.probe_id);
            if (rit != resp_it->second.end()) text = rit->second;
          }
          if (text.empty())
            throw Error("answer matrix: wrong verdict for '" + model + "' on '" + v.probe_id +
                        "' has no response text");
          cell.wrong_answer = normalize_answer(text);
          break;
        }
        case VerdictLabel::JudgeError:
          cell.state = CellState::Missing;
          break;
      }
    }
    matrix.models.push_back(model);
    matrix.cells.push_back(std::move(row));
  }
  if (matrix.models.size() < 2) throw Error("answer matrix: need at least 2 models");
  return matrix;
}

PairFingerprint pair_metrics(const AnswerMatrix& matrix, std::size_t a, std::size_t b) {
  if (a >= matrix.models.size() || b >= matrix.models.size())
    throw Error("pair_metrics: model index out of range");
  const auto& ra = matrix.cells[a];
  const auto& rb = matrix.cells[b];
  PairFingerprint fp;
  fp.model_a = matrix.models[a];
  fp.model_b = matrix.models[b];
  for (std::size_t i = 0; i < matrix.probe_ids.size(); ++i) {
    const MatrixCell& ca = ra[i];
    const MatrixCell& cb = rb[i];
    if (ca.state == CellState::Missing || cb.state == CellState::Missing) continue;
    fp.both_attempted++;
    const bool a_ok = ca.state == CellState::Correct;
    const bool b_ok = cb.state == CellState::Correct;
    if (a_ok) fp.correct_a++;
    if (b_ok) fp.correct_b++;
    if (a_ok && b_ok) fp.correct_both++;
    if (a_ok || b_ok) fp.correct_union++;
    if (ca.state == CellState::Wrong && cb.state == CellState::Wrong) {
      fp.both_wrong++;
      if (ca.wrong_answer == cb.wrong_answer) fp.same_wrong++;
    }
  }
  fp.jaccard = fp.correct_union == 0
                   ? 0.0
                   : static_cast<double>(fp.correct_both) / static_cast<double>(fp.correct_union);
  if (fp.correct_a > 0 && fp.correct_b > 0 && fp.both_attempted > 0)
    fp.lift = static_cast<double>(fp.correct_both) /
              (static_cast<double>(fp.correct_a) * static_cast<double>(fp.correct_b) /
               static_cast<double>(fp.both_attempted));
  if (fp.both_wrong > 0)
    fp.hss = static_cast<double>(fp.same_wrong) / static_cast<double>(fp.both_wrong);
  return fp;
}

std::string regime_name(Regime r) {
  switch (r) {
    case Regime::SharedBase: return "shared_base";
    case Regime::Lineage: return "lineage";
    case Regime::Retrained: return "retrained";
    case Regime::Independent: return "independent";
    case Regime::Insufficient: return "insufficient";
  }
  throw Error("unreachable regime");
}

Regime classify_regime(const PairFingerprint& fp, const RegimeThresholds& t) {
  if (!fp.hss) return Regime::Insufficient;  // no joint wrongs: HSS carries no signal
  const double hss = *fp.hss;
  if (hss >= t.shared_base_hss && fp.jaccard >= t.shared_base_jaccard) return Regime::SharedBase;
  if (hss >= t.lineage_hss && fp.jaccard >= t.lineage_jaccard) return Regime::Lineage;
  if (hss < t.retrained_hss)
    return fp.both_wrong >= t.retrained_min_both_wrong ? Regime::Retrained : Regime::Insufficient;
  return Regime::Independent;
}

std::vector<PairFingerprint> family_scan(const AnswerMatrix& matrix,
                                         const std::vector<std::string>& ordered_slugs) {
  if (ordered_slugs.size() < 2) throw Error("family_scan: need at least 2 models");
  std::vector<PairFingerprint> out;
  for (std::size_t i = 0; i + 1 < ordered_slugs.size(); ++i)
    out.push_back(pair_metrics(matrix, matrix.model_index(ordered_slugs[i]),
                               matrix.model_index(ordered_slugs[i + 1])));
  return out;
}

std::vector<PairFingerprint> cross_vendor_outliers(const AnswerMatrix& matrix,
                                                   const Registry& registry, double hss_min,
                                                   int min_both_wrong) {
  auto vendor_of = [&](const std::string& slug) -> std::string {
    const ModelRecord* rec = registry.find(slug);
    if (!rec) throw Error("cross_vendor_outliers: model '" + slug + "' is not in the registry");
    return rec->vendor;
  };
  std::vector<PairFingerprint> out;
  for (std::size_t a = 0; a < matrix.models.size(); ++a) {
    for (std::size_t b = a + 1; b < matrix.models.size(); ++b) {
      if (vendor_of(matrix.models[a]) == vendor_of(matrix.models[b])) continue;
      PairFingerprint fp = pair_metrics(matrix, a, b);
      if (!fp.hss || *fp.hss < hss_min || fp.both_wrong < min_both_wrong) continue;
      out.push_back(std::move(fp));
    }
  }
  std::sort(out.begin(), out.end(), [](const PairFingerprint& x, const PairFingerprint& y) {
    if (*x.hss != *y.hss) return *x.hss > *y.hss;
    if (x.both_wrong != y.both_wrong) return x.both_wrong > y.both_wrong;
    return std::tie(x.model_a, x.model_b) < std::tie(y.model_a, y.model_b);
  });
  return out;
}

void write_fingerprints_csv(const std::vector<PairFingerprint>& fps,
                            const RegimeThresholds& thresholds,
                            const std::filesystem::path& path) {
  std::ostringstream out;
  out << "model_a,model_b,both_attempted,correct_a,correct_b,correct_both,correct_union,"
         "jaccard,lift,hss,both_wrong,same_wrong,regime\n";
  for (const auto& fp : fps) {
    out << csv_field(fp.model_a) << ',' << csv_field(fp.model_b) << ',' << fp.both_attempted
        << ',' << fp.correct_a << ',' << fp.correct_b << ',' << fp.correct_both << ','
        << fp.correct_union << ',' << csv_num(fp.jaccard) << ','
        << (fp.lift ? csv_num(*fp.lift) : "") << ',' << (fp.hss ? csv_num(*fp.hss) : "") << ','
        << fp.both_wrong << ',' << fp.same_wrong << ','
        << regime_name(classify_regime(fp, thresholds)) << '\n';
  }
  atomic_write_file(path, out.str());
}

}  // namespace ikp
