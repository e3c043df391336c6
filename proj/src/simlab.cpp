#include "ikp/simlab.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "ikp/gateway.hpp"
#include "ikp/judge.hpp"
#include "ikp/scoring.hpp"
#include "ikp/calibration.hpp"

namespace ikp {

namespace {

std::string hex_of(std::uint64_t v, int digits) {
  if (digits < 16) v &= (1ULL << (4 * digits)) - 1;  // exactly `digits` hex chars
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%0*llx", digits, static_cast<unsigned long long>(v));
  return buf;
}

std::string gold_for(long rank, std::uint64_t seed) {
  return "v" + hex_of(hash_u64("gold|" + std::to_string(rank), seed), 10);
}

/// Uniform double in [0, 1) from a hash.
double unit_from_hash(std::uint64_t h) {
  return static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0);
}

std::string date_for_index(int i, std::uint64_t master_seed) {
  // Synthetic release dates, 30 days apart from the epoch, plus a
  // deterministic +/-10 day jitter. Without the jitter, release order and
  // log-size would be exactly affine and the joint time-trend fit would be
  // rank deficient on synthetic fleets.
  const long jitter =
      static_cast<long>(hash_u64("date|" + std::to_string(i), master_seed) % 21) - 10;
  long days = days_from_civil_str("2024-01-01") + 30L * i + jitter;
  // Invert days-from-civil (Howard Hinnant's civil_from_days).
  days += 719468;
  const long era = (days >= 0 ? days : days - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(days - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const long y = static_cast<long>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp + (mp < 10 ? 3 : -9);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04ld-%02u-%02u", y + (m <= 2 ? 1 : 0), m, d);
  return buf;
}

}  // namespace

double derived_cutoff_per_b(const SimOptions& opts) {
  if (opts.cutoff_per_b > 0) return opts.cutoff_per_b;
  // The smallest model's cutoff sits exactly on the top edge of tier 1.
  return 10.0 * opts.rank_scale / opts.p_min_b;
}

SyntheticCorpus generate_corpus(const SimOptions& opts,
                                const std::array<std::string, 6>& landmark_slugs) {
  if (opts.n_facts < 7 || opts.n_facts % 7 != 0)
    throw Error("generate_corpus: n_facts must be a positive multiple of 7");
  const int per_tier = opts.n_facts / 7;
  SyntheticCorpus sc;
  sc.corpus.landmarks = landmark_slugs;
  long prev = 0;
  for (int tier = 1; tier <= 7; ++tier) {
    for (int j = 1; j <= per_tier; ++j) {
      const double exponent = (tier - 1) + static_cast<double>(j) / per_tier;
      long rank = std::llround(opts.rank_scale * std::pow(10.0, exponent));
      if (rank <= prev) rank = prev + 1;  // keep ranks strictly increasing
      prev = rank;
      Probe p;
      p.id = "sf-" + hex_of(static_cast<std::uint64_t>(rank), 10);
      p.tier = tier;
      p.question = "What is the value stored for synthetic fact " + std::to_string(rank) + "?";
      p.gold_answer = gold_for(rank, opts.master_seed);
      p.domain = "synthetic";
      p.source = "synthetic";
      p.judge_kind = JudgeKind::Threeway;
      sc.rank_by_id[p.id] = rank;
      sc.corpus.probes.push_back(std::move(p));
    }
  }
  return sc;
}

std::vector<SyntheticModelSpec> generate_fleet(const SimOptions& opts) {
  if (opts.n_models < 2) throw Error("generate_fleet: need at least 2 models");
  std::vector<SyntheticModelSpec> fleet;
  for (int i = 0; i < opts.n_models; ++i) {
    SyntheticModelSpec m;
    double exponent = opts.decades * i / (opts.n_models - 1);
    if (opts.noiseless) exponent = std::round(exponent);  // exact band-edge cutoffs
    m.params_b = opts.p_min_b * std::pow(10.0, exponent);
    char buf[48];
    std::snprintf(buf, sizeof(buf), "sim-%02d-%gb", i, m.params_b);
    m.slug = buf;
    m.seed = mix64(opts.master_seed, 1000u + static_cast<std::uint64_t>(i));
    m.bluff_rate = opts.noiseless ? 0.0 : opts.bluff_rate;
    m.release_date = date_for_index(i, opts.master_seed);
    fleet.push_back(std::move(m));
  }
  return fleet;
}

Registry fleet_registry(const std::vector<SyntheticModelSpec>& fleet) {
  Registry reg;
  // Six landmarks spread evenly across the fleet, smallest first.
  const int n = static_cast<int>(fleet.size());
  std::map<int, int> landmark_of;
  for (int l = 0; l < 6; ++l)
    landmark_of[static_cast<int>(std::lround(static_cast<double>(l) * (n - 1) / 5.0))] = l + 1;
  for (int i = 0; i < n; ++i) {
    const auto& m = fleet[static_cast<std::size_t>(i)];
    ModelRecord rec;
    rec.slug = m.slug;
    rec.vendor = "simlab";
    rec.params_total_b = m.params_b;
    rec.is_moe = false;
    rec.is_thinking = false;
    rec.release_date = m.release_date;
    auto it = landmark_of.find(i);
    if (it != landmark_of.end()) rec.landmark_tier = it->second;
    rec.calibration_eligible = true;
    reg.models.push_back(std::move(rec));
  }
  return reg;
}

long cutoff_rank(const SyntheticModelSpec& model, const SimOptions& opts) {
  return std::llround(derived_cutoff_per_b(opts) * model.params_b);
}

std::string simulate_response(const SyntheticModelSpec& model, long rank,
                              const std::string& gold_answer, const std::string& probe_id,
                              const SimOptions& opts) {
  if (rank <= cutoff_rank(model, opts)) return "The value is " + gold_answer + ".";
  const double coin = unit_from_hash(hash_u64("bluff|" + probe_id, model.seed));
  if (coin < model.bluff_rate)
    return "claim " + hex_of(hash_u64("wrong|" + probe_id, model.seed), 12);
  return "I don't know.";
}

void run_simulation(const SimOptions& opts, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  auto fleet = generate_fleet(opts);

  std::array<std::string, 6> landmarks{};
  {
    Registry reg = fleet_registry(fleet);
    for (const auto& m : reg.models)
      if (m.landmark_tier) landmarks[static_cast<std::size_t>(*m.landmark_tier - 1)] = m.slug;
    save_registry(reg, out_dir / "models.toml");
  }

  SyntheticCorpus sc = generate_corpus(opts, landmarks);
  save_corpus(sc.corpus, out_dir / "probes.jsonl");

  std::vector<TranscriptRecord> transcripts;
  std::vector<Verdict> verdicts;
  std::vector<ModelEvaluation> evals;
  std::vector<CalibrationRow> cal_rows;
  for (const auto& model : fleet) {
    std::vector<Verdict> model_verdicts;
    for (const auto& probe : sc.corpus.probes) {
      const long rank = sc.rank_by_id.at(probe.id);
      const std::string response =
          simulate_response(model, rank, probe.gold_answer, probe.id, opts);
      TranscriptRecord rec;
      rec.spec.model = model.slug;
      rec.spec.system_prompt = kDefaultSystemPrompt;
      rec.spec.user_prompt = probe.question;
      rec.spec.max_tokens = 1024;
      rec.query_hash = query_hash(rec.spec);
      rec.response_text = response;
      rec.finish_reason = "stop";
      rec.created_at = model.release_date + "T00:00:00Z";
      transcripts.push_back(std::move(rec));

      Verdict v;
      v.model = model.slug;
      v.probe_id = probe.id;
      v.label = judge_exact(probe, response);
      v.judge_model = "exact";
      model_verdicts.push_back(v);
      verdicts.push_back(std::move(v));
    }
    ModelEvaluation ev = summarize(model.slug, model_verdicts, sc.corpus, {});
    CalibrationRow row;
    row.slug = model.slug;
    row.params_total_b = model.params_b;
    row.release_date = model.release_date;
    row.pen_acc = ev.pen_acc;
    row.raw_acc = ev.raw_acc;
    for (std::size_t l = 0; l < landmarks.size(); ++l)
      if (landmarks[l] == model.slug) row.landmark_tier = static_cast<int>(l) + 1;
    cal_rows.push_back(std::move(row));
    evals.push_back(std::move(ev));
  }
  save_transcripts(transcripts, out_dir / "transcripts.jsonl");
  save_verdicts(verdicts, out_dir / "verdicts.jsonl");
  write_scores_csv(evals, out_dir / "scores.csv");
  write_calibration_csv(cal_rows, out_dir / "calibration.csv");
}

}  // namespace ikp
