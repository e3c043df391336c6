#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "ikp/corpus.hpp"

using namespace ikp;
namespace fs = std::filesystem;

namespace {

const char* kHeader =
    R"({"landmarks":["lm-1","lm-2","lm-3","lm-4","lm-5","lm-6"]})";

std::string probe_line(const std::string& id, int tier, const std::string& q = "who?",
                       const std::string& gold = "x") {
  return "{\"id\":\"" + id + "\",\"tier\":" + std::to_string(tier) + ",\"question\":\"" + q +
         "\",\"gold_answer\":\"" + gold +
         "\",\"source\":\"wikidata\",\"judge_kind\":\"threeway\",\"domain\":\"science\"}";
}

fs::path write_temp(const std::string& name, const std::string& content) {
  fs::path p = fs::temp_directory_path() / name;
  atomic_write_file(p, content);
  return p;
}

}  // namespace

TEST_CASE("load_corpus parses header and probes") {
  std::string text = std::string(kHeader) + "\n" + probe_line("p1", 1) + "\n" +
                     probe_line("p2", 7) + "\n";
  auto path = write_temp("corpus_ok.jsonl", text);
  Corpus c = load_corpus(path);
  CHECK(c.landmarks[0] == "lm-1");
  CHECK(c.landmarks[5] == "lm-6");
  REQUIRE(c.probes.size() == 2);
  CHECK(c.probes[0].id == "p1");
  CHECK(c.probes[1].tier == 7);
  CHECK(c.find("p2") != nullptr);
  CHECK(c.find("nope") == nullptr);
  fs::remove(path);
}

TEST_CASE("load_corpus validation errors name file and line") {
  auto expect_error = [](const std::string& name, const std::string& text,
                         const std::string& needle) {
    auto path = write_temp(name, text);
    try {
      (void)load_corpus(path);
      FAIL("expected error with: ", needle);
    } catch (const Error& e) {
      std::string msg = e.what();
      CHECK_MESSAGE(msg.find(needle) != std::string::npos, "got: ", msg);
      CHECK(msg.find(name) != std::string::npos);
    }
    fs::remove(path);
  };

  expect_error("c_tier8.jsonl", std::string(kHeader) + "\n" + probe_line("p1", 8) + "\n",
               ":2: tier out of range");
  expect_error("c_dup.jsonl",
               std::string(kHeader) + "\n" + probe_line("p1", 1) + "\n" + probe_line("p1", 2) +
                   "\n",
               "duplicate probe id");
  expect_error("c_nohdr.jsonl", probe_line("p1", 1) + "\n", "landmark header");
  expect_error("c_badjson.jsonl", std::string(kHeader) + "\n{nope\n", "bad JSON");
  expect_error("c_noq.jsonl",
               std::string(kHeader) +
                   "\n{\"id\":\"p\",\"tier\":1,\"question\":\"\",\"gold_answer\":\"x\","
                   "\"source\":\"wikidata\",\"judge_kind\":\"threeway\"}\n",
               "empty question");
  // Fourway judging requires evidence and researcher sourcing.
  expect_error("c_fw.jsonl",
               std::string(kHeader) +
                   "\n{\"id\":\"p\",\"tier\":5,\"question\":\"q\",\"gold_answer\":\"x\","
                   "\"source\":\"researcher\",\"judge_kind\":\"fourway\"}\n",
               "evidence");
}

TEST_CASE("empty corpus file yields empty list") {
  auto path = write_temp("c_empty.jsonl", "");
  Corpus c = load_corpus(path);
  CHECK(c.probes.empty());
  fs::remove(path);
}

TEST_CASE("corpus save/load round-trip is byte-identical") {
  std::string text =
      std::string(kHeader) + "\n" + probe_line("p1", 1) + "\n" +
      R"({"id":"p2","tier":5,"question":"who is X?","gold_answer":"X",)"
      R"("source":"researcher","judge_kind":"fourway","domain":"nlp",)"
      R"("evidence":{"primary_subfield":"parsing","secondary_subfields":["syntax"],)"
      R"("affiliations":["MIT"],"named_systems":["ACME"],"venues":["ACL"],)"
      R"("co_authors":["Y"],"top_works":[{"title":"On Parsing","year":2001,"citations":500}]}})" +
      "\n";
  auto p1 = write_temp("c_rt1.jsonl", text);
  Corpus c = load_corpus(p1);
  auto p2 = fs::temp_directory_path() / "c_rt2.jsonl";
  save_corpus(c, p2);
  Corpus c2 = load_corpus(p2);
  auto p3 = fs::temp_directory_path() / "c_rt3.jsonl";
  save_corpus(c2, p3);
  CHECK(read_file(p2) == read_file(p3));
  REQUIRE(c2.probes.size() == 2);
  REQUIRE(c2.probes[1].evidence.has_value());
  CHECK(c2.probes[1].evidence->top_works.at(0).title == "On Parsing");
  fs::remove(p1);
  fs::remove(p2);
  fs::remove(p3);
}

TEST_CASE("corpus_stats counts tiers and sources") {
  std::string text = std::string(kHeader) + "\n" + probe_line("a", 1) + "\n" +
                     probe_line("b", 1) + "\n" + probe_line("c", 3) + "\n";
  auto path = write_temp("c_stats.jsonl", text);
  Corpus c = load_corpus(path);
  CorpusStats st = corpus_stats(c);
  CHECK(st.total == 3);
  CHECK(st.per_tier[0] == 2);
  CHECK(st.per_tier[2] == 1);
  CHECK(st.per_source.at("wikidata") == 3);
  fs::remove(path);
}

TEST_CASE("assign_tier follows the ladder contract") {
  auto t = [](std::array<bool, 6> v) { return assign_tier(v); };
  CHECK(t({false, false, true, true, true, true}) == 3);
  CHECK(t({true, true, true, true, true, true}) == 1);
  CHECK(t({false, true, false, true, true, true}) == std::nullopt);
  CHECK(t({false, false, false, false, false, false}) == 7);
  CHECK(t({false, false, false, false, false, true}) == 6);
  CHECK(t({true, false, false, false, false, false}) == std::nullopt);
}

TEST_CASE("monotonic_drop_rate") {
  std::vector<std::array<bool, 6>> ladders;
  for (int i = 0; i < 85; ++i) ladders.push_back({false, false, true, true, true, true});
  for (int i = 0; i < 15; ++i) ladders.push_back({false, true, false, true, true, true});
  CHECK(monotonic_drop_rate(ladders) == doctest::Approx(0.15));
  CHECK(monotonic_drop_rate({{true, true, true, true, true, true}}) == doctest::Approx(0.0));
  CHECK(monotonic_drop_rate({{true, false, true, false, true, false}}) == doctest::Approx(1.0));
  CHECK_THROWS_AS((void)monotonic_drop_rate({}), Error);
}

TEST_CASE("registry round-trip and validation") {
  std::string text =
      "[alpha-7b]\n"
      "vendor = \"acme\"\n"
      "params_total_b = 7.0\n"
      "is_moe = false\n"
      "is_thinking = false\n"
      "release_date = 2024-03-15\n"
      "landmark_tier = 2\n"
      "calibration_eligible = true\n"
      "\n"
      "[mix-100b]\n"
      "vendor = \"acme\"\n"
      "params_total_b = 100.0\n"
      "params_active_b = 12.0\n"
      "is_moe = true\n"
      "is_thinking = true\n"
      "calibration_eligible = false\n";
  auto p1 = write_temp("reg1.toml", text);
  Registry reg = load_registry(p1);
  REQUIRE(reg.models.size() == 2);
  CHECK(reg.models[0].slug == "alpha-7b");
  CHECK(reg.models[0].landmark_tier == 2);
  CHECK(reg.models[1].is_moe);
  CHECK(reg.models[1].params_active_b == doctest::Approx(12.0));
  CHECK_FALSE(reg.models[1].calibration_eligible);
  REQUIRE(reg.find("mix-100b"));
  CHECK(reg.find("mix-100b")->is_thinking);

  auto p2 = fs::temp_directory_path() / "reg2.toml";
  save_registry(reg, p2);
  Registry reg2 = load_registry(p2);
  CHECK(reg2.models.size() == 2);
  CHECK(reg2.models[1].params_active_b == doctest::Approx(12.0));
  fs::remove(p1);
  fs::remove(p2);

  // MoE without active params is invalid.
  auto bad = write_temp("reg_bad.toml",
                        "[m]\nvendor = \"v\"\nparams_total_b = 10.0\nis_moe = true\n");
  CHECK_THROWS_AS((void)load_registry(bad), Error);
  fs::remove(bad);
}
