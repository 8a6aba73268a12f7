#include "doctest.h"

#include "tempdir.hpp"

#include "mwp/mwp.h"

#include "json.hpp"

#include <sstream>
#include <string>

using nlohmann::json;

namespace {

const std::string kFixture = std::string(MWP_DATA_DIR) + "/fixture";

struct Str {
  char* p = nullptr;
  ~Str() { mwp_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::string(mwp_version()).size() > 0);
  CHECK(std::string(mwp_status_name(MWP_OK)) == "ok");
  CHECK(std::string(mwp_status_name(MWP_ERR_IO)) == "i/o error");
  CHECK(std::string(mwp_status_name(static_cast<mwp_status>(42))) == "unknown status");
  mwp_string_free(nullptr);
}

TEST_CASE("evaluate_equation") {
  Str out;
  REQUIRE(mwp_evaluate_equation("x = 180 + 150", &out.p) == MWP_OK);
  const auto doc = json::parse(out.str());
  CHECK(doc["value"] == "330");
  CHECK(doc["canonical"] == "330");
  CHECK(doc["approximate"] == false);
  CHECK(doc["preorder"] == "+ 180 150");

  Str frac;
  REQUIRE(mwp_evaluate_equation("/ 8 2", &frac.p) == MWP_OK);
  CHECK(json::parse(frac.str())["value"] == "4");

  Str bad;
  CHECK(mwp_evaluate_equation("x = 1 / 0", &bad.p) == MWP_ERR_EVALUATION);
  CHECK(bad.p == nullptr);
  CHECK(std::string(mwp_last_error()).size() > 0);
  CHECK(mwp_evaluate_equation("x = (1 +", &bad.p) == MWP_ERR_FORMAT);
  CHECK(mwp_evaluate_equation(nullptr, &bad.p) == MWP_ERR_INVALID_ARGUMENT);
  CHECK(mwp_evaluate_equation("x = 1", nullptr) == MWP_ERR_INVALID_ARGUMENT);
}

TEST_CASE("dataset, folds and classification handles") {
  mwp_dataset* ds = nullptr;
  REQUIRE(mwp_dataset_load((kFixture + "/problems.json").c_str(), nullptr, &ds) == MWP_OK);
  CHECK(mwp_dataset_size(ds) == 12);

  mwp_folds* folds = nullptr;
  REQUIRE(mwp_folds_split(ds, 4, 7, &folds) == MWP_OK);
  CHECK(mwp_folds_k(folds) == 4);
  size_t sizes[8] = {};
  REQUIRE(mwp_folds_sizes(folds, sizes, 8) == MWP_OK);
  CHECK(sizes[0] + sizes[1] + sizes[2] + sizes[3] == 12);
  CHECK(sizes[0] == 3);

  Str folds_json;
  REQUIRE(mwp_folds_to_json(folds, &folds_json.p) == MWP_OK);
  testutil::TempDir dir;
  testutil::write_file(dir / "folds.json", folds_json.str());
  mwp_folds* reloaded = nullptr;
  REQUIRE(mwp_folds_load((dir / "folds.json").c_str(), &reloaded) == MWP_OK);
  Str again;
  REQUIRE(mwp_folds_to_json(reloaded, &again.p) == MWP_OK);
  CHECK(again.str() == folds_json.str());
  mwp_folds_free(reloaded);
  mwp_folds_free(folds);

  mwp_folds* too_many = nullptr;
  CHECK(mwp_folds_split(ds, 13, 0, &too_many) == MWP_ERR_INVALID_ARGUMENT);
  CHECK(too_many == nullptr);

  mwp_ruleset* rules = nullptr;
  REQUIRE(mwp_ruleset_load((std::string(MWP_DATA_DIR) + "/rules/default.json").c_str(), &rules) == MWP_OK);
  Str routing;
  REQUIRE(mwp_classify_dataset(rules, ds, &routing.p) == MWP_OK);
  std::size_t llm = 0, lines = 0;
  std::istringstream in(routing.str());
  std::string line;
  while (std::getline(in, line)) {
    ++lines;
    if (json::parse(line)["track"] == "LLM") ++llm;
  }
  CHECK(lines == 12);
  CHECK(llm == 4);

  Str one;
  REQUIRE(mwp_classify_text(rules, "Find the pattern and fill in the numbers. 2, 6, 10, __ , 18.", &one.p) == MWP_OK);
  CHECK(json::parse(one.str())["matched_rule"] == "law-finding");

  mwp_ruleset* builtin = nullptr;
  REQUIRE(mwp_ruleset_default(&builtin) == MWP_OK);
  Str a, b;
  REQUIRE(mwp_ruleset_to_json(rules, &a.p) == MWP_OK);
  REQUIRE(mwp_ruleset_to_json(builtin, &b.p) == MWP_OK);
  CHECK(a.str() == b.str());
  mwp_ruleset_free(builtin);
  mwp_ruleset_free(rules);
  mwp_dataset_free(ds);
}

TEST_CASE("load errors map to status codes") {
  mwp_dataset* ds = nullptr;
  CHECK(mwp_dataset_load("/nonexistent/problems.json", nullptr, &ds) == MWP_ERR_IO);
  CHECK(ds == nullptr);
  CHECK(std::string(mwp_last_error()).find("/nonexistent/problems.json") != std::string::npos);
  CHECK(mwp_dataset_load((kFixture + "/problems.json").c_str(), "csv", &ds) == MWP_ERR_INVALID_ARGUMENT);

  testutil::TempDir dir;
  testutil::write_file(dir / "bad.json", "[{");
  CHECK(mwp_dataset_load((dir / "bad.json").c_str(), nullptr, &ds) == MWP_ERR_FORMAT);
  testutil::write_file(dir / "rules.json", R"({"rules": [{"name": "a", "kind": "telepathy", "parameters": {}}]})");
  mwp_ruleset* rules = nullptr;
  CHECK(mwp_ruleset_load((dir / "rules.json").c_str(), &rules) == MWP_ERR_CONFIG);
  CHECK(mwp_dataset_size(nullptr) == 0);
  mwp_dataset_free(nullptr);
  mwp_folds_free(nullptr);
  mwp_ruleset_free(nullptr);
}

TEST_CASE("pipeline run through the C API") {
  testutil::TempDir out;
  mwp_overrides o{};
  const std::string out_dir = out.path().string();
  o.out_dir = out_dir.c_str();
  o.workers = 2;
  mwp_run_summary s{};
  REQUIRE(mwp_pipeline_run((kFixture + "/config.json").c_str(), &o, &s) == MWP_OK);
  CHECK(s.problems == 12);
  CHECK(s.tree_routed == 8);
  CHECK(s.llm_routed == 4);
  CHECK(s.graded == 12);
  CHECK(s.correct == 8);
  CHECK(s.unsolved == 2);

  size_t correct = 0, total = 0;
  Str acc;
  REQUIRE(mwp_evaluate_results((out / "results.jsonl").c_str(), (kFixture + "/problems.json").c_str(), nullptr, 1e-4,
                               &correct, &total, &acc.p) == MWP_OK);
  CHECK(correct == 8);
  CHECK(total == 12);
  CHECK(acc.str() == "66.7");

  CHECK(mwp_pipeline_run("/nonexistent/config.json", nullptr, nullptr) == MWP_ERR_IO);
}

TEST_CASE("vote, sc and report") {
  const std::string m0 = kFixture + "/predictions/M0.jsonl";
  const std::string m9 = kFixture + "/predictions/M9.jsonl";
  const char* paths[] = {m0.c_str(), m9.c_str()};
  Str votes;
  REQUIRE(mwp_vote_stores(paths, 2, R"({"M0": 0.239, "M9": 0.252})", 1e-4, &votes.p) == MWP_OK);
  CHECK(votes.str().find("\"id\":\"P4\"") != std::string::npos);
  Str bad;
  CHECK(mwp_vote_stores(paths, 2, "{not json", 1e-4, &bad.p) == MWP_ERR_FORMAT);
  CHECK(mwp_vote_stores(nullptr, 2, "{}", 1e-4, &bad.p) == MWP_ERR_INVALID_ARGUMENT);

  Str sc;
  REQUIRE(mwp_sc_cache((kFixture + "/cache").c_str(), nullptr, 1e-4, &sc.p) == MWP_OK);
  CHECK(sc.str().find("\"winner\":\"14\"") != std::string::npos);

  Str text, report;
  REQUIRE(mwp_report(R"({"rows": [{"label": "M0", "accuracy": 23.9}, {"label": "M1", "accuracy": 24.8},
      {"label": "M2", "accuracy": 23.9}, {"label": "M3", "accuracy": 23.2}, {"label": "M4", "accuracy": 23.8},
      {"label": "M5", "accuracy": 24.4}, {"label": "M6", "accuracy": 23.4}, {"label": "M7", "accuracy": 24.4},
      {"label": "M8", "accuracy": 23.8}, {"label": "M9", "accuracy": 25.2}]})",
                     &text.p, &report.p) == MWP_OK);
  CHECK(json::parse(report.str())["baseline"]["accuracy"] == 24.1);
  CHECK(text.str().find("24.1") != std::string::npos);
  Str only_text;
  REQUIRE(mwp_report(R"({"rows": [{"label": "A", "accuracy": 50}]})", &only_text.p, nullptr) == MWP_OK);
  Str empty_text;
  CHECK(mwp_report(R"({"rows": []})", &empty_text.p, nullptr) == MWP_ERR_INVALID_ARGUMENT);
}
