#include "doctest.h"

#include "tempdir.hpp"

#include "json.hpp"

#include <cstdio>
#include <string>
#include <sys/wait.h>

using nlohmann::json;

namespace {

const std::string kFixture = std::string(MWP_DATA_DIR) + "/fixture";

struct Outcome {
  int code = -1;
  std::string output;
};

Outcome run(const std::string& args) {
  const std::string cmd = std::string("\"") + MWP_CLI + "\" " + args + " 2>&1";
  Outcome o;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) o.output.append(buf, n);
  const int status = pclose(pipe);
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

}  // namespace

TEST_CASE("evaluate prints the accuracy of a solved run") {
  testutil::TempDir dir;
  const auto all = json::parse(testutil::read_file(kFixture + "/problems.json"));
  json one = json::array({all[0]});
  REQUIRE(one[0]["id"] == "P1");
  testutil::write_file(dir / "p1.json", one.dump());

  const auto solved = run("solve --config " + kFixture + "/config.json --dataset " + (dir / "p1.json").string() +
                          " --out-dir " + (dir / "out").string());
  REQUIRE(solved.code == 0);
  CHECK(solved.output == "problems 1 tree 1 llm 0 unsolved 0 correct 1/1\n");

  const auto graded = run("evaluate --results " + (dir / "out/results.jsonl").string() + " --dataset " +
                          (dir / "p1.json").string());
  CHECK(graded.code == 0);
  CHECK(graded.output == "100.0\n");
}

TEST_CASE("solve on the full fixture") {
  testutil::TempDir dir;
  const auto solved = run("solve --config " + kFixture + "/config.json --out-dir " + dir.path().string());
  REQUIRE(solved.code == 0);
  CHECK(solved.output == "problems 12 tree 8 llm 4 unsolved 2 correct 8/12\n");
  const auto graded = run("evaluate --results " + (dir / "results.jsonl").string() + " --dataset " + kFixture +
                          "/problems.json");
  CHECK(graded.output == "66.7\n");
}

TEST_CASE("report computes the baseline mean") {
  testutil::TempDir dir;
  json input = {{"rows", json::array()}};
  const double acc[] = {23.9, 24.8, 23.9, 23.2, 23.8, 24.4, 23.4, 24.4, 23.8, 25.2};
  for (int i = 0; i < 10; ++i) input["rows"].push_back({{"label", "M" + std::to_string(i)}, {"accuracy", acc[i]}});
  testutil::write_file(dir / "table.json", input.dump());
  const auto r = run("report --input " + (dir / "table.json").string());
  CHECK(r.code == 0);
  CHECK(r.output.find("Baseline") != std::string::npos);
  CHECK(r.output.find("24.1") != std::string::npos);

  const auto files = run("report --input " + (dir / "table.json").string() + " --out-dir " + dir.path().string());
  CHECK(files.code == 0);
  CHECK(json::parse(testutil::read_file(dir / "report.json"))["baseline"]["accuracy"] == 24.1);
}

TEST_CASE("split-folds is reproducible") {
  const std::string args = "split-folds --dataset " + kFixture + "/problems.json --k 4 --seed 7";
  const auto a = run(args);
  const auto b = run(args);
  REQUIRE(a.code == 0);
  CHECK(a.output == b.output);
  const auto doc = json::parse(a.output);
  CHECK(doc["k"] == 4);
  CHECK(doc["assignment"].size() == 12);
  CHECK(run("split-folds --dataset " + kFixture + "/problems.json --k 13").code == 3);
}

TEST_CASE("classify, vote and sc subcommands") {
  const auto routing = run("classify --dataset " + kFixture + "/problems.json --rules " + MWP_DATA_DIR +
                           "/rules/default.json");
  REQUIRE(routing.code == 0);
  CHECK(routing.output.find("\"matched_rule\":\"law-finding\"") != std::string::npos);

  testutil::TempDir dir;
  testutil::write_file(dir / "conf.json", R"({"M0": 0.239, "M9": 0.252})");
  const auto votes = run("vote --predictions " + kFixture + "/predictions/M0.jsonl " + kFixture +
                         "/predictions/M9.jsonl --confidences " + (dir / "conf.json").string());
  CHECK(votes.code == 0);
  CHECK(votes.output.find("\"decided_by\":\"confidence-sum\"") != std::string::npos);

  const auto sc = run("sc --cache-dir " + kFixture + "/cache");
  CHECK(sc.code == 0);
  CHECK(sc.output.find("\"winner\":\"35\"") != std::string::npos);
}

TEST_CASE("exit codes") {
  CHECK(run("frobnicate").code == 2);
  CHECK(run("evaluate --results a.jsonl").code == 2);
  CHECK(run("split-folds --dataset x.json --bogus").code == 2);
  CHECK(run("").code == 2);
  CHECK(run("evaluate --results /nonexistent/r.jsonl --dataset /nonexistent/p.json").code == 4);
  CHECK(run("solve --config /nonexistent/config.json").code == 4);

  testutil::TempDir dir;
  testutil::write_file(dir / "bad.json", "[{");
  CHECK(run("classify --dataset " + (dir / "bad.json").string()).code == 5);

  const auto help = run("--help");
  CHECK(help.code == 0);
  for (const char* needle : {"Exit codes", "split-folds", "cache-import", " 2 ", " 4 "}) {
    CAPTURE(needle);
    CHECK(help.output.find(needle) != std::string::npos);
  }
}
