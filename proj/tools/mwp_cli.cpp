#include "mwp/mwp.h"

#include "CLI11.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr int kExitUsage = 2;

const char* kExitCodes =
    "Exit codes:\n"
    "  0  success\n"
    "  2  usage error (unknown subcommand or flag, missing argument)\n"
    "  3  invalid argument\n"
    "  4  i/o error\n"
    "  5  malformed input file\n"
    "  6  evaluation error\n"
    "  7  backend error (missing prediction or cache entry, unreachable endpoint)\n"
    "  8  configuration error\n"
    "  9  internal error\n";

struct Failure {
  int code;
};

void check(mwp_status status) {
  if (status != MWP_OK) {
    std::cerr << "mwp: " << mwp_status_name(status) << ": " << mwp_last_error() << "\n";
    throw Failure{static_cast<int>(status)};
  }
}

struct CString {
  char* p = nullptr;
  ~CString() { mwp_string_free(p); }
  std::string str() const { return p ? std::string(p) : std::string(); }
};

struct DatasetHandle {
  mwp_dataset* p = nullptr;
  ~DatasetHandle() { mwp_dataset_free(p); }
};

struct RulesHandle {
  mwp_ruleset* p = nullptr;
  ~RulesHandle() { mwp_ruleset_free(p); }
};

struct FoldsHandle {
  mwp_folds* p = nullptr;
  ~FoldsHandle() { mwp_folds_free(p); }
};

void emit(const std::string& content, const std::string& out_path) {
  if (out_path.empty() || out_path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << content)) {
    std::cerr << "mwp: i/o error: cannot write '" << out_path << "'\n";
    throw Failure{MWP_ERR_IO};
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::cerr << "mwp: i/o error: cannot read '" << path << "'\n";
    throw Failure{MWP_ERR_IO};
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* opt(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ensemble math word problem solver"};
  app.footer(kExitCodes);
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(mwp_version()));

  std::string dataset, format, out, rules, folds, config, out_dir, results, cache_dir, confidences, input,
      generations, marker = "The answer is";
  std::vector<std::string> predictions;
  int k = 10;
  std::uint64_t seed = 0;
  double tolerance = 1e-4;
  std::size_t workers = 0;

  auto* split = app.add_subcommand("split-folds", "Assign dataset problems to k folds");
  split->add_option("--dataset", dataset, "Dataset file")->required();
  split->add_option("--format", format, "math23k-json or math23k-jsonl");
  split->add_option("--k", k, "Number of folds")->capture_default_str();
  split->add_option("--seed", seed, "Shuffle seed")->capture_default_str();
  split->add_option("--out", out, "Fold file (stdout when omitted)");

  auto* classify = app.add_subcommand("classify", "Route each problem to the TREE or LLM track");
  classify->add_option("--dataset", dataset, "Dataset file")->required();
  classify->add_option("--format", format, "math23k-json or math23k-jsonl");
  classify->add_option("--rules", rules, "Rule set (built-in rules when omitted)");
  classify->add_option("--out", out, "Routing log (stdout when omitted)");

  auto* solve = app.add_subcommand("solve", "Run the full pipeline from a config file");
  solve->add_option("--config", config, "Pipeline config")->required();
  solve->add_option("--dataset", dataset, "Override the dataset path");
  solve->add_option("--folds", folds, "Override with a fold file");
  solve->add_option("--rules", rules, "Override the rule set");
  solve->add_option("--out-dir", out_dir, "Override the output directory");
  auto* solve_tol = solve->add_option("--tolerance", tolerance, "Override the answer tolerance");
  solve->add_option("--workers", workers, "Override the worker count");
  auto* solve_seed = solve->add_option("--seed", seed, "Override the fold seed");

  auto* vote = app.add_subcommand("vote", "Plurality vote over prediction stores");
  vote->add_option("--predictions", predictions, "Prediction JSONL files")->required();
  vote->add_option("--confidences", confidences, "JSON object of model confidences")->required();
  vote->add_option("--tolerance", tolerance, "Answer tolerance")->capture_default_str();
  vote->add_option("--out", out, "Voting traces (stdout when omitted)");

  auto* sc = app.add_subcommand("sc", "Self-consistency over a generation cache");
  sc->add_option("--cache-dir", cache_dir, "Cache directory")->required();
  sc->add_option("--marker", marker, "Answer marker")->capture_default_str();
  sc->add_option("--tolerance", tolerance, "Answer tolerance")->capture_default_str();
  sc->add_option("--out", out, "Tallies (stdout when omitted)");

  auto* evaluate = app.add_subcommand("evaluate", "Grade results against gold answers");
  evaluate->add_option("--results", results, "results.jsonl")->required();
  evaluate->add_option("--dataset", dataset, "Dataset with gold answers")->required();
  evaluate->add_option("--format", format, "math23k-json or math23k-jsonl");
  evaluate->add_option("--tolerance", tolerance, "Answer tolerance")->capture_default_str();

  auto* report = app.add_subcommand("report", "Build an accuracy table with the baseline mean");
  report->add_option("--input", input, "JSON {\"rows\": [{\"label\", \"accuracy\"}], \"ensemble\"}")->required();
  report->add_option("--out-dir", out_dir, "Write report.txt and report.json here");

  auto* import = app.add_subcommand("cache-import", "Seed the replay cache from a generations file");
  import->add_option("--config", config, "Pipeline config")->required();
  import->add_option("--generations", generations, "JSONL of {\"id\", \"generations\"}")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*split) {
      DatasetHandle ds;
      check(mwp_dataset_load(dataset.c_str(), opt(format), &ds.p));
      FoldsHandle f;
      check(mwp_folds_split(ds.p, k, seed, &f.p));
      CString js;
      check(mwp_folds_to_json(f.p, &js.p));
      emit(js.str(), out);
    } else if (*classify) {
      DatasetHandle ds;
      check(mwp_dataset_load(dataset.c_str(), opt(format), &ds.p));
      RulesHandle rs;
      check(rules.empty() ? mwp_ruleset_default(&rs.p) : mwp_ruleset_load(rules.c_str(), &rs.p));
      CString log;
      check(mwp_classify_dataset(rs.p, ds.p, &log.p));
      emit(log.str(), out);
    } else if (*solve) {
      mwp_overrides o{};
      o.dataset = opt(dataset);
      o.folds = opt(folds);
      o.rules = opt(rules);
      o.out_dir = opt(out_dir);
      o.has_tolerance = solve_tol->count() > 0;
      o.tolerance = tolerance;
      o.workers = workers;
      o.has_seed = solve_seed->count() > 0;
      o.seed = seed;
      mwp_run_summary s{};
      check(mwp_pipeline_run(config.c_str(), &o, &s));
      std::cout << "problems " << s.problems << " tree " << s.tree_routed << " llm " << s.llm_routed
                << " unsolved " << s.unsolved;
      if (s.graded) std::cout << " correct " << s.correct << "/" << s.graded;
      std::cout << "\n";
    } else if (*vote) {
      std::vector<const char*> paths;
      for (const auto& p : predictions) paths.push_back(p.c_str());
      const std::string conf = read_file(confidences);
      CString traces;
      check(mwp_vote_stores(paths.data(), paths.size(), conf.c_str(), tolerance, &traces.p));
      emit(traces.str(), out);
    } else if (*sc) {
      CString tallies;
      check(mwp_sc_cache(cache_dir.c_str(), marker.c_str(), tolerance, &tallies.p));
      emit(tallies.str(), out);
    } else if (*evaluate) {
      CString acc;
      check(mwp_evaluate_results(results.c_str(), dataset.c_str(), opt(format), tolerance, nullptr, nullptr, &acc.p));
      std::cout << acc.str() << "\n";
    } else if (*report) {
      const std::string in = read_file(input);
      CString text, js;
      check(mwp_report(in.c_str(), &text.p, &js.p));
      if (out_dir.empty()) {
        std::cout << text.str();
      } else {
        emit(text.str(), out_dir + "/report.txt");
        emit(js.str(), out_dir + "/report.json");
      }
    } else if (*import) {
      std::size_t written = 0;
      check(mwp_cache_import(config.c_str(), generations.c_str(), &written));
      std::cout << "imported " << written << " cache entries\n";
    }
  } catch (const Failure& f) {
    return f.code;
  }
  return 0;
}
