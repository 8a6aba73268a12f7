#pragma once

#include "mwp/backends.hpp"
#include "mwp/classifier.hpp"
#include "mwp/corpus.hpp"
#include "mwp/ensemble.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mwp::harness {

struct ModelSpec {
  std::string id;
  std::vector<std::filesystem::path> predictions;
  std::optional<int> held_out;  // defaults to k - 1 - (model position)
};

struct FoldSpec {
  int k = 10;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> path;  // takes precedence over k/seed
};

struct PipelineConfig {
  std::filesystem::path dataset;
  corpus::DatasetFormat dataset_format = corpus::DatasetFormat::Math23kJson;
  std::optional<std::filesystem::path> rules;  // built-in rule set when absent
  FoldSpec folds;
  std::vector<ModelSpec> models;
  std::optional<std::map<std::string, double>> confidences;
  bool confidences_from_validation = false;
  std::optional<std::filesystem::path> validation_dataset;  // defaults to dataset
  std::optional<backends::LlmBackendConfig> llm;
  std::optional<std::filesystem::path> prompt;
  double tolerance = kDefaultTolerance;
  NormalizationConfig normalization;
  std::filesystem::path out_dir = "out";
  std::size_t workers = 1;

  // Relative paths resolve against base_dir.
  static PipelineConfig from_json_text(std::string_view text, const std::filesystem::path& base_dir = {});
  static PipelineConfig load(const std::filesystem::path& path);

  // Exactly one confidence source; every referenced input exists.
  void validate() const;
  std::string to_json() const;
};

struct Overrides {
  std::optional<std::filesystem::path> dataset;
  std::optional<std::filesystem::path> folds;
  std::optional<std::filesystem::path> rules;
  std::optional<std::filesystem::path> out_dir;
  std::optional<double> tolerance;
  std::optional<std::size_t> workers;
  std::optional<std::uint64_t> seed;
};

void apply_overrides(PipelineConfig& config, const Overrides& overrides);

struct ModelAnswer {
  std::string model_id;
  std::optional<std::string> equation;
  std::optional<AnswerValue> answer;
  std::string error;  // why the model abstained, if it did
};

struct ProblemResult {
  std::string id;
  classifier::Route route;
  std::vector<ModelAnswer> model_answers;                // TREE route
  std::vector<std::optional<AnswerValue>> sample_answers;  // LLM route
  std::optional<ensemble::VotingResult> vote;
  std::optional<ensemble::ScResult> sc;
  std::optional<AnswerValue> winner;
  std::optional<AnswerValue> gold;
  std::optional<bool> correct;
  std::vector<std::string> diagnostics;
};

struct PipelineRun {
  std::vector<ProblemResult> results;  // dataset order
  std::vector<std::string> model_ids;
  std::map<std::string, double> confidences;
  std::optional<corpus::FoldAssignment> folds;
  double tolerance = kDefaultTolerance;
};

PipelineRun run_pipeline(const PipelineConfig& config);

// results.jsonl, votes.jsonl, sc.jsonl, routing.jsonl, report.txt,
// report.json and run_config.json under config.out_dir.
void write_outputs(const PipelineRun& run, const PipelineConfig& config);

std::string result_json(const ProblemResult& result);
std::string routing_json(const ProblemResult& result);
std::string vote_trace_json(const std::string& id, const std::vector<ensemble::Vote>& votes,
                            const ensemble::VotingResult& result);
std::string sc_trace_json(const std::string& id, const ensemble::ScResult& result);

// Percentage of results whose `correct` flag is set; every result needs gold.
double compute_accuracy(const std::vector<ProblemResult>& results);

struct ReportRow {
  std::string label;
  std::string accuracy;  // one decimal, e.g. "24.1"
  double raw = 0.0;
};

struct ReportTable {
  std::vector<ReportRow> rows;
  ReportRow baseline;
  std::optional<ReportRow> ensemble;
  std::vector<ReportRow> extra;  // further summary lines (track and overall accuracy)

  std::string to_text() const;
  std::string to_json() const;
};

// Appends the baseline mean (rounded half away from zero to one decimal) and
// the ensemble row when given.
ReportTable aggregate_report(const std::vector<std::pair<std::string, double>>& per_model,
                             std::optional<double> ensemble_accuracy = std::nullopt);
ReportTable build_run_report(const PipelineRun& run);

std::string format_percent(double value);  // one decimal, half away from zero

// Vote every problem present in the store, one JSONL trace per problem.
std::string vote_stores(const backends::PredictionStore& store, const std::map<std::string, double>& confidences,
                        double tolerance, const std::vector<std::string>& problem_ids = {});

// Self-consistency over every entry of a replay cache directory.
std::string sc_from_cache(const std::filesystem::path& cache_dir, const std::string& marker, double tolerance);

struct Grade {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const { return total ? 100.0 * static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
};

// Regrades results.jsonl against the dataset's gold answers.
Grade evaluate_results(const std::filesystem::path& results_path, const corpus::Dataset& gold, double tolerance);

// Seeds the replay cache from {"id", "generations": [...]} lines produced
// elsewhere. Returns the number of entries written.
std::size_t import_generations(const PipelineConfig& config, const std::filesystem::path& generations_path);

}  // namespace mwp::harness
