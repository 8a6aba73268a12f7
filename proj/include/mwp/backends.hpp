#pragma once

#include "mwp/corpus.hpp"
#include "mwp/eqtree.hpp"

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mwp::backends {

struct SolverOutput {
  enum class Kind { Equation, Generation };

  Kind kind = Kind::Equation;
  std::string model_id;
  std::string problem_id;
  std::string text;  // equation as stored, or the raw generation
  std::optional<eqtree::EquationTree> tree;  // Equation kind; empty when the model abstained

  bool abstained() const noexcept { return kind == Kind::Equation && !tree; }
};

// Surface form ("x = 8 / 2") or pre-order ("/ 8 2", "[/ 8 2]").
eqtree::EquationTree parse_stored_equation(std::string_view text);

// Replayed per-model equations, read from JSONL lines
// {"problem_id", "model_id", "equation", "confidence_context"?}. A null or
// empty equation records an abstention.
class PredictionStore {
 public:
  static PredictionStore parse(std::string_view jsonl, const std::string& provenance);
  static PredictionStore load(const std::filesystem::path& path);
  static PredictionStore load_all(const std::vector<std::filesystem::path>& paths);

  // Throws on a duplicate (problem_id, model_id) key.
  void merge(PredictionStore other);

  const SolverOutput* find(std::string_view problem_id, std::string_view model_id) const;
  std::vector<std::string> model_ids() const;
  std::vector<std::string> problem_ids() const;
  std::string provenance() const;
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::map<std::pair<std::string, std::string>, SolverOutput, std::less<>> entries_;
  std::vector<std::string> sources_;
};

const SolverOutput& replay_solve(const PredictionStore& store, std::string_view problem_id,
                                 std::string_view model_id);

struct Exemplar {
  std::string question;
  std::string reasoning;
  std::string answer_line;  // contains answer_marker followed by a number
};

struct PromptSpec {
  std::string instruction_header;
  std::string answer_marker = "The answer is";
  std::vector<Exemplar> exemplars;
  std::size_t expected_exemplars = 8;
  bool allow_count_override = false;

  void validate() const;
  static PromptSpec from_json_text(std::string_view text);
  static PromptSpec load(const std::filesystem::path& path);
};

// Header, the exemplars as "Q:/A:" blocks, then the target question with an
// open "A:" slot.
std::string build_prompt(const PromptSpec& spec, const corpus::Problem& problem);

// JSON field names used to talk to the generation endpoint. text_field may be
// a dotted path ("message.content"); empty sample_index_field / model_field
// omit those fields.
struct EndpointAdapter {
  std::string prompt_field = "prompt";
  std::string temperature_field = "temperature";
  std::string max_tokens_field = "max_tokens";
  std::string n_field = "n";
  std::string sample_index_field = "sample_index";
  std::string model_field = "model";
  std::string choices_field = "choices";
  std::string text_field = "text";
};

enum class CacheMode {
  Off,     // always call the endpoint
  Replay,  // cache only; a miss is an error
  Record,  // use the cache, call the endpoint on a miss and store the result
};

CacheMode parse_cache_mode(std::string_view name);
const char* to_string(CacheMode mode) noexcept;

struct LlmBackendConfig {
  std::string endpoint = "http://127.0.0.1:8000/v1/completions";
  std::string model;
  double temperature = 0.7;
  std::size_t num_samples = 20;
  std::size_t max_tokens = 512;
  std::chrono::milliseconds timeout{60000};
  std::size_t max_attempts = 3;
  std::chrono::milliseconds backoff{500};
  std::size_t parallelism = 4;
  std::filesystem::path cache_dir;
  CacheMode cache_mode = CacheMode::Record;
  EndpointAdapter adapter;

  void validate() const;
  // Relative cache_dir resolves against base_dir.
  static LlmBackendConfig from_json_text(std::string_view text, const std::filesystem::path& base_dir = {});
};

// Canonical body identifying a whole n-sample request; its SHA-256 is the
// cache key.
std::string logical_request_body(const LlmBackendConfig& config, const std::string& prompt);
std::string sha256_hex(std::string_view data);

// Content-addressed store: <dir>/<sha256>.json holding
// {"request", "responses", "meta"}. Writes go through a temp file and rename.
class ReplayCache {
 public:
  explicit ReplayCache(std::filesystem::path dir);

  std::optional<std::vector<std::string>> lookup(const std::string& key) const;
  void store(const std::string& key, const std::string& request_body, const std::vector<std::string>& responses,
             const std::string& problem_id) const;
  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  std::filesystem::path dir_;
};

// Exactly num_samples texts in sample order. A sample that still fails after
// the retries becomes an empty string. Honors MWP_LLM_ENDPOINT.
std::vector<std::string> sample_generations(const LlmBackendConfig& config, const std::string& prompt,
                                            const std::string& problem_id = {});

struct ExtractionConfig {
  bool use_marker = true;
  bool fallback_last_number = true;
};

// First number after the last marker occurrence, else the last number in the
// text.
std::optional<AnswerValue> extract_answer(std::string_view text, std::string_view marker,
                                          const ExtractionConfig& config = {});

}  // namespace mwp::backends
