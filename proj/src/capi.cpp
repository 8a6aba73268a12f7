#include "mwp/mwp.h"

#include "mwp/backends.hpp"
#include "mwp/classifier.hpp"
#include "mwp/corpus.hpp"
#include "mwp/eqtree.hpp"
#include "mwp/error.hpp"
#include "mwp/harness.hpp"

#include "json.hpp"

#include <cstdlib>
#include <cstring>
#include <new>

struct mwp_dataset {
  mwp::corpus::Dataset value;
};

struct mwp_folds {
  mwp::corpus::FoldAssignment value;
};

struct mwp_ruleset {
  mwp::classifier::RuleSet value;
};

namespace {

using nlohmann::json;

thread_local std::string last_error;

mwp_status status_for(mwp::ErrorCode code) {
  switch (code) {
    case mwp::ErrorCode::InvalidArgument: return MWP_ERR_INVALID_ARGUMENT;
    case mwp::ErrorCode::Io: return MWP_ERR_IO;
    case mwp::ErrorCode::Format: return MWP_ERR_FORMAT;
    case mwp::ErrorCode::Evaluation: return MWP_ERR_EVALUATION;
    case mwp::ErrorCode::Backend: return MWP_ERR_BACKEND;
    case mwp::ErrorCode::Config: return MWP_ERR_CONFIG;
    case mwp::ErrorCode::Internal: return MWP_ERR_INTERNAL;
  }
  return MWP_ERR_INTERNAL;
}

template <class F>
mwp_status guarded(F&& f) {
  last_error.clear();
  try {
    f();
    return MWP_OK;
  } catch (const mwp::Error& e) {
    last_error = e.what();
    return status_for(e.code());
  } catch (const json::exception& e) {
    last_error = e.what();
    return MWP_ERR_FORMAT;
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return MWP_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return MWP_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return MWP_ERR_INTERNAL;
  }
}

void require(const void* p, const char* name) {
  if (!p) throw mwp::Error(mwp::ErrorCode::InvalidArgument, std::string(name) + " must not be null");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

mwp::corpus::DatasetFormat format_or_default(const char* format) {
  return format ? mwp::corpus::parse_dataset_format(format) : mwp::corpus::DatasetFormat::Math23kJson;
}

}  // namespace

extern "C" {

const char* mwp_version(void) { return "1.0.0"; }

const char* mwp_last_error(void) { return last_error.c_str(); }

const char* mwp_status_name(mwp_status status) {
  switch (status) {
    case MWP_OK: return "ok";
    case MWP_ERR_INVALID_ARGUMENT: return "invalid argument";
    case MWP_ERR_IO: return "i/o error";
    case MWP_ERR_FORMAT: return "format error";
    case MWP_ERR_EVALUATION: return "evaluation error";
    case MWP_ERR_BACKEND: return "backend error";
    case MWP_ERR_CONFIG: return "config error";
    case MWP_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void mwp_string_free(char* s) { std::free(s); }

mwp_status mwp_dataset_load(const char* path, const char* format, mwp_dataset** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new mwp_dataset{mwp::corpus::load_dataset(path, format_or_default(format))};
  });
}

size_t mwp_dataset_size(const mwp_dataset* dataset) { return dataset ? dataset->value.size() : 0; }

void mwp_dataset_free(mwp_dataset* dataset) { delete dataset; }

mwp_status mwp_folds_split(const mwp_dataset* dataset, int k, uint64_t seed, mwp_folds** out) {
  return guarded([&] {
    require(dataset, "dataset");
    require(out, "out");
    *out = new mwp_folds{mwp::corpus::split_folds(dataset->value, k, seed)};
  });
}

mwp_status mwp_folds_load(const char* path, mwp_folds** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new mwp_folds{mwp::corpus::FoldAssignment::load(path)};
  });
}

mwp_status mwp_folds_to_json(const mwp_folds* folds, char** out_json) {
  return guarded([&] {
    require(folds, "folds");
    require(out_json, "out_json");
    *out_json = dup_string(folds->value.to_json());
  });
}

int mwp_folds_k(const mwp_folds* folds) { return folds ? folds->value.k : 0; }

mwp_status mwp_folds_sizes(const mwp_folds* folds, size_t* sizes, size_t capacity) {
  return guarded([&] {
    require(folds, "folds");
    require(sizes, "sizes");
    const auto s = folds->value.fold_sizes();
    for (std::size_t i = 0; i < s.size() && i < capacity; ++i) sizes[i] = s[i];
  });
}

void mwp_folds_free(mwp_folds* folds) { delete folds; }

mwp_status mwp_ruleset_default(mwp_ruleset** out) {
  return guarded([&] {
    require(out, "out");
    *out = new mwp_ruleset{mwp::classifier::RuleSet::builtin()};
  });
}

mwp_status mwp_ruleset_load(const char* path, mwp_ruleset** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new mwp_ruleset{mwp::classifier::RuleSet::load(path)};
  });
}

mwp_status mwp_ruleset_to_json(const mwp_ruleset* rules, char** out_json) {
  return guarded([&] {
    require(rules, "rules");
    require(out_json, "out_json");
    *out_json = dup_string(rules->value.to_json());
  });
}

void mwp_ruleset_free(mwp_ruleset* rules) { delete rules; }

mwp_status mwp_classify_text(const mwp_ruleset* rules, const char* text, char** out_json) {
  return guarded([&] {
    require(rules, "rules");
    require(text, "text");
    require(out_json, "out_json");
    const auto tokens = mwp::corpus::tokenize_text(text);
    mwp::harness::ProblemResult r;
    r.route = mwp::classifier::classify_tokens(tokens, rules->value);
    *out_json = dup_string(mwp::harness::routing_json(r));
  });
}

mwp_status mwp_classify_dataset(const mwp_ruleset* rules, const mwp_dataset* dataset, char** out_jsonl) {
  return guarded([&] {
    require(rules, "rules");
    require(dataset, "dataset");
    require(out_jsonl, "out_jsonl");
    std::string out;
    for (const auto& p : dataset->value.problems()) {
      mwp::harness::ProblemResult r;
      r.id = p.id;
      r.route = mwp::classifier::classify(p, rules->value);
      out += mwp::harness::routing_json(r) + "\n";
    }
    *out_jsonl = dup_string(out);
  });
}

mwp_status mwp_evaluate_equation(const char* equation, char** out_json) {
  return guarded([&] {
    require(equation, "equation");
    require(out_json, "out_json");
    const auto tree = mwp::backends::parse_stored_equation(equation);
    const auto answer = mwp::eqtree::evaluate(tree);
    json doc;
    doc["value"] = mwp::to_exact_literal(answer.value);
    doc["canonical"] = answer.canonical;
    doc["approximate"] = answer.approximate;
    doc["preorder"] = mwp::eqtree::to_preorder(tree).to_string();
    *out_json = dup_string(doc.dump());
  });
}

mwp_status mwp_pipeline_run(const char* config_path, const mwp_overrides* overrides, mwp_run_summary* summary) {
  return guarded([&] {
    require(config_path, "config_path");
    auto config = mwp::harness::PipelineConfig::load(config_path);
    if (overrides) {
      mwp::harness::Overrides o;
      if (overrides->dataset) o.dataset = overrides->dataset;
      if (overrides->folds) o.folds = overrides->folds;
      if (overrides->rules) o.rules = overrides->rules;
      if (overrides->out_dir) o.out_dir = overrides->out_dir;
      if (overrides->has_tolerance) o.tolerance = overrides->tolerance;
      if (overrides->workers) o.workers = overrides->workers;
      if (overrides->has_seed) o.seed = overrides->seed;
      mwp::harness::apply_overrides(config, o);
    }
    const auto run = mwp::harness::run_pipeline(config);
    mwp::harness::write_outputs(run, config);
    if (summary) {
      *summary = mwp_run_summary{};
      for (const auto& r : run.results) {
        ++summary->problems;
        ++(r.route.track == mwp::classifier::Track::Tree ? summary->tree_routed : summary->llm_routed);
        if (r.correct) ++summary->graded;
        if (r.correct && *r.correct) ++summary->correct;
        if (!r.winner) ++summary->unsolved;
      }
    }
  });
}

mwp_status mwp_vote_stores(const char* const* prediction_paths, size_t path_count, const char* confidences_json,
                           double tolerance, char** out_jsonl) {
  return guarded([&] {
    require(prediction_paths, "prediction_paths");
    require(confidences_json, "confidences_json");
    require(out_jsonl, "out_jsonl");
    if (path_count == 0) throw mwp::Error(mwp::ErrorCode::InvalidArgument, "no prediction files given");
    std::vector<std::filesystem::path> paths;
    for (std::size_t i = 0; i < path_count; ++i) {
      require(prediction_paths[i], "prediction path");
      paths.emplace_back(prediction_paths[i]);
    }
    const auto store = mwp::backends::PredictionStore::load_all(paths);
    std::map<std::string, double> confidences;
    try {
      confidences = json::parse(confidences_json).get<std::map<std::string, double>>();
    } catch (const json::exception& e) {
      throw mwp::Error(mwp::ErrorCode::Format, std::string("confidences: ") + e.what());
    }
    *out_jsonl = dup_string(mwp::harness::vote_stores(store, confidences, tolerance));
  });
}

mwp_status mwp_sc_cache(const char* cache_dir, const char* marker, double tolerance, char** out_jsonl) {
  return guarded([&] {
    require(cache_dir, "cache_dir");
    require(out_jsonl, "out_jsonl");
    *out_jsonl = dup_string(mwp::harness::sc_from_cache(cache_dir, marker ? marker : "The answer is", tolerance));
  });
}

mwp_status mwp_evaluate_results(const char* results_path, const char* dataset_path, const char* format,
                                double tolerance, size_t* out_correct, size_t* out_total, char** out_accuracy) {
  return guarded([&] {
    require(results_path, "results_path");
    require(dataset_path, "dataset_path");
    const auto gold = mwp::corpus::load_dataset(dataset_path, format_or_default(format));
    const auto grade = mwp::harness::evaluate_results(results_path, gold, tolerance);
    if (out_correct) *out_correct = grade.correct;
    if (out_total) *out_total = grade.total;
    if (out_accuracy) *out_accuracy = dup_string(mwp::harness::format_percent(grade.accuracy()));
  });
}

mwp_status mwp_report(const char* input_json, char** out_text, char** out_json) {
  return guarded([&] {
    require(input_json, "input_json");
    json doc;
    try {
      doc = json::parse(input_json);
    } catch (const json::exception& e) {
      throw mwp::Error(mwp::ErrorCode::Format, std::string("report input: ") + e.what());
    }
    std::vector<std::pair<std::string, double>> rows;
    for (const auto& row : doc.at("rows")) {
      rows.emplace_back(row.at("label").get<std::string>(), row.at("accuracy").get<double>());
    }
    std::optional<double> ensemble;
    if (doc.contains("ensemble") && !doc["ensemble"].is_null()) ensemble = doc["ensemble"].get<double>();
    const auto table = mwp::harness::aggregate_report(rows, ensemble);
    std::string text = table.to_text();
    std::string js = table.to_json();
    if (out_text) *out_text = dup_string(text);
    if (out_json) *out_json = dup_string(js);
  });
}

mwp_status mwp_cache_import(const char* config_path, const char* generations_path, size_t* out_written) {
  return guarded([&] {
    require(config_path, "config_path");
    require(generations_path, "generations_path");
    const auto config = mwp::harness::PipelineConfig::load(config_path);
    const auto n = mwp::harness::import_generations(config, generations_path);
    if (out_written) *out_written = n;
  });
}

}  // extern "C"
