#include "mwp/harness.hpp"

#include "mwp/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

namespace mwp::harness {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

std::string read_text(const fs::path& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, std::string("cannot read ") + what + " '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json answer_json(const std::optional<AnswerValue>& a) {
  return a ? json(to_exact_literal(a->value)) : json(nullptr);
}

}  // namespace

PipelineConfig PipelineConfig::from_json_text(std::string_view text, const fs::path& base_dir) {
  PipelineConfig c;
  try {
    json doc = json::parse(text);
    const json& ds = doc.at("dataset");
    if (ds.is_string()) {
      c.dataset = resolve(base_dir, ds.get<std::string>());
    } else {
      c.dataset = resolve(base_dir, ds.at("path").get<std::string>());
      c.dataset_format = corpus::parse_dataset_format(ds.value("format", std::string("math23k-json")));
    }
    if (doc.contains("rules") && !doc["rules"].is_null()) c.rules = resolve(base_dir, doc["rules"].get<std::string>());
    if (doc.contains("folds")) {
      const json& f = doc["folds"];
      if (f.is_string()) {
        c.folds.path = resolve(base_dir, f.get<std::string>());
      } else {
        c.folds.k = f.value("k", c.folds.k);
        c.folds.seed = f.value("seed", c.folds.seed);
        if (f.contains("path")) c.folds.path = resolve(base_dir, f["path"].get<std::string>());
      }
    }
    for (const auto& m : doc.value("models", json::array())) {
      ModelSpec spec;
      spec.id = m.at("id").get<std::string>();
      const json& preds = m.at("predictions");
      if (preds.is_string()) {
        spec.predictions.push_back(resolve(base_dir, preds.get<std::string>()));
      } else {
        for (const auto& p : preds) spec.predictions.push_back(resolve(base_dir, p.get<std::string>()));
      }
      if (m.contains("held_out")) spec.held_out = m["held_out"].get<int>();
      c.models.push_back(std::move(spec));
    }
    if (doc.contains("confidences")) {
      const json& conf = doc["confidences"];
      if (conf.is_string()) {
        if (conf.get<std::string>() != "validation") {
          throw Error(ErrorCode::Config, "confidences must be an object or \"validation\"");
        }
        c.confidences_from_validation = true;
      } else {
        c.confidences = conf.get<std::map<std::string, double>>();
      }
    }
    if (doc.contains("validation_dataset")) {
      c.validation_dataset = resolve(base_dir, doc["validation_dataset"].get<std::string>());
    }
    if (doc.contains("llm") && !doc["llm"].is_null()) {
      const json& llm = doc["llm"];
      c.llm = backends::LlmBackendConfig::from_json_text(llm.dump(), base_dir);
      if (llm.contains("prompt")) c.prompt = resolve(base_dir, llm["prompt"].get<std::string>());
    }
    c.tolerance = doc.value("tolerance", c.tolerance);
    if (doc.contains("normalization")) {
      const json& n = doc["normalization"];
      c.normalization.decimal_places = n.value("decimal_places", c.normalization.decimal_places);
      c.normalization.strip_trailing_zeros = n.value("strip_trailing_zeros", c.normalization.strip_trailing_zeros);
      c.normalization.rounding = parse_rounding_mode(n.value("rounding", std::string("half-away-from-zero")));
    }
    c.out_dir = resolve(base_dir, doc.value("out_dir", std::string("out")));
    c.workers = doc.value("workers", c.workers);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, std::string("malformed pipeline config: ") + e.what());
  }
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  return from_json_text(read_text(path, "config"), path.parent_path());
}

void PipelineConfig::validate() const {
  auto must_exist = [](const fs::path& p, const char* what) {
    if (!fs::exists(p)) throw Error(ErrorCode::Config, std::string(what) + " '" + p.string() + "' does not exist");
  };
  must_exist(dataset, "dataset");
  if (rules) must_exist(*rules, "rule set");
  if (folds.path) must_exist(*folds.path, "fold assignment");
  if (validation_dataset) must_exist(*validation_dataset, "validation dataset");
  if (prompt) must_exist(*prompt, "prompt spec");
  if (models.empty()) throw Error(ErrorCode::Config, "no models configured");
  for (const auto& m : models) {
    for (const auto& p : m.predictions) must_exist(p, "prediction file");
  }
  if (confidences.has_value() == confidences_from_validation) {
    throw Error(ErrorCode::Config, "configure exactly one confidence source (explicit values or \"validation\")");
  }
  if (confidences) {
    for (const auto& m : models) {
      auto it = confidences->find(m.id);
      if (it == confidences->end()) throw Error(ErrorCode::Config, "no confidence for model '" + m.id + "'");
      if (!(it->second >= 0 && it->second <= 1)) {
        throw Error(ErrorCode::Config, "confidence of '" + m.id + "' outside [0, 1]");
      }
    }
  }
  if (confidences_from_validation && !folds.path && folds.k < 2) throw Error(ErrorCode::Config, "folds.k must be >= 2");
  if (!(tolerance >= 0)) throw Error(ErrorCode::Config, "tolerance must be >= 0");
  if (workers < 1) throw Error(ErrorCode::Config, "workers must be >= 1");
  normalization.validate();
  if (llm) {
    llm->validate();
    if (!prompt) throw Error(ErrorCode::Config, "llm section needs a prompt spec path");
    if (llm->cache_mode == backends::CacheMode::Replay) must_exist(llm->cache_dir, "replay cache directory");
  }
}

std::string PipelineConfig::to_json() const {
  json doc;
  doc["dataset"] = {{"path", dataset.string()}, {"format", corpus::to_string(dataset_format)}};
  doc["rules"] = rules ? json(rules->string()) : json("<builtin>");
  json f = {{"k", folds.k}, {"seed", folds.seed}, {"generator", std::string(corpus::kFoldGenerator)}};
  if (folds.path) f["path"] = folds.path->string();
  doc["folds"] = f;
  json models_json = json::array();
  for (std::size_t i = 0; i < models.size(); ++i) {
    json m = {{"id", models[i].id}};
    json preds = json::array();
    for (const auto& p : models[i].predictions) preds.push_back(p.string());
    m["predictions"] = preds;
    if (models[i].held_out) m["held_out"] = *models[i].held_out;
    models_json.push_back(m);
  }
  doc["models"] = models_json;
  doc["confidences"] = confidences ? json(*confidences) : json("validation");
  if (validation_dataset) doc["validation_dataset"] = validation_dataset->string();
  if (llm) {
    doc["llm"] = {{"endpoint", llm->endpoint},
                  {"model", llm->model},
                  {"temperature", llm->temperature},
                  {"num_samples", llm->num_samples},
                  {"max_tokens", llm->max_tokens},
                  {"timeout_ms", llm->timeout.count()},
                  {"max_attempts", llm->max_attempts},
                  {"backoff_ms", llm->backoff.count()},
                  {"parallelism", llm->parallelism},
                  {"cache_dir", llm->cache_dir.string()},
                  {"cache_mode", backends::to_string(llm->cache_mode)},
                  {"prompt", prompt ? prompt->string() : ""}};
  }
  doc["tolerance"] = tolerance;
  doc["normalization"] = {{"decimal_places", normalization.decimal_places},
                          {"strip_trailing_zeros", normalization.strip_trailing_zeros},
                          {"rounding", mwp::to_string(normalization.rounding)}};
  doc["out_dir"] = out_dir.string();
  doc["workers"] = workers;
  return doc.dump(2) + "\n";
}

void apply_overrides(PipelineConfig& c, const Overrides& o) {
  if (o.dataset) c.dataset = *o.dataset;
  if (o.folds) c.folds.path = *o.folds;
  if (o.rules) c.rules = *o.rules;
  if (o.out_dir) c.out_dir = *o.out_dir;
  if (o.tolerance) c.tolerance = *o.tolerance;
  if (o.workers) c.workers = *o.workers;
  if (o.seed) c.folds.seed = *o.seed;
}

namespace {

// One model's answer for one problem; evaluation failures and missing
// entries become abstentions with the reason recorded.
ModelAnswer model_answer(const backends::PredictionStore& store, const std::string& problem_id,
                         const std::string& model_id, const eqtree::EvalOptions& eval) {
  ModelAnswer ma;
  ma.model_id = model_id;
  const auto* found = store.find(problem_id, model_id);
  if (!found) {
    ma.error = "no prediction";
    return ma;
  }
  try {
    const auto& out = *found;
    if (out.abstained()) {
      ma.error = "model abstained";
      return ma;
    }
    ma.equation = out.text;
    ma.answer = eqtree::evaluate(*out.tree, eval);
  } catch (const Error& e) {
    ma.error = e.what();
  }
  return ma;
}

eqtree::EvalOptions eval_options(const NormalizationConfig& n) {
  eqtree::EvalOptions o;
  o.normalization = n;
  return o;
}

std::vector<ensemble::Vote> to_votes(const std::vector<ModelAnswer>& answers,
                                     const std::map<std::string, double>& confidences) {
  std::vector<ensemble::Vote> votes;
  for (const auto& a : answers) {
    auto it = confidences.find(a.model_id);
    votes.push_back({a.model_id, a.answer, it == confidences.end() ? 0.0 : it->second});
  }
  return votes;
}

struct Shared {
  const PipelineConfig& config;
  const classifier::RuleSet& rules;
  const backends::PredictionStore& store;
  const std::vector<std::string>& model_ids;
  const std::map<std::string, double>& confidences;
  const backends::PromptSpec* prompt;
};

ProblemResult solve_problem(const corpus::Problem& problem, const classifier::Route& route, const Shared& ctx) {
  ProblemResult r;
  r.id = problem.id;
  r.route = route;
  r.gold = problem.gold_answer;
  const auto eval = eval_options(ctx.config.normalization);

  if (route.track == classifier::Track::Tree) {
    std::size_t missing = 0;
    for (const auto& mid : ctx.model_ids) {
      r.model_answers.push_back(model_answer(ctx.store, problem.id, mid, eval));
      const auto& ma = r.model_answers.back();
      if (ma.error == "no prediction") {
        ++missing;
      } else if (!ma.answer && ma.error != "model abstained") {
        r.diagnostics.push_back(mid + ": " + ma.error);
      }
    }
    if (missing == ctx.model_ids.size()) {
      r.diagnostics.push_back("no prediction from any model");
    } else if (missing > 0) {
      for (const auto& ma : r.model_answers) {
        if (ma.error == "no prediction") r.diagnostics.push_back(ma.model_id + ": no prediction");
      }
    }
    auto votes = to_votes(r.model_answers, ctx.confidences);
    r.vote = ensemble::plurality_vote(votes, ctx.config.tolerance);
    r.winner = r.vote->winner;
  } else {
    try {
      const std::string prompt = backends::build_prompt(*ctx.prompt, problem);
      const auto texts = backends::sample_generations(*ctx.config.llm, prompt, problem.id);
      for (const auto& t : texts) {
        auto a = backends::extract_answer(t, ctx.prompt->answer_marker);
        if (a) a = AnswerValue::from(a->value, ctx.config.normalization, a->approximate);
        r.sample_answers.push_back(std::move(a));
      }
      r.sc = ensemble::self_consistency(r.sample_answers, ctx.config.tolerance);
      r.winner = r.sc->winner;
      if (!r.winner) r.diagnostics.push_back("no sample yielded an answer");
    } catch (const Error& e) {
      r.diagnostics.push_back(std::string("llm: ") + e.what());
    }
  }
  if (r.gold) {
    r.correct = r.winner.has_value() && postproc::answers_equal(r.winner->value, r.gold->value, ctx.config.tolerance);
  }
  return r;
}

std::map<std::string, double> confidences_from_validation(const PipelineConfig& config,
                                                          const backends::PredictionStore& store,
                                                          const corpus::FoldAssignment& folds,
                                                          const corpus::Dataset& validation_set) {
  std::map<std::string, double> out;
  const auto eval = eval_options(config.normalization);
  for (std::size_t i = 0; i < config.models.size(); ++i) {
    const auto& model = config.models[i];
    const int held_out = model.held_out.value_or((folds.k - 1 - static_cast<int>(i) % folds.k + folds.k) % folds.k);
    const auto split = corpus::fold_split(folds, validation_set, held_out);
    std::vector<std::pair<std::string, AnswerValue>> gold;
    std::map<std::string, std::optional<AnswerValue>> predictions;
    for (const auto& id : split.validation) {
      const auto* p = validation_set.find(id);
      if (!p->gold_answer) throw Error(ErrorCode::Config, "validation problem '" + id + "' has no gold answer");
      gold.emplace_back(id, *p->gold_answer);
      predictions[id] = model_answer(store, id, model.id, eval).answer;
    }
    if (gold.empty()) throw Error(ErrorCode::Config, "validation fold for model '" + model.id + "' is empty");
    out[model.id] = ensemble::validation_confidence(predictions, gold, config.tolerance).value();
  }
  return out;
}

}  // namespace

PipelineRun run_pipeline(const PipelineConfig& config) {
  config.validate();
  const auto dataset = corpus::load_dataset(config.dataset, config.dataset_format);
  const auto rules = config.rules ? classifier::RuleSet::load(*config.rules) : classifier::RuleSet::builtin();

  PipelineRun run;
  run.tolerance = config.tolerance;
  std::vector<fs::path> prediction_files;
  for (const auto& m : config.models) {
    run.model_ids.push_back(m.id);
    prediction_files.insert(prediction_files.end(), m.predictions.begin(), m.predictions.end());
  }
  const auto store = backends::PredictionStore::load_all(prediction_files);

  if (config.confidences) {
    run.confidences = *config.confidences;
  } else {
    const auto validation_set = config.validation_dataset
                                    ? corpus::load_dataset(*config.validation_dataset, config.dataset_format)
                                    : dataset;
    run.folds = config.folds.path ? corpus::FoldAssignment::load(*config.folds.path)
                                  : corpus::split_folds(validation_set, config.folds.k, config.folds.seed);
    run.confidences = confidences_from_validation(config, store, *run.folds, validation_set);
  }

  std::vector<classifier::Route> routes;
  routes.reserve(dataset.size());
  bool needs_llm = false;
  for (const auto& p : dataset.problems()) {
    routes.push_back(classifier::classify(p, rules));
    needs_llm = needs_llm || routes.back().track == classifier::Track::Llm;
  }
  std::optional<backends::PromptSpec> prompt;
  if (needs_llm) {
    if (!config.llm || !config.prompt) {
      throw Error(ErrorCode::Config, "problems route to the LLM track but no llm backend is configured");
    }
    prompt = backends::PromptSpec::load(*config.prompt);
  }

  const Shared ctx{config, rules, store, run.model_ids, run.confidences, prompt ? &*prompt : nullptr};
  run.results.resize(dataset.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < dataset.size(); i = next++) {
      try {
        run.results[i] = solve_problem(dataset.problems()[i], routes[i], ctx);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min(config.workers, std::max<std::size_t>(dataset.size(), 1)); ++t) {
      pool.emplace_back(worker);
    }
  }
  if (failure) std::rethrow_exception(failure);
  return run;
}

std::string routing_json(const ProblemResult& r) {
  json doc;
  doc["id"] = r.id;
  doc["track"] = classifier::to_string(r.route.track);
  doc["matched_rule"] = r.route.matched_rule ? json(*r.route.matched_rule) : json(nullptr);
  doc["detail"] = r.route.detail;
  return doc.dump();
}

std::string result_json(const ProblemResult& r) {
  json doc;
  doc["id"] = r.id;
  doc["track"] = classifier::to_string(r.route.track);
  doc["matched_rule"] = r.route.matched_rule ? json(*r.route.matched_rule) : json(nullptr);
  if (r.route.track == classifier::Track::Tree) {
    json answers = json::array();
    for (const auto& a : r.model_answers) {
      json m;
      m["model_id"] = a.model_id;
      m["equation"] = a.equation ? json(*a.equation) : json(nullptr);
      m["answer"] = answer_json(a.answer);
      m["error"] = a.error.empty() ? json(nullptr) : json(a.error);
      answers.push_back(std::move(m));
    }
    doc["model_answers"] = answers;
    doc["sample_answers"] = nullptr;
    doc["decided_by"] = r.vote && r.vote->decided_by ? json(ensemble::to_string(*r.vote->decided_by)) : json(nullptr);
  } else {
    json samples = json::array();
    for (const auto& a : r.sample_answers) samples.push_back(answer_json(a));
    doc["model_answers"] = nullptr;
    doc["sample_answers"] = samples;
    doc["decided_by"] = r.sc && r.winner ? json("self-consistency") : json(nullptr);
  }
  doc["winner"] = answer_json(r.winner);
  doc["answer"] = r.winner ? json(r.winner->canonical) : json(nullptr);
  doc["gold"] = answer_json(r.gold);
  doc["correct"] = r.correct ? json(*r.correct) : json(nullptr);
  doc["diagnostics"] = r.diagnostics;
  return doc.dump();
}

std::string vote_trace_json(const std::string& id, const std::vector<ensemble::Vote>& votes,
                            const ensemble::VotingResult& result) {
  json doc;
  doc["id"] = id;
  json vs = json::array();
  for (const auto& v : votes) {
    vs.push_back({{"model_id", v.model_id}, {"answer", answer_json(v.answer)}, {"confidence", v.confidence}});
  }
  doc["votes"] = vs;
  json groups = json::array();
  for (const auto& g : result.groups) {
    groups.push_back({{"answer", to_exact_literal(g.representative.value)},
                      {"members", g.members},
                      {"count", g.count},
                      {"confidence_sum", g.confidence_sum_value()}});
  }
  doc["groups"] = groups;
  doc["winner"] = answer_json(result.winner);
  doc["decided_by"] = result.decided_by ? json(ensemble::to_string(*result.decided_by)) : json(nullptr);
  return doc.dump();
}

std::string sc_trace_json(const std::string& id, const ensemble::ScResult& result) {
  json doc;
  doc["id"] = id;
  doc["total_samples"] = result.total_samples;
  doc["valid_samples"] = result.valid_samples;
  json tally = json::array();
  for (const auto& t : result.tally) {
    tally.push_back({{"answer", to_exact_literal(t.answer.value)},
                     {"count", t.count},
                     {"first_seen_index", t.first_seen_index}});
  }
  doc["tally"] = tally;
  doc["winner"] = answer_json(result.winner);
  return doc.dump();
}

namespace {

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw Error(ErrorCode::Io, "error writing '" + path.string() + "'");
}

}  // namespace

void write_outputs(const PipelineRun& run, const PipelineConfig& config) {
  std::error_code ec;
  fs::create_directories(config.out_dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create '" + config.out_dir.string() + "': " + ec.message());

  std::string results, votes, sc, routing;
  for (const auto& r : run.results) {
    results += result_json(r) + "\n";
    routing += routing_json(r) + "\n";
    if (r.vote) votes += vote_trace_json(r.id, to_votes(r.model_answers, run.confidences), *r.vote) + "\n";
    if (r.sc) sc += sc_trace_json(r.id, *r.sc) + "\n";
  }
  write_file(config.out_dir / "results.jsonl", results);
  write_file(config.out_dir / "votes.jsonl", votes);
  write_file(config.out_dir / "sc.jsonl", sc);
  write_file(config.out_dir / "routing.jsonl", routing);

  json run_config = json::parse(config.to_json());
  run_config["resolved_confidences"] = run.confidences;
  if (run.folds) run_config["fold_sizes"] = run.folds->fold_sizes();
  write_file(config.out_dir / "run_config.json", run_config.dump(2) + "\n");

  const bool graded = !run.results.empty() &&
                      std::all_of(run.results.begin(), run.results.end(), [](const auto& r) { return r.gold.has_value(); });
  if (graded) {
    const auto report = build_run_report(run);
    write_file(config.out_dir / "report.txt", report.to_text());
    write_file(config.out_dir / "report.json", report.to_json());
  } else {
    write_file(config.out_dir / "report.txt", "no gold answers; accuracy not computed\n");
    write_file(config.out_dir / "report.json", "{\"graded\": false}\n");
  }
}

double compute_accuracy(const std::vector<ProblemResult>& results) {
  if (results.empty()) throw Error(ErrorCode::InvalidArgument, "no results to grade");
  std::size_t correct = 0;
  for (const auto& r : results) {
    if (!r.gold || !r.correct) throw Error(ErrorCode::InvalidArgument, "result '" + r.id + "' has no gold answer");
    if (*r.correct) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(results.size());
}

std::string format_percent(double value) {
  NormalizationConfig one_decimal{1, false, RoundingMode::HalfAwayFromZero};
  return postproc::normalize_answer(rational_from_double(value), one_decimal).canonical;
}

ReportTable aggregate_report(const std::vector<std::pair<std::string, double>>& per_model,
                             std::optional<double> ensemble_accuracy) {
  if (per_model.empty()) throw Error(ErrorCode::InvalidArgument, "report needs at least one row");
  ReportTable table;
  Rational sum = 0;
  for (const auto& [label, acc] : per_model) {
    table.rows.push_back({label, format_percent(acc), acc});
    sum += rational_from_double(acc);
  }
  const Rational mean = sum / static_cast<long long>(per_model.size());
  NormalizationConfig one_decimal{1, false, RoundingMode::HalfAwayFromZero};
  table.baseline = {"Baseline", postproc::normalize_answer(mean, one_decimal).canonical, mean.convert_to<double>()};
  if (ensemble_accuracy) table.ensemble = ReportRow{"Ensemble", format_percent(*ensemble_accuracy), *ensemble_accuracy};
  return table;
}

std::string ReportTable::to_text() const {
  std::size_t width = 8;
  for (const auto& r : rows) width = std::max(width, r.label.size());
  for (const auto& r : extra) width = std::max(width, r.label.size());
  auto line = [&](const ReportRow& r) {
    return r.label + std::string(width + 2 - r.label.size(), ' ') + r.accuracy + "\n";
  };
  std::string out = "Model" + std::string(width + 2 - 5, ' ') + "Accuracy(%)\n";
  for (const auto& r : rows) out += line(r);
  out += line(baseline);
  if (ensemble) out += line(*ensemble);
  for (const auto& r : extra) out += line(r);
  return out;
}

std::string ReportTable::to_json() const {
  auto row = [](const ReportRow& r) {
    return json{{"label", r.label}, {"accuracy", std::stod(r.accuracy)}, {"raw", r.raw}};
  };
  json doc;
  doc["rows"] = json::array();
  for (const auto& r : rows) doc["rows"].push_back(row(r));
  doc["baseline"] = row(baseline);
  doc["ensemble"] = ensemble ? row(*ensemble) : json(nullptr);
  doc["extra"] = json::array();
  for (const auto& r : extra) doc["extra"].push_back(row(r));
  return doc.dump(2) + "\n";
}

ReportTable build_run_report(const PipelineRun& run) {
  std::vector<ProblemResult> tree, llm;
  for (const auto& r : run.results) (r.route.track == classifier::Track::Tree ? tree : llm).push_back(r);

  std::vector<std::pair<std::string, double>> per_model;
  for (const auto& mid : run.model_ids) {
    std::size_t correct = 0;
    for (const auto& r : tree) {
      for (const auto& a : r.model_answers) {
        if (a.model_id == mid && a.answer && r.gold && postproc::answers_equal(*a.answer, *r.gold, run.tolerance)) {
          ++correct;
        }
      }
    }
    per_model.emplace_back(mid, tree.empty() ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(tree.size()));
  }
  ReportTable table = aggregate_report(per_model, tree.empty() ? std::nullopt : std::optional<double>(compute_accuracy(tree)));
  auto add = [&](const std::string& label, const std::vector<ProblemResult>& rs) {
    if (rs.empty()) return;
    const double acc = compute_accuracy(rs);
    table.extra.push_back({label + " (n=" + std::to_string(rs.size()) + ")", format_percent(acc), acc});
  };
  add("TREE track", tree);
  add("LLM track", llm);
  add("Overall", run.results);
  return table;
}

std::string vote_stores(const backends::PredictionStore& store, const std::map<std::string, double>& confidences,
                        double tolerance, const std::vector<std::string>& problem_ids) {
  std::vector<std::string> models;
  for (const auto& [id, c] : confidences) models.push_back(id);
  for (const auto& id : store.model_ids()) {
    if (!confidences.count(id)) throw Error(ErrorCode::InvalidArgument, "no confidence for model '" + id + "'");
  }
  const auto ids = problem_ids.empty() ? store.problem_ids() : problem_ids;
  const auto eval = eval_options(NormalizationConfig{});
  std::string out;
  for (const auto& pid : ids) {
    std::vector<ModelAnswer> answers;
    for (const auto& mid : models) answers.push_back(model_answer(store, pid, mid, eval));
    auto votes = to_votes(answers, confidences);
    out += vote_trace_json(pid, votes, ensemble::plurality_vote(votes, tolerance)) + "\n";
  }
  return out;
}

std::string sc_from_cache(const fs::path& cache_dir, const std::string& marker, double tolerance) {
  if (!fs::is_directory(cache_dir)) throw Error(ErrorCode::Io, "no cache directory '" + cache_dir.string() + "'");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(cache_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::string out;
  for (const auto& f : files) {
    json doc;
    try {
      doc = json::parse(read_text(f, "cache entry"));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::Format, "malformed cache entry '" + f.string() + "': " + e.what());
    }
    std::vector<std::optional<AnswerValue>> answers;
    for (const auto& t : doc.at("responses")) answers.push_back(backends::extract_answer(t.get<std::string>(), marker));
    std::string id = f.stem().string();
    if (doc.contains("meta") && doc["meta"].contains("problem_id") && !doc["meta"]["problem_id"].get<std::string>().empty()) {
      id = doc["meta"]["problem_id"].get<std::string>();
    }
    json line = json::parse(sc_trace_json(id, ensemble::self_consistency(answers, tolerance)));
    line["cache_key"] = f.stem().string();
    out += line.dump() + "\n";
  }
  return out;
}

Grade evaluate_results(const fs::path& results_path, const corpus::Dataset& gold, double tolerance) {
  std::istringstream in(read_text(results_path, "results file"));
  std::string line;
  Grade g;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::Format, results_path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    const std::string id = rec.at("id").get<std::string>();
    const auto* p = gold.find(id);
    if (!p || !p->gold_answer) throw Error(ErrorCode::InvalidArgument, "no gold answer for result '" + id + "'");
    ++g.total;
    const auto& w = rec["winner"];
    if (w.is_string() && postproc::answers_equal(postproc::parse_answer_literal(w.get<std::string>()).value,
                                                 p->gold_answer->value, tolerance)) {
      ++g.correct;
    }
  }
  if (g.total == 0) throw Error(ErrorCode::InvalidArgument, "no results to grade in '" + results_path.string() + "'");
  return g;
}

std::size_t import_generations(const PipelineConfig& config, const fs::path& generations_path) {
  if (!config.llm || !config.prompt) throw Error(ErrorCode::Config, "cache import needs an llm section with a prompt");
  if (config.llm->cache_dir.empty()) throw Error(ErrorCode::Config, "cache import needs llm.cache_dir");
  const auto dataset = corpus::load_dataset(config.dataset, config.dataset_format);
  const auto prompt = backends::PromptSpec::load(*config.prompt);
  const backends::ReplayCache cache(config.llm->cache_dir);
  std::istringstream in(read_text(generations_path, "generations file"));
  std::string line;
  std::size_t written = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::Format, std::string("malformed generations line: ") + e.what());
    }
    const std::string id = rec.at("id").get<std::string>();
    const auto* problem = dataset.find(id);
    if (!problem) throw Error(ErrorCode::InvalidArgument, "generations for unknown problem '" + id + "'");
    auto texts = rec.at("generations").get<std::vector<std::string>>();
    if (texts.size() != config.llm->num_samples) {
      throw Error(ErrorCode::InvalidArgument, "problem '" + id + "' has " + std::to_string(texts.size()) +
                                                  " generations, expected " + std::to_string(config.llm->num_samples));
    }
    const std::string body = backends::logical_request_body(*config.llm, backends::build_prompt(prompt, *problem));
    cache.store(backends::sha256_hex(body), body, texts, id);
    ++written;
  }
  return written;
}

}  // namespace mwp::harness
