#include "mwp/backends.hpp"

#include "mwp/error.hpp"

#include "httplib.h"
#include "json.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace mwp::backends {

using nlohmann::json;

namespace {

std::string read_text(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, std::string("cannot read ") + what + " '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

eqtree::EquationTree parse_stored_equation(std::string_view text) {
  std::string_view s = trim(text);
  if (!s.empty() && s.front() == 'x') return eqtree::parse_equation_text(s);
  return eqtree::from_preorder(eqtree::PreorderSeq::parse(s));
}

PredictionStore PredictionStore::parse(std::string_view jsonl, const std::string& provenance) {
  PredictionStore store;
  store.sources_.push_back(provenance);
  std::istringstream in{std::string(jsonl)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto where = [&] { return provenance + ":" + std::to_string(line_no) + ": "; };
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::Format, where() + "malformed JSON: " + e.what());
    }
    SolverOutput out;
    try {
      out.problem_id = rec.at("problem_id").is_string() ? rec["problem_id"].get<std::string>()
                                                        : rec["problem_id"].dump();
      out.model_id = rec.at("model_id").get<std::string>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::Format, where() + e.what());
    }
    auto eq = rec.find("equation");
    if (eq != rec.end() && !eq->is_null()) {
      if (!eq->is_string()) throw Error(ErrorCode::Format, where() + "field 'equation' must be a string");
      out.text = eq->get<std::string>();
      if (!trim(out.text).empty()) {
        try {
          out.tree = parse_stored_equation(out.text);
        } catch (const Error& e) {
          throw Error(ErrorCode::Format, where() + "unparseable equation: " + e.what());
        }
      }
    }
    auto key = std::make_pair(out.problem_id, out.model_id);
    if (!store.entries_.emplace(key, std::move(out)).second) {
      throw Error(ErrorCode::Format, where() + "duplicate entry for (" + key.first + ", " + key.second + ")");
    }
  }
  return store;
}

PredictionStore PredictionStore::load(const std::filesystem::path& path) {
  return parse(read_text(path, "prediction file"), path.string());
}

PredictionStore PredictionStore::load_all(const std::vector<std::filesystem::path>& paths) {
  PredictionStore store;
  for (const auto& p : paths) store.merge(load(p));
  return store;
}

void PredictionStore::merge(PredictionStore other) {
  for (auto& [key, value] : other.entries_) {
    if (entries_.count(key)) {
      throw Error(ErrorCode::Format, "duplicate prediction for (" + key.first + ", " + key.second + ") in " +
                                         other.provenance());
    }
  }
  entries_.merge(other.entries_);
  sources_.insert(sources_.end(), other.sources_.begin(), other.sources_.end());
}

const SolverOutput* PredictionStore::find(std::string_view problem_id, std::string_view model_id) const {
  auto it = entries_.find(std::make_pair(std::string(problem_id), std::string(model_id)));
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<std::string> PredictionStore::model_ids() const {
  std::vector<std::string> out;
  for (const auto& [key, v] : entries_) out.push_back(key.second);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::string> PredictionStore::problem_ids() const {
  std::vector<std::string> out;
  for (const auto& [key, v] : entries_) {
    if (out.empty() || out.back() != key.first) out.push_back(key.first);
  }
  return out;
}

std::string PredictionStore::provenance() const {
  std::string out;
  for (const auto& s : sources_) out += (out.empty() ? "" : ", ") + s;
  return out.empty() ? "<empty store>" : out;
}

const SolverOutput& replay_solve(const PredictionStore& store, std::string_view problem_id,
                                 std::string_view model_id) {
  if (const auto* out = store.find(problem_id, model_id)) return *out;
  throw Error(ErrorCode::Backend, "no prediction for problem '" + std::string(problem_id) + "' from model '" +
                                      std::string(model_id) + "' in " + store.provenance());
}

void PromptSpec::validate() const {
  if (!allow_count_override && exemplars.size() != expected_exemplars) {
    throw Error(ErrorCode::Config, "prompt spec has " + std::to_string(exemplars.size()) + " exemplars, expected " +
                                       std::to_string(expected_exemplars));
  }
  if (answer_marker.empty()) throw Error(ErrorCode::Config, "prompt spec: empty answer marker");
  for (std::size_t i = 0; i < exemplars.size(); ++i) {
    const auto& line = exemplars[i].answer_line;
    auto pos = line.find(answer_marker);
    if (pos == std::string::npos ||
        !extract_answer(line.substr(pos), answer_marker, ExtractionConfig{true, false})) {
      throw Error(ErrorCode::Config, "prompt exemplar " + std::to_string(i) +
                                         ": answer line lacks the marker followed by a number");
    }
  }
}

PromptSpec PromptSpec::from_json_text(std::string_view text) {
  PromptSpec spec;
  try {
    json doc = json::parse(text);
    spec.instruction_header = doc.value("instruction_header", std::string());
    spec.answer_marker = doc.value("answer_marker", spec.answer_marker);
    spec.expected_exemplars = doc.value("expected_exemplars", spec.expected_exemplars);
    spec.allow_count_override = doc.value("allow_count_override", false);
    for (const auto& e : doc.at("exemplars")) {
      spec.exemplars.push_back({e.at("question").get<std::string>(), e.at("reasoning").get<std::string>(),
                                e.at("answer").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, std::string("malformed prompt spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

PromptSpec PromptSpec::load(const std::filesystem::path& path) {
  return from_json_text(read_text(path, "prompt spec"));
}

std::string build_prompt(const PromptSpec& spec, const corpus::Problem& problem) {
  std::string out;
  if (!spec.instruction_header.empty()) out += spec.instruction_header + "\n\n";
  for (const auto& ex : spec.exemplars) {
    out += "Q: " + ex.question + "\n";
    out += "A: " + ex.reasoning + " " + ex.answer_line + "\n\n";
  }
  out += "Q: " + problem.original_text + "\n";
  out += "A:";
  return out;
}

CacheMode parse_cache_mode(std::string_view name) {
  if (name == "off") return CacheMode::Off;
  if (name == "replay") return CacheMode::Replay;
  if (name == "record") return CacheMode::Record;
  throw Error(ErrorCode::Config, "unknown cache mode '" + std::string(name) + "' (expected off, replay, record)");
}

const char* to_string(CacheMode mode) noexcept {
  switch (mode) {
    case CacheMode::Off: return "off";
    case CacheMode::Replay: return "replay";
    case CacheMode::Record: return "record";
  }
  return "?";
}

void LlmBackendConfig::validate() const {
  if (num_samples < 1) throw Error(ErrorCode::Config, "num_samples must be >= 1");
  if (!(temperature >= 0)) throw Error(ErrorCode::Config, "temperature must be >= 0");
  if (num_samples > 1 && !(temperature > 0)) {
    throw Error(ErrorCode::Config, "temperature must be > 0 when sampling more than one generation");
  }
  if (max_tokens < 1) throw Error(ErrorCode::Config, "max_tokens must be >= 1");
  if (max_attempts < 1) throw Error(ErrorCode::Config, "max_attempts must be >= 1");
  if (parallelism < 1) throw Error(ErrorCode::Config, "parallelism must be >= 1");
  if (timeout.count() <= 0) throw Error(ErrorCode::Config, "timeout must be positive");
  if (cache_mode != CacheMode::Off && cache_dir.empty()) {
    throw Error(ErrorCode::Config, std::string("cache_dir is required for cache mode ") + to_string(cache_mode));
  }
}

LlmBackendConfig LlmBackendConfig::from_json_text(std::string_view text, const std::filesystem::path& base_dir) {
  LlmBackendConfig c;
  try {
    json doc = json::parse(text);
    c.endpoint = doc.value("endpoint", c.endpoint);
    c.model = doc.value("model", c.model);
    c.temperature = doc.value("temperature", c.temperature);
    c.num_samples = doc.value("num_samples", c.num_samples);
    c.max_tokens = doc.value("max_tokens", c.max_tokens);
    c.timeout = std::chrono::milliseconds(doc.value("timeout_ms", static_cast<long long>(c.timeout.count())));
    c.max_attempts = doc.value("max_attempts", c.max_attempts);
    c.backoff = std::chrono::milliseconds(doc.value("backoff_ms", static_cast<long long>(c.backoff.count())));
    c.parallelism = doc.value("parallelism", c.parallelism);
    if (doc.contains("cache_dir")) {
      std::filesystem::path dir = doc["cache_dir"].get<std::string>();
      c.cache_dir = dir.is_relative() && !base_dir.empty() ? base_dir / dir : dir;
    }
    c.cache_mode = parse_cache_mode(doc.value("cache_mode", std::string(to_string(c.cache_mode))));
    if (doc.contains("adapter")) {
      const auto& a = doc["adapter"];
      auto& ad = c.adapter;
      ad.prompt_field = a.value("prompt", ad.prompt_field);
      ad.temperature_field = a.value("temperature", ad.temperature_field);
      ad.max_tokens_field = a.value("max_tokens", ad.max_tokens_field);
      ad.n_field = a.value("n", ad.n_field);
      ad.sample_index_field = a.value("sample_index", ad.sample_index_field);
      ad.model_field = a.value("model", ad.model_field);
      ad.choices_field = a.value("choices", ad.choices_field);
      ad.text_field = a.value("text", ad.text_field);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, std::string("malformed llm config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

json base_request(const LlmBackendConfig& config, const std::string& prompt, std::size_t n) {
  const auto& a = config.adapter;
  json body;
  body[a.prompt_field] = prompt;
  body[a.temperature_field] = config.temperature;
  body[a.max_tokens_field] = config.max_tokens;
  body[a.n_field] = n;
  if (!config.model.empty() && !a.model_field.empty()) body[a.model_field] = config.model;
  return body;
}

}  // namespace

std::string logical_request_body(const LlmBackendConfig& config, const std::string& prompt) {
  return base_request(config, prompt, config.num_samples).dump();
}

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::Internal, "SHA-256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

namespace {

std::mutex& cache_lock(const std::string& key) {
  static std::array<std::mutex, 64> locks;
  return locks[std::hash<std::string>{}(key) % locks.size()];
}

}  // namespace

ReplayCache::ReplayCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::optional<std::vector<std::string>> ReplayCache::lookup(const std::string& key) const {
  std::lock_guard lock(cache_lock(key));
  const auto path = dir_ / (key + ".json");
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  try {
    json doc = json::parse(in);
    return doc.at("responses").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, "malformed cache entry '" + path.string() + "': " + e.what());
  }
}

void ReplayCache::store(const std::string& key, const std::string& request_body,
                        const std::vector<std::string>& responses, const std::string& problem_id) const {
  std::lock_guard lock(cache_lock(key));
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  json doc;
  doc["request"] = json::parse(request_body);
  doc["responses"] = responses;
  doc["meta"] = {{"problem_id", problem_id}};
  const auto final_path = dir_ / (key + ".json");
  const auto tmp_path = dir_ / (key + ".json.tmp");
  {
    std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write cache entry '" + tmp_path.string() + "'");
    out << doc.dump(1) << "\n";
    if (!out) throw Error(ErrorCode::Io, "cannot write cache entry '" + tmp_path.string() + "'");
  }
  std::filesystem::rename(tmp_path, final_path, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot commit cache entry '" + final_path.string() + "': " + ec.message());
}

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos || url.compare(0, scheme_end, "http") != 0) {
    throw Error(ErrorCode::Config, "endpoint must be an http:// URL, got '" + url + "'");
  }
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

enum class SampleStatus { Ok, TransportFailure, Rejected };

struct SampleOutcome {
  SampleStatus status = SampleStatus::TransportFailure;
  std::string text;
  std::string error;
};

const json* dotted(const json& j, const std::string& path) {
  const json* cur = &j;
  std::size_t start = 0;
  while (start <= path.size()) {
    auto dot = path.find('.', start);
    std::string part = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!cur->is_object() || !cur->contains(part)) return nullptr;
    cur = &(*cur)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return cur;
}

std::string first_choice_text(const std::string& body, const EndpointAdapter& adapter) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Backend, std::string("malformed response body: ") + e.what());
  }
  auto choices = doc.find(adapter.choices_field);
  if (choices == doc.end() || !choices->is_array() || choices->empty()) {
    throw Error(ErrorCode::Backend, "malformed response body: no '" + adapter.choices_field + "' array");
  }
  const json& first = (*choices)[0];
  if (first.is_string()) return first.get<std::string>();
  if (const json* text = dotted(first, adapter.text_field); text && text->is_string()) {
    return text->get<std::string>();
  }
  throw Error(ErrorCode::Backend, "malformed response body: choice has no '" + adapter.text_field + "' text");
}

SampleOutcome request_sample(const LlmBackendConfig& config, const Endpoint& ep, const std::string& prompt,
                             std::size_t index) {
  json body = base_request(config, prompt, 1);
  if (!config.adapter.sample_index_field.empty()) body[config.adapter.sample_index_field] = index;
  const std::string payload = body.dump();

  httplib::Client client(ep.origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  SampleOutcome outcome;
  for (std::size_t attempt = 0; attempt < config.max_attempts; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(config.backoff * (1LL << std::min<std::size_t>(attempt - 1, 10)));
    auto res = client.Post(ep.path, payload, "application/json");
    if (!res) {
      outcome = {SampleStatus::TransportFailure, {}, httplib::to_string(res.error())};
      continue;
    }
    if (res->status == 200) {
      return {SampleStatus::Ok, first_choice_text(res->body, config.adapter), {}};
    }
    outcome = {SampleStatus::Rejected, {}, "HTTP " + std::to_string(res->status)};
    if (res->status != 429 && res->status < 500) break;
  }
  return outcome;
}

}  // namespace

std::vector<std::string> sample_generations(const LlmBackendConfig& config, const std::string& prompt,
                                            const std::string& problem_id) {
  config.validate();
  const std::string logical = logical_request_body(config, prompt);
  const std::string key = sha256_hex(logical);
  std::optional<ReplayCache> cache;
  if (config.cache_mode != CacheMode::Off) cache.emplace(config.cache_dir);

  if (cache) {
    if (auto hit = cache->lookup(key)) {
      if (hit->size() != config.num_samples) {
        throw Error(ErrorCode::Backend, "cache entry " + key + " holds " + std::to_string(hit->size()) +
                                            " generations, expected " + std::to_string(config.num_samples));
      }
      return *hit;
    }
    if (config.cache_mode == CacheMode::Replay) {
      throw Error(ErrorCode::Backend, "no cached generations for request " + key +
                                          (problem_id.empty() ? "" : " (problem '" + problem_id + "')") + " in " +
                                          config.cache_dir.string());
    }
  }

  std::string url = config.endpoint;
  if (const char* env = std::getenv("MWP_LLM_ENDPOINT"); env && *env) url = env;
  const Endpoint ep = split_url(url);

  std::vector<SampleOutcome> outcomes(config.num_samples);
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr fatal;
  auto worker = [&] {
    for (std::size_t i = next++; i < outcomes.size(); i = next++) {
      try {
        outcomes[i] = request_sample(config, ep, prompt, i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!fatal) fatal = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const std::size_t n = std::min(config.parallelism, config.num_samples);
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  if (fatal) std::rethrow_exception(fatal);

  std::vector<std::string> texts;
  texts.reserve(outcomes.size());
  bool all_transport = true, any_failed = false;
  for (const auto& o : outcomes) {
    texts.push_back(o.status == SampleStatus::Ok ? o.text : std::string());
    any_failed = any_failed || o.status != SampleStatus::Ok;
    all_transport = all_transport && o.status == SampleStatus::TransportFailure;
  }
  if (all_transport) {
    throw Error(ErrorCode::Backend, "endpoint " + url + " unreachable after " + std::to_string(config.max_attempts) +
                                        " attempts: " + outcomes.front().error);
  }
  if (cache && !any_failed) cache->store(key, logical, texts, problem_id);
  return texts;
}

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_word(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

struct Literal {
  std::size_t begin;
  std::string text;
};

// Scans number literals: optional sign, digits with optional ",ddd" groups,
// decimal part, "a/b" fraction, "N(a/b)" mixed number, trailing %.
std::vector<Literal> scan_literals(std::string_view s) {
  std::vector<Literal> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const bool starts_number = is_digit(s[i]) || (s[i] == '.' && i + 1 < s.size() && is_digit(s[i + 1]));
    if (!starts_number || (i > 0 && (is_word(s[i - 1]) || s[i - 1] == '.'))) {
      ++i;
      continue;
    }
    std::size_t begin = i;
    bool negative = i > 0 && s[i - 1] == '-' && (i < 2 || !(is_word(s[i - 2]) || s[i - 2] == ')'));
    std::string lit;
    auto take_digits = [&] {
      while (i < s.size() && is_digit(s[i])) lit.push_back(s[i++]);
    };
    take_digits();
    // Thousands groups: exactly three digits after each comma.
    while (i + 3 < s.size() + 0 && s[i] == ',' && is_digit(s[i + 1]) && is_digit(s[i + 2]) && is_digit(s[i + 3]) &&
           (i + 4 >= s.size() || !is_digit(s[i + 4]))) {
      lit.append(s.substr(i + 1, 3));
      i += 4;
    }
    if (i + 1 < s.size() && s[i] == '.' && is_digit(s[i + 1])) {
      lit.push_back(s[i++]);
      take_digits();
    }
    // Mixed number N(a/b)
    if (i < s.size() && s[i] == '(') {
      std::size_t j = i + 1, a = j;
      while (j < s.size() && is_digit(s[j])) ++j;
      if (j > a && j < s.size() && s[j] == '/') {
        std::size_t b = ++j;
        while (j < s.size() && is_digit(s[j])) ++j;
        if (j > b && j < s.size() && s[j] == ')') {
          lit.append(s.substr(i, j + 1 - i));
          i = j + 1;
        }
      }
    } else if (i + 1 < s.size() && s[i] == '/' && is_digit(s[i + 1])) {
      lit.push_back(s[i++]);
      take_digits();
      if (i + 1 < s.size() && s[i] == '.' && is_digit(s[i + 1])) {
        lit.push_back(s[i++]);
        take_digits();
      }
    }
    if (i < s.size() && s[i] == '%') lit.push_back(s[i++]);
    if (negative) {
      lit.insert(0, 1, '-');
      begin -= 1;
    }
    out.push_back({begin, std::move(lit)});
  }
  return out;
}

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::optional<AnswerValue> to_answer(const std::string& literal) {
  try {
    return postproc::parse_answer_literal(literal);
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace

std::optional<AnswerValue> extract_answer(std::string_view text, std::string_view marker,
                                          const ExtractionConfig& config) {
  if (config.use_marker && !marker.empty()) {
    const std::string hay = lower_ascii(text);
    const std::string needle = lower_ascii(marker);
    auto pos = hay.rfind(needle);
    if (pos != std::string::npos) {
      const std::size_t after = pos + needle.size();
      for (const auto& lit : scan_literals(text.substr(after))) {
        if (auto v = to_answer(lit.text)) return v;
      }
    }
  }
  if (config.fallback_last_number) {
    auto lits = scan_literals(text);
    for (auto it = lits.rbegin(); it != lits.rend(); ++it) {
      if (auto v = to_answer(it->text)) return v;
    }
  }
  return std::nullopt;
}

}  // namespace mwp::backends
