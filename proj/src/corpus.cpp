#include "mwp/corpus.hpp"

#include "mwp/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

namespace mwp::corpus {

using nlohmann::json;

namespace {

std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead & 0xE0) == 0xC0) return 2;
  if ((lead & 0xF0) == 0xE0) return 3;
  if ((lead & 0xF8) == 0xF0) return 4;
  return 1;
}

bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

}  // namespace

std::vector<std::string> tokenize_text(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    const auto uc = static_cast<unsigned char>(c);
    if (is_space(c)) {
      ++i;
    } else if (uc >= 0x80) {
      std::size_t len = std::min(utf8_length(uc), text.size() - i);
      out.emplace_back(text.substr(i, len));
      i += len;
    } else if (is_alpha(c)) {
      std::size_t j = i;
      while (j < text.size() && is_alpha(text[j])) ++j;
      out.emplace_back(text.substr(i, j - i));
      i = j;
    } else if (is_digit(c)) {
      std::size_t j = i;
      while (j < text.size() && is_digit(text[j])) ++j;
      if (j + 1 < text.size() && text[j] == '.' && is_digit(text[j + 1])) {
        ++j;
        while (j < text.size() && is_digit(text[j])) ++j;
      }
      out.emplace_back(text.substr(i, j - i));
      i = j;
    } else if (c == '_') {
      std::size_t j = i;
      while (j < text.size() && text[j] == '_') ++j;
      out.emplace_back(text.substr(i, j - i));
      i = j;
    } else {
      out.emplace_back(1, c);
      ++i;
    }
  }
  return out;
}

DatasetFormat parse_dataset_format(std::string_view tag) {
  if (tag == "math23k-json") return DatasetFormat::Math23kJson;
  if (tag == "math23k-jsonl") return DatasetFormat::Math23kJsonl;
  throw Error(ErrorCode::InvalidArgument, "unsupported dataset format '" + std::string(tag) +
                                              "' (expected math23k-json or math23k-jsonl)");
}

const char* to_string(DatasetFormat format) noexcept {
  switch (format) {
    case DatasetFormat::Math23kJson: return "math23k-json";
    case DatasetFormat::Math23kJsonl: return "math23k-jsonl";
  }
  return "?";
}

Dataset::Dataset(std::vector<Problem> problems, std::string source_path)
    : problems_(std::move(problems)), source_path_(std::move(source_path)) {
  index_.reserve(problems_.size());
  for (std::size_t i = 0; i < problems_.size(); ++i) {
    if (problems_[i].id.empty()) {
      throw Error(ErrorCode::Format, "record " + std::to_string(i) + ": field 'id': empty id");
    }
    if (problems_[i].tokens.empty()) {
      throw Error(ErrorCode::Format, "record " + std::to_string(i) + ": field 'original_text': no tokens");
    }
    if (!index_.emplace(problems_[i].id, i).second) {
      throw Error(ErrorCode::Format, "record " + std::to_string(i) + ": duplicate id '" + problems_[i].id + "'");
    }
  }
}

const Problem* Dataset::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &problems_[it->second];
}

namespace {

Error record_error(std::size_t index, std::string_view field, const std::string& what) {
  return Error(ErrorCode::Format, "record " + std::to_string(index) + ": field '" + std::string(field) + "': " + what);
}

std::optional<std::string> optional_string(const json& rec, const char* field, std::size_t index) {
  auto it = rec.find(field);
  if (it == rec.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw record_error(index, field, "expected a string");
  return it->get<std::string>();
}

Problem parse_record(const json& rec, std::size_t index) {
  if (!rec.is_object()) {
    throw Error(ErrorCode::Format, "record " + std::to_string(index) + ": expected a JSON object");
  }
  Problem p;
  auto id = rec.find("id");
  if (id == rec.end() || id->is_null()) throw record_error(index, "id", "missing");
  if (id->is_string()) {
    p.id = id->get<std::string>();
  } else if (id->is_number_integer()) {
    p.id = std::to_string(id->get<long long>());
  } else {
    throw record_error(index, "id", "expected a string");
  }
  if (p.id.empty()) throw record_error(index, "id", "empty id");

  auto text = optional_string(rec, "original_text", index);
  if (!text) throw record_error(index, "original_text", "missing");
  p.original_text = *text;

  if (auto seg = optional_string(rec, "segmented_text", index)) {
    std::istringstream words(*seg);
    std::string w;
    while (words >> w) p.tokens.push_back(w);
  }
  if (p.tokens.empty()) p.tokens = tokenize_text(p.original_text);
  if (p.tokens.empty()) throw record_error(index, "original_text", "text has no tokens");

  if (auto eq = optional_string(rec, "equation", index)) {
    std::string_view s = *eq;
    auto first = s.find_first_not_of(" \t");
    s = first == std::string_view::npos ? std::string_view{} : s.substr(first);
    if (!(s.starts_with("x=") || s.starts_with("x ="))) {
      throw record_error(index, "equation", "must start with 'x=' or 'x ='");
    }
    p.equation_text = *eq;
  }

  auto ans = rec.find("ans");
  if (ans != rec.end() && !ans->is_null()) {
    std::string literal;
    if (ans->is_string()) {
      literal = ans->get<std::string>();
    } else if (ans->is_number()) {
      literal = ans->dump();
    } else {
      throw record_error(index, "ans", "expected a string or number");
    }
    try {
      p.gold_answer = postproc::parse_answer_literal(literal);
    } catch (const Error& e) {
      throw record_error(index, "ans", e.what());
    }
  }
  return p;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::Io, "error reading '" + path.string() + "'");
  return ss.str();
}

json record_json(const Problem& p) {
  json rec;
  rec["id"] = p.id;
  rec["original_text"] = p.original_text;
  std::string seg;
  for (const auto& t : p.tokens) {
    if (!seg.empty()) seg.push_back(' ');
    seg += t;
  }
  rec["segmented_text"] = seg;
  if (p.equation_text) rec["equation"] = *p.equation_text;
  if (p.gold_answer) rec["ans"] = to_exact_literal(p.gold_answer->value);
  return rec;
}

}  // namespace

Dataset parse_dataset(std::string_view content, DatasetFormat format, std::string source_path) {
  std::vector<Problem> problems;
  auto first = content.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return Dataset({}, std::move(source_path));

  const bool array = format == DatasetFormat::Math23kJson && content[first] == '[';
  if (array) {
    json doc;
    try {
      doc = json::parse(content);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::Format, source_path + ": malformed JSON: " + e.what());
    }
    problems.reserve(doc.size());
    for (std::size_t i = 0; i < doc.size(); ++i) problems.push_back(parse_record(doc[i], i));
  } else {
    std::size_t index = 0, line_no = 0, pos = 0;
    while (pos <= content.size()) {
      auto nl = content.find('\n', pos);
      std::string_view line = content.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
      ++line_no;
      pos = nl == std::string_view::npos ? content.size() + 1 : nl + 1;
      if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
      json rec;
      try {
        rec = json::parse(line);
      } catch (const json::parse_error& e) {
        throw Error(ErrorCode::Format, "record " + std::to_string(index) + " (line " + std::to_string(line_no) +
                                           "): malformed JSON: " + e.what());
      }
      problems.push_back(parse_record(rec, index++));
    }
  }
  return Dataset(std::move(problems), std::move(source_path));
}

Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format) {
  return parse_dataset(read_file(path), format, path.string());
}

void save_dataset(const Dataset& dataset, std::ostream& out, DatasetFormat format) {
  if (format == DatasetFormat::Math23kJson) {
    out << "[";
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      out << (i ? ",\n " : "\n ") << record_json(dataset.problems()[i]).dump();
    }
    out << "\n]\n";
  } else {
    for (const auto& p : dataset.problems()) out << record_json(p).dump() << "\n";
  }
}

std::vector<std::size_t> FoldAssignment::fold_sizes() const {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(std::max(k, 0)), 0);
  for (const auto& [id, fold] : assignment) ++sizes.at(static_cast<std::size_t>(fold));
  return sizes;
}

std::string FoldAssignment::to_json() const {
  json doc;
  doc["k"] = k;
  doc["seed"] = seed;
  doc["generator"] = generator;
  doc["assignment"] = assignment;
  return doc.dump(1) + "\n";
}

FoldAssignment FoldAssignment::from_json(std::string_view text) {
  FoldAssignment out;
  try {
    json doc = json::parse(text);
    out.k = doc.at("k").get<int>();
    out.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("generator")) out.generator = doc["generator"].get<std::string>();
    out.assignment = doc.at("assignment").get<std::map<std::string, int>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, std::string("malformed fold assignment: ") + e.what());
  }
  if (out.k < 2) throw Error(ErrorCode::Format, "fold assignment: k must be >= 2");
  for (const auto& [id, fold] : out.assignment) {
    if (fold < 0 || fold >= out.k) {
      throw Error(ErrorCode::Format, "fold assignment: id '" + id + "' has fold " + std::to_string(fold) +
                                         " outside [0, " + std::to_string(out.k) + ")");
    }
  }
  return out;
}

FoldAssignment FoldAssignment::load(const std::filesystem::path& path) {
  return from_json(read_file(path));
}

namespace {

// Uniform integer in [0, bound) by rejection; std::uniform_int_distribution
// is not specified bit-for-bit across standard libraries.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

}  // namespace

FoldAssignment split_folds(const Dataset& dataset, int k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::InvalidArgument, "k must be >= 2, got " + std::to_string(k));
  if (dataset.empty()) throw Error(ErrorCode::InvalidArgument, "cannot split an empty dataset");
  if (static_cast<std::size_t>(k) > dataset.size()) {
    throw Error(ErrorCode::InvalidArgument, "k = " + std::to_string(k) + " exceeds dataset size " +
                                                std::to_string(dataset.size()));
  }
  std::vector<std::string> ids;
  ids.reserve(dataset.size());
  for (const auto& p : dataset.problems()) ids.push_back(p.id);
  std::sort(ids.begin(), ids.end());

  std::mt19937_64 rng(seed);
  for (std::size_t i = ids.size() - 1; i > 0; --i) {
    std::swap(ids[i], ids[uniform_below(rng, i + 1)]);
  }

  FoldAssignment out;
  out.k = k;
  out.seed = seed;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out.assignment.emplace(ids[i], static_cast<int>(i % static_cast<std::size_t>(k)));
  }
  return out;
}

FoldSplit fold_split(const FoldAssignment& assignment, const Dataset& dataset, int held_out) {
  if (held_out < 0 || held_out >= assignment.k) {
    throw Error(ErrorCode::InvalidArgument, "held-out fold " + std::to_string(held_out) +
                                                " outside [0, " + std::to_string(assignment.k) + ")");
  }
  FoldSplit split;
  for (const auto& p : dataset.problems()) {
    auto it = assignment.assignment.find(p.id);
    if (it == assignment.assignment.end()) {
      throw Error(ErrorCode::InvalidArgument, "problem '" + p.id + "' has no fold assignment");
    }
    (it->second == held_out ? split.validation : split.train).push_back(p.id);
  }
  return split;
}

}  // namespace mwp::corpus
