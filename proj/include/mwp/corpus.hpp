#pragma once

#include "mwp/postproc.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mwp::corpus {

// Whitespace split, with each non-ASCII code point (CJK characters and
// full-width punctuation) as its own token. ASCII runs are further split into
// letter runs, numbers ("12", "2.5"), underscore runs and single punctuation.
std::vector<std::string> tokenize_text(std::string_view text);

struct Problem {
  std::string id;
  std::string original_text;
  std::vector<std::string> tokens;
  std::optional<std::string> equation_text;
  std::optional<AnswerValue> gold_answer;

  friend bool operator==(const Problem&, const Problem&) = default;
};

enum class DatasetFormat {
  Math23kJson,   // JSON array; one-object-per-line input is detected and accepted
  Math23kJsonl,  // one object per line
};

DatasetFormat parse_dataset_format(std::string_view tag);
const char* to_string(DatasetFormat format) noexcept;

class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<Problem> problems, std::string source_path);

  const std::vector<Problem>& problems() const noexcept { return problems_; }
  const std::string& source_path() const noexcept { return source_path_; }
  std::size_t size() const noexcept { return problems_.size(); }
  bool empty() const noexcept { return problems_.empty(); }

  const Problem* find(std::string_view id) const;

  friend bool operator==(const Dataset& a, const Dataset& b) { return a.problems_ == b.problems_; }

 private:
  std::vector<Problem> problems_;
  std::string source_path_;
  std::unordered_map<std::string, std::size_t> index_;
};

Dataset load_dataset(const std::filesystem::path& path,
                     DatasetFormat format = DatasetFormat::Math23kJson);
Dataset parse_dataset(std::string_view content, DatasetFormat format,
                      std::string source_path = "<memory>");
void save_dataset(const Dataset& dataset, std::ostream& out, DatasetFormat format);

// Identifies the shuffle so recorded fold files stay replayable.
inline constexpr std::string_view kFoldGenerator = "mt19937_64/fisher-yates-rejection/v1";

struct FoldAssignment {
  int k = 0;
  std::uint64_t seed = 0;
  std::string generator{kFoldGenerator};
  std::map<std::string, int> assignment;

  std::vector<std::size_t> fold_sizes() const;
  std::string to_json() const;
  static FoldAssignment from_json(std::string_view text);
  static FoldAssignment load(const std::filesystem::path& path);

  friend bool operator==(const FoldAssignment&, const FoldAssignment&) = default;
};

// Sorts ids, shuffles them with the seeded generator and deals them to folds
// round-robin, so fold sizes differ by at most one and load order is
// irrelevant.
FoldAssignment split_folds(const Dataset& dataset, int k, std::uint64_t seed);

struct FoldSplit {
  std::vector<std::string> train;
  std::vector<std::string> validation;
};

// Both lists keep dataset order.
FoldSplit fold_split(const FoldAssignment& assignment, const Dataset& dataset, int held_out);

}  // namespace mwp::corpus
