#pragma once

#include "mwp/corpus.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace mwp::classifier {

enum class Track { Tree, Llm };

const char* to_string(Track track) noexcept;  // "TREE" / "LLM"
Track parse_track(std::string_view name);

struct Route {
  Track track = Track::Tree;
  std::optional<std::string> matched_rule;  // set whenever a rule fired
  std::string detail;

  friend bool operator==(const Route&, const Route&) = default;
};

struct Unit {
  std::string name;
  double factor = 1.0;  // relative to the dimension's base unit
  std::vector<std::string> forms;
};

struct Dimension {
  std::string name;
  std::vector<Unit> units;  // strictly increasing factor
};

class UnitTable {
 public:
  explicit UnitTable(std::vector<Dimension> dimensions);

  // Length, mass, area, volume, capacity and time with English and Chinese
  // surface forms.
  static UnitTable builtin();
  static UnitTable from_json_text(std::string_view text);

  const std::vector<Dimension>& dimensions() const noexcept { return dimensions_; }

  struct Form {
    std::vector<std::string> tokens;  // normalized
    std::size_t dimension;
    std::size_t unit;
    std::string surface;
  };
  // Forms keyed by first normalized token, longest first.
  const std::vector<Form>* forms_starting_with(const std::string& token) const;

 private:
  std::vector<Dimension> dimensions_;
  std::unordered_map<std::string, std::vector<Form>> by_first_token_;
};

struct UnitMatch {
  std::string dimension;
  std::string first_unit;
  std::string second_unit;
  std::string first_form;
  std::string second_form;
};

// Fires when two distinct units of one dimension occur in the text.
std::optional<UnitMatch> match_unit_conversion(std::span<const std::string> tokens,
                                               const UnitTable& table);

// A keyword may contain "..." or "…" to allow up to max_gap tokens between
// its parts ("moved ... places").
struct KeywordParams {
  std::vector<std::string> keywords;
  std::size_t max_gap = 6;
};

struct LawFindingParams {
  std::vector<std::string> keywords;
  std::size_t max_gap = 6;
  std::size_t min_numbers = 3;
  // Besides these, any run of underscores is a blank.
  std::vector<std::string> blank_markers = {"()", "\xEF\xBC\x88\xEF\xBC\x89", "?", "\xEF\xBC\x9F",
                                            "\xE2\x96\xA1"};
};

struct KeywordMatch {
  std::string matched;
};

std::optional<KeywordMatch> match_keywords(std::span<const std::string> tokens,
                                           const KeywordParams& params);
std::optional<KeywordMatch> match_law_finding(std::span<const std::string> tokens,
                                              const LawFindingParams& params);
std::optional<KeywordMatch> match_decimal_transform(std::span<const std::string> tokens,
                                                    const KeywordParams& params);

enum class RuleKind { UnitConversion, LawFinding, DecimalTransform, CustomKeyword };

const char* to_string(RuleKind kind) noexcept;
RuleKind parse_rule_kind(std::string_view name);

struct Rule {
  std::string name;
  RuleKind kind = RuleKind::CustomKeyword;
  Track target = Track::Llm;
  std::variant<KeywordParams, LawFindingParams, UnitTable> parameters;
};

class RuleSet {
 public:
  explicit RuleSet(std::vector<Rule> rules = {}, Track default_route = Track::Tree);

  static RuleSet builtin();
  // Relative unit_table_path entries resolve against base_dir.
  static RuleSet from_json_text(std::string_view text, const std::filesystem::path& base_dir = {});
  static RuleSet load(const std::filesystem::path& path);
  std::string to_json() const;

  const std::vector<Rule>& rules() const noexcept { return rules_; }
  Track default_route() const noexcept { return default_route_; }

 private:
  std::vector<Rule> rules_;
  Track default_route_;
};

// First firing rule in list order decides; otherwise the default route.
Route classify(const corpus::Problem& problem, const RuleSet& rules);
Route classify_tokens(std::span<const std::string> tokens, const RuleSet& rules);

}  // namespace mwp::classifier
