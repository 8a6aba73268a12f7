#include "mwp/classifier.hpp"

#include "mwp/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace mwp::classifier {

using nlohmann::json;

const char* to_string(Track track) noexcept { return track == Track::Tree ? "TREE" : "LLM"; }

Track parse_track(std::string_view name) {
  if (name == "TREE") return Track::Tree;
  if (name == "LLM") return Track::Llm;
  throw Error(ErrorCode::Config, "unknown route '" + std::string(name) + "' (expected TREE or LLM)");
}

const char* to_string(RuleKind kind) noexcept {
  switch (kind) {
    case RuleKind::UnitConversion: return "unit-conversion";
    case RuleKind::LawFinding: return "law-finding";
    case RuleKind::DecimalTransform: return "decimal-transform";
    case RuleKind::CustomKeyword: return "custom-keyword";
  }
  return "?";
}

RuleKind parse_rule_kind(std::string_view name) {
  for (auto kind : {RuleKind::UnitConversion, RuleKind::LawFinding, RuleKind::DecimalTransform,
                    RuleKind::CustomKeyword}) {
    if (name == to_string(kind)) return kind;
  }
  throw Error(ErrorCode::Config, "unknown rule kind '" + std::string(name) + "'");
}

namespace {

std::string lower_ascii(std::string s) {
  for (char& c : s) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return s;
}

std::vector<std::string> normalize(std::span<const std::string> tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& tok : tokens) {
    for (auto& piece : corpus::tokenize_text(tok)) out.push_back(lower_ascii(std::move(piece)));
  }
  return out;
}

std::vector<std::string> normalize_text(std::string_view text) {
  std::vector<std::string> out;
  for (auto& piece : corpus::tokenize_text(text)) out.push_back(lower_ascii(std::move(piece)));
  return out;
}

std::string join(const std::vector<std::string>& toks) {
  std::string out;
  for (const auto& t : toks) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

bool matches_at(const std::vector<std::string>& text, std::size_t pos, const std::vector<std::string>& pat) {
  if (pat.empty() || pos + pat.size() > text.size()) return false;
  return std::equal(pat.begin(), pat.end(), text.begin() + static_cast<std::ptrdiff_t>(pos));
}

// Keyword split at gap markers into normalized segments.
std::vector<std::vector<std::string>> compile_keyword(std::string_view keyword) {
  std::vector<std::vector<std::string>> segments;
  std::string current;
  auto flush = [&] {
    auto seg = normalize_text(current);
    if (!seg.empty()) segments.push_back(std::move(seg));
    current.clear();
  };
  for (std::size_t i = 0; i < keyword.size();) {
    if (keyword.substr(i, 3) == "...") {
      flush();
      i += 3;
    } else if (keyword.substr(i, 3) == "\xE2\x80\xA6") {  // …
      flush();
      i += 3;
    } else {
      current.push_back(keyword[i++]);
    }
  }
  flush();
  return segments;
}

bool match_segments(const std::vector<std::string>& text, const std::vector<std::vector<std::string>>& segs,
                    std::size_t max_gap) {
  if (segs.empty()) return false;
  for (std::size_t start = 0; start < text.size(); ++start) {
    if (!matches_at(text, start, segs[0])) continue;
    std::size_t end = start + segs[0].size();
    bool ok = true;
    for (std::size_t s = 1; s < segs.size() && ok; ++s) {
      ok = false;
      for (std::size_t gap = 0; gap <= max_gap && end + gap < text.size(); ++gap) {
        if (matches_at(text, end + gap, segs[s])) {
          end = end + gap + segs[s].size();
          ok = true;
          break;
        }
      }
    }
    if (ok) return true;
  }
  return false;
}

std::optional<KeywordMatch> first_keyword(const std::vector<std::string>& text,
                                          const std::vector<std::string>& keywords, std::size_t max_gap) {
  // Longest keyword first, ties in list order.
  std::vector<std::pair<std::size_t, std::size_t>> order;  // (token count, index)
  std::vector<std::vector<std::vector<std::string>>> compiled;
  for (std::size_t i = 0; i < keywords.size(); ++i) {
    compiled.push_back(compile_keyword(keywords[i]));
    std::size_t n = 0;
    for (const auto& seg : compiled.back()) n += seg.size();
    order.emplace_back(n, i);
  }
  std::stable_sort(order.begin(), order.end(), [](auto a, auto b) { return a.first > b.first; });
  for (auto [n, i] : order) {
    if (match_segments(text, compiled[i], max_gap)) return KeywordMatch{keywords[i]};
  }
  return std::nullopt;
}

bool is_number_token(const std::string& t) {
  if (t.empty()) return false;
  bool digit = false;
  for (char c : t) {
    if (c >= '0' && c <= '9') {
      digit = true;
    } else if (c != '.') {
      return false;
    }
  }
  return digit;
}

bool is_separator(const std::string& t) {
  return t == "," || t == "\xEF\xBC\x8C" /* ， */ || t == "\xE3\x80\x81" /* 、 */;
}

}  // namespace

UnitTable::UnitTable(std::vector<Dimension> dimensions) : dimensions_(std::move(dimensions)) {
  std::set<std::string> seen_forms;
  for (std::size_t d = 0; d < dimensions_.size(); ++d) {
    const auto& dim = dimensions_[d];
    if (dim.name.empty()) throw Error(ErrorCode::Config, "unit table: dimension with empty name");
    if (dim.units.empty()) throw Error(ErrorCode::Config, "unit table: dimension '" + dim.name + "' has no units");
    for (std::size_t u = 0; u < dim.units.size(); ++u) {
      const auto& unit = dim.units[u];
      if (!(unit.factor > 0)) {
        throw Error(ErrorCode::Config, "unit table: unit '" + unit.name + "' needs a positive factor");
      }
      if (u > 0 && !(unit.factor > dim.units[u - 1].factor)) {
        throw Error(ErrorCode::Config, "unit table: factors must increase strictly along '" + dim.name +
                                           "' (at '" + unit.name + "')");
      }
      if (unit.forms.empty()) throw Error(ErrorCode::Config, "unit table: unit '" + unit.name + "' has no forms");
      for (const auto& form : unit.forms) {
        auto toks = normalize_text(form);
        if (toks.empty()) throw Error(ErrorCode::Config, "unit table: empty surface form in '" + unit.name + "'");
        if (!seen_forms.insert(join(toks)).second) {
          throw Error(ErrorCode::Config, "unit table: surface form '" + form + "' is not unique");
        }
        by_first_token_[toks.front()].push_back(Form{toks, d, u, form});
      }
    }
  }
  for (auto& [first, forms] : by_first_token_) {
    std::stable_sort(forms.begin(), forms.end(),
                     [](const Form& a, const Form& b) { return a.tokens.size() > b.tokens.size(); });
  }
}

const std::vector<UnitTable::Form>* UnitTable::forms_starting_with(const std::string& token) const {
  auto it = by_first_token_.find(token);
  return it == by_first_token_.end() ? nullptr : &it->second;
}

UnitTable UnitTable::builtin() {
  std::vector<Dimension> dims = {
      {"length",
       {{"millimeter", 0.001, {"mm", "millimeter", "millimeters", "millimetre", "millimetres", "毫米"}},
        {"centimeter", 0.01, {"cm", "centimeter", "centimeters", "centimetre", "centimetres", "厘米"}},
        {"decimeter", 0.1, {"dm", "decimeter", "decimeters", "decimetre", "decimetres", "分米"}},
        {"meter", 1.0, {"m", "meter", "meters", "metre", "metres", "米"}},
        {"kilometer", 1000.0, {"km", "kilometer", "kilometers", "kilometre", "kilometres", "千米", "公里"}}}},
      {"mass",
       {{"gram", 1.0, {"g", "gram", "grams", "gramme", "grammes", "克"}},
        {"jin", 500.0, {"jin", "斤"}},
        {"kilogram", 1000.0, {"kg", "kilogram", "kilograms", "kilo", "kilos", "千克", "公斤"}},
        {"ton", 1e6, {"ton", "tons", "tonne", "tonnes", "吨"}}}},
      {"area",
       {{"square centimeter", 1e-4, {"cm²", "square centimeter", "square centimeters", "square centimetre", "square centimetres", "平方厘米"}},
        {"square decimeter", 0.01, {"dm²", "square decimeter", "square decimeters", "square decimetre", "square decimetres", "平方分米"}},
        {"square meter", 1.0, {"m²", "square meter", "square meters", "square metre", "square metres", "平方米"}},
        {"hectare", 1e4, {"hectare", "hectares", "公顷"}},
        {"square kilometer", 1e6, {"km²", "square kilometer", "square kilometers", "square kilometre", "square kilometres", "平方千米", "平方公里"}}}},
      {"volume",
       {{"cubic centimeter", 1e-6, {"cm³", "cubic centimeter", "cubic centimeters", "cubic centimetre", "cubic centimetres", "立方厘米"}},
        {"cubic decimeter", 1e-3, {"dm³", "cubic decimeter", "cubic decimeters", "cubic decimetre", "cubic decimetres", "立方分米"}},
        {"cubic meter", 1.0, {"m³", "cubic meter", "cubic meters", "cubic metre", "cubic metres", "立方米"}}}},
      {"capacity",
       {{"milliliter", 0.001, {"ml", "milliliter", "milliliters", "millilitre", "millilitres", "毫升"}},
        {"liter", 1.0, {"liter", "liters", "litre", "litres", "升"}}}},
      {"time",
       {{"second", 1.0, {"seconds", "sec", "secs", "秒"}},
        {"minute", 60.0, {"minute", "minutes", "min", "mins", "分钟"}},
        {"hour", 3600.0, {"hour", "hours", "hr", "hrs", "小时"}}}},
  };
  return UnitTable(std::move(dims));
}

namespace {

UnitTable unit_table_from_json(const json& doc) {
  std::vector<Dimension> dims;
  for (const auto& d : doc.at("dimensions")) {
    Dimension dim;
    dim.name = d.at("name").get<std::string>();
    for (const auto& u : d.at("units")) {
      dim.units.push_back(Unit{u.at("name").get<std::string>(), u.at("factor").get<double>(),
                               u.at("forms").get<std::vector<std::string>>()});
    }
    dims.push_back(std::move(dim));
  }
  return UnitTable(std::move(dims));
}

json unit_table_to_json(const UnitTable& table) {
  json dims = json::array();
  for (const auto& d : table.dimensions()) {
    json units = json::array();
    for (const auto& u : d.units) {
      units.push_back({{"name", u.name}, {"factor", u.factor}, {"forms", u.forms}});
    }
    dims.push_back({{"name", d.name}, {"units", units}});
  }
  return {{"dimensions", dims}};
}

}  // namespace

UnitTable UnitTable::from_json_text(std::string_view text) {
  try {
    return unit_table_from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, std::string("malformed unit table: ") + e.what());
  }
}

std::optional<UnitMatch> match_unit_conversion(std::span<const std::string> tokens, const UnitTable& table) {
  const auto text = normalize(tokens);
  // First two distinct units seen per dimension, in text order.
  struct Seen {
    std::size_t unit;
    std::string form;
  };
  std::vector<std::vector<Seen>> seen(table.dimensions().size());
  for (std::size_t i = 0; i < text.size();) {
    const auto* forms = table.forms_starting_with(text[i]);
    const UnitTable::Form* hit = nullptr;
    if (forms) {
      for (const auto& f : *forms) {
        if (matches_at(text, i, f.tokens)) {
          hit = &f;
          break;
        }
      }
    }
    if (!hit) {
      ++i;
      continue;
    }
    auto& dim_seen = seen[hit->dimension];
    bool known = std::any_of(dim_seen.begin(), dim_seen.end(), [&](const Seen& s) { return s.unit == hit->unit; });
    if (!known) {
      dim_seen.push_back({hit->unit, hit->surface});
      if (dim_seen.size() == 2) {
        const auto& dim = table.dimensions()[hit->dimension];
        return UnitMatch{dim.name, dim.units[dim_seen[0].unit].name, dim.units[dim_seen[1].unit].name,
                         dim_seen[0].form, dim_seen[1].form};
      }
    }
    i += hit->tokens.size();
  }
  return std::nullopt;
}

std::optional<KeywordMatch> match_keywords(std::span<const std::string> tokens, const KeywordParams& params) {
  return first_keyword(normalize(tokens), params.keywords, params.max_gap);
}

std::optional<KeywordMatch> match_decimal_transform(std::span<const std::string> tokens,
                                                    const KeywordParams& params) {
  return match_keywords(tokens, params);
}

std::optional<KeywordMatch> match_law_finding(std::span<const std::string> tokens, const LawFindingParams& params) {
  const auto text = normalize(tokens);
  if (auto kw = first_keyword(text, params.keywords, params.max_gap)) return kw;

  std::vector<std::vector<std::string>> blanks;
  for (const auto& marker : params.blank_markers) {
    auto toks = normalize_text(marker);
    if (!toks.empty()) blanks.push_back(std::move(toks));
  }
  // Length of the sequence element starting at i (0 if none); sets is_blank.
  auto element_at = [&](std::size_t i, bool& is_blank) -> std::size_t {
    if (i >= text.size()) return 0;
    if (text[i].find_first_not_of('_') == std::string::npos) {
      is_blank = true;
      return 1;
    }
    for (const auto& b : blanks) {
      if (matches_at(text, i, b)) {
        is_blank = true;
        return b.size();
      }
    }
    is_blank = false;
    if (text[i] == "-" && i + 1 < text.size() && is_number_token(text[i + 1])) return 2;
    return is_number_token(text[i]) ? 1 : 0;
  };

  for (std::size_t start = 0; start < text.size(); ++start) {
    std::size_t numbers = 0, blank_count = 0, i = start;
    std::string run;
    while (true) {
      bool is_blank = false;
      std::size_t len = element_at(i, is_blank);
      if (len == 0) break;
      (is_blank ? blank_count : numbers) += 1;
      for (std::size_t t = i; t < i + len; ++t) run += text[t];
      i += len;
      if (i < text.size() && is_separator(text[i])) {
        bool dummy = false;
        if (element_at(i + 1, dummy) == 0) break;
        run += ", ";
        ++i;
      } else {
        break;
      }
    }
    if (blank_count >= 1 && numbers >= params.min_numbers) return KeywordMatch{run};
  }
  return std::nullopt;
}

RuleSet::RuleSet(std::vector<Rule> rules, Track default_route)
    : rules_(std::move(rules)), default_route_(default_route) {
  std::set<std::string> names;
  for (const auto& rule : rules_) {
    if (rule.name.empty()) throw Error(ErrorCode::Config, "rule with empty name");
    if (!names.insert(rule.name).second) throw Error(ErrorCode::Config, "duplicate rule name '" + rule.name + "'");
    const bool ok = std::visit(
        [&](const auto& p) {
          using P = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<P, UnitTable>) {
            return rule.kind == RuleKind::UnitConversion && !p.dimensions().empty();
          } else if constexpr (std::is_same_v<P, LawFindingParams>) {
            return rule.kind == RuleKind::LawFinding && !p.keywords.empty();
          } else {
            return (rule.kind == RuleKind::DecimalTransform || rule.kind == RuleKind::CustomKeyword) &&
                   !p.keywords.empty();
          }
        },
        rule.parameters);
    if (!ok) {
      throw Error(ErrorCode::Config, "rule '" + rule.name + "': parameters do not fit kind " +
                                         to_string(rule.kind) + " or keyword list is empty");
    }
  }
}

RuleSet RuleSet::builtin() {
  std::vector<Rule> rules;
  rules.push_back({"unit-conversion", RuleKind::UnitConversion, Track::Llm, UnitTable::builtin()});
  rules.push_back({"law-finding", RuleKind::LawFinding, Track::Llm,
                   LawFindingParams{{"find the pattern", "find the rule", "找规律", "规律"}}});
  rules.push_back({"decimal-transform", RuleKind::DecimalTransform, Track::Llm,
                   KeywordParams{{"decimal point", "小数点", "move ... places", "moved ... places",
                                  "moves ... places", "moving ... places"}}});
  return RuleSet(std::move(rules), Track::Tree);
}

RuleSet RuleSet::from_json_text(std::string_view text, const std::filesystem::path& base_dir) {
  try {
    json doc = json::parse(text);
    Track def = parse_track(doc.value("default_route", std::string("TREE")));
    std::vector<Rule> rules;
    for (const auto& r : doc.at("rules")) {
      Rule rule;
      rule.name = r.at("name").get<std::string>();
      rule.kind = parse_rule_kind(r.at("kind").get<std::string>());
      rule.target = parse_track(r.value("target", std::string("LLM")));
      const json params = r.value("parameters", json::object());
      switch (rule.kind) {
        case RuleKind::UnitConversion:
          if (params.contains("unit_table")) {
            rule.parameters = unit_table_from_json(params["unit_table"]);
          } else if (params.contains("unit_table_path")) {
            std::filesystem::path p = params["unit_table_path"].get<std::string>();
            if (p.is_relative()) p = base_dir / p;
            std::ifstream in(p);
            if (!in) throw Error(ErrorCode::Io, "cannot read unit table '" + p.string() + "'");
            std::stringstream ss;
            ss << in.rdbuf();
            rule.parameters = UnitTable::from_json_text(ss.str());
          } else {
            rule.parameters = UnitTable::builtin();
          }
          break;
        case RuleKind::LawFinding: {
          LawFindingParams lp;
          lp.keywords = params.at("keywords").get<std::vector<std::string>>();
          lp.max_gap = params.value("max_gap", lp.max_gap);
          lp.min_numbers = params.value("min_numbers", lp.min_numbers);
          if (params.contains("blank_markers")) {
            lp.blank_markers = params["blank_markers"].get<std::vector<std::string>>();
          }
          rule.parameters = std::move(lp);
          break;
        }
        case RuleKind::DecimalTransform:
        case RuleKind::CustomKeyword: {
          KeywordParams kp;
          kp.keywords = params.at("keywords").get<std::vector<std::string>>();
          kp.max_gap = params.value("max_gap", kp.max_gap);
          rule.parameters = std::move(kp);
          break;
        }
      }
      rules.push_back(std::move(rule));
    }
    return RuleSet(std::move(rules), def);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, std::string("malformed rule set: ") + e.what());
  }
}

RuleSet RuleSet::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read rule set '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str(), path.parent_path());
}

std::string RuleSet::to_json() const {
  json rules = json::array();
  for (const auto& rule : rules_) {
    json params = std::visit(
        [](const auto& p) -> json {
          using P = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<P, UnitTable>) {
            return {{"unit_table", unit_table_to_json(p)}};
          } else if constexpr (std::is_same_v<P, LawFindingParams>) {
            return {{"keywords", p.keywords}, {"max_gap", p.max_gap}, {"min_numbers", p.min_numbers},
                    {"blank_markers", p.blank_markers}};
          } else {
            return {{"keywords", p.keywords}, {"max_gap", p.max_gap}};
          }
        },
        rule.parameters);
    json r;
    r["name"] = rule.name;
    r["kind"] = to_string(rule.kind);
    r["target"] = to_string(rule.target);
    r["parameters"] = params;
    rules.push_back(std::move(r));
  }
  json doc;
  doc["default_route"] = to_string(default_route_);
  doc["rules"] = rules;
  return doc.dump(2) + "\n";
}

Route classify_tokens(std::span<const std::string> tokens, const RuleSet& rules) {
  for (const auto& rule : rules.rules()) {
    std::optional<std::string> detail;
    std::visit(
        [&](const auto& p) {
          using P = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<P, UnitTable>) {
            if (auto m = match_unit_conversion(tokens, p)) {
              detail = m->dimension + ": " + m->first_form + " / " + m->second_form;
            }
          } else if constexpr (std::is_same_v<P, LawFindingParams>) {
            if (auto m = match_law_finding(tokens, p)) detail = m->matched;
          } else {
            if (auto m = match_keywords(tokens, p)) detail = m->matched;
          }
        },
        rule.parameters);
    if (detail) return Route{rule.target, rule.name, *detail};
  }
  return Route{rules.default_route(), std::nullopt, {}};
}

Route classify(const corpus::Problem& problem, const RuleSet& rules) {
  return classify_tokens(problem.tokens, rules);
}

}  // namespace mwp::classifier
