#pragma once

// Extraction of structured fields from free-text model answers to the
// five-task prompt.
//
// Segmentation looks for task headings numbered 1..5 in sequence. Headings
// with explicit markup ("## 1.", "**1.", "Task 1:") are tried first, plain
// "1." lines second, heading keywords last. A heading is only accepted when
// its number is the next expected one, so the numbered confounder list that
// follows heading 5 is never mistaken for a new task.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "evsens/error.hpp"
#include "evsens/format.hpp"
#include "evsens/study.hpp"

namespace evsens {

struct LlmAssessment {
  std::optional<double> reported_evalue;
  std::string calculation;
  std::string cornfield_analysis;
  std::string evalue_analysis;
  std::string conclusion_text;
  std::optional<ConclusionLabel> conclusion;
  std::vector<std::string> confounders;
  std::vector<std::string> warnings;

  friend bool operator==(const LlmAssessment&, const LlmAssessment&) = default;
};

namespace parse_detail {

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
inline bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

inline bool starts_with_at(std::string_view s, std::size_t pos, std::string_view what) {
  return s.size() >= pos + what.size() && s.substr(pos, what.size()) == what;
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

enum class HeadingStrength { None, Plain, Marked };

struct HeadingMatch {
  HeadingStrength strength = HeadingStrength::None;
  int number = 0;
  std::string rest;  // heading text after the number, markup removed
};

inline std::string strip_markup(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c != '*' && c != '_' && c != '#' && c != '`') out.push_back(c);
  }
  return std::string(trim(out));
}

inline HeadingMatch match_heading(std::string_view line) {
  HeadingMatch m;
  std::size_t i = 0;
  const auto skip_ws = [&] {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
  };
  skip_ws();
  bool marked = false;
  while (i < line.size() && line[i] == '#') {
    ++i;
    marked = true;
  }
  skip_ws();
  while (i < line.size() && (line[i] == '*' || line[i] == '_')) {
    ++i;
    marked = true;
  }
  skip_ws();
  for (std::string_view word : {"task", "step", "part"}) {
    if (lower(line.substr(i, word.size())) == word) {
      std::size_t j = i + word.size();
      if (j < line.size() && line[j] == ' ') {
        i = j;
        marked = true;
        skip_ws();
      }
      break;
    }
  }
  if (i >= line.size() || !is_digit(line[i])) return m;
  const int number = line[i] - '0';
  ++i;
  if (i < line.size() && is_digit(line[i])) return m;  // 10, 11, ... are not tasks
  if (number < 1 || number > 5) return m;
  bool has_terminator = false;
  if (i < line.size() && (line[i] == '.' || line[i] == ')' || line[i] == ':')) {
    ++i;
    has_terminator = true;
  }
  // "Task 1" may omit the terminator; a bare "1" line may not.
  if (!has_terminator && !marked) return m;
  if (i < line.size() && is_digit(line[i])) return m;  // "1.5" is a number
  m.strength = marked ? HeadingStrength::Marked : HeadingStrength::Plain;
  m.number = number;
  m.rest = strip_markup(line.substr(i));
  while (!m.rest.empty() && (m.rest.front() == ':' || m.rest.front() == '.')) {
    m.rest.erase(0, 1);
  }
  m.rest = std::string(trim(m.rest));
  return m;
}

struct Block {
  bool found = false;
  std::string heading;
  std::string body;
};

using Blocks = std::array<Block, 5>;

inline int count_found(const Blocks& b) {
  return static_cast<int>(std::count_if(b.begin(), b.end(), [](const Block& x) { return x.found; }));
}

/// Sequential segmentation; `accept(line, expected)` returns the heading
/// remainder when the line opens block `expected`.
template <typename Accept>
Blocks segment_with(const std::vector<std::string_view>& lines, Accept accept) {
  Blocks blocks;
  int current = -1;
  int expected = 1;
  for (const auto& line : lines) {
    if (expected <= 5) {
      if (auto rest = accept(line, expected)) {
        current = expected - 1;
        blocks[current].found = true;
        blocks[current].heading = *rest;
        ++expected;
        continue;
      }
    }
    if (current >= 0) {
      blocks[current].body.append(line);
      blocks[current].body.push_back('\n');
    }
  }
  for (auto& b : blocks) b.body = std::string(trim(b.body));
  return blocks;
}

inline Blocks segment_by_number(const std::vector<std::string_view>& lines, HeadingStrength min) {
  return segment_with(lines, [min](std::string_view line, int expected) -> std::optional<std::string> {
    const auto m = match_heading(line);
    if (m.strength == HeadingStrength::None || m.number != expected) return std::nullopt;
    if (min == HeadingStrength::Marked && m.strength != HeadingStrength::Marked) return std::nullopt;
    return m.rest;
  });
}

inline Blocks segment_by_keyword(const std::vector<std::string_view>& lines) {
  static const std::array<std::vector<std::string_view>, 5> keywords = {{
      {"e-value calculation", "calculating the e-value", "calculate the e-value", "calculation"},
      {"cornfield"},
      {"e-value perspective", "e-value evaluation", "e-value analysis"},
      {"conclusion"},
      {"confounder", "confounding variables"},
  }};
  return segment_with(lines, [](std::string_view line, int expected) -> std::optional<std::string> {
    const auto t = trim(line);
    const bool heading_like =
        !t.empty() && (t.front() == '#' || t.front() == '*' || (t.size() <= 80 && t.back() == ':'));
    if (!heading_like) return std::nullopt;
    const auto l = lower(t);
    for (const auto& k : keywords[expected - 1]) {
      if (l.find(k) != std::string::npos) return strip_markup(t);
    }
    return std::nullopt;
  });
}

inline Blocks segment(std::string_view text) {
  const auto lines = split_lines(text);
  Blocks marked = segment_by_number(lines, HeadingStrength::Marked);
  if (count_found(marked) >= 3) return marked;
  Blocks plain = segment_by_number(lines, HeadingStrength::Plain);
  Blocks best = count_found(plain) > count_found(marked) ? plain : marked;
  if (count_found(best) > 0) return best;
  return segment_by_keyword(lines);
}

// ---- numbers ---------------------------------------------------------------

struct NumberToken {
  std::size_t begin = 0;
  std::size_t end = 0;
  double value = 0.0;
  bool malformed = false;  // part of a range or a comma-grouped number
  bool anchored = false;   // directly preceded by =, :, ≈, ~, "is", "of", ...
};

inline bool has_utf8(std::string_view s, std::size_t pos, std::initializer_list<std::string_view> seqs) {
  for (auto seq : seqs) {
    if (starts_with_at(s, pos, seq)) return true;
  }
  return false;
}

inline bool ends_with_utf8(std::string_view s, std::size_t end, std::string_view seq) {
  return end >= seq.size() && s.substr(end - seq.size(), seq.size()) == seq;
}

constexpr std::string_view kEnDash = "\xE2\x80\x93";
constexpr std::string_view kEmDash = "\xE2\x80\x94";
constexpr std::string_view kApprox = "\xE2\x89\x88";

inline std::vector<NumberToken> scan_numbers(std::string_view s) {
  std::vector<NumberToken> out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!is_digit(s[i]) || (i > 0 && (is_alnum(s[i - 1]) || s[i - 1] == '.' || s[i - 1] == '_'))) {
      ++i;
      continue;
    }
    NumberToken t;
    t.begin = i;
    while (i < s.size() && is_digit(s[i])) ++i;
    if (i + 1 < s.size() && s[i] == '.' && is_digit(s[i + 1])) {
      ++i;
      while (i < s.size() && is_digit(s[i])) ++i;
    }
    t.end = i;
    if (i < s.size() && is_alnum(s[i])) continue;  // "2nd", "3x"
    fmt::parse_double(s.substr(t.begin, t.end - t.begin), t.value);
    out.push_back(t);
  }

  auto skip_back = [&](std::size_t pos) {
    while (pos > 0 && (s[pos - 1] == ' ' || s[pos - 1] == '*' || s[pos - 1] == '`')) --pos;
    return pos;
  };
  auto skip_fwd = [&](std::size_t pos) {
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '*' || s[pos] == '`')) ++pos;
    return pos;
  };

  for (std::size_t k = 0; k < out.size(); ++k) {
    auto& t = out[k];
    // comma grouping or decimal comma: 1,234 / 3,686
    if (t.end + 1 < s.size() && s[t.end] == ',' && is_digit(s[t.end + 1])) t.malformed = true;
    if (t.begin >= 2 && s[t.begin - 1] == ',' && is_digit(s[t.begin - 2])) t.malformed = true;
    // ranges: 1.3-1.4, 1.3–1.4, 1.3 to 1.4
    const auto after = skip_fwd(t.end);
    auto digit_after = [&](std::size_t pos) {
      pos = skip_fwd(pos);
      return pos < s.size() && is_digit(s[pos]);
    };
    const bool range =
        (t.end + 1 < s.size() && s[t.end] == '-' && is_digit(s[t.end + 1])) ||
        (has_utf8(s, after, {kEnDash, kEmDash}) && digit_after(after + 3)) ||
        (starts_with_at(s, after, "to ") && digit_after(after + 3));
    if (range) {
      t.malformed = true;
      if (k + 1 < out.size()) out[k + 1].malformed = true;
    }
    const auto before = skip_back(t.begin);
    if (before > 0) {
      const char c = s[before - 1];
      if (c == '=' || c == ':' || c == '~') t.anchored = true;
      if (ends_with_utf8(s, before, kApprox)) t.anchored = true;
      for (std::string_view w : {"is", "of", "equals", "approximately", "about", "be", "at"}) {
        if (before >= w.size() && lower(s.substr(before - w.size(), w.size())) == w &&
            (before == w.size() || !is_alnum(s[before - w.size() - 1]))) {
          t.anchored = true;
        }
      }
    }
  }
  return out;
}

/// Sentence spans: split at newlines and at . ! ? followed by whitespace or
/// end of text (so decimals are never split).
inline std::vector<std::pair<std::size_t, std::size_t>> sentences(std::string_view s) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    const bool boundary =
        c == '\n' || ((c == '.' || c == '!' || c == '?') &&
                      (i + 1 == s.size() || s[i + 1] == ' ' || s[i + 1] == '\n' || s[i + 1] == '*'));
    if (boundary) {
      if (i > start) out.emplace_back(start, i);
      start = i + 1;
    }
  }
  if (start < s.size()) out.emplace_back(start, s.size());
  return out;
}

/// Positions of "E-value" mentions (E-value, E value, Evalue, E-values).
inline std::vector<std::size_t> evalue_mentions(std::string_view s) {
  static const std::regex re(R"((^|[^A-Za-z])[Ee][- ]?[Vv]alues?)");
  std::vector<std::size_t> out;
  const std::string str(s);
  for (std::sregex_iterator it(str.begin(), str.end(), re), end; it != end; ++it) {
    out.push_back(static_cast<std::size_t>(it->position(0) + it->length(1)));
  }
  return out;
}

struct EvalueParse {
  std::optional<double> value;
  std::optional<std::string> warning;
};

inline EvalueParse parse_evalue_detailed(std::string_view text) {
  EvalueParse result;
  const auto mentions = evalue_mentions(text);
  if (mentions.empty()) {
    result.warning = "no E-value mention found";
    return result;
  }
  const auto tokens = scan_numbers(text);
  std::optional<NumberToken> chosen;
  for (const auto& [sb, se] : sentences(text)) {
    std::optional<std::size_t> first_mention;
    for (auto m : mentions) {
      if (m >= sb && m < se) {
        first_mention = m;
        break;
      }
    }
    if (!first_mention) continue;
    std::vector<NumberToken> after;
    std::optional<NumberToken> last_before;
    for (const auto& t : tokens) {
      if (t.begin < sb || t.end > se) continue;
      if (t.begin > *first_mention) {
        after.push_back(t);
      } else {
        last_before = t;
      }
    }
    std::optional<NumberToken> pick;
    for (const auto& t : after) {
      if (t.anchored) pick = t;
    }
    if (!pick && !after.empty()) pick = after.back();
    if (!pick) pick = last_before;
    if (pick) chosen = pick;
  }
  if (!chosen) {
    result.warning = "no numeric E-value found";
    return result;
  }
  if (chosen->malformed) {
    result.warning = "E-value given as a range or non-plain number: '" +
                     std::string(text.substr(chosen->begin, chosen->end - chosen->begin)) + "'";
    return result;
  }
  if (!(std::isfinite(chosen->value) && chosen->value > 0.0)) {
    result.warning = "E-value is not a positive number";
    return result;
  }
  result.value = chosen->value;
  return result;
}

// ---- conclusion labels -------------------------------------------------------

struct ConclusionParse {
  std::optional<ConclusionLabel> label;
  std::optional<std::string> warning;
};

inline ConclusionParse parse_conclusion_detailed(std::string_view text) {
  std::string l = lower(text);
  // Drop echoes of the instruction's own option list.
  static const std::regex echo(
      R"re(["'“]?unlikely["'”]?\s*,\s*["'“]?possibly["'”]?\s*,?\s*or\s+["'“]?highly\s+likely["'”]?)re");
  l = std::regex_replace(l, echo, " ");

  static const std::regex label_re(R"(\b(highly\s+likely|unlikely|possibly)\b)");
  std::vector<std::pair<std::size_t, ConclusionLabel>> hits;
  for (std::sregex_iterator it(l.begin(), l.end(), label_re), end; it != end; ++it) {
    const std::string m = (*it)[1].str();
    ConclusionLabel label = m == "unlikely"   ? ConclusionLabel::Unlikely
                            : m == "possibly" ? ConclusionLabel::Possibly
                                              : ConclusionLabel::HighlyLikely;
    hits.emplace_back(static_cast<std::size_t>(it->position(0)), label);
  }
  ConclusionParse r;
  if (hits.empty()) {
    r.warning = "no conclusion label (unlikely / possibly / highly likely) found";
    return r;
  }
  const bool uniform = std::all_of(hits.begin(), hits.end(),
                                   [&](const auto& h) { return h.second == hits.front().second; });
  if (uniform) {
    r.label = hits.front().second;
    return r;
  }
  static const std::regex anchor_re(R"(\bconclu[a-z]*)");
  std::optional<ConclusionLabel> pick;
  for (std::sregex_iterator it(l.begin(), l.end(), anchor_re), end; it != end; ++it) {
    const auto a = static_cast<std::size_t>(it->position(0));
    for (const auto& [pos, label] : hits) {
      if (pos > a) {
        pick = label;
        break;
      }
    }
  }
  if (!pick) {
    r.warning = "several conclusion labels without a deciding 'conclusion' statement";
    return r;
  }
  r.label = pick;
  return r;
}

// ---- confounder lists ---------------------------------------------------------

inline std::size_t indent_of(std::string_view line) {
  std::size_t n = 0;
  for (char c : line) {
    if (c == ' ') {
      ++n;
    } else if (c == '\t') {
      n += 4;
    } else {
      break;
    }
  }
  return n;
}

/// Returns the item text when `line` is a list item, with its marker removed.
inline std::optional<std::string> list_item(std::string_view line) {
  auto t = trim(line);
  if (t.empty()) return std::nullopt;
  std::size_t i = 0;
  if (is_digit(t[0])) {
    while (i < t.size() && is_digit(t[i])) ++i;
    if (i >= t.size() || (t[i] != '.' && t[i] != ')')) return std::nullopt;
    ++i;
  } else if (t[0] == '-' || t[0] == '+' || (t[0] == '*' && t.size() > 1 && t[1] == ' ')) {
    i = 1;
  } else if (starts_with_at(t, 0, "\xE2\x80\xA2")) {  // bullet
    i = 3;
  } else {
    return std::nullopt;
  }
  return std::string(trim(t.substr(i)));
}

/// Short title of a list item: the bold lead-in if any, else the text
/// before ": " or " - ", else the whole item.
inline std::string item_title(std::string item) {
  std::string title;
  if (item.rfind("**", 0) == 0) {
    const auto close = item.find("**", 2);
    title = close == std::string::npos ? item.substr(2) : item.substr(2, close - 2);
  } else {
    title = item;
    for (std::string_view sep : {std::string_view(": "), std::string_view(" - "), kEnDash, kEmDash}) {
      const auto pos = title.find(sep);
      if (pos != std::string::npos && pos > 0) title = title.substr(0, pos);
    }
  }
  title = strip_markup(title);
  while (!title.empty() && (title.back() == ':' || title.back() == '.' || title.back() == ' ')) {
    title.pop_back();
  }
  return title;
}

struct ConfounderParse {
  std::vector<std::string> items;
  std::vector<std::string> warnings;
};

inline ConfounderParse parse_confounders_detailed(std::string_view text) {
  ConfounderParse r;
  std::optional<std::size_t> base_indent;
  std::vector<std::string> raw;
  for (const auto& line : split_lines(text)) {
    auto item = list_item(line);
    if (!item) continue;
    const auto ind = indent_of(line);
    if (!base_indent) base_indent = ind;
    if (ind > *base_indent) continue;  // nested detail under an item
    raw.push_back(item_title(*item));
  }
  if (raw.empty() && !trim(text).empty()) {
    const std::string body(trim(text));
    if (body.find(';') != std::string::npos) {
      std::size_t start = 0;
      while (start <= body.size()) {
        auto pos = body.find(';', start);
        if (pos == std::string::npos) pos = body.size();
        raw.push_back(item_title(std::string(trim(std::string_view(body).substr(start, pos - start)))));
        start = pos + 1;
      }
      r.warnings.push_back("confounders were not given as a list; split on ';'");
    }
  }
  for (auto& item : raw) {
    if (item.empty()) continue;
    const auto key = lower(item);
    const bool dup = std::any_of(r.items.begin(), r.items.end(),
                                 [&](const std::string& x) { return lower(x) == key; });
    if (!dup) r.items.push_back(item);
  }
  if (r.items.size() > 5) {
    r.warnings.push_back("more than 5 confounders listed; kept the first 5");
    r.items.resize(5);
  }
  if (r.items.empty()) {
    r.warnings.push_back("no confounders found");
  } else if (r.items.size() != 3) {
    r.warnings.push_back("expected 3 confounders, found " + std::to_string(r.items.size()));
  }
  return r;
}

inline std::string block_text(const Block& b) {
  if (b.heading.empty()) return b.body;
  if (b.body.empty()) return b.heading;
  return b.heading + "\n" + b.body;
}

}  // namespace parse_detail

/// Final number stated next to an "E-value" mention, if any.
inline std::optional<double> parse_evalue(std::string_view task1_text) {
  return parse_detail::parse_evalue_detailed(task1_text).value;
}

inline std::optional<ConclusionLabel> parse_conclusion(std::string_view task4_text) {
  return parse_detail::parse_conclusion_detailed(task4_text).label;
}

inline std::vector<std::string> parse_confounders(std::string_view task5_text) {
  return parse_detail::parse_confounders_detailed(task5_text).items;
}

/// Never fails on non-empty input; anything missing becomes an absent value
/// plus a warning.
inline LlmAssessment parse_assessment(std::string_view response) {
  using namespace parse_detail;
  if (trim(response).empty()) throw Error(ErrorKind::EmptyResponse, "response text is empty");

  LlmAssessment a;
  const Blocks blocks = segment(response);
  const int found = count_found(blocks);
  static constexpr std::array<std::string_view, 5> kNames = {
      "1 (E-value calculation)", "2 (Cornfield perspective)", "3 (E-value perspective)",
      "4 (conclusion)", "5 (confounders)"};
  if (found == 0) {
    a.warnings.push_back("no task blocks found; parsed the whole response");
  } else {
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      if (!blocks[i].found) a.warnings.push_back("task block " + std::string(kNames[i]) + " not found");
    }
  }
  auto text_for = [&](std::size_t i) -> std::string {
    if (found == 0) return std::string(response);
    return blocks[i].found ? block_text(blocks[i]) : std::string();
  };

  a.calculation = found == 0 ? std::string() : blocks[0].body;
  a.cornfield_analysis = blocks[1].body;
  a.evalue_analysis = blocks[2].body;
  a.conclusion_text = blocks[3].body;

  if (const auto t1 = text_for(0); !t1.empty()) {
    const auto e = parse_evalue_detailed(t1);
    a.reported_evalue = e.value;
    if (e.warning) a.warnings.push_back("E-value: " + *e.warning);
  } else {
    a.warnings.push_back("E-value: no calculation text");
  }

  if (const auto t4 = text_for(3); !t4.empty()) {
    const auto c = parse_conclusion_detailed(t4);
    a.conclusion = c.label;
    if (c.warning) a.warnings.push_back("conclusion: " + *c.warning);
  } else {
    a.warnings.push_back("conclusion: no conclusion text");
  }

  if (found > 0 && blocks[4].found) {
    auto c = parse_confounders_detailed(blocks[4].body);
    a.confounders = std::move(c.items);
    for (auto& w : c.warnings) a.warnings.push_back("confounders: " + w);
  } else {
    a.warnings.push_back("confounders: no confounder block");
  }
  return a;
}

inline nlohmann::ordered_json to_json(const LlmAssessment& a) {
  nlohmann::ordered_json j;
  j["reported_evalue"] = a.reported_evalue ? nlohmann::ordered_json(*a.reported_evalue) : nlohmann::ordered_json(nullptr);
  j["conclusion"] = a.conclusion ? nlohmann::ordered_json(std::string(to_key(*a.conclusion))) : nlohmann::ordered_json(nullptr);
  j["confounders"] = a.confounders;
  j["calculation"] = a.calculation;
  j["cornfield_analysis"] = a.cornfield_analysis;
  j["evalue_analysis"] = a.evalue_analysis;
  j["conclusion_text"] = a.conclusion_text;
  j["warnings"] = a.warnings;
  return j;
}

inline LlmAssessment assessment_from_json(const nlohmann::json& j) {
  LlmAssessment a;
  if (!j.at("reported_evalue").is_null()) a.reported_evalue = j["reported_evalue"].get<double>();
  if (!j.at("conclusion").is_null()) {
    a.conclusion = parse_label_key(j["conclusion"].get<std::string>());
    if (!a.conclusion) throw Error(ErrorKind::ParseError, "unknown conclusion label");
  }
  a.confounders = j.at("confounders").get<std::vector<std::string>>();
  a.calculation = j.value("calculation", "");
  a.cornfield_analysis = j.value("cornfield_analysis", "");
  a.evalue_analysis = j.value("evalue_analysis", "");
  a.conclusion_text = j.value("conclusion_text", "");
  a.warnings = j.value("warnings", std::vector<std::string>{});
  return a;
}

}  // namespace evsens
