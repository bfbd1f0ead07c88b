// Copyright 2026 The vlmicl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "vlmicl/parser.hpp"

#include <array>
#include <cctype>
#include <set>
#include <tuple>

#include "vlmicl/error.hpp"
#include "text_util.hpp"

namespace vlmicl {

namespace {

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

bool is_index_separator(char c) {
  return c == ' ' || c == '\t' || c == ':' || c == '#' || c == '*' || c == '_' || c == '.' ||
         c == '-';
}

struct Vocabulary {
  // (lowercase alias, class index), class names included.
  std::vector<std::pair<std::string, std::size_t>> entries;
};

Vocabulary build_vocabulary(const Task& task, const SynonymTable& synonyms) {
  Vocabulary v;
  for (std::size_t c = 0; c < 2; ++c) v.entries.emplace_back(to_lower(task[c].name()), c);
  for (const auto& [alias, c] : synonyms.aliases()) v.entries.emplace_back(alias, c);
  return v;
}

bool word_at(std::string_view text, std::size_t pos, std::string_view word) {
  if (text.compare(pos, word.size(), word) != 0) return false;
  const bool left_ok = pos == 0 || !is_alnum(text[pos - 1]);
  const std::size_t end = pos + word.size();
  const bool right_ok = end >= text.size() || !is_alnum(text[end]);
  return left_ok && right_ok;
}

constexpr std::array<std::string_view, 7> kNegations = {"not ", "no ", "non-", "non ",
                                                        "isn't ", "without ", "not a "};

bool negated_at(std::string_view lower, std::size_t pos) {
  for (std::string_view neg : kNegations) {
    if (pos >= neg.size() && lower.substr(pos - neg.size(), neg.size()) == neg) {
      const std::size_t start = pos - neg.size();
      if (start == 0 || !is_alnum(lower[start - 1])) return true;
    }
  }
  return false;
}

constexpr unsigned kNegatedMention = 4u;

/// Bit 0: class 0 mentioned; bit 1: class 1 mentioned; bit 2: some mention is
/// negated ("not covid"). `lower` is lowercase.
unsigned mentions(std::string_view lower, const Vocabulary& vocab) {
  unsigned mask = 0;
  for (const auto& [alias, c] : vocab.entries) {
    for (std::size_t pos = lower.find(alias); pos != std::string_view::npos;
         pos = lower.find(alias, pos + 1)) {
      if (word_at(lower, pos, alias)) {
        mask |= 1u << c;
        if (negated_at(lower, pos)) mask |= kNegatedMention;
      }
    }
  }
  return mask;
}

struct IndexHit {
  std::size_t label_begin;  // first char after the number (or range)
  std::size_t label_end;    // start of the next "image <n>" or end of line
};

struct ImageRef {
  std::size_t begin;  // position of "image"
  std::size_t end;    // first char after the last number
  int first;
  int last;  // == first unless a range such as "images 7-9"
};

std::optional<int> read_number(std::string_view lower, std::size_t* p) {
  const std::size_t digits = *p;
  while (*p < lower.size() && is_digit(lower[*p])) ++*p;
  if (*p == digits || *p - digits > 6) return std::nullopt;
  return std::stoi(std::string(lower.substr(digits, *p - digits)));
}

/// Finds "image[s]<sep>*<n>" or "images <a>-<b>" / "images <a> to <b>" at or
/// after `from`; `lower` is lowercase.
std::optional<ImageRef> next_image_ref(std::string_view lower, std::size_t from) {
  for (std::size_t pos = lower.find("image", from); pos != std::string_view::npos;
       pos = lower.find("image", pos + 1)) {
    if (pos > 0 && std::isalpha(static_cast<unsigned char>(lower[pos - 1]))) continue;
    std::size_t p = pos + 5;
    if (p < lower.size() && lower[p] == 's') ++p;
    while (p < lower.size() && is_index_separator(lower[p])) ++p;
    const auto first = read_number(lower, &p);
    if (!first) continue;
    ImageRef ref{pos, p, *first, *first};
    std::size_t q = p;
    while (q < lower.size() && lower[q] == ' ') ++q;
    if (q < lower.size() && lower[q] == '-') {
      ++q;
    } else if (lower.compare(q, 3, "to ") == 0) {
      q += 3;
    } else {
      return ref;
    }
    while (q < lower.size() && lower[q] == ' ') ++q;
    if (const auto last = read_number(lower, &q); last && *last > *first && *last - *first < 9) {
      ref.last = *last;
      ref.end = q;
    }
    return ref;
  }
  return std::nullopt;
}

/// All segments of the line that refer to `index`.
std::vector<IndexHit> find_index(std::string_view lower, int index) {
  std::vector<IndexHit> hits;
  std::size_t from = 0;
  while (auto ref = next_image_ref(lower, from)) {
    if (ref->first <= index && index <= ref->last) {
      IndexHit hit{ref->end, lower.size()};
      if (auto other = next_image_ref(lower, ref->end)) hit.label_end = other->begin;
      hits.push_back(hit);
    }
    from = ref->end;
  }
  return hits;
}

constexpr std::array<std::string_view, 8> kLabelKeys = {
    "label", "classification", "prediction", "predicted label",
    "answer", "class", "diagnosis", "result"};

std::string_view strip_decoration(std::string_view s) {
  while (!s.empty()) {
    const char c = s.front();
    if (c == ' ' || c == '\t' || c == '-' || c == '*' || c == '_' || c == '#' || c == '>' ||
        c == '`' || c == '"' || c == '\'' || c == '[' || c == '(') {
      s.remove_prefix(1);
    } else {
      break;
    }
  }
  return s;
}

/// Returns the class index when the line begins with a class mention.
std::optional<std::size_t> leading_class(std::string_view lower, const Vocabulary& vocab) {
  std::string_view s = strip_decoration(lower);
  // "1." / "1)" list numbering.
  std::size_t p = 0;
  while (p < s.size() && is_digit(s[p])) ++p;
  if (p > 0 && p < s.size() && (s[p] == '.' || s[p] == ')')) s = strip_decoration(s.substr(p + 1));
  for (std::string_view key : kLabelKeys) {
    if (s.substr(0, key.size()) == key) {
      std::string_view rest = strip_decoration(s.substr(key.size()));
      if (!rest.empty() && rest.front() == ':') {
        s = strip_decoration(rest.substr(1));
        break;
      }
    }
  }
  // A leading negation ("not covid") still marks the line as the answer.
  for (std::string_view neg : {"not ", "non-", "no "}) {
    if (s.substr(0, neg.size()) == neg) {
      s.remove_prefix(neg.size());
      break;
    }
  }
  std::optional<std::size_t> best;
  std::size_t best_len = 0;
  for (const auto& [alias, c] : vocab.entries) {
    if (alias.size() > best_len && word_at(s, 0, alias)) {
      best = c;
      best_len = alias.size();
    }
  }
  return best;
}

constexpr std::array<std::string_view, 10> kRefusalMarkers = {
    "cannot",    "can't",        "can not",   "unable to",   "not able to",
    "i'm sorry", "i am sorry",   "not possible", "won't be able", "decline to"};

}  // namespace

std::string_view status_name(ParseStatus status) {
  switch (status) {
    case ParseStatus::kParsed: return "parsed";
    case ParseStatus::kAbstained: return "abstained";
    case ParseStatus::kUnparseable: return "unparseable";
    case ParseStatus::kAmbiguous: return "ambiguous";
  }
  return "unparseable";
}

std::optional<ParseStatus> parse_status(std::string_view text) {
  for (ParseStatus s : {ParseStatus::kParsed, ParseStatus::kAbstained, ParseStatus::kUnparseable,
                        ParseStatus::kAmbiguous}) {
    if (status_name(s) == text) return s;
  }
  return std::nullopt;
}

nlohmann::json Prediction::to_json() const {
  nlohmann::json j = {{"item_id", item_id},
                      {"group", group},
                      {"index", index},
                      {"status", status_name(status)},
                      {"explanation", explanation},
                      {"matched_line", matched_line}};
  j["predicted"] = predicted ? nlohmann::json(predicted->name()) : nlohmann::json(nullptr);
  return j;
}

Prediction Prediction::from_json(const nlohmann::json& j) {
  Prediction p;
  p.item_id = j.at("item_id").get<std::string>();
  p.group = j.at("group").get<int>();
  p.index = j.at("index").get<int>();
  const auto status = parse_status(j.at("status").get<std::string>());
  if (!status) throw Error(ErrorCategory::kIntegrity, "unknown prediction status");
  p.status = *status;
  if (!j.at("predicted").is_null()) p.predicted.emplace(j.at("predicted").get<std::string>());
  p.explanation = j.value("explanation", "");
  p.matched_line = j.value("matched_line", "");
  return p;
}

SynonymTable::SynonymTable(const Task& task, const std::map<std::string, std::string>& aliases) {
  for (const auto& [alias_text, label] : aliases) {
    const std::string alias = to_lower(trim(alias_text));
    if (alias.empty()) throw Error(ErrorCategory::kConfig, "empty synonym");
    const auto c = task.index_of(label);
    if (!c) throw Error(ErrorCategory::kConfig, "synonym '" + alias + "' maps to unknown class '" + label + "'");
    const auto other = task.index_of(alias);
    if (other && *other != *c) {
      throw Error(ErrorCategory::kConfig, "synonym '" + alias + "' is the name of the other class");
    }
    const auto [it, inserted] = aliases_.emplace(alias, *c);
    if (!inserted && it->second != *c) {
      throw Error(ErrorCategory::kConfig, "synonym '" + alias + "' maps to both classes");
    }
  }
}

SynonymTable SynonymTable::defaults(const Task& task) {
  const auto covid = task.index_of("covid");
  const auto normal = task.index_of("normal");
  if (!covid || !normal) return SynonymTable();
  return SynonymTable(task, {{"covid", task[*covid].name()},
                             {"covid-19", task[*covid].name()},
                             {"positive", task[*covid].name()},
                             {"normal", task[*normal].name()},
                             {"healthy", task[*normal].name()},
                             {"negative", task[*normal].name()}});
}

nlohmann::json SynonymTable::to_json(const Task& task) const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [alias, c] : aliases_) j[alias] = task[c].name();
  return j;
}

SynonymTable SynonymTable::from_json(const Task& task, const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCategory::kConfig, "synonyms must be a JSON object");
  std::map<std::string, std::string> m;
  for (const auto& [alias, label] : j.items()) m.emplace(alias, label.get<std::string>());
  return SynonymTable(task, m);
}

bool looks_like_refusal(std::string_view raw) {
  const std::string lower = to_lower(raw);
  for (std::string_view marker : kRefusalMarkers) {
    if (lower.find(marker) != std::string::npos) return true;
  }
  return false;
}

std::vector<Prediction> parse_labels(std::string_view raw, std::span<const QueryRef> expected,
                                     const Task& task, const SynonymTable& synonyms) {
  const Vocabulary vocab = build_vocabulary(task, synonyms);
  const auto lines = split_lines(raw);
  std::vector<std::string> lowered;
  lowered.reserve(lines.size());
  for (auto line : lines) lowered.push_back(to_lower(line));
  // A segment answers at most one query per index, so ICL3 groups (all
  // numbered 3) read successive lines while "Image 7: A, Image 8: B" serves
  // both queries from one line.
  std::set<std::tuple<std::size_t, std::size_t, int>> used;
  std::vector<bool> consumed(lines.size(), false);
  const bool refusal = looks_like_refusal(raw);

  std::vector<Prediction> out;
  std::vector<std::size_t> matched_at;
  for (const auto& q : expected) {
    Prediction p;
    p.item_id = q.item_id;
    p.group = q.group;
    p.index = q.index;
    std::optional<std::size_t> hit_line;
    for (std::size_t i = 0; i < lines.size() && !hit_line; ++i) {
      const std::string& lower = lowered[i];
      const auto hits = find_index(lower, q.index);
      for (const auto& hit : hits) {
        if (used.count({i, hit.label_begin, q.index})) continue;
        const std::string_view segment =
            std::string_view(lower).substr(hit.label_begin, hit.label_end - hit.label_begin);
        const unsigned mask = mentions(segment, vocab);
        if ((mask & 3u) == 0) continue;
        used.insert({i, hit.label_begin, q.index});
        hit_line = i;
        if ((mask & 3u) == 3u || (mask & kNegatedMention) != 0) {
          p.status = ParseStatus::kAmbiguous;
        } else {
          p.status = ParseStatus::kParsed;
          p.predicted = task[mask == 1u ? 0 : 1];
        }
        break;
      }
      if (hit_line || !hits.empty() || expected.size() != 1 || consumed[i]) continue;
      const auto lead = leading_class(lower, vocab);
      if (!lead) continue;
      hit_line = i;
      const unsigned mask = mentions(lower, vocab);
      if ((mask & 3u) == 3u || (mask & kNegatedMention) != 0) {
        p.status = ParseStatus::kAmbiguous;
      } else {
        p.status = ParseStatus::kParsed;
        p.predicted = task[*lead];
      }
    }
    if (hit_line) {
      consumed[*hit_line] = true;
      p.matched_line = std::string(lines[*hit_line]);
      matched_at.push_back(*hit_line);
    } else {
      p.status = refusal ? ParseStatus::kAbstained : ParseStatus::kUnparseable;
      matched_at.push_back(lines.size());
    }
    out.push_back(std::move(p));
  }
  // Explanation: unconsumed lines after the matched line.
  for (std::size_t k = 0; k < out.size(); ++k) {
    const std::size_t start = matched_at[k] < lines.size() ? matched_at[k] + 1 : 0;
    std::string text;
    for (std::size_t i = start; i < lines.size(); ++i) {
      if (consumed[i]) continue;
      const std::string t = trim(lines[i]);
      if (t.empty()) continue;
      if (!text.empty()) text += "\n";
      text += t;
    }
    out[k].explanation = std::move(text);
  }
  return out;
}

}  // namespace vlmicl
