#include "nerproj/corpus_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>

namespace nerproj {

namespace {

bool has_whitespace(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
  });
}

bool parse_index(std::string_view s, std::size_t& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string pair_label(std::string_view id) {
  return id.empty() ? std::string("alignment") : "pair " + std::string(id);
}

}  // namespace

std::string_view to_string(EntityType t) {
  switch (t) {
    case EntityType::PER: return "PER";
    case EntityType::LOC: return "LOC";
    case EntityType::ORG: return "ORG";
  }
  return "?";
}

std::optional<EntityType> entity_type_from_string(std::string_view s) {
  if (s == "PER") return EntityType::PER;
  if (s == "LOC") return EntityType::LOC;
  if (s == "ORG") return EntityType::ORG;
  return std::nullopt;
}

std::size_t Tag::index() const {
  if (prefix == TagPrefix::O) return 0;
  return 1 + 2 * static_cast<std::size_t>(type) + (prefix == TagPrefix::I ? 1 : 0);
}

Tag Tag::from_index(std::size_t index) {
  if (index == 0) return outside();
  const auto type = static_cast<EntityType>((index - 1) / 2);
  return (index - 1) % 2 == 0 ? begin(type) : inside(type);
}

std::string to_string(const Tag& tag) {
  switch (tag.prefix) {
    case TagPrefix::O: return "O";
    case TagPrefix::B: return "B-" + std::string(to_string(tag.type));
    case TagPrefix::I: return "I-" + std::string(to_string(tag.type));
  }
  return "?";
}

std::optional<Tag> tag_from_string(std::string_view s) {
  if (s == "O") return Tag::outside();
  if (s.size() < 3 || s[1] != '-') return std::nullopt;
  const auto body = s.substr(2);
  if (s[0] != 'B' && s[0] != 'I') return std::nullopt;
  if (body == "MISC") return Tag::outside();
  const auto type = entity_type_from_string(body);
  if (!type) return std::nullopt;
  return s[0] == 'B' ? Tag::begin(*type) : Tag::inside(*type);
}

bool is_iob_valid(const TagSequence& tags) {
  for (std::size_t k = 0; k < tags.size(); ++k) {
    if (tags[k].prefix != TagPrefix::I) continue;
    if (k == 0 || tags[k - 1].is_outside() || tags[k - 1].type != tags[k].type) return false;
  }
  return true;
}

std::size_t repair_iob(TagSequence& tags) {
  std::size_t repairs = 0;
  for (std::size_t k = 0; k < tags.size(); ++k) {
    if (tags[k].prefix != TagPrefix::I) continue;
    if (k == 0 || tags[k - 1].is_outside() || tags[k - 1].type != tags[k].type) {
      tags[k].prefix = TagPrefix::B;
      ++repairs;
    }
  }
  return repairs;
}

void validate(const LabeledSentence& sentence) {
  const auto where = "sentence " + sentence.id + ": ";
  if (sentence.tokens.size() != sentence.tags.size()) {
    throw DataError(where + std::to_string(sentence.tokens.size()) + " tokens but " +
                    std::to_string(sentence.tags.size()) + " tags");
  }
  for (const auto& token : sentence.tokens) {
    if (token.empty() || has_whitespace(token)) {
      throw DataError(where + "empty token or token containing whitespace");
    }
  }
  if (!is_iob_valid(sentence.tags)) throw DataError(where + "tag sequence is not IOB-valid");
}

std::vector<EntitySpan> spans_from_iob(const TagSequence& tags) {
  std::vector<EntitySpan> spans;
  for (std::size_t k = 0; k < tags.size(); ++k) {
    const auto& tag = tags[k];
    switch (tag.prefix) {
      case TagPrefix::O:
        break;
      case TagPrefix::B:
        spans.push_back({tag.type, k, k});
        break;
      case TagPrefix::I:
        if (spans.empty() || spans.back().end + 1 != k || spans.back().etype != tag.type) {
          throw DataError("dangling I-" + std::string(to_string(tag.type)) + " at position " +
                          std::to_string(k));
        }
        spans.back().end = k;
        break;
    }
  }
  return spans;
}

TagSequence iob_from_spans(const std::vector<EntitySpan>& spans, std::size_t length) {
  TagSequence tags(length, Tag::outside());
  std::vector<bool> covered(length, false);
  for (const auto& span : spans) {
    if (span.start > span.end || span.end >= length) {
      throw DataError("span [" + std::to_string(span.start) + ", " + std::to_string(span.end) +
                      "] out of range for length " + std::to_string(length));
    }
    for (std::size_t k = span.start; k <= span.end; ++k) {
      if (covered[k]) {
        throw DataError("overlapping spans at position " + std::to_string(k));
      }
      covered[k] = true;
      tags[k] = k == span.start ? Tag::begin(span.etype) : Tag::inside(span.etype);
    }
  }
  return tags;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(pos));
      break;
    }
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return lines;
}

ConllCorpus parse_conll(std::string_view text) {
  ConllCorpus corpus;
  LabeledSentence current;

  auto flush = [&] {
    if (current.tokens.empty()) return;
    current.id = std::to_string(corpus.sentences.size() + 1);
    corpus.repairs += repair_iob(current.tags);
    corpus.sentences.push_back(std::move(current));
    current = {};
  };

  const auto lines = split_lines(text);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const auto line = lines[n];
    const std::size_t line_no = n + 1;
    if (line.empty()) {
      flush();
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos || line.find('\t', tab + 1) != std::string_view::npos) {
      throw ParseError(line_no, "expected \"token<TAB>tag\"");
    }
    const auto token = line.substr(0, tab);
    const auto tag_text = line.substr(tab + 1);
    if (token.empty() || has_whitespace(token)) {
      throw ParseError(line_no, "empty token or token containing whitespace");
    }
    const auto tag = tag_from_string(tag_text);
    if (!tag) throw ParseError(line_no, "invalid tag \"" + std::string(tag_text) + "\"");
    if (tag->is_outside() && tag_text != "O") ++corpus.misc_dropped;
    current.tokens.emplace_back(token);
    current.tags.push_back(*tag);
  }
  flush();
  return corpus;
}

std::string write_conll(const std::vector<LabeledSentence>& sentences) {
  std::string out;
  for (const auto& sentence : sentences) {
    for (std::size_t k = 0; k < sentence.tokens.size(); ++k) {
      out += sentence.tokens[k];
      out += '\t';
      out += to_string(sentence.tags[k]);
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

std::vector<std::string> split_tokens(std::string_view line) {
  std::vector<std::string> tokens;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\r')) ++pos;
    const auto start = pos;
    while (pos < line.size() && line[pos] != ' ' && line[pos] != '\r') ++pos;
    if (pos > start) tokens.emplace_back(line.substr(start, pos - start));
  }
  return tokens;
}

std::vector<SentencePair> parse_bitext(std::string_view text) {
  std::vector<SentencePair> pairs;
  const auto lines = split_lines(text);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const auto line = lines[n];
    const std::size_t line_no = n + 1;
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (true) {
      const auto tab = line.find('\t', pos);
      fields.push_back(line.substr(pos, tab == std::string_view::npos ? line.npos : tab - pos));
      if (tab == std::string_view::npos) break;
      pos = tab + 1;
    }
    SentencePair pair;
    if (fields.size() == 2) {
      pair.id = std::to_string(line_no);
    } else if (fields.size() == 3) {
      pair.id = std::string(fields[0]);
      if (pair.id.empty() || has_whitespace(pair.id)) throw ParseError(line_no, "invalid pair id");
      fields.erase(fields.begin());
    } else {
      throw ParseError(line_no, "expected \"src<TAB>tgt\" or \"id<TAB>src<TAB>tgt\"");
    }
    pair.src_tokens = split_tokens(fields[0]);
    pair.tgt_tokens = split_tokens(fields[1]);
    if (pair.src_tokens.empty() || pair.tgt_tokens.empty()) {
      throw ParseError(line_no, "empty side in sentence pair");
    }
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

std::vector<SentencePair> parse_bitext(std::string_view src_text, std::string_view tgt_text) {
  const auto src = split_lines(src_text);
  const auto tgt = split_lines(tgt_text);
  if (src.size() != tgt.size()) {
    throw DataError("parallel files differ in line count: " + std::to_string(src.size()) +
                    " vs " + std::to_string(tgt.size()));
  }
  std::vector<SentencePair> pairs;
  pairs.reserve(src.size());
  for (std::size_t n = 0; n < src.size(); ++n) {
    SentencePair pair{std::to_string(n + 1), split_tokens(src[n]), split_tokens(tgt[n])};
    if (pair.src_tokens.empty() || pair.tgt_tokens.empty()) {
      throw ParseError(n + 1, "empty side in sentence pair");
    }
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

namespace {

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    if (k) out += ' ';
    out += tokens[k];
  }
  return out;
}

}  // namespace

std::string write_bitext(const std::vector<SentencePair>& pairs) {
  std::string out;
  for (const auto& pair : pairs) {
    out += pair.id;
    out += '\t';
    out += join_tokens(pair.src_tokens);
    out += '\t';
    out += join_tokens(pair.tgt_tokens);
    out += '\n';
  }
  return out;
}

bool AlignmentLinks::insert(Link link) {
  auto it = std::lower_bound(links_.begin(), links_.end(), link, [](const Link& a, const Link& b) {
    return a.src != b.src ? a.src < b.src : a.tgt < b.tgt;
  });
  if (it != links_.end() && it->src == link.src && it->tgt == link.tgt) return false;
  links_.insert(it, link);
  return true;
}

const Link* AlignmentLinks::find(std::size_t src, std::size_t tgt) const {
  auto it = std::lower_bound(links_.begin(), links_.end(), std::pair{src, tgt},
                             [](const Link& a, const std::pair<std::size_t, std::size_t>& key) {
                               return a.src != key.first ? a.src < key.first : a.tgt < key.second;
                             });
  if (it != links_.end() && it->src == src && it->tgt == tgt) return &*it;
  return nullptr;
}

bool AlignmentLinks::contains(std::size_t src, std::size_t tgt) const {
  return find(src, tgt) != nullptr;
}

bool AlignmentLinks::all_have_probability() const {
  return std::all_of(links_.begin(), links_.end(), [](const Link& l) { return l.prob.has_value(); });
}

bool operator==(const AlignmentLinks& a, const AlignmentLinks& b) {
  return std::equal(a.links_.begin(), a.links_.end(), b.links_.begin(), b.links_.end(),
                    [](const Link& x, const Link& y) { return x.src == y.src && x.tgt == y.tgt; });
}

AlignmentLinks parse_pharaoh(std::string_view line, std::size_t src_len, std::size_t tgt_len,
                             std::string_view pair_id) {
  AlignmentLinks links;
  for (const auto& item : split_tokens(line)) {
    const std::string_view token = item;
    const auto dash1 = token.find('-');
    if (dash1 == std::string_view::npos) {
      throw DataError(pair_label(pair_id) + ": malformed link \"" + item + "\"");
    }
    const auto dash2 = token.find('-', dash1 + 1);
    Link link;
    const auto tgt_text = token.substr(dash1 + 1, dash2 == token.npos ? token.npos : dash2 - dash1 - 1);
    if (!parse_index(token.substr(0, dash1), link.src) || !parse_index(tgt_text, link.tgt)) {
      throw DataError(pair_label(pair_id) + ": malformed link \"" + item + "\"");
    }
    if (dash2 != std::string_view::npos) {
      const auto prob_text = std::string(token.substr(dash2 + 1));
      char* end = nullptr;
      const double p = std::strtod(prob_text.c_str(), &end);
      if (prob_text.empty() || end != prob_text.c_str() + prob_text.size()) {
        throw DataError(pair_label(pair_id) + ": malformed probability in \"" + item + "\"");
      }
      if (!(p > 0.0 && p <= 1.0)) {
        throw DataError(pair_label(pair_id) + ": probability outside (0, 1] in \"" + item + "\"");
      }
      link.prob = p;
    }
    if (link.src >= src_len || link.tgt >= tgt_len) {
      throw DataError(pair_label(pair_id) + ": link " + item + " out of bounds for " +
                      std::to_string(src_len) + "x" + std::to_string(tgt_len) + " pair");
    }
    if (!links.insert(link)) {
      throw DataError(pair_label(pair_id) + ": duplicate link " + item);
    }
  }
  return links;
}

AlignmentLinks parse_pharaoh(std::string_view line, const SentencePair& pair) {
  return parse_pharaoh(line, pair.src_tokens.size(), pair.tgt_tokens.size(), pair.id);
}

std::string format_probability(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", p);
  return buf;
}

std::string write_pharaoh(const AlignmentLinks& links) {
  std::string out;
  for (const auto& link : links) {
    if (!out.empty()) out += ' ';
    out += std::to_string(link.src);
    out += '-';
    out += std::to_string(link.tgt);
    if (link.prob) {
      out += '-';
      out += format_probability(*link.prob);
    }
  }
  return out;
}

}  // namespace nerproj
