#pragma once

// Text formats: CoNLL-style tagged sentences, parallel bitext and Pharaoh
// word alignments.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nerproj/error.hpp"

namespace nerproj {

enum class EntityType : std::uint8_t { PER = 0, LOC = 1, ORG = 2 };

inline constexpr std::array<EntityType, 3> kEntityTypes = {EntityType::PER, EntityType::LOC,
                                                           EntityType::ORG};

std::string_view to_string(EntityType t);
std::optional<EntityType> entity_type_from_string(std::string_view s);

enum class TagPrefix : std::uint8_t { O = 0, B = 1, I = 2 };

struct Tag {
  TagPrefix prefix = TagPrefix::O;
  EntityType type = EntityType::PER;  // ignored when prefix == O

  static constexpr Tag outside() { return {}; }
  static constexpr Tag begin(EntityType t) { return {TagPrefix::B, t}; }
  static constexpr Tag inside(EntityType t) { return {TagPrefix::I, t}; }

  bool is_outside() const { return prefix == TagPrefix::O; }

  // Dense index over the 7-tag inventory: O, B-PER, I-PER, B-LOC, I-LOC, B-ORG, I-ORG.
  std::size_t index() const;
  static Tag from_index(std::size_t index);

  friend bool operator==(const Tag& a, const Tag& b) {
    return a.prefix == b.prefix && (a.prefix == TagPrefix::O || a.type == b.type);
  }
};

inline constexpr std::size_t kTagInventorySize = 7;

std::string to_string(const Tag& tag);
// Accepts O, B-/I- with PER/LOC/ORG, and B-MISC/I-MISC (mapped to O).
// Returns nullopt for anything else.
std::optional<Tag> tag_from_string(std::string_view s);

using TagSequence = std::vector<Tag>;

// True iff every I-T is preceded by B-T or I-T.
bool is_iob_valid(const TagSequence& tags);

// Rewrites dangling I-T to B-T in place. Returns the number of repairs.
std::size_t repair_iob(TagSequence& tags);

struct LabeledSentence {
  std::string id;
  std::vector<std::string> tokens;
  TagSequence tags;

  friend bool operator==(const LabeledSentence&, const LabeledSentence&) = default;
};

// Throws DataError naming the sentence when an invariant is violated.
void validate(const LabeledSentence& sentence);

struct EntitySpan {
  EntityType etype = EntityType::PER;
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // inclusive

  std::size_t length() const { return end - start + 1; }
  bool overlaps(const EntitySpan& o) const { return start <= o.end && o.start <= end; }

  friend bool operator==(const EntitySpan&, const EntitySpan&) = default;
};

// Spans in start order. B- always opens a new span. Throws DataError on a
// sequence that is not IOB-valid.
std::vector<EntitySpan> spans_from_iob(const TagSequence& tags);

// Inverse of spans_from_iob. Spans may be given in any order. Throws
// DataError on overlapping or out-of-range spans.
TagSequence iob_from_spans(const std::vector<EntitySpan>& spans, std::size_t length);

struct ConllCorpus {
  std::vector<LabeledSentence> sentences;
  std::size_t repairs = 0;        // dangling I- rewritten to B-
  std::size_t misc_dropped = 0;   // MISC tags rewritten to O
};

// Sentence ids are the 1-based sentence ordinal, matching bitext line ids.
ConllCorpus parse_conll(std::string_view text);
std::string write_conll(const std::vector<LabeledSentence>& sentences);

struct SentencePair {
  std::string id;
  std::vector<std::string> src_tokens;
  std::vector<std::string> tgt_tokens;

  friend bool operator==(const SentencePair&, const SentencePair&) = default;
};

std::vector<std::string> split_tokens(std::string_view line);

// One pair per line: "src<TAB>tgt", or "id<TAB>src<TAB>tgt". Without an id
// column the 1-based line number is the id.
std::vector<SentencePair> parse_bitext(std::string_view text);
// Two line-aligned files.
std::vector<SentencePair> parse_bitext(std::string_view src_text, std::string_view tgt_text);
std::string write_bitext(const std::vector<SentencePair>& pairs);

struct Link {
  std::size_t src = 0;
  std::size_t tgt = 0;
  std::optional<double> prob;

  friend bool operator==(const Link&, const Link&) = default;
};

// A set of (src, tgt) links kept sorted by (src, tgt). Always oriented
// source-to-target regardless of which directional model produced it.
class AlignmentLinks {
 public:
  AlignmentLinks() = default;

  // Returns false (and leaves the set unchanged) if the pair is present.
  bool insert(Link link);
  bool contains(std::size_t src, std::size_t tgt) const;
  const Link* find(std::size_t src, std::size_t tgt) const;

  const std::vector<Link>& links() const { return links_; }
  std::size_t size() const { return links_.size(); }
  bool empty() const { return links_.empty(); }
  bool all_have_probability() const;

  auto begin() const { return links_.begin(); }
  auto end() const { return links_.end(); }

  // Pairs only; probabilities are ignored.
  friend bool operator==(const AlignmentLinks& a, const AlignmentLinks& b);

 private:
  std::vector<Link> links_;
};

// Throws DataError naming the pair for malformed tokens, out-of-range
// indices, duplicates or probabilities outside (0, 1].
AlignmentLinks parse_pharaoh(std::string_view line, std::size_t src_len, std::size_t tgt_len,
                             std::string_view pair_id = {});
AlignmentLinks parse_pharaoh(std::string_view line, const SentencePair& pair);
std::string write_pharaoh(const AlignmentLinks& links);

// 17 significant digits, enough for an exact round-trip.
std::string format_probability(double p);

std::vector<std::string_view> split_lines(std::string_view text);

}  // namespace nerproj
