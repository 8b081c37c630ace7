#pragma once

// Entity projection across a word-aligned sentence pair. Each English entity
// is projected as a whole: the target span is the minimal range covering every
// target word aligned to any of its words.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "nerproj/corpus_io.hpp"

namespace nerproj {

// Index map from a key space of `domain` positions into `codomain` positions.
class DirectionalMapping {
 public:
  DirectionalMapping() = default;
  DirectionalMapping(std::size_t domain, std::size_t codomain);

  std::size_t domain() const { return targets_.size(); }
  std::size_t codomain() const { return codomain_; }

  void add(std::size_t key, std::size_t value);
  // Sorted, duplicate-free.
  const std::vector<std::size_t>& at(std::size_t key) const { return targets_.at(key); }
  bool contains(std::size_t key, std::size_t value) const;
  std::size_t num_links() const;

  friend bool operator==(const DirectionalMapping&, const DirectionalMapping&) = default;

 private:
  std::vector<std::vector<std::size_t>> targets_;
  std::size_t codomain_ = 0;
};

enum class KeySide : std::uint8_t { Source, Target };

// Builds the view of (src, tgt) links keyed by one side. Throws DataError if a
// link is out of range.
DirectionalMapping mapping_from_links(const AlignmentLinks& links, std::size_t src_len,
                                      std::size_t tgt_len, KeySide keyed_by);
// Inverse of mapping_from_links; probabilities are not carried.
AlignmentLinks links_from_mapping(const DirectionalMapping& mapping, KeySide keyed_by);

// (i -> j) in the result iff (j -> i) in the input.
DirectionalMapping reverse_mapping(const DirectionalMapping& mapping);

// Per-key set intersection. Both mappings must share domain and codomain.
DirectionalMapping intersect_mappings(const DirectionalMapping& a, const DirectionalMapping& b);

enum class ProjectionMode : std::uint8_t { ForwardOnly, Intersected };

std::string_view to_string(ProjectionMode mode);
ProjectionMode projection_mode_from_string(std::string_view s);  // throws UsageError

enum class DropReason : std::uint8_t { Unaligned, Overlap };

std::string_view to_string(DropReason reason);

struct ProjectionInput {
  SentencePair pair;
  std::vector<EntitySpan> english_spans;
  DirectionalMapping english2indic;  // src -> tgt
  DirectionalMapping indic2english;  // tgt -> src
};

struct DroppedSpan {
  EntitySpan span;
  DropReason reason;
};

struct ProjectionResult {
  LabeledSentence labeled;  // over the target tokens
  std::vector<DroppedSpan> dropped_spans;
  DirectionalMapping mapping_used;
};

// Spans are processed in source order. A span with no aligned target word is
// dropped as unaligned; one whose range meets an already projected range is
// dropped whole as overlap.
ProjectionResult project_spans(const ProjectionInput& input, ProjectionMode mode);

struct DropStats {
  std::size_t source_spans = 0;
  std::size_t projected_spans = 0;
  std::size_t unaligned = 0;
  std::size_t overlap = 0;
};

struct ProjectedCorpus {
  std::vector<ProjectionResult> results;
  DropStats stats;
};

// Element-wise projection of a corpus. `english` must match `pairs` by id and
// source tokens; alignment streams are positional and in (src, tgt)
// orientation. Throws DataError naming the first mismatching id.
ProjectedCorpus project_corpus(const std::vector<SentencePair>& pairs,
                               const std::vector<LabeledSentence>& english,
                               const std::vector<AlignmentLinks>& forward_links,
                               const std::vector<AlignmentLinks>& backward_links,
                               ProjectionMode mode, unsigned jobs = 1);

// "pair_id<TAB>etype<TAB>src_start<TAB>src_end<TAB>reason" per dropped span.
std::string write_drop_log(const ProjectedCorpus& corpus);

}  // namespace nerproj
