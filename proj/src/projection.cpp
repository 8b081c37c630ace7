#include "nerproj/projection.hpp"

#include <algorithm>
#include <iterator>

#include "nerproj/parallel.hpp"

namespace nerproj {

DirectionalMapping::DirectionalMapping(std::size_t domain, std::size_t codomain)
    : targets_(domain), codomain_(codomain) {}

void DirectionalMapping::add(std::size_t key, std::size_t value) {
  if (key >= targets_.size() || value >= codomain_) {
    throw DataError("mapping entry " + std::to_string(key) + " -> " + std::to_string(value) +
                    " out of range for " + std::to_string(targets_.size()) + "x" +
                    std::to_string(codomain_));
  }
  auto& values = targets_[key];
  auto it = std::lower_bound(values.begin(), values.end(), value);
  if (it == values.end() || *it != value) values.insert(it, value);
}

bool DirectionalMapping::contains(std::size_t key, std::size_t value) const {
  if (key >= targets_.size()) return false;
  return std::binary_search(targets_[key].begin(), targets_[key].end(), value);
}

std::size_t DirectionalMapping::num_links() const {
  std::size_t n = 0;
  for (const auto& values : targets_) n += values.size();
  return n;
}

DirectionalMapping mapping_from_links(const AlignmentLinks& links, std::size_t src_len,
                                      std::size_t tgt_len, KeySide keyed_by) {
  const bool by_src = keyed_by == KeySide::Source;
  DirectionalMapping mapping(by_src ? src_len : tgt_len, by_src ? tgt_len : src_len);
  for (const auto& link : links) {
    if (by_src) {
      mapping.add(link.src, link.tgt);
    } else {
      mapping.add(link.tgt, link.src);
    }
  }
  return mapping;
}

AlignmentLinks links_from_mapping(const DirectionalMapping& mapping, KeySide keyed_by) {
  AlignmentLinks links;
  for (std::size_t key = 0; key < mapping.domain(); ++key) {
    for (auto value : mapping.at(key)) {
      if (keyed_by == KeySide::Source) {
        links.insert({key, value, std::nullopt});
      } else {
        links.insert({value, key, std::nullopt});
      }
    }
  }
  return links;
}

DirectionalMapping reverse_mapping(const DirectionalMapping& mapping) {
  DirectionalMapping reversed(mapping.codomain(), mapping.domain());
  for (std::size_t key = 0; key < mapping.domain(); ++key) {
    for (auto value : mapping.at(key)) reversed.add(value, key);
  }
  return reversed;
}

DirectionalMapping intersect_mappings(const DirectionalMapping& a, const DirectionalMapping& b) {
  if (a.domain() != b.domain() || a.codomain() != b.codomain()) {
    throw DataError("cannot intersect mappings over different index spaces");
  }
  DirectionalMapping out(a.domain(), a.codomain());
  std::vector<std::size_t> common;
  for (std::size_t key = 0; key < a.domain(); ++key) {
    common.clear();
    std::set_intersection(a.at(key).begin(), a.at(key).end(), b.at(key).begin(), b.at(key).end(),
                          std::back_inserter(common));
    for (auto value : common) out.add(key, value);
  }
  return out;
}

std::string_view to_string(ProjectionMode mode) {
  return mode == ProjectionMode::ForwardOnly ? "forward_only" : "intersected";
}

ProjectionMode projection_mode_from_string(std::string_view s) {
  if (s == "forward_only") return ProjectionMode::ForwardOnly;
  if (s == "intersected") return ProjectionMode::Intersected;
  throw UsageError("unknown projection mode \"" + std::string(s) +
                   "\" (expected forward_only or intersected)");
}

std::string_view to_string(DropReason reason) {
  return reason == DropReason::Unaligned ? "unaligned" : "overlap";
}

ProjectionResult project_spans(const ProjectionInput& input, ProjectionMode mode) {
  const auto src_len = input.pair.src_tokens.size();
  const auto tgt_len = input.pair.tgt_tokens.size();
  if (input.english2indic.domain() != src_len || input.english2indic.codomain() != tgt_len ||
      input.indic2english.domain() != tgt_len || input.indic2english.codomain() != src_len) {
    throw DataError("pair " + input.pair.id + ": mapping shape does not match the sentence pair");
  }

  ProjectionResult result;
  result.mapping_used =
      mode == ProjectionMode::ForwardOnly
          ? input.english2indic
          : intersect_mappings(reverse_mapping(input.indic2english), input.english2indic);

  auto spans = input.english_spans;
  std::stable_sort(spans.begin(), spans.end(),
                   [](const EntitySpan& a, const EntitySpan& b) { return a.start < b.start; });

  std::vector<EntitySpan> projected;
  for (const auto& span : spans) {
    if (span.start > span.end || span.end >= src_len) {
      throw DataError("pair " + input.pair.id + ": English span out of range");
    }
    bool any = false;
    std::size_t lo = 0;
    std::size_t hi = 0;
    for (auto word = span.start; word <= span.end; ++word) {
      const auto& aligned = result.mapping_used.at(word);
      if (aligned.empty()) continue;
      lo = any ? std::min(lo, aligned.front()) : aligned.front();
      hi = any ? std::max(hi, aligned.back()) : aligned.back();
      any = true;
    }
    if (!any) {
      result.dropped_spans.push_back({span, DropReason::Unaligned});
      continue;
    }
    const EntitySpan target{span.etype, lo, hi};
    const bool collides = std::any_of(projected.begin(), projected.end(),
                                      [&](const EntitySpan& p) { return p.overlaps(target); });
    if (collides) {
      result.dropped_spans.push_back({span, DropReason::Overlap});
      continue;
    }
    projected.push_back(target);
  }

  result.labeled.id = input.pair.id;
  result.labeled.tokens = input.pair.tgt_tokens;
  result.labeled.tags = iob_from_spans(projected, tgt_len);
  return result;
}

ProjectedCorpus project_corpus(const std::vector<SentencePair>& pairs,
                               const std::vector<LabeledSentence>& english,
                               const std::vector<AlignmentLinks>& forward_links,
                               const std::vector<AlignmentLinks>& backward_links,
                               ProjectionMode mode, unsigned jobs) {
  if (english.size() != pairs.size() || forward_links.size() != pairs.size() ||
      backward_links.size() != pairs.size()) {
    throw DataError("stream lengths differ: " + std::to_string(pairs.size()) + " pairs, " +
                    std::to_string(english.size()) + " English sentences, " +
                    std::to_string(forward_links.size()) + " forward and " +
                    std::to_string(backward_links.size()) + " backward alignments");
  }
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    if (english[k].id != pairs[k].id) {
      throw DataError("id mismatch at position " + std::to_string(k + 1) + ": pair " +
                      pairs[k].id + " vs English sentence " + english[k].id);
    }
    if (english[k].tokens != pairs[k].src_tokens) {
      throw DataError("pair " + pairs[k].id + ": English CoNLL tokens differ from the bitext source");
    }
  }

  ProjectedCorpus out;
  out.results.resize(pairs.size());
  parallel_for(pairs.size(), jobs, [&](std::size_t k) {
    const auto& pair = pairs[k];
    ProjectionInput input{
        pair, spans_from_iob(english[k].tags),
        mapping_from_links(forward_links[k], pair.src_tokens.size(), pair.tgt_tokens.size(),
                           KeySide::Source),
        mapping_from_links(backward_links[k], pair.src_tokens.size(), pair.tgt_tokens.size(),
                           KeySide::Target)};
    out.results[k] = project_spans(input, mode);
  });

  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto& result = out.results[k];
    const auto source = spans_from_iob(english[k].tags).size();
    out.stats.source_spans += source;
    out.stats.projected_spans += source - result.dropped_spans.size();
    for (const auto& d : result.dropped_spans) {
      ++(d.reason == DropReason::Unaligned ? out.stats.unaligned : out.stats.overlap);
    }
  }
  return out;
}

std::string write_drop_log(const ProjectedCorpus& corpus) {
  std::string out;
  for (const auto& result : corpus.results) {
    for (const auto& d : result.dropped_spans) {
      out += result.labeled.id;
      out += '\t';
      out += to_string(d.span.etype);
      out += '\t';
      out += std::to_string(d.span.start);
      out += '\t';
      out += std::to_string(d.span.end);
      out += '\t';
      out += to_string(d.reason);
      out += '\n';
    }
  }
  return out;
}

}  // namespace nerproj
