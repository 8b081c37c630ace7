#pragma once

// Corpus filters applied after projection, seeded splitting and dataset
// statistics.

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "nerproj/corpus_io.hpp"

namespace nerproj {

struct ScoredSentence {
  LabeledSentence sentence;
  double score = 0.0;
  bool has_entity = false;
};

// Computes has_entity from the tags. Throws DataError if score is outside [0, 1].
ScoredSentence make_scored(LabeledSentence sentence, double score);

struct FilterConfig {
  double keep_fraction = 0.35;
  double no_entity_rate = 0.01;
  std::uint64_t seed = 0;

  void check() const;  // throws UsageError
};

// Uniform double in [0, 1) from a 64-bit draw, identical on every platform.
double unit_interval(std::uint64_t bits);

// Keeps every entity-bearing sentence and each entity-free one with
// probability `rate`, drawing from mt19937_64(seed) once per entity-free
// sentence in input order.
std::vector<ScoredSentence> downsample_no_entity(const std::vector<ScoredSentence>& corpus,
                                                 double rate, std::uint64_t seed);

// ceil(keep_fraction * N), guarded against representation error in the product.
std::size_t top_fraction_count(double keep_fraction, std::size_t n);

// Keeps the top_fraction_count highest-scoring sentences; equal scores favour
// the earlier sentence. Output is in input order.
std::vector<ScoredSentence> filter_top_fraction(const std::vector<ScoredSentence>& corpus,
                                                double keep_fraction);

struct CorpusStats {
  std::size_t sentences = 0;
  std::size_t tokens = 0;
  std::size_t entity_free_sentences = 0;
  std::array<std::size_t, 3> entities{};  // indexed by EntityType

  std::size_t entity_count(EntityType t) const { return entities[static_cast<std::size_t>(t)]; }
  std::size_t total_entities() const { return entities[0] + entities[1] + entities[2]; }

  CorpusStats& operator+=(const CorpusStats& o);
  friend bool operator==(const CorpusStats&, const CorpusStats&) = default;
};

CorpusStats corpus_stats(const std::vector<LabeledSentence>& corpus);

struct NamedStats {
  std::string name;
  CorpusStats stats;
};

// Table with one row per named corpus: Sentences, Tokens, Org, Loc, Per,
// No-entity.
std::string stats_table(const std::vector<NamedStats>& rows);
// "name.key=value" lines.
std::string stats_key_values(const std::vector<NamedStats>& rows);

struct SplitRatios {
  double train = 0.98;
  double dev = 0.01;
  double test = 0.01;

  void check() const;  // ratios in [0, 1] summing to 1 within 1e-9
};

struct Splits {
  std::vector<LabeledSentence> train;
  std::vector<LabeledSentence> dev;
  std::vector<LabeledSentence> test;
};

// Fisher-Yates shuffle driven by mt19937_64(seed), then dev and test take
// round(ratio * N) sentences each and train takes the rest.
Splits shuffle_split(std::vector<LabeledSentence> corpus, const SplitRatios& ratios,
                     std::uint64_t seed);

}  // namespace nerproj
