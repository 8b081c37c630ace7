#include "nerproj/filtering.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

namespace nerproj {

ScoredSentence make_scored(LabeledSentence sentence, double score) {
  if (!(score >= 0.0 && score <= 1.0)) {
    throw DataError("sentence " + sentence.id + ": score outside [0, 1]");
  }
  const bool has_entity = std::any_of(sentence.tags.begin(), sentence.tags.end(),
                                      [](const Tag& t) { return !t.is_outside(); });
  return {std::move(sentence), score, has_entity};
}

void FilterConfig::check() const {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
    throw UsageError("keep-fraction must be in (0, 1]");
  }
  if (!(no_entity_rate >= 0.0 && no_entity_rate <= 1.0)) {
    throw UsageError("no-entity-rate must be in [0, 1]");
  }
}

double unit_interval(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

std::vector<ScoredSentence> downsample_no_entity(const std::vector<ScoredSentence>& corpus,
                                                 double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw UsageError("no-entity rate must be in [0, 1]");
  std::mt19937_64 rng(seed);
  std::vector<ScoredSentence> out;
  for (const auto& s : corpus) {
    if (s.has_entity || unit_interval(rng()) < rate) out.push_back(s);
  }
  return out;
}

std::size_t top_fraction_count(double keep_fraction, std::size_t n) {
  const double exact = keep_fraction * static_cast<double>(n);
  const auto k = static_cast<std::size_t>(std::ceil(exact - 1e-9 * std::max(1.0, exact)));
  return std::min(k, n);
}

std::vector<ScoredSentence> filter_top_fraction(const std::vector<ScoredSentence>& corpus,
                                                double keep_fraction) {
  if (!(keep_fraction >= 0.0 && keep_fraction <= 1.0)) {
    throw UsageError("keep fraction must be in [0, 1]");
  }
  const auto k = top_fraction_count(keep_fraction, corpus.size());
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return corpus[a].score > corpus[b].score; });
  order.resize(k);
  std::sort(order.begin(), order.end());
  std::vector<ScoredSentence> out;
  out.reserve(k);
  for (auto i : order) out.push_back(corpus[i]);
  return out;
}

CorpusStats& CorpusStats::operator+=(const CorpusStats& o) {
  sentences += o.sentences;
  tokens += o.tokens;
  entity_free_sentences += o.entity_free_sentences;
  for (std::size_t t = 0; t < entities.size(); ++t) entities[t] += o.entities[t];
  return *this;
}

CorpusStats corpus_stats(const std::vector<LabeledSentence>& corpus) {
  CorpusStats stats;
  for (const auto& s : corpus) {
    ++stats.sentences;
    stats.tokens += s.tokens.size();
    bool any = false;
    for (const auto& tag : s.tags) {
      if (tag.prefix != TagPrefix::B) continue;
      ++stats.entities[static_cast<std::size_t>(tag.type)];
      any = true;
    }
    if (!any) ++stats.entity_free_sentences;
  }
  return stats;
}

std::string stats_table(const std::vector<NamedStats>& rows) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-10s %10s %12s %10s %10s %10s %10s\n", "", "Sentences",
                "Tokens", "Org", "Loc", "Per", "No-entity");
  out << line;
  for (const auto& row : rows) {
    const auto& s = row.stats;
    std::snprintf(line, sizeof line, "%-10s %10zu %12zu %10zu %10zu %10zu %10zu\n",
                  row.name.c_str(), s.sentences, s.tokens, s.entity_count(EntityType::ORG),
                  s.entity_count(EntityType::LOC), s.entity_count(EntityType::PER),
                  s.entity_free_sentences);
    out << line;
  }
  return out.str();
}

std::string stats_key_values(const std::vector<NamedStats>& rows) {
  std::ostringstream out;
  for (const auto& row : rows) {
    const auto& s = row.stats;
    out << row.name << ".sentences=" << s.sentences << '\n'
        << row.name << ".tokens=" << s.tokens << '\n'
        << row.name << ".ORG=" << s.entity_count(EntityType::ORG) << '\n'
        << row.name << ".LOC=" << s.entity_count(EntityType::LOC) << '\n'
        << row.name << ".PER=" << s.entity_count(EntityType::PER) << '\n'
        << row.name << ".no_entity=" << s.entity_free_sentences << '\n';
  }
  return out.str();
}

void SplitRatios::check() const {
  for (double r : {train, dev, test}) {
    if (!(r >= 0.0 && r <= 1.0)) throw UsageError("split ratios must lie in [0, 1]");
  }
  if (std::abs(train + dev + test - 1.0) > 1e-9) throw UsageError("split ratios must sum to 1");
}

Splits shuffle_split(std::vector<LabeledSentence> corpus, const SplitRatios& ratios,
                     std::uint64_t seed) {
  ratios.check();
  std::mt19937_64 rng(seed);
  // Own Fisher-Yates: std::shuffle's draw sequence is implementation-defined.
  for (std::size_t i = corpus.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(unit_interval(rng()) * static_cast<double>(i));
    std::swap(corpus[i - 1], corpus[std::min(j, i - 1)]);
  }
  const auto n = static_cast<double>(corpus.size());
  auto dev_n = static_cast<std::size_t>(std::llround(ratios.dev * n));
  auto test_n = static_cast<std::size_t>(std::llround(ratios.test * n));
  dev_n = std::min(dev_n, corpus.size());
  test_n = std::min(test_n, corpus.size() - dev_n);
  const auto train_n = corpus.size() - dev_n - test_n;

  Splits splits;
  auto it = std::make_move_iterator(corpus.begin());
  splits.train.assign(it, it + static_cast<std::ptrdiff_t>(train_n));
  it += static_cast<std::ptrdiff_t>(train_n);
  splits.dev.assign(it, it + static_cast<std::ptrdiff_t>(dev_n));
  it += static_cast<std::ptrdiff_t>(dev_n);
  splits.test.assign(it, std::make_move_iterator(corpus.end()));
  return splits;
}

}  // namespace nerproj
