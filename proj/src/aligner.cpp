#include "nerproj/aligner.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include "nerproj/parallel.hpp"

namespace nerproj {

namespace {

constexpr std::size_t kNpos = std::numeric_limits<std::size_t>::max();

// Fixed chunking keeps the floating-point reduction order independent of the
// number of workers.
constexpr std::size_t kChunkPairs = 256;

struct EncodedPair {
  std::vector<std::uint32_t> cond;  // NULL first when enabled
  std::vector<std::uint32_t> emit;
};

struct ChunkCounts {
  std::unordered_map<std::size_t, double> counts;
  double log_likelihood = 0.0;
};

}  // namespace

std::string_view to_string(Direction d) {
  return d == Direction::SrcToTgt ? "src2tgt" : "tgt2src";
}

void EmConfig::check() const {
  if (iterations < 1) throw UsageError("iterations must be >= 1");
  if (!(prob_floor > 0.0 && prob_floor < 1e-3)) throw UsageError("prob_floor must be in (0, 1e-3)");
  if (max_vocabulary == 0) throw UsageError("max_vocabulary must be positive");
}

std::uint32_t Vocabulary::intern(std::string_view word) {
  auto it = ids_.find(std::string(word));
  if (it != ids_.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(words_.size());
  words_.emplace_back(word);
  ids_.emplace(words_.back(), id);
  return id;
}

std::uint32_t Vocabulary::lookup(std::string_view word) const {
  auto it = ids_.find(std::string(word));
  return it == ids_.end() ? kUnknown : it->second;
}

std::size_t TranslationTable::slot(std::uint32_t cond, std::uint32_t emit) const {
  if (cond + 1 >= row_offset_.size()) return kNpos;
  const auto first = cols_.begin() + static_cast<std::ptrdiff_t>(row_offset_[cond]);
  const auto last = cols_.begin() + static_cast<std::ptrdiff_t>(row_offset_[cond + 1]);
  const auto it = std::lower_bound(first, last, emit);
  if (it == last || *it != emit) return kNpos;
  return static_cast<std::size_t>(it - cols_.begin());
}

double TranslationTable::prob(std::uint32_t cond, std::uint32_t emit) const {
  if (cond == Vocabulary::kUnknown || emit == Vocabulary::kUnknown) return 0.0;
  const auto s = slot(cond, emit);
  return s == kNpos ? 0.0 : probs_[s];
}

double TranslationTable::prob(std::string_view cond, std::string_view emit) const {
  return prob(cond_vocab_.lookup(cond), emit_vocab_.lookup(emit));
}

double TranslationTable::null_prob(std::string_view emit) const {
  if (!use_null_) return 0.0;
  return prob(kNullId, emit_vocab_.lookup(emit));
}

double TranslationTable::row_sum(std::uint32_t cond) const {
  double sum = 0.0;
  for (auto s = row_offset_[cond]; s < row_offset_[cond + 1]; ++s) sum += probs_[s];
  return sum;
}

class Ibm1Trainer {
 public:
  Ibm1Trainer(TranslationTable& table, const EmConfig& config) : table_(table), config_(config) {}

  void encode(const std::vector<SentencePair>& corpus, Direction direction) {
    table_.direction_ = direction;
    table_.use_null_ = config_.use_null;
    if (config_.use_null) table_.cond_vocab_.intern("");
    pairs_.reserve(corpus.size());
    for (const auto& pair : corpus) {
      const auto& cond_tokens = direction == Direction::SrcToTgt ? pair.src_tokens : pair.tgt_tokens;
      const auto& emit_tokens = direction == Direction::SrcToTgt ? pair.tgt_tokens : pair.src_tokens;
      if (cond_tokens.empty() || emit_tokens.empty()) {
        throw DataError("pair " + pair.id + ": empty side");
      }
      EncodedPair enc;
      if (config_.use_null) enc.cond.push_back(TranslationTable::kNullId);
      for (const auto& w : cond_tokens) enc.cond.push_back(table_.cond_vocab_.intern(w));
      for (const auto& w : emit_tokens) enc.emit.push_back(table_.emit_vocab_.intern(w));
      const auto null_slots = config_.use_null ? 1u : 0u;
      if (table_.cond_vocab_.size() - null_slots > config_.max_vocabulary ||
          table_.emit_vocab_.size() > config_.max_vocabulary) {
        throw DataError("vocabulary exceeds the configured cap of " +
                        std::to_string(config_.max_vocabulary) + " words");
      }
      pairs_.push_back(std::move(enc));
    }
  }

  void build_structure() {
    std::vector<std::vector<std::uint32_t>> rows(table_.cond_vocab_.size());
    for (const auto& pair : pairs_) {
      for (auto c : pair.cond) rows[c].insert(rows[c].end(), pair.emit.begin(), pair.emit.end());
    }
    table_.row_offset_.assign(1, 0);
    for (auto& row : rows) {
      std::sort(row.begin(), row.end());
      row.erase(std::unique(row.begin(), row.end()), row.end());
      table_.cols_.insert(table_.cols_.end(), row.begin(), row.end());
      table_.row_offset_.push_back(table_.cols_.size());
      row = {};
    }
    // Uniform over the whole emitted vocabulary, as in the dense formulation.
    table_.probs_.assign(table_.cols_.size(), 1.0 / static_cast<double>(table_.emit_vocab_.size()));
  }

  void run() {
    for (int iter = 0; iter < config_.iterations; ++iter) {
      std::vector<double> counts(table_.probs_.size(), 0.0);
      const double ll = expectation(&counts);
      table_.log_likelihood_.push_back(ll);
      maximization(counts);
    }
    table_.log_likelihood_.push_back(expectation(nullptr));
  }

 private:
  // Accumulates expected counts (when `counts` is non-null) and returns the
  // corpus log-likelihood under the current table.
  double expectation(std::vector<double>* counts) const {
    const std::size_t num_chunks = (pairs_.size() + kChunkPairs - 1) / kChunkPairs;
    const std::size_t wave = std::max<std::size_t>(1, config_.jobs);
    double ll = 0.0;
    std::vector<ChunkCounts> partial;
    for (std::size_t first = 0; first < num_chunks; first += wave) {
      const std::size_t n = std::min(wave, num_chunks - first);
      partial.assign(n, {});
      parallel_for(n, config_.jobs, [&](std::size_t k) {
        process_chunk(first + k, partial[k], counts != nullptr);
      });
      for (const auto& chunk : partial) {
        ll += chunk.log_likelihood;
        if (counts) {
          for (const auto& [s, c] : chunk.counts) (*counts)[s] += c;
        }
      }
    }
    return ll;
  }

  void process_chunk(std::size_t chunk, ChunkCounts& out, bool collect) const {
    const std::size_t begin = chunk * kChunkPairs;
    const std::size_t end = std::min(pairs_.size(), begin + kChunkPairs);
    std::vector<std::size_t> slots;
    std::vector<double> weights;
    for (std::size_t p = begin; p < end; ++p) {
      const auto& pair = pairs_[p];
      const double log_norm = std::log(static_cast<double>(pair.cond.size()));
      for (auto f : pair.emit) {
        slots.clear();
        weights.clear();
        double total = 0.0;
        for (auto e : pair.cond) {
          const auto s = table_.slot(e, f);
          slots.push_back(s);
          weights.push_back(table_.probs_[s]);
          total += table_.probs_[s];
        }
        out.log_likelihood += std::log(total) - log_norm;
        if (!collect) continue;
        for (std::size_t i = 0; i < slots.size(); ++i) out.counts[slots[i]] += weights[i] / total;
      }
    }
  }

  void maximization(const std::vector<double>& counts) {
    for (std::size_t r = 0; r + 1 < table_.row_offset_.size(); ++r) {
      const auto lo = table_.row_offset_[r];
      const auto hi = table_.row_offset_[r + 1];
      double total = 0.0;
      for (auto s = lo; s < hi; ++s) total += counts[s];
      if (total <= 0.0) continue;
      bool floored = false;
      for (auto s = lo; s < hi; ++s) {
        table_.probs_[s] = counts[s] / total;
        if (table_.probs_[s] < config_.prob_floor) {
          table_.probs_[s] = config_.prob_floor;
          floored = true;
        }
      }
      if (floored) {
        double sum = 0.0;
        for (auto s = lo; s < hi; ++s) sum += table_.probs_[s];
        for (auto s = lo; s < hi; ++s) table_.probs_[s] /= sum;
      }
    }
  }

  TranslationTable& table_;
  const EmConfig& config_;
  std::vector<EncodedPair> pairs_;
};

TranslationTable train_ibm1(const std::vector<SentencePair>& corpus, Direction direction,
                            const EmConfig& config) {
  config.check();
  if (corpus.empty()) throw DataError("cannot train an alignment model on an empty corpus");
  TranslationTable table;
  Ibm1Trainer trainer(table, config);
  trainer.encode(corpus, direction);
  trainer.build_structure();
  trainer.run();
  return table;
}

void TranslationTable::save(std::ostream& out) const {
  const std::size_t null_rows = use_null_ ? 1 : 0;
  out << "#ibm1\tdirection=" << to_string(direction_) << "\tnull=" << (use_null_ ? 1 : 0)
      << "\tcond_vocab=" << cond_vocab_.size() - null_rows << "\temit_vocab=" << emit_vocab_.size()
      << "\tentries=" << probs_.size() << '\n';

  std::vector<std::uint32_t> rows(num_rows());
  for (std::uint32_t r = 0; r < rows.size(); ++r) rows[r] = r;
  std::sort(rows.begin(), rows.end(), [&](auto a, auto b) {
    return cond_vocab_.word(a) < cond_vocab_.word(b);
  });
  std::vector<std::size_t> order;
  for (auto r : rows) {
    order.clear();
    for (auto s = row_offset_[r]; s < row_offset_[r + 1]; ++s) order.push_back(s);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) {
      return emit_vocab_.word(cols_[a]) < emit_vocab_.word(cols_[b]);
    });
    for (auto s : order) {
      out << cond_vocab_.word(r) << '\t' << emit_vocab_.word(cols_[s]) << '\t'
          << format_probability(probs_[s]) << '\n';
    }
  }
}

namespace {

std::string header_field(const std::string& header, const std::string& key) {
  const auto needle = "\t" + key + "=";
  const auto pos = header.find(needle);
  if (pos == std::string::npos) throw DataError("table header lacks \"" + key + "\"");
  const auto start = pos + needle.size();
  return header.substr(start, header.find('\t', start) - start);
}

std::size_t header_number(const std::string& header, const std::string& key) {
  const auto text = header_field(header, key);
  try {
    std::size_t used = 0;
    const auto value = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return value;
  } catch (const std::exception&) {
    throw DataError("table header field " + key + " is not a number");
  }
}

}  // namespace

TranslationTable TranslationTable::load(std::istream& in) {
  std::string header;
  if (!std::getline(in, header) || header.rfind("#ibm1\t", 0) != 0) {
    throw DataError("not a translation table (missing #ibm1 header)");
  }
  TranslationTable table;
  const auto dir = header_field(header, "direction");
  if (dir == "src2tgt") {
    table.direction_ = Direction::SrcToTgt;
  } else if (dir == "tgt2src") {
    table.direction_ = Direction::TgtToSrc;
  } else {
    throw DataError("unknown table direction \"" + dir + "\"");
  }
  table.use_null_ = header_number(header, "null") != 0;
  const auto cond_size = header_number(header, "cond_vocab");
  const auto emit_size = header_number(header, "emit_vocab");
  const auto entries = header_number(header, "entries");
  if (table.use_null_) table.cond_vocab_.intern("");

  struct Entry {
    std::uint32_t cond, emit;
    double prob;
  };
  std::vector<Entry> parsed;
  parsed.reserve(entries);
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos) {
      throw ParseError(line_no, "expected \"cond<TAB>emit<TAB>prob\"");
    }
    const auto cond = line.substr(0, t1);
    const auto emit = line.substr(t1 + 1, t2 - t1 - 1);
    const auto prob_text = line.substr(t2 + 1);
    char* end = nullptr;
    const double p = std::strtod(prob_text.c_str(), &end);
    if (emit.empty() || prob_text.empty() || end != prob_text.c_str() + prob_text.size() ||
        !(p > 0.0 && p <= 1.0)) {
      throw ParseError(line_no, "invalid table entry");
    }
    if (cond.empty() && !table.use_null_) throw ParseError(line_no, "NULL row in a table without NULL");
    parsed.push_back({table.cond_vocab_.intern(cond), table.emit_vocab_.intern(emit), p});
  }
  const std::size_t null_rows = table.use_null_ ? 1 : 0;
  if (parsed.size() != entries || table.cond_vocab_.size() - null_rows != cond_size ||
      table.emit_vocab_.size() != emit_size) {
    throw DataError("translation table body does not match its header");
  }
  std::sort(parsed.begin(), parsed.end(), [](const Entry& a, const Entry& b) {
    return a.cond != b.cond ? a.cond < b.cond : a.emit < b.emit;
  });
  table.row_offset_.assign(table.cond_vocab_.size() + 1, 0);
  for (const auto& e : parsed) {
    table.cols_.push_back(e.emit);
    table.probs_.push_back(e.prob);
    ++table.row_offset_[e.cond + 1];
  }
  for (std::size_t r = 1; r < table.row_offset_.size(); ++r) {
    table.row_offset_[r] += table.row_offset_[r - 1];
  }
  for (std::size_t k = 1; k < parsed.size(); ++k) {
    if (parsed[k].cond == parsed[k - 1].cond && parsed[k].emit == parsed[k - 1].emit) {
      throw DataError("duplicate table entry");
    }
  }
  return table;
}

AlignmentLinks align_viterbi(const TranslationTable& table, const SentencePair& pair) {
  const bool forward = table.direction() == Direction::SrcToTgt;
  const auto& cond_tokens = forward ? pair.src_tokens : pair.tgt_tokens;
  const auto& emit_tokens = forward ? pair.tgt_tokens : pair.src_tokens;

  std::vector<std::uint32_t> cond_ids;
  cond_ids.reserve(cond_tokens.size());
  for (const auto& w : cond_tokens) cond_ids.push_back(table.cond_vocab().lookup(w));

  AlignmentLinks links;
  for (std::size_t j = 0; j < emit_tokens.size(); ++j) {
    const auto f = table.emit_vocab().lookup(emit_tokens[j]);
    if (f == Vocabulary::kUnknown) continue;
    double best = 0.0;
    std::size_t best_i = kNpos;
    for (std::size_t i = 0; i < cond_ids.size(); ++i) {
      const double p = table.prob(cond_ids[i], f);
      if (p > best) {
        best = p;
        best_i = i;
      }
    }
    if (best_i == kNpos) continue;
    if (table.use_null() && table.prob(TranslationTable::kNullId, f) > best) continue;
    if (forward) {
      links.insert({best_i, j, best});
    } else {
      links.insert({j, best_i, best});
    }
  }
  return links;
}

AlignmentLinks symmetrize_intersection(const AlignmentLinks& forward,
                                       const AlignmentLinks& backward) {
  AlignmentLinks out;
  for (const auto& link : forward) {
    if (backward.contains(link.src, link.tgt)) out.insert(link);
  }
  return out;
}

AlignmentLinks transpose(const AlignmentLinks& links) {
  AlignmentLinks out;
  for (const auto& link : links) out.insert({link.tgt, link.src, link.prob});
  return out;
}

double quality_score(const SentencePair& pair, const AlignmentLinks& links) {
  if (links.empty()) return 0.0;
  double log_sum = 0.0;
  for (const auto& link : links) {
    if (!link.prob) {
      throw DataError("pair " + pair.id +
                      ": link without probability; use builtin Viterbi links or Pharaoh i-j-p input");
    }
    log_sum += std::log(*link.prob);
  }
  return std::exp(log_sum / static_cast<double>(pair.tgt_tokens.size()));
}

}  // namespace nerproj
