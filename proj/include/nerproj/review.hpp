#pragma once

// Human verification of projected sentences: task assignment, verdict
// persistence in an append-only record log, adjudicated gold export and
// inter-annotator agreement.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "nerproj/corpus_io.hpp"
#include "nerproj/evaluation.hpp"

namespace nerproj {

class ValidationError : public DataError {
 public:
  using DataError::DataError;
};

class UnknownAnnotatorError : public DataError {
 public:
  using DataError::DataError;
};

enum class Verdict : std::uint8_t { Accepted, Edited };

std::string_view to_string(Verdict v);
std::optional<Verdict> verdict_from_string(std::string_view s);

struct ReviewRecord {
  std::string sentence_id;
  std::string annotator_id;
  Verdict verdict = Verdict::Accepted;
  TagSequence final_tags;
  std::string timestamp;  // UTC, ISO-8601

  friend bool operator==(const ReviewRecord&, const ReviewRecord&) = default;
};

// One JSON object per line in the record log.
std::string record_to_json(const ReviewRecord& record);
// Throws DataError on malformed input.
ReviewRecord record_from_json(std::string_view json);

struct ReviewTask {
  std::string sentence_id;
  std::vector<std::string> tokens;
  TagSequence projected_tags;
};

struct ReviewConfig {
  std::vector<std::string> annotators;   // config order matters for adjudication
  std::optional<std::string> adjudicator;
  // Leading fraction of sentences (by id) shown to every annotator; the rest
  // are dealt round-robin. 1 means full overlap.
  double shared_fraction = 1.0;
  std::filesystem::path log_path;

  void check() const;  // throws UsageError
};

struct AnnotatorProgress {
  std::string annotator_id;
  std::size_t reviewed = 0;
  std::size_t assigned = 0;
};

struct GoldExport {
  std::vector<LabeledSentence> sentences;
  // "adjudicator=<id>" or "first-annotator".
  std::string adjudication;
  // Sentences where annotators disagreed and the policy picked a winner.
  std::size_t conflicts = 0;
};

// Orders ids numerically when both are all digits, otherwise bytewise.
bool id_less(const std::string& a, const std::string& b);

// Thread-safe. Writers are serialized and each acknowledgment follows an
// fsync'd append; readers work on an immutable snapshot.
class ReviewService {
 public:
  // Replays the record log when it exists. A torn final line (no trailing
  // newline) is truncated away; any other bad line throws DataError.
  ReviewService(std::vector<LabeledSentence> corpus, ReviewConfig config);
  ~ReviewService();

  ReviewService(const ReviewService&) = delete;
  ReviewService& operator=(const ReviewService&) = delete;

  // Lowest-id assigned sentence this annotator has not reviewed.
  std::optional<ReviewTask> next_task(const std::string& annotator_id) const;

  // Validates, stamps the timestamp if empty, appends durably, then publishes.
  // An accepted verdict with empty tags takes the projected tags.
  // Throws ValidationError or UnknownAnnotatorError; nothing is stored then.
  ReviewRecord submit_verdict(ReviewRecord record);

  // Throws DataError("no co-annotated sentences") on an empty intersection.
  AgreementReport iaa_report(const std::string& a, const std::string& b) const;

  GoldExport export_gold() const;
  // Latest tags of one annotator, sentences in id order.
  std::vector<LabeledSentence> export_annotator(const std::string& annotator_id) const;
  std::vector<AnnotatorProgress> progress() const;
  // Latest record per (sentence, annotator), sentences in id order then
  // annotators in config order.
  std::vector<ReviewRecord> records() const;

  const ReviewConfig& config() const { return config_; }
  std::size_t size() const { return corpus_.size(); }

 private:
  struct State;
  class AppendLog;

  std::shared_ptr<const State> snapshot() const;
  std::size_t annotator_index(const std::string& annotator_id) const;  // throws
  bool assigned(std::size_t sentence, std::size_t annotator) const;
  std::size_t sentence_index(const std::string& sentence_id) const;     // npos when absent
  ReviewRecord validated(ReviewRecord record) const;
  void apply(State& state, const ReviewRecord& record) const;

  std::vector<LabeledSentence> corpus_;  // sorted by id_less
  std::map<std::string, std::size_t> index_by_id_;
  ReviewConfig config_;
  std::size_t shared_count_ = 0;

  std::mutex write_mutex_;
  std::unique_ptr<AppendLog> log_;
  std::shared_ptr<const State> state_;
};

}  // namespace nerproj
