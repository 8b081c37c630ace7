#include "nerproj/review.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "nerproj/filtering.hpp"

namespace nerproj {

namespace {

constexpr std::size_t kNpos = std::numeric_limits<std::size_t>::max();

bool all_digits(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const auto secs = std::chrono::system_clock::to_time_t(now);
  const auto millis =
      std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                static_cast<int>(millis));
  return buf;
}

[[noreturn]] void throw_errno(const std::string& what) {
  throw std::runtime_error(what + ": " + std::strerror(errno));
}

}  // namespace

std::string_view to_string(Verdict v) { return v == Verdict::Accepted ? "accepted" : "edited"; }

std::optional<Verdict> verdict_from_string(std::string_view s) {
  if (s == "accepted") return Verdict::Accepted;
  if (s == "edited") return Verdict::Edited;
  return std::nullopt;
}

std::string record_to_json(const ReviewRecord& record) {
  nlohmann::ordered_json j;
  j["sentence_id"] = record.sentence_id;
  j["annotator_id"] = record.annotator_id;
  j["verdict"] = std::string(to_string(record.verdict));
  auto tags = nlohmann::json::array();
  for (const auto& t : record.final_tags) tags.push_back(to_string(t));
  j["final_tags"] = std::move(tags);
  j["timestamp"] = record.timestamp;
  return j.dump();
}

ReviewRecord record_from_json(std::string_view json) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed record: ") + e.what());
  }
  if (!j.is_object()) throw DataError("record must be a JSON object");
  auto text_field = [&](const char* key, bool required) -> std::string {
    if (!j.contains(key)) {
      if (required) throw DataError(std::string("record lacks \"") + key + "\"");
      return {};
    }
    if (!j[key].is_string()) throw DataError(std::string("record field \"") + key + "\" must be a string");
    return j[key].get<std::string>();
  };
  ReviewRecord record;
  record.sentence_id = text_field("sentence_id", true);
  record.annotator_id = text_field("annotator_id", true);
  const auto verdict = text_field("verdict", true);
  const auto v = verdict_from_string(verdict);
  if (!v) throw DataError("verdict must be \"accepted\" or \"edited\"");
  record.verdict = *v;
  record.timestamp = text_field("timestamp", false);
  if (j.contains("final_tags")) {
    if (!j["final_tags"].is_array()) throw DataError("final_tags must be an array");
    for (const auto& t : j["final_tags"]) {
      if (!t.is_string()) throw DataError("final_tags entries must be strings");
      const auto text = t.get<std::string>();
      const auto tag = tag_from_string(text);
      if (!tag || text.find("MISC") != std::string::npos) {
        throw DataError("invalid tag \"" + text + "\"");
      }
      record.final_tags.push_back(*tag);
    }
  }
  return record;
}

bool id_less(const std::string& a, const std::string& b) {
  if (all_digits(a) && all_digits(b)) {
    const auto za = a.find_first_not_of('0');
    const auto zb = b.find_first_not_of('0');
    const std::string_view va = za == std::string::npos ? "" : std::string_view(a).substr(za);
    const std::string_view vb = zb == std::string::npos ? "" : std::string_view(b).substr(zb);
    if (va.size() != vb.size()) return va.size() < vb.size();
    if (va != vb) return va < vb;
    return a < b;
  }
  return a < b;
}

void ReviewConfig::check() const {
  if (annotators.empty()) throw UsageError("at least one annotator is required");
  for (std::size_t i = 0; i < annotators.size(); ++i) {
    if (annotators[i].empty()) throw UsageError("empty annotator id");
    for (std::size_t k = 0; k < i; ++k) {
      if (annotators[k] == annotators[i]) throw UsageError("duplicate annotator " + annotators[i]);
    }
  }
  if (adjudicator &&
      std::find(annotators.begin(), annotators.end(), *adjudicator) == annotators.end()) {
    throw UsageError("adjudicator " + *adjudicator + " is not a registered annotator");
  }
  if (!(shared_fraction >= 0.0 && shared_fraction <= 1.0)) {
    throw UsageError("shared fraction must be in [0, 1]");
  }
  if (log_path.empty()) throw UsageError("review log path is required");
}

struct ReviewService::State {
  using Slot = std::vector<std::optional<ReviewRecord>>;  // one entry per annotator
  std::vector<std::shared_ptr<const Slot>> slots;         // one per sentence
};

class ReviewService::AppendLog {
 public:
  explicit AppendLog(const std::filesystem::path& path) {
    fd_ = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw_errno("cannot open review log " + path.string());
  }
  ~AppendLog() {
    if (fd_ >= 0) ::close(fd_);
  }
  AppendLog(const AppendLog&) = delete;
  AppendLog& operator=(const AppendLog&) = delete;

  void append(const std::string& line) {
    std::size_t done = 0;
    while (done < line.size()) {
      const auto n = ::write(fd_, line.data() + done, line.size() - done);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw_errno("review log write failed");
      }
      done += static_cast<std::size_t>(n);
    }
    if (::fsync(fd_) != 0) throw_errno("review log fsync failed");
  }

 private:
  int fd_ = -1;
};

ReviewService::ReviewService(std::vector<LabeledSentence> corpus, ReviewConfig config)
    : corpus_(std::move(corpus)), config_(std::move(config)) {
  config_.check();
  std::stable_sort(corpus_.begin(), corpus_.end(),
                   [](const auto& a, const auto& b) { return id_less(a.id, b.id); });
  for (std::size_t k = 0; k < corpus_.size(); ++k) {
    validate(corpus_[k]);
    if (!index_by_id_.emplace(corpus_[k].id, k).second) {
      throw DataError("duplicate sentence id " + corpus_[k].id);
    }
  }
  shared_count_ = top_fraction_count(config_.shared_fraction, corpus_.size());
  if (config_.shared_fraction == 0.0) shared_count_ = 0;

  auto state = std::make_shared<State>();
  state->slots.assign(corpus_.size(),
                      std::make_shared<const State::Slot>(config_.annotators.size()));

  if (std::filesystem::exists(config_.log_path)) {
    std::string text;
    {
      std::ifstream in(config_.log_path, std::ios::binary);
      if (!in) throw DataError("cannot read review log " + config_.log_path.string());
      std::ostringstream buf;
      buf << in.rdbuf();
      text = buf.str();
    }
    const auto complete = text.rfind('\n') == std::string::npos ? 0 : text.rfind('\n') + 1;
    if (complete != text.size()) {
      // Unacknowledged torn write from a crash.
      std::filesystem::resize_file(config_.log_path, complete);
      text.resize(complete);
    }
    const auto lines = split_lines(text);
    for (std::size_t n = 0; n < lines.size(); ++n) {
      try {
        apply(*state, validated(record_from_json(lines[n])));
      } catch (const DataError& e) {
        throw DataError("review log " + config_.log_path.string() + " line " +
                        std::to_string(n + 1) + ": " + e.what());
      }
    }
  }
  log_ = std::make_unique<AppendLog>(config_.log_path);
  std::atomic_store(&state_, std::shared_ptr<const State>(std::move(state)));
}

ReviewService::~ReviewService() = default;

std::shared_ptr<const ReviewService::State> ReviewService::snapshot() const {
  return std::atomic_load(&state_);
}

std::size_t ReviewService::annotator_index(const std::string& annotator_id) const {
  const auto& a = config_.annotators;
  const auto it = std::find(a.begin(), a.end(), annotator_id);
  if (it == a.end()) throw UnknownAnnotatorError("unknown annotator \"" + annotator_id + "\"");
  return static_cast<std::size_t>(it - a.begin());
}

bool ReviewService::assigned(std::size_t sentence, std::size_t annotator) const {
  if (sentence < shared_count_) return true;
  return (sentence - shared_count_) % config_.annotators.size() == annotator;
}

std::size_t ReviewService::sentence_index(const std::string& sentence_id) const {
  const auto it = index_by_id_.find(sentence_id);
  return it == index_by_id_.end() ? kNpos : it->second;
}

ReviewRecord ReviewService::validated(ReviewRecord record) const {
  const auto a = annotator_index(record.annotator_id);
  const auto s = sentence_index(record.sentence_id);
  if (s == kNpos) throw ValidationError("unknown sentence \"" + record.sentence_id + "\"");
  if (!assigned(s, a)) {
    throw ValidationError("sentence " + record.sentence_id + " is not assigned to " +
                          record.annotator_id);
  }
  const auto& sentence = corpus_[s];
  if (record.verdict == Verdict::Accepted && record.final_tags.empty()) {
    record.final_tags = sentence.tags;
  }
  if (record.final_tags.size() != sentence.tokens.size()) {
    throw ValidationError("sentence " + record.sentence_id + " has " +
                          std::to_string(sentence.tokens.size()) + " tokens but " +
                          std::to_string(record.final_tags.size()) + " tags were submitted");
  }
  if (!is_iob_valid(record.final_tags)) {
    throw ValidationError("final_tags are not IOB-valid (I- must follow B- or I- of the same type)");
  }
  if (record.verdict == Verdict::Accepted && record.final_tags != sentence.tags) {
    throw ValidationError("an accepted verdict must keep the projected tags; use \"edited\"");
  }
  return record;
}

void ReviewService::apply(State& state, const ReviewRecord& record) const {
  const auto s = sentence_index(record.sentence_id);
  auto slot = std::make_shared<State::Slot>(*state.slots[s]);
  (*slot)[annotator_index(record.annotator_id)] = record;
  state.slots[s] = std::move(slot);
}

std::optional<ReviewTask> ReviewService::next_task(const std::string& annotator_id) const {
  const auto a = annotator_index(annotator_id);
  const auto state = snapshot();
  for (std::size_t s = 0; s < corpus_.size(); ++s) {
    if (!assigned(s, a) || (*state->slots[s])[a]) continue;
    return ReviewTask{corpus_[s].id, corpus_[s].tokens, corpus_[s].tags};
  }
  return std::nullopt;
}

ReviewRecord ReviewService::submit_verdict(ReviewRecord record) {
  record = validated(std::move(record));
  if (record.timestamp.empty()) record.timestamp = utc_now();
  std::lock_guard lock(write_mutex_);
  auto next = std::make_shared<State>(*snapshot());
  log_->append(record_to_json(record) + "\n");
  apply(*next, record);
  std::atomic_store(&state_, std::shared_ptr<const State>(std::move(next)));
  return record;
}

AgreementReport ReviewService::iaa_report(const std::string& a, const std::string& b) const {
  const auto ia = annotator_index(a);
  const auto ib = annotator_index(b);
  const auto state = snapshot();
  std::vector<LabeledSentence> first;
  std::vector<LabeledSentence> second;
  for (std::size_t s = 0; s < corpus_.size(); ++s) {
    const auto& slot = *state->slots[s];
    if (!slot[ia] || !slot[ib]) continue;
    first.push_back({corpus_[s].id, corpus_[s].tokens, slot[ia]->final_tags});
    second.push_back({corpus_[s].id, corpus_[s].tokens, slot[ib]->final_tags});
  }
  if (first.empty()) throw DataError("no co-annotated sentences");
  return cohens_kappa(first, second);
}

GoldExport ReviewService::export_gold() const {
  GoldExport out;
  out.adjudication = config_.adjudicator ? "adjudicator=" + *config_.adjudicator : "first-annotator";
  const std::size_t preferred = config_.adjudicator ? annotator_index(*config_.adjudicator) : 0;
  const auto state = snapshot();
  for (std::size_t s = 0; s < corpus_.size(); ++s) {
    const auto& slot = *state->slots[s];
    const ReviewRecord* chosen = slot[preferred] ? &*slot[preferred] : nullptr;
    bool conflict = false;
    for (const auto& r : slot) {
      if (!r) continue;
      if (!chosen) chosen = &*r;
      if (r->final_tags != chosen->final_tags) conflict = true;
    }
    if (!chosen) continue;
    if (conflict) ++out.conflicts;
    out.sentences.push_back({corpus_[s].id, corpus_[s].tokens, chosen->final_tags});
  }
  return out;
}

std::vector<LabeledSentence> ReviewService::export_annotator(const std::string& annotator_id) const {
  const auto a = annotator_index(annotator_id);
  const auto state = snapshot();
  std::vector<LabeledSentence> out;
  for (std::size_t s = 0; s < corpus_.size(); ++s) {
    const auto& r = (*state->slots[s])[a];
    if (r) out.push_back({corpus_[s].id, corpus_[s].tokens, r->final_tags});
  }
  return out;
}

std::vector<AnnotatorProgress> ReviewService::progress() const {
  const auto state = snapshot();
  std::vector<AnnotatorProgress> out;
  for (std::size_t a = 0; a < config_.annotators.size(); ++a) {
    AnnotatorProgress p{config_.annotators[a], 0, 0};
    for (std::size_t s = 0; s < corpus_.size(); ++s) {
      if (!assigned(s, a)) continue;
      ++p.assigned;
      if ((*state->slots[s])[a]) ++p.reviewed;
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<ReviewRecord> ReviewService::records() const {
  const auto state = snapshot();
  std::vector<ReviewRecord> out;
  for (const auto& slot : state->slots) {
    for (const auto& r : *slot) {
      if (r) out.push_back(*r);
    }
  }
  return out;
}

}  // namespace nerproj
