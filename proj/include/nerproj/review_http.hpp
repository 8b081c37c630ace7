#pragma once

// HTTP front end of ReviewService. Bodies are JSON.
//
//   GET  /api/tasks/next?annotator=ID   200 {sentence_id, tokens, projected_tags} | 204
//   POST /api/verdicts                  201 stored record | 422 {error} | 400 {error}
//   GET  /api/iaa?a=ID1&b=ID2           200 {kappa, observed_agreement, expected_agreement,
//                                            tokens, degenerate, tags, contingency}
//   GET  /api/export[?annotator=ID]     200 CoNLL text; header X-Adjudication
//   GET  /api/progress                  200 [{annotator_id, reviewed, total}]
//   GET  /api/records                   200 [record...] latest per (sentence, annotator)
//
// Unknown annotators yield 400; IAA without shared sentences yields 409.

#include <filesystem>
#include <optional>

namespace httplib {
class Server;
}

namespace nerproj {

class ReviewService;

// Registers the API on `server`. When `static_dir` is set its files are
// served under "/".
void register_review_routes(httplib::Server& server, ReviewService& service,
                            const std::optional<std::filesystem::path>& static_dir = std::nullopt);

}  // namespace nerproj
