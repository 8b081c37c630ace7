#include "nerproj/review_http.hpp"

#include <httplib.h>

#include <json.hpp>

#include "nerproj/review.hpp"

namespace nerproj {

namespace {

using nlohmann::json;

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, json{{"error", message}});
}

json tags_json(const TagSequence& tags) {
  auto out = json::array();
  for (const auto& t : tags) out.push_back(to_string(t));
  return out;
}

json record_json(const ReviewRecord& r) { return json::parse(record_to_json(r)); }

// Maps service exceptions to status codes.
template <typename Fn>
void guarded(httplib::Response& res, int validation_status, Fn&& fn) {
  try {
    fn();
  } catch (const UnknownAnnotatorError& e) {
    send_error(res, 400, e.what());
  } catch (const ValidationError& e) {
    send_error(res, validation_status, e.what());
  } catch (const DataError& e) {
    send_error(res, validation_status, e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, e.what());
  }
}

}  // namespace

void register_review_routes(httplib::Server& server, ReviewService& service,
                            const std::optional<std::filesystem::path>& static_dir) {
  server.Get("/api/tasks/next", [&service](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_param("annotator")) return send_error(res, 400, "missing annotator parameter");
    guarded(res, 400, [&] {
      const auto task = service.next_task(req.get_param_value("annotator"));
      if (!task) {
        res.status = 204;
        return;
      }
      send_json(res, 200,
                json{{"sentence_id", task->sentence_id},
                     {"tokens", task->tokens},
                     {"projected_tags", tags_json(task->projected_tags)}});
    });
  });

  server.Post("/api/verdicts", [&service](const httplib::Request& req, httplib::Response& res) {
    ReviewRecord record;
    try {
      record = record_from_json(req.body);
    } catch (const DataError& e) {
      return send_error(res, 422, e.what());
    }
    guarded(res, 422, [&] {
      const auto stored = service.submit_verdict(std::move(record));
      send_json(res, 201, record_json(stored));
    });
  });

  server.Get("/api/iaa", [&service](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_param("a") || !req.has_param("b")) {
      return send_error(res, 400, "parameters a and b are required");
    }
    guarded(res, 409, [&] {
      const auto report = service.iaa_report(req.get_param_value("a"), req.get_param_value("b"));
      auto tags = json::array();
      for (std::size_t i = 0; i < kTagInventorySize; ++i) tags.push_back(to_string(Tag::from_index(i)));
      send_json(res, 200,
                json{{"kappa", report.kappa},
                     {"observed_agreement", report.observed_agreement},
                     {"expected_agreement", report.expected_agreement},
                     {"tokens", report.tokens},
                     {"degenerate", report.degenerate},
                     {"level", "token"},
                     {"tags", tags},
                     {"contingency", report.contingency}});
    });
  });

  server.Get("/api/export", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, 400, [&] {
      if (req.has_param("annotator")) {
        res.set_content(write_conll(service.export_annotator(req.get_param_value("annotator"))),
                        "text/plain; charset=utf-8");
        return;
      }
      const auto gold = service.export_gold();
      res.set_header("X-Adjudication", gold.adjudication);
      res.set_header("X-Conflicts", std::to_string(gold.conflicts));
      res.set_content(write_conll(gold.sentences), "text/plain; charset=utf-8");
    });
  });

  server.Get("/api/progress", [&service](const httplib::Request&, httplib::Response& res) {
    auto body = json::array();
    for (const auto& p : service.progress()) {
      body.push_back({{"annotator_id", p.annotator_id}, {"reviewed", p.reviewed}, {"total", p.assigned}});
    }
    send_json(res, 200, body);
  });

  server.Get("/api/records", [&service](const httplib::Request&, httplib::Response& res) {
    auto body = json::array();
    for (const auto& r : service.records()) body.push_back(record_json(r));
    send_json(res, 200, body);
  });

  if (static_dir) server.set_mount_point("/", static_dir->string());
}

}  // namespace nerproj
