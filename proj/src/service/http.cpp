#include "lesion_triage/service/http.hpp"

#include <charconv>

#include <fmt/format.h>
#include <httplib.h>

namespace lt::service {

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const Error& e) {
  nlohmann::ordered_json body{{"error", to_string(e.kind())}, {"detail", e.detail()}};
  if (e.kind() == ErrorKind::InvalidQuestionnaire) body["field"] = e.detail();
  if (e.kind() == ErrorKind::Unauthorized) res.set_header("WWW-Authenticate", "Bearer");
  send_json(res, http_status(e.kind()), body);
}

std::size_t query_size(const httplib::Request& req, const char* key, std::size_t fallback, std::size_t cap) {
  if (!req.has_param(key)) return fallback;
  const auto v = req.get_param_value(key);
  std::size_t n = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
  if (ec != std::errc() || p != v.data() + v.size())
    throw Error(ErrorKind::InvalidArgument, fmt::format("{} must be a non-negative integer", key));
  return std::min(n, cap);
}

}  // namespace

int http_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotFound: return 404;
    case ErrorKind::PayloadTooLarge: return 413;
    case ErrorKind::UndecodableImage:
    case ErrorKind::InvalidQuestionnaire: return 422;
    case ErrorKind::InvalidRange:
    case ErrorKind::InvalidArgument:
    case ErrorKind::UnknownClass: return 400;
    case ErrorKind::Unauthorized: return 401;
    case ErrorKind::AlreadyReviewed:
    case ErrorKind::NotAugmented: return 409;
    default: return 500;
  }
}

HttpServer::HttpServer(Service& service) : service_(service), server_(std::make_unique<httplib::Server>()) {
  // Leave room for the multipart framing and questionnaire around the image.
  server_->set_payload_max_length(service_.config().max_upload_bytes * 2 + (1u << 20));
  routes();
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::routes() {
  auto guarded = [](auto fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const Error& e) {
        send_error(res, e);
      } catch (const std::exception& e) {
        send_json(res, 500, {{"error", "Internal"}, {"detail", e.what()}});
      }
    };
  };
  auto require_token = [this](const httplib::Request& req) {
    const auto h = req.get_header_value("Authorization");
    constexpr std::string_view prefix = "Bearer ";
    if (h.rfind(prefix, 0) != 0 || !service_.authorized(std::string_view(h).substr(prefix.size())))
      throw Error(ErrorKind::Unauthorized, "missing or invalid bearer token");
  };

  server_->Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"status", "ok"}});
  });

  server_->Post("/v1/scans", guarded([this](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_file("image")) throw Error(ErrorKind::UndecodableImage, "multipart field 'image' is missing");
    if (!req.has_file("questionnaire")) throw Error(ErrorKind::InvalidQuestionnaire, "questionnaire");
    const auto image = req.get_file_value("image");
    const auto sub = service_.submit_scan(image.content, req.get_file_value("questionnaire").content);
    res.set_header("Location", "/v1/scans/" + sub.id);
    send_json(res, 202, {{"id", sub.id}, {"status", token(sub.status)}, {"created_at", sub.created_at}});
  }));

  server_->Get(R"(/v1/scans/([A-Za-z0-9_]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, service_.result_json(req.matches[1].str()));
  }));

  server_->Get(R"(/v1/scans/([A-Za-z0-9_]+)/saliency\.png)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 res.set_content(service_.saliency_png(req.matches[1].str()), "image/png");
               }));

  server_->Get("/v1/analytics/summary", guarded([this](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, to_json(service_.analytics(req.get_param_value("from"), req.get_param_value("to"))));
  }));

  server_->Get(R"(/v1/education/([A-Za-z_]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto c = try_parse_class(req.matches[1].str());
    if (!c) throw Error(ErrorKind::NotFound, "no education entry for " + req.matches[1].str());
    send_json(res, 200, to_json(service_.education(*c)));
  }));

  server_->Get("/v1/review/queue", guarded([this, require_token](const httplib::Request& req, httplib::Response& res) {
    require_token(req);
    send_json(res, 200,
              service_.review_queue_json(query_size(req, "offset", 0, SIZE_MAX), query_size(req, "limit", 20, 200)));
  }));

  server_->Post(R"(/v1/review/([^/]+))",
                guarded([this, require_token](const httplib::Request& req, httplib::Response& res) {
                  require_token(req);
                  const auto body = nlohmann::json::parse(req.body, nullptr, false);
                  if (!body.is_object() || !body.contains("verdict") || !body["verdict"].is_string())
                    throw Error(ErrorKind::InvalidArgument, "body must be JSON with a verdict");
                  const auto r = service_.review_verdict(req.matches[1].str(),
                                                         parse_verdict(body["verdict"].get<std::string>()),
                                                         body.value("reviewer", std::string()),
                                                         body.value("note", std::string()));
                  send_json(res, 200,
                            {{"id", r.id},
                             {"verification", token(r.verification)},
                             {"training_eligible", training_eligible(r)}});
                }));

  auto record_image = [this, require_token](bool base) {
    return [this, require_token, base](const httplib::Request& req, httplib::Response& res) {
      require_token(req);
      const auto s = service_.store().find_record(req.matches[1].str());
      if (!s) throw Error(ErrorKind::NotFound, req.matches[1].str());
      const auto& sha = base ? s->base_image_sha : s->image_sha;
      if (sha.empty()) throw Error(ErrorKind::NotFound, "no stored image for " + s->record.id);
      res.set_content(service_.store().read_blob(sha), "image/png");
    };
  };
  server_->Get(R"(/v1/records/([^/]+)/image)", guarded(record_image(false)));
  server_->Get(R"(/v1/records/([^/]+)/base-image)", guarded(record_image(true)));
}

int HttpServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(ErrorKind::Io, fmt::format("cannot bind {}:{}", host, port));
  return bound;
}

void HttpServer::listen() { server_->listen_after_bind(); }

int HttpServer::start(const std::string& host, int port) {
  const int p = bind(host, port);
  thread_ = std::thread([this] { listen(); });
  server_->wait_until_ready();
  return p;
}

void HttpServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace lt::service
