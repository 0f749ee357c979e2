#include <httplib.h>
#include <spdlog/spdlog.h>

#include <thread>

#include "intertext/error.hpp"
#include "intertext/service.hpp"

namespace intertext {

using nlohmann::json;

namespace {

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::schema:
    case ErrorCode::validation:
    case ErrorCode::empty_document:
    case ErrorCode::configuration: return 422;
    case ErrorCode::not_found: return 404;
    case ErrorCode::conflict: return 409;
    case ErrorCode::transport:
    case ErrorCode::provider_contract: return 502;
    case ErrorCode::undefined_metric:
    case ErrorCode::io: return 500;
  }
  return 500;
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message,
                const std::vector<FieldIssue>& fields = {}) {
  json f = json::array();
  for (const auto& issue : fields) f.push_back({{"field", issue.field}, {"message", issue.message}});
  send_json(res, status, {{"code", code}, {"message", message}, {"fields", std::move(f)}});
}

json parse_body(const httplib::Request& req) {
  try {
    auto j = json::parse(req.body);
    if (!j.is_object()) throw Error(ErrorCode::schema, "request body must be a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::schema, std::string("request body is not valid JSON: ") + e.what());
  }
}

std::string required_string(const json& body, const char* key) {
  if (!body.contains(key) || !body[key].is_string() || body[key].get<std::string>().empty()) {
    throw Error(ErrorCode::validation, std::string("missing field '") + key + "'", {{key, "required string"}});
  }
  return body[key].get<std::string>();
}

std::size_t query_uint(const httplib::Request& req, const char* key, std::size_t fallback) {
  if (!req.has_param(key)) return fallback;
  const auto text = req.get_param_value(key);
  try {
    std::size_t used = 0;
    const auto v = std::stoull(text, &used);
    if (used == text.size()) return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::validation, std::string("invalid query parameter '") + key + "'",
              {{key, "must be a non-negative integer"}});
}

// Wraps a handler so every intertext::Error becomes a structured response.
template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const Error& e) {
      send_error(res, status_for(e.code()), to_string(e.code()), e.what(), e.fields());
    } catch (const std::exception& e) {
      spdlog::error("{} {}: {}", req.method, req.path, e.what());
      send_error(res, 500, "internal", e.what());
    }
  };
}

}  // namespace

struct HttpServer::Impl {
  Service& service;
  ServerOptions options;
  httplib::Server server;
  std::thread thread;

  Impl(Service& s, ServerOptions o) : service(s), options(std::move(o)) { routes(); }

  void routes() {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", "Content-Type"},
                                {"Access-Control-Allow-Methods", "GET, POST, PUT, OPTIONS"}});
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, {{"status", "ok"}});
    });

    server.Post("/documents", guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const auto body = parse_body(req);
                  DocumentOptions opts;
                  opts.doc_id = required_string(body, "doc_id");
                  opts.role = parse_role(required_string(body, "role"));
                  opts.author = body.value("author", std::string());
                  const auto format = parse_file_format(body.value("format", std::string("csv")));
                  const auto content = required_string(body, "content");
                  send_json(res, 201, to_json(service.put_document(content, format, opts)));
                }));

    server.Get(R"(/documents/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                 send_json(res, 200, to_json(service.get_document(req.matches[1])));
               }));

    server.Post("/runs", guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const auto body = parse_body(req);
                  const auto config = body.value("config", json::object());
                  const auto id = service.submit_run(config, body.value("query_doc", std::string()),
                                                     body.value("source_doc", std::string()));
                  send_json(res, 202, to_json(service.get_run(id)));
                }));

    server.Get("/runs", guarded([this](const httplib::Request&, httplib::Response& res) {
                 json runs = json::array();
                 for (const auto& r : service.list_runs()) runs.push_back(to_json(r));
                 send_json(res, 200, {{"runs", std::move(runs)}});
               }));

    server.Get(R"(/runs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                 send_json(res, 200, to_json(service.get_run(req.matches[1])));
               }));

    server.Get(R"(/runs/([^/]+)/results)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                 ResultFilter filter;
                 if (req.has_param("min_prob")) {
                   const auto text = req.get_param_value("min_prob");
                   try {
                     std::size_t used = 0;
                     filter.min_prob = std::stod(text, &used);
                     if (used != text.size()) throw std::invalid_argument(text);
                   } catch (const std::exception&) {
                     throw Error(ErrorCode::validation, "invalid query parameter 'min_prob'",
                                 {{"min_prob", "must be a number"}});
                   }
                 }
                 if (req.has_param("label")) filter.label = parse_label(req.get_param_value("label"));
                 if (req.has_param("query_seg_id")) filter.query_seg_id = req.get_param_value("query_seg_id");
                 const auto page = service.get_results(req.matches[1], query_uint(req, "page", 1),
                                                       query_uint(req, "page_size", 50), filter);
                 auto body = to_json(page);
                 body["run_id"] = std::string(req.matches[1]);
                 send_json(res, 200, body);
               }));

    server.Get(R"(/runs/([^/]+)/matches)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const auto format =
                     parse_output_format(req.has_param("format") ? req.get_param_value("format") : "csv");
                 const auto matches = service.all_matches(req.matches[1]);
                 res.status = 200;
                 res.set_content(format_matches(matches, format),
                                 format == OutputFormat::csv ? "text/csv" : "application/json");
               }));

    server.Put(R"(/runs/([^/]+)/decisions)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const auto body = parse_body(req);
                 MatchKey key{req.matches[1], required_string(body, "query_seg_id"),
                              required_string(body, "source_seg_id")};
                 const auto verdict = parse_verdict(required_string(body, "verdict"));
                 const auto decision = service.record_decision(key, verdict, body.value("reviewer", std::string()));
                 send_json(res, 200, to_json(decision));
               }));

    server.Get(R"(/runs/([^/]+)/export)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const auto name = req.has_param("format") ? req.get_param_value("format") : "csv";
                 FileFormat format;
                 try {
                   format = parse_file_format(name);
                 } catch (const Error&) {
                   throw Error(ErrorCode::validation, "unsupported export format '" + name + "'",
                               {{"format", "expected csv or jsonl"}});
                 }
                 res.status = 200;
                 res.set_content(service.export_confirmed(req.matches[1], format),
                                 format == FileFormat::csv ? "text/csv" : "application/x-ndjson");
                 res.set_header("Content-Disposition",
                                "attachment; filename=\"confirmed-" + std::string(req.matches[1]) + "." + name + "\"");
               }));
  }
};

HttpServer::HttpServer(Service& service, ServerOptions options)
    : impl_(std::make_unique<Impl>(service, std::move(options))) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start() {
  auto& s = impl_->server;
  if (impl_->options.port == 0) {
    port_ = s.bind_to_any_port(impl_->options.host);
  } else {
    port_ = s.bind_to_port(impl_->options.host, impl_->options.port) ? impl_->options.port : -1;
  }
  if (port_ < 0) {
    throw Error(ErrorCode::io, "cannot bind " + impl_->options.host + ":" + std::to_string(impl_->options.port));
  }
  impl_->thread = std::thread([&s] { s.listen_after_bind(); });
  s.wait_until_ready();
  spdlog::info("listening on http://{}:{}", impl_->options.host, port_);
  return port_;
}

void HttpServer::run() {
  start();
  if (impl_->thread.joinable()) impl_->thread.join();
}

void HttpServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace intertext
