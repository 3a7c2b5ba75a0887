#include "spe/http.hpp"

#include <charconv>

#include <httplib.h>
#include <json.hpp>

#include "spe/error.hpp"

namespace spe {

using nlohmann::ordered_json;

ListenAddress parse_listen(std::string_view text) {
  ListenAddress out;
  std::string_view port_text = text;
  if (const auto colon = text.rfind(':'); colon != std::string_view::npos) {
    if (colon > 0) out.host = std::string(text.substr(0, colon));
    port_text = text.substr(colon + 1);
  }
  int port = -1;
  const auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || port < 0 || port > 65535) {
    throw ValidationError("invalid listen address '" + std::string(text) + "'");
  }
  out.port = port;
  return out;
}

int http_status_for(std::string_view code) {
  if (code == "validation_error" || code == "format_error" || code == "undefined_correlation") return 400;
  if (code == "not_found") return 404;
  if (code == "conflict") return 409;
  if (code == "timeout") return 504;
  return 500;
}

namespace {

ordered_json progress_json(std::size_t judged, std::size_t total) {
  return {{"judged", judged}, {"total", total}};
}

ordered_json session_json(const SessionInfo& s) {
  ordered_json j;
  j["session_id"] = s.session_id;
  j["dataset"] = s.dataset;
  j["k"] = s.k;
  j["seed"] = s.seed;
  j["status"] = to_string(s.status);
  j["progress"] = progress_json(s.judged, s.total);
  return j;
}

ordered_json card_json(const ItemCard& c) {
  return {{"id", c.id}, {"title", c.title}, {"description", c.description}};
}

ordered_json judgment_json(const Judgment& j) {
  ordered_json out;
  out["pair_index"] = j.pair_index;
  out["a"] = j.a;
  out["b"] = j.b;
  out["y"] = j.y;
  out["annotator"] = j.annotator;
  out["timestamp"] = j.timestamp;
  return out;
}

void send_json(httplib::Response& res, const ordered_json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json; charset=utf-8");
}

void send_error(httplib::Response& res, const std::string& code, const std::string& message) {
  send_json(res, {{"code", code}, {"message", message}}, http_status_for(code));
}

nlohmann::json parse_body(const httplib::Request& req, bool allow_empty) {
  if (req.body.empty()) {
    if (allow_empty) return nlohmann::json::object();
    throw ValidationError("request body must be a JSON object");
  }
  nlohmann::json body;
  try {
    body = nlohmann::json::parse(req.body);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("request body: ") + e.what(), 1);
  }
  if (!body.is_object()) throw ValidationError("request body must be a JSON object");
  return body;
}

template <class T>
T field(const nlohmann::json& body, const char* name) {
  auto it = body.find(name);
  if (it == body.end()) throw ValidationError(std::string("missing field '") + name + "'");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(std::string("field '") + name + "' has the wrong type");
  }
}

template <class T>
T optional_field(const nlohmann::json& body, const char* name, T fallback) {
  auto it = body.find(name);
  if (it == body.end() || it->is_null()) return fallback;
  return field<T>(body, name);
}

// Runs a handler, turning library errors into {code, message} bodies.
template <class F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      send_error(res, e.code(), e.what());
    } catch (const std::exception& e) {
      send_error(res, "internal_error", e.what());
    }
  };
}

ordered_json ranking_json(const std::vector<RankedItem>& items) {
  ordered_json list = ordered_json::array();
  for (const auto& r : items) {
    list.push_back({{"id", r.id}, {"score", r.score}, {"rank", r.rank}, {"is_new", r.is_new}});
  }
  return {{"items", list}};
}

}  // namespace

struct HttpServer::Impl {
  AnnotationService& service;
  httplib::Server server;

  explicit Impl(AnnotationService& s) : service(s) { routes(); }

  void routes() {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
      if (!res.body.empty()) return;
      if (res.status == 404) send_error(res, "not_found", "no route for " + req.method + " " + req.path);
      else if (res.status == 400) send_error(res, "validation_error", "malformed request");
    });

    server.Get("/datasets", guarded([this](const httplib::Request&, httplib::Response& res) {
                 send_json(res, {{"datasets", service.dataset_names()}});
               }));

    server.Get("/sessions", guarded([this](const httplib::Request&, httplib::Response& res) {
                 ordered_json list = ordered_json::array();
                 for (const auto& s : service.sessions()) list.push_back(session_json(s));
                 send_json(res, {{"sessions", list}});
               }));

    server.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const auto body = parse_body(req, false);
                  const auto dataset = field<std::string>(body, "dataset");
                  const auto k = field<long long>(body, "k");
                  if (k < 1) throw ValidationError("k must be at least 1");
                  const auto seed = optional_field<std::uint64_t>(body, "seed", 0);
                  send_json(res, session_json(service.create_session(dataset, static_cast<std::size_t>(k), seed)),
                            201);
                }));

    server.Get(R"(/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                 send_json(res, session_json(service.info(req.matches[1])));
               }));

    server.Get(R"(/sessions/([^/]+)/next-pair)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const auto next = service.next_pair(req.matches[1]);
                 ordered_json j;
                 j["done"] = !next.pair.has_value();
                 if (next.pair) {
                   j["pair_index"] = next.pair->pair_index;
                   j["item_a"] = card_json(next.pair->item_a);
                   j["item_b"] = card_json(next.pair->item_b);
                 }
                 j["progress"] = progress_json(next.judged, next.total);
                 send_json(res, j);
               }));

    server.Get(R"(/sessions/([^/]+)/judgments)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 ordered_json list = ordered_json::array();
                 for (const auto& j : service.judgments(req.matches[1])) list.push_back(judgment_json(j));
                 send_json(res, {{"judgments", list}});
               }));

    server.Post(R"(/sessions/([^/]+)/judgments)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const auto body = parse_body(req, false);
                  const auto index = field<long long>(body, "pair_index");
                  if (index < 0) throw ValidationError("pair_index must be non-negative");
                  const auto choice = parse_choice(field<std::string>(body, "choice"));
                  const auto annotator = optional_field<std::string>(body, "annotator", "");
                  const std::string id = req.matches[1];
                  auto j = judgment_json(
                      service.submit_judgment(id, static_cast<std::size_t>(index), choice, annotator));
                  const auto info = service.info(id);
                  j["progress"] = progress_json(info.judged, info.total);
                  send_json(res, j, 201);
                }));

    server.Post(R"(/sessions/([^/]+)/skip)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const auto body = parse_body(req, false);
                  const auto index = field<long long>(body, "pair_index");
                  if (index < 0) throw ValidationError("pair_index must be non-negative");
                  service.skip(req.matches[1], static_cast<std::size_t>(index));
                  send_json(res, {{"skipped", index}});
                }));

    server.Post(R"(/sessions/([^/]+)/train)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const auto body = parse_body(req, true);
                  std::string overrides;
                  if (auto it = body.find("config"); it != body.end() && !it->is_null()) {
                    if (!it->is_object()) throw ValidationError("config must be a JSON object");
                    overrides = it->dump();
                  }
                  const auto summary = service.train(req.matches[1], overrides);
                  ordered_json j;
                  j["judgments"] = summary.judgments;
                  j["epochs"] = summary.train_loss.size();
                  j["history"] = {{"train_loss", summary.train_loss}};
                  j["final_loss"] = summary.train_loss.empty() ? ordered_json(nullptr)
                                                               : ordered_json(summary.train_loss.back());
                  j["elapsed_seconds"] = summary.elapsed_seconds;
                  j["config"] = ordered_json::parse(train_config_to_json(summary.config));
                  send_json(res, j);
                }));

    server.Get(R"(/sessions/([^/]+)/ranking)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                 send_json(res, ranking_json(service.ranking(req.matches[1])));
               }));

    server.Post(R"(/sessions/([^/]+)/ranking)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const auto body = parse_body(req, true);
                  std::vector<NewItem> items;
                  if (auto it = body.find("items"); it != body.end() && !it->is_null()) {
                    if (!it->is_array()) throw ValidationError("items must be an array");
                    for (const auto& entry : *it) {
                      if (!entry.is_object()) throw ValidationError("each new item must be an object");
                      items.push_back({optional_field<std::string>(entry, "id", ""),
                                       optional_field<std::string>(entry, "title", ""),
                                       optional_field<std::string>(entry, "description", "")});
                    }
                  }
                  send_json(res, ranking_json(service.ranking(req.matches[1], items)));
                }));
  }
};

HttpServer::HttpServer(AnnotationService& service) : impl_(std::make_unique<Impl>(service)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const ListenAddress& address) {
  int port = address.port;
  if (port == 0) {
    port = impl_->server.bind_to_any_port(address.host);
    if (port < 0) throw IoError("cannot bind " + address.host);
  } else if (!impl_->server.bind_to_port(address.host, port)) {
    throw IoError("cannot bind " + address.host + ":" + std::to_string(port));
  }
  return port;
}

void HttpServer::serve() {
  if (!impl_->server.listen_after_bind() && impl_->server.is_running()) throw IoError("server stopped unexpectedly");
}

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

bool HttpServer::running() const { return impl_->server.is_running(); }

}  // namespace spe
