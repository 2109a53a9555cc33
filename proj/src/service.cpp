#include "asl/service.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include <httplib.h>
#include <json.hpp>

namespace asl::serve {

namespace {

HttpResponse error_response(int status, const std::string& message) {
  return {status, nlohmann::json{{"error", message}}.dump()};
}

}  // namespace

SampleStore::SampleStore(std::filesystem::path path) : path_(std::move(path)) {
  if (std::filesystem::exists(path_)) {
    std::ifstream in(path_);
    if (!in) throw std::runtime_error("cannot read sample store '" + path_.string() + "'");
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (header) {
        header = false;
        continue;
      }
      ++count_;
    }
    if (header) {
      std::ofstream out(path_, std::ios::app);
      out << csv_header() << '\n';
    }
  } else {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    std::ofstream out(path_);
    if (!out) throw std::runtime_error("cannot create sample store '" + path_.string() + "'");
    out << csv_header() << '\n';
  }
}

std::size_t SampleStore::append(const Sample& sample) {
  const std::string row = csv_row(sample) + "\n";
  std::lock_guard lock(mutex_);
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  out.write(row.data(), static_cast<std::streamsize>(row.size()));
  out.flush();
  if (!out) throw std::runtime_error("failed to append to sample store");
  return ++count_;
}

std::size_t SampleStore::count() const {
  std::lock_guard lock(mutex_);
  return count_;
}

HandFrame parse_landmarks(std::string_view body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception&) {
    throw std::invalid_argument("request body is not valid JSON");
  }
  if (!j.is_object() || !j.contains("landmarks")) throw std::invalid_argument("missing \"landmarks\" field");
  const auto& lm = j["landmarks"];
  if (!lm.is_array()) throw std::invalid_argument("\"landmarks\" must be an array of [x,y,z] triplets");
  if (lm.size() != kNumPoints) {
    throw std::invalid_argument("expected 21 landmarks, got " + std::to_string(lm.size()));
  }
  HandFrame frame;
  for (std::size_t i = 0; i < kNumPoints; ++i) {
    const auto& p = lm[i];
    if (!p.is_array() || p.size() != 3 || !p[0].is_number() || !p[1].is_number() || !p[2].is_number()) {
      throw std::invalid_argument("landmark " + std::to_string(i + 1) + " must be [x,y,z] numbers");
    }
    frame.points[i] = {p[0].get<double>(), p[1].get<double>(), p[2].get<double>()};
    if (!frame.points[i].finite()) throw std::invalid_argument("landmark " + std::to_string(i + 1) + " is not finite");
  }
  return frame;
}

std::string response_json(const PredictionResponse& response) {
  nlohmann::ordered_json j;
  j["label"] = std::string(1, response.label.letter());
  if (response.probabilities) {
    nlohmann::ordered_json probs = nlohmann::ordered_json::object();
    for (const auto& [letter, p] : *response.probabilities) probs[std::string(1, letter)] = p;
    j["probabilities"] = std::move(probs);
  }
  j["model"] = response.model_id;
  return j.dump();
}

PredictionService::PredictionService(ModelArtifact artifact, std::filesystem::path sample_store)
    : artifact_(std::move(artifact)), model_id_(model_fingerprint(artifact_)), store_(std::move(sample_store)) {}

HttpResponse PredictionService::health() const {
  return {200, nlohmann::ordered_json{{"status", "ok"}, {"model", model_id_}}.dump()};
}

HttpResponse PredictionService::predict(std::string_view body) const {
  HandFrame frame;
  try {
    frame = parse_landmarks(body);
  } catch (const std::invalid_argument& e) {
    return error_response(400, e.what());
  }
  try {
    return {200, response_json(predict_frame(artifact_, frame, model_id_))};
  } catch (const std::exception& e) {
    return error_response(500, e.what());
  }
}

HttpResponse PredictionService::add_sample(std::string_view body) {
  Sample sample{HandFrame{}, Label::from_index(0)};
  try {
    sample.frame = parse_landmarks(body);
    const auto j = nlohmann::json::parse(body);
    if (!j.contains("label") || !j["label"].is_string()) throw std::invalid_argument("missing \"label\" string");
    const auto text = j["label"].get<std::string>();
    const auto label = text.size() == 1 ? Label::try_from_char(text[0]) : std::nullopt;
    if (!label) throw std::invalid_argument("invalid label \"" + text + "\" (j and z are not collected)");
    sample.label = *label;
  } catch (const std::invalid_argument& e) {
    return error_response(400, e.what());
  }
  try {
    const auto total = store_.append(sample);
    return {200, nlohmann::ordered_json{{"stored", true}, {"count", total}}.dump()};
  } catch (const std::exception& e) {
    return error_response(500, e.what());
  }
}

struct HttpServer::Impl {
  Impl(PredictionService& svc, ServerOptions opts) : service(svc), options(std::move(opts)) {}
  PredictionService& service;
  ServerOptions options;
  httplib::Server server;
  bool bound = false;
};

namespace {

void set_cors(httplib::Response& res) {
  res.set_header("Access-Control-Allow-Origin", "*");
  res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
  res.set_header("Access-Control-Allow-Headers", "Content-Type");
}

void reply(httplib::Response& res, const HttpResponse& r) {
  res.status = r.status;
  res.set_content(r.body, "application/json");
}

}  // namespace

HttpServer::HttpServer(PredictionService& service, ServerOptions options)
    : impl_(std::make_unique<Impl>(service, std::move(options))) {
  auto& srv = impl_->server;
  auto& svc = impl_->service;
  srv.set_payload_max_length(impl_->options.max_body_bytes);
  // No SO_REUSEPORT: a second server on a busy port must fail to bind.
  srv.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });

  srv.Get("/health", [&svc](const httplib::Request&, httplib::Response& res) { reply(res, svc.health()); });
  srv.Post("/predict", [&svc](const httplib::Request& req, httplib::Response& res) { reply(res, svc.predict(req.body)); });
  srv.Post("/samples", [&svc](const httplib::Request& req, httplib::Response& res) {
    reply(res, svc.add_sample(req.body));
  });
  srv.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  srv.set_post_routing_handler([](const httplib::Request&, httplib::Response& res) { set_cors(res); });
  srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    set_cors(res);
    if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
    const std::string message = res.status == 413 ? "request body too large"
                                : res.status == 404 ? "no such endpoint"
                                                    : httplib::status_message(res.status);
    res.set_content(nlohmann::json{{"error", message}}.dump(), "application/json");
    return httplib::Server::HandlerResponse::Handled;
  });
  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string message = "internal error";
    try {
      if (ep) std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      message = e.what();
    } catch (...) {
    }
    res.status = 500;
    set_cors(res);
    res.set_content(nlohmann::json{{"error", message}}.dump(), "application/json");
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind() {
  auto& o = impl_->options;
  int port = o.port;
  if (port == 0) {
    port = impl_->server.bind_to_any_port(o.host);
    if (port < 0) throw std::runtime_error("cannot bind " + o.host + " on any port");
  } else if (!impl_->server.bind_to_port(o.host, port)) {
    throw std::runtime_error("cannot bind " + o.host + ":" + std::to_string(port));
  }
  impl_->bound = true;
  return port;
}

void HttpServer::listen() {
  if (!impl_->bound) throw std::logic_error("HttpServer::listen() before bind()");
  impl_->server.listen_after_bind();
}

void HttpServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

bool HttpServer::running() const { return impl_->server.is_running(); }

void serve(ModelArtifact artifact, const ServerOptions& options, const std::filesystem::path& sample_store) {
  PredictionService service(std::move(artifact), sample_store);
  HttpServer server(service, options);
  const int port = server.bind();
  std::clog << "serving model " << service.model_id() << " on http://" << options.host << ":" << port
            << " (samples -> " << sample_store.string() << ")\n";
  server.listen();
}

}  // namespace asl::serve
