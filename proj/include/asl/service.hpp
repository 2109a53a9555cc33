#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>

#include "asl/model_io.hpp"

namespace asl::serve {

struct HttpResponse {
  int status = 200;
  std::string body;  // JSON
};

/// Append-only CSV sample file in the dataset schema. Appends are serialized
/// and flushed before the call returns.
class SampleStore {
 public:
  /// Creates the file with a header when absent; otherwise counts its rows.
  explicit SampleStore(std::filesystem::path path);

  /// Returns the total number of stored samples after the append.
  std::size_t append(const Sample& sample);
  std::size_t count() const;
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::size_t count_ = 0;
};

/// Request handling independent of the transport: each method maps a JSON
/// request body to a status code and JSON response body.
class PredictionService {
 public:
  PredictionService(ModelArtifact artifact, std::filesystem::path sample_store);

  HttpResponse health() const;
  HttpResponse predict(std::string_view body) const;
  HttpResponse add_sample(std::string_view body);

  const std::string& model_id() const noexcept { return model_id_; }
  const ModelArtifact& artifact() const noexcept { return artifact_; }
  const SampleStore& samples() const noexcept { return store_; }

 private:
  const ModelArtifact artifact_;
  const std::string model_id_;
  SampleStore store_;
};

/// Parses {"landmarks": [[x,y,z] x 21]}; throws std::invalid_argument with a
/// client-facing message on any schema violation.
HandFrame parse_landmarks(std::string_view body);

std::string response_json(const PredictionResponse& response);

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::size_t max_body_bytes = 64 * 1024;
};

/// HTTP front end over PredictionService. Permits cross-origin requests.
class HttpServer {
 public:
  HttpServer(PredictionService& service, ServerOptions options);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds the socket; throws std::runtime_error on failure. Returns the bound port.
  int bind();
  /// Serves until stop() is called. bind() must have succeeded.
  void listen();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Loads nothing itself: binds and serves `artifact` until the process is stopped.
void serve(ModelArtifact artifact, const ServerOptions& options, const std::filesystem::path& sample_store);

}  // namespace asl::serve
