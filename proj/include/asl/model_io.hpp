#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

#include "asl/experiment.hpp"
#include "asl/forest.hpp"
#include "asl/knn.hpp"
#include "asl/mlp.hpp"
#include "asl/preprocess.hpp"

namespace asl::serve {

inline constexpr int kFormatVersion = 1;

/// Malformed, truncated or otherwise unreadable model file.
class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Well-formed file written by an unsupported format version.
class VersionError : public DecodeError {
 public:
  VersionError(int found, int supported);
  int found() const noexcept { return found_; }

 private:
  int found_;
};

using ModelPayload = std::variant<classifiers::KnnModel, classifiers::ForestModel, classifiers::MlpModel>;

/// A trained classifier together with the preprocessing it expects, so a
/// served model always sees input normalized the way it was trained.
struct ModelArtifact {
  int format_version = kFormatVersion;
  preprocess::PipelineSpec pipeline;
  ModelPayload payload;
  std::string created_at;  // ISO-8601 UTC

  experiment::AlgorithmKind algorithm() const noexcept;
};

ModelArtifact make_artifact(preprocess::PipelineSpec pipeline, ModelPayload payload);

// File layout (UTF-8 text, LF line endings):
//
//   asl-model <version>
//   <one-line JSON header: algorithm, pipeline, labels, created_at, dimensions>
//   <payload: one record per line, numbers in shortest round-trip decimal>
//   end <payload line count>
//
// knn:  one line per stored sample, "<label> <63 coordinates>"
// rf:   per tree "tree <node count>", then per node
//       "leaf <24 counts>" or "split <feature> <threshold> <left> <right>"
// mlp:  per layer "layer <rows> <cols>", one line of weights (row-major), one line of biases
std::string encode_model(const ModelArtifact& artifact);
ModelArtifact decode_model(std::string_view text);

void save_model(const ModelArtifact& artifact, const std::filesystem::path& destination);
ModelArtifact load_model(const std::filesystem::path& source);

/// Stable digest of the encoded artifact.
std::string model_fingerprint(const ModelArtifact& artifact);

struct PredictionResponse {
  Label label = Label::from_index(0);
  /// Softmax output for the network, tree vote shares for the forest; absent for kNN.
  std::optional<std::map<char, double>> probabilities;
  std::string model_id;
};

/// Applies the artifact's pipeline, then its classifier. The single inference
/// path shared by the CLI and the HTTP service.
PredictionResponse predict_frame(const ModelArtifact& artifact, const HandFrame& frame,
                                 const std::string& model_id = {});

}  // namespace asl::serve
