#include "asl/model_io.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

namespace asl::serve {

using classifiers::DecisionTree;
using classifiers::DenseLayer;
using classifiers::ForestModel;
using classifiers::KnnModel;
using classifiers::MlpModel;
using experiment::AlgorithmKind;

VersionError::VersionError(int found, int supported)
    : DecodeError("unsupported model format version " + std::to_string(found) + " (this reader supports version " +
                  std::to_string(supported) + ")"),
      found_(found) {}

AlgorithmKind ModelArtifact::algorithm() const noexcept {
  switch (payload.index()) {
    case 0: return AlgorithmKind::Knn;
    case 1: return AlgorithmKind::RandomForest;
    default: return AlgorithmKind::NeuralNetwork;
  }
}

ModelArtifact make_artifact(preprocess::PipelineSpec pipeline, ModelPayload payload) {
  ModelArtifact a{kFormatVersion, std::move(pipeline), std::move(payload), {}};
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &utc);
  a.created_at = buf;
  return a;
}

namespace {

void put(std::string& out, double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

class Writer {
 public:
  void line(const std::string& s) {
    body_ += s;
    body_ += '\n';
    ++lines_;
  }
  std::string take() const { return body_; }
  std::size_t lines() const noexcept { return lines_; }

 private:
  std::string body_;
  std::size_t lines_ = 0;
};

nlohmann::json header_for(const ModelArtifact& a) {
  nlohmann::json h;
  h["algorithm"] = std::string(experiment::to_string(a.algorithm()));
  h["pipeline"] = a.pipeline.to_string();
  h["labels"] = std::string(Label::kLetters);
  h["created_at"] = a.created_at;
  h["features"] = kNumFeatures;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, KnnModel>) {
          h["k"] = m.k();
          h["samples"] = m.features().size();
        } else if constexpr (std::is_same_v<T, ForestModel>) {
          h["trees"] = m.size();
          h["seed"] = std::to_string(m.seed());
          h["max_features"] = m.params().max_features;
        } else {
          h["widths"] = m.widths();
        }
      },
      a.payload);
  return h;
}

void encode_payload(const KnnModel& m, Writer& w) {
  for (std::size_t i = 0; i < m.features().size(); ++i) {
    std::string s(1, m.labels()[i].letter());
    for (double v : m.features()[i]) {
      s += ' ';
      put(s, v);
    }
    w.line(s);
  }
}

void encode_payload(const ForestModel& m, Writer& w) {
  for (const auto& tree : m.trees()) {
    w.line("tree " + std::to_string(tree.nodes().size()));
    for (const auto& node : tree.nodes()) {
      std::string s;
      if (node.is_leaf()) {
        s = "leaf";
        for (auto c : node.counts) s += " " + std::to_string(c);
      } else {
        s = "split " + std::to_string(node.feature) + " ";
        put(s, node.threshold);
        s += " " + std::to_string(node.left) + " " + std::to_string(node.right);
      }
      w.line(s);
    }
  }
}

void encode_payload(const MlpModel& m, Writer& w) {
  for (const auto& layer : m.layers()) {
    w.line("layer " + std::to_string(layer.weights.rows()) + " " + std::to_string(layer.weights.cols()));
    std::string s;
    for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) {
      for (Eigen::Index j = 0; j < layer.weights.cols(); ++j) {
        if (!s.empty()) s += ' ';
        put(s, layer.weights(i, j));
      }
    }
    w.line(s);
    s.clear();
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) {
      if (i) s += ' ';
      put(s, layer.bias(i));
    }
    w.line(s);
  }
}

// Line-oriented token reader over the payload section.
class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  bool done() const noexcept { return text_.empty(); }
  std::size_t remaining_lines() const noexcept {
    return static_cast<std::size_t>(std::count(text_.begin(), text_.end(), '\n'));
  }
  void expect_lines(std::size_t n) const {
    if (n > remaining_lines()) throw DecodeError("model file truncated (declared record count exceeds content)");
  }
  std::size_t consumed() const noexcept { return consumed_; }

  std::string_view next_line() {
    if (text_.empty()) throw DecodeError("model file truncated");
    const auto nl = text_.find('\n');
    if (nl == std::string_view::npos) throw DecodeError("model file truncated (missing final newline)");
    const auto line = text_.substr(0, nl);
    text_.remove_prefix(nl + 1);
    ++consumed_;
    return line;
  }

  static std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    while (!line.empty()) {
      const auto sp = line.find(' ');
      out.push_back(line.substr(0, sp));
      if (sp == std::string_view::npos) break;
      line.remove_prefix(sp + 1);
    }
    return out;
  }

  static double number(std::string_view tok) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
      throw DecodeError("bad number '" + std::string(tok) + "' in model file");
    }
    return v;
  }

  template <typename Int>
  static Int integer(std::string_view tok) {
    Int v{};
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || ec != std::errc{} || ptr != tok.data() + tok.size()) {
      throw DecodeError("bad integer '" + std::string(tok) + "' in model file");
    }
    return v;
  }

 private:
  std::string_view text_;
  std::size_t consumed_ = 0;
};

KnnModel decode_knn(const nlohmann::json& h, Reader& r) {
  const auto k = h.at("k").get<std::size_t>();
  const auto n = h.at("samples").get<std::size_t>();
  r.expect_lines(n);
  std::vector<FeatureVector> features(n);
  std::vector<Label> labels;
  labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto toks = Reader::split(r.next_line());
    if (toks.size() != kNumFeatures + 1 || toks[0].size() != 1) throw DecodeError("malformed kNN sample record");
    auto label = Label::try_from_char(toks[0][0]);
    if (!label) throw DecodeError("unknown label in kNN sample record");
    labels.push_back(*label);
    for (std::size_t f = 0; f < kNumFeatures; ++f) features[i][f] = Reader::number(toks[f + 1]);
  }
  return KnnModel(k, std::move(features), std::move(labels));
}

ForestModel decode_forest(const nlohmann::json& h, Reader& r) {
  const auto n = h.at("trees").get<std::size_t>();
  classifiers::ForestParams params;
  params.max_features = h.at("max_features").get<std::size_t>();
  const auto seed = Reader::integer<std::uint64_t>(h.at("seed").get<std::string>());
  std::vector<DecisionTree> trees;
  r.expect_lines(n);
  trees.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    const auto head = Reader::split(r.next_line());
    if (head.size() != 2 || head[0] != "tree") throw DecodeError("expected tree record");
    const auto count = Reader::integer<std::size_t>(head[1]);
    r.expect_lines(count);
    std::vector<DecisionTree::Node> nodes(count);
    for (auto& node : nodes) {
      const auto toks = Reader::split(r.next_line());
      if (!toks.empty() && toks[0] == "leaf" && toks.size() == kNumLabels + 1) {
        for (std::size_t c = 0; c < kNumLabels; ++c) node.counts[c] = Reader::integer<std::uint32_t>(toks[c + 1]);
      } else if (toks.size() == 5 && toks[0] == "split") {
        node.feature = Reader::integer<std::int32_t>(toks[1]);
        node.threshold = Reader::number(toks[2]);
        node.left = Reader::integer<std::int32_t>(toks[3]);
        node.right = Reader::integer<std::int32_t>(toks[4]);
        if (node.feature < 0) throw DecodeError("negative split feature");
      } else {
        throw DecodeError("malformed tree node record");
      }
    }
    try {
      trees.emplace_back(std::move(nodes));
    } catch (const std::invalid_argument& e) {
      throw DecodeError(e.what());
    }
  }
  return ForestModel(std::move(trees), seed, params);
}

MlpModel decode_mlp(const nlohmann::json& h, Reader& r) {
  const auto widths = h.at("widths").get<std::vector<std::size_t>>();
  if (widths.size() < 2 || widths.front() != kNumFeatures || widths.back() != kNumLabels) {
    throw DecodeError("network widths must run from 63 inputs to 24 outputs");
  }
  r.expect_lines(3 * (widths.size() - 1));
  std::vector<DenseLayer> layers;
  for (std::size_t l = 1; l < widths.size(); ++l) {
    const auto head = Reader::split(r.next_line());
    if (head.size() != 3 || head[0] != "layer") throw DecodeError("expected layer record");
    const auto rows = Reader::integer<Eigen::Index>(head[1]);
    const auto cols = Reader::integer<Eigen::Index>(head[2]);
    if (static_cast<std::size_t>(rows) != widths[l] || static_cast<std::size_t>(cols) != widths[l - 1]) {
      throw DecodeError("layer shape disagrees with header widths");
    }
    const auto w = Reader::split(r.next_line());
    if (static_cast<Eigen::Index>(w.size()) != rows * cols) throw DecodeError("weight record has the wrong length");
    DenseLayer layer{Eigen::MatrixXd(rows, cols), Eigen::VectorXd(rows)};
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) layer.weights(i, j) = Reader::number(w[static_cast<std::size_t>(i * cols + j)]);
    const auto b = Reader::split(r.next_line());
    if (static_cast<Eigen::Index>(b.size()) != rows) throw DecodeError("bias record has the wrong length");
    for (Eigen::Index i = 0; i < rows; ++i) layer.bias(i) = Reader::number(b[static_cast<std::size_t>(i)]);
    layers.push_back(std::move(layer));
  }
  return MlpModel(std::move(layers));
}

}  // namespace

std::string encode_model(const ModelArtifact& artifact) {
  Writer w;
  std::visit([&](const auto& m) { encode_payload(m, w); }, artifact.payload);
  std::string out = "asl-model " + std::to_string(artifact.format_version) + "\n";
  out += header_for(artifact).dump() + "\n";
  out += w.take();
  out += "end " + std::to_string(w.lines()) + "\n";
  return out;
}

ModelArtifact decode_model(std::string_view text) {
  if (text.empty()) throw DecodeError("empty model file");
  Reader r(text);
  const auto magic = Reader::split(r.next_line());
  if (magic.size() != 2 || magic[0] != "asl-model") throw DecodeError("not a model file (bad magic line)");
  const int version = Reader::integer<int>(magic[1]);
  if (version != kFormatVersion) throw VersionError(version, kFormatVersion);

  nlohmann::json h;
  try {
    h = nlohmann::json::parse(r.next_line());
  } catch (const nlohmann::json::exception& e) {
    throw DecodeError(std::string("bad model header: ") + e.what());
  }

  try {
    if (h.at("labels").get<std::string>() != Label::kLetters) throw DecodeError("model label set differs");
    if (h.at("features").get<std::size_t>() != kNumFeatures) throw DecodeError("model feature count differs");

    auto pipeline = preprocess::PipelineSpec::parse(h.at("pipeline").get<std::string>());
    auto created_at = h.at("created_at").get<std::string>();

    const std::size_t before = r.consumed();
    ModelPayload payload = [&]() -> ModelPayload {
      switch (experiment::parse_algorithm(h.at("algorithm").get<std::string>())) {
        case AlgorithmKind::Knn: return decode_knn(h, r);
        case AlgorithmKind::RandomForest: return decode_forest(h, r);
        case AlgorithmKind::NeuralNetwork: break;
      }
      return decode_mlp(h, r);
    }();
    const std::size_t payload_lines = r.consumed() - before;
    ModelArtifact a{version, std::move(pipeline), std::move(payload), std::move(created_at)};

    const auto tail = Reader::split(r.next_line());
    if (tail.size() != 2 || tail[0] != "end" || Reader::integer<std::size_t>(tail[1]) != payload_lines) {
      throw DecodeError("model file trailer missing or inconsistent");
    }
    if (!r.done()) throw DecodeError("trailing data after model trailer");
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw DecodeError(std::string("bad model header: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DecodeError(e.what());
  }
}

void save_model(const ModelArtifact& artifact, const std::filesystem::path& destination) {
  const std::string bytes = encode_model(artifact);
  std::ofstream out(destination, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + destination.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw std::runtime_error("failed writing model to '" + destination.string() + "'");
}

ModelArtifact load_model(const std::filesystem::path& source) {
  std::ifstream in(source, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file '" + source.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_model(buf.str());
}

std::string model_fingerprint(const ModelArtifact& artifact) { return fingerprint(encode_model(artifact)); }

PredictionResponse predict_frame(const ModelArtifact& artifact, const HandFrame& frame, const std::string& model_id) {
  const FeatureVector x = frame_to_features(preprocess::apply_pipeline(frame, artifact.pipeline));
  PredictionResponse resp;
  resp.model_id = model_id;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, KnnModel>) {
          resp.label = m.predict(x);
        } else if constexpr (std::is_same_v<T, ForestModel>) {
          const auto votes = m.votes(x);
          resp.label = classifiers::majority(votes);
          std::map<char, double> probs;
          for (std::size_t c = 0; c < kNumLabels; ++c) {
            probs[Label::kLetters[c]] = static_cast<double>(votes[c]) / static_cast<double>(m.size());
          }
          resp.probabilities = std::move(probs);
        } else {
          const auto p = classifiers::mlp_forward(m, x);
          resp.label = classifiers::mlp_predict(m, x);
          std::map<char, double> probs;
          for (std::size_t c = 0; c < kNumLabels; ++c) probs[Label::kLetters[c]] = p[c];
          resp.probabilities = std::move(probs);
        }
      },
      artifact.payload);
  return resp;
}

}  // namespace asl::serve
