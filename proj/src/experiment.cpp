#include "asl/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "asl/forest.hpp"
#include "asl/knn.hpp"

namespace asl::experiment {

using preprocess::BoxKind;
using preprocess::PipelineSpec;

std::string_view to_string(AlgorithmKind kind) noexcept {
  switch (kind) {
    case AlgorithmKind::Knn: return "knn";
    case AlgorithmKind::RandomForest: return "rf";
    case AlgorithmKind::NeuralNetwork: return "mlp";
  }
  return "?";
}

std::string_view display_name(AlgorithmKind kind) noexcept {
  switch (kind) {
    case AlgorithmKind::Knn: return "kNN";
    case AlgorithmKind::RandomForest: return "Random Forest";
    case AlgorithmKind::NeuralNetwork: return "Neural Network";
  }
  return "?";
}

AlgorithmKind parse_algorithm(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "knn") return AlgorithmKind::Knn;
  if (lower == "rf" || lower == "forest" || lower == "random-forest") return AlgorithmKind::RandomForest;
  if (lower == "mlp" || lower == "nn" || lower == "neural-network") return AlgorithmKind::NeuralNetwork;
  throw std::invalid_argument("unknown algorithm '" + std::string(text) + "' (expected knn, rf or mlp)");
}

std::uint64_t ConfusionMatrix::total() const noexcept {
  std::uint64_t sum = 0;
  for (const auto& row : counts)
    for (auto c : row) sum += c;
  return sum;
}

std::uint64_t ConfusionMatrix::trace() const noexcept {
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < kNumLabels; ++i) sum += counts[i][i];
  return sum;
}

Evaluation evaluate(const Predictor& predict, const Dataset& test) {
  if (test.empty()) throw std::invalid_argument("cannot evaluate on an empty test set");
  Evaluation ev;
  for (const auto& s : test.samples) ev.confusion.add(s.label, predict(frame_to_features(s.frame)));
  ev.accuracy = static_cast<double>(ev.confusion.trace()) / static_cast<double>(ev.confusion.total());
  return ev;
}

std::array<std::optional<double>, kNumLabels> per_class_accuracy(const ConfusionMatrix& cm) {
  std::array<std::optional<double>, kNumLabels> out{};
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    std::uint64_t row = 0;
    for (auto c : cm.counts[i]) row += c;
    if (row > 0) out[i] = static_cast<double>(cm.counts[i][i]) / static_cast<double>(row);
  }
  return out;
}

std::string export_confusion(const ConfusionMatrix& cm, ConfusionFormat format) {
  if (format == ConfusionFormat::Json) {
    nlohmann::json j;
    j["labels"] = nlohmann::json::array();
    for (char c : Label::kLetters) j["labels"].push_back(std::string(1, c));
    j["counts"] = cm.counts;
    return j.dump() + "\n";
  }
  std::string out = "true\\predicted";
  for (char c : Label::kLetters) {
    out += ',';
    out += c;
  }
  out += '\n';
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    out += Label::kLetters[i];
    for (auto c : cm.counts[i]) out += "," + std::to_string(c);
    out += '\n';
  }
  return out;
}

ConfusionMatrix import_confusion(std::string_view text, ConfusionFormat format) {
  ConfusionMatrix cm;
  if (format == ConfusionFormat::Json) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument(std::string("confusion JSON: ") + e.what());
    }
    const auto& labels = j.at("labels");
    if (labels.size() != kNumLabels) throw std::invalid_argument("confusion JSON: expected 24 labels");
    for (std::size_t i = 0; i < kNumLabels; ++i) {
      if (labels[i].get<std::string>() != std::string(1, Label::kLetters[i])) {
        throw std::invalid_argument("confusion JSON: labels out of order");
      }
    }
    cm.counts = j.at("counts").get<decltype(cm.counts)>();
    return cm;
  }

  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("confusion CSV: missing header");
  {
    std::istringstream header(line);
    std::string cell;
    std::getline(header, cell, ',');
    for (std::size_t i = 0; i < kNumLabels; ++i) {
      if (!std::getline(header, cell, ',') || cell != std::string(1, Label::kLetters[i])) {
        throw std::invalid_argument("confusion CSV: header must list the 24 labels in order");
      }
    }
  }
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    if (!std::getline(in, line)) throw std::invalid_argument("confusion CSV: expected 24 rows");
    std::istringstream row(line);
    std::string cell;
    std::getline(row, cell, ',');
    if (cell != std::string(1, Label::kLetters[i])) throw std::invalid_argument("confusion CSV: row label mismatch");
    for (std::size_t k = 0; k < kNumLabels; ++k) {
      if (!std::getline(row, cell, ',')) throw std::invalid_argument("confusion CSV: short row");
      try {
        std::size_t used = 0;
        cm.counts[i][k] = std::stoull(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw std::invalid_argument("confusion CSV: bad count '" + cell + "'");
      }
    }
  }
  return cm;
}

const GridResult* RunReport::find(const PipelineSpec& spec, AlgorithmKind algo) const {
  for (const auto& r : results) {
    if (r.algorithm == algo && r.spec == spec) return &r;
  }
  return nullptr;
}

std::uint64_t cell_seed(std::uint64_t grid_seed, const PipelineSpec& spec, AlgorithmKind algo) {
  // The box kind only enters the key when a step consults it, so identical
  // inputs always share a seed.
  const bool uses_box = spec.contains(preprocess::Step::Shift) || spec.contains(preprocess::Step::Scale);
  const std::string pipeline = uses_box ? spec.to_string() : preprocess::steps_to_string(spec.steps);
  const std::string key = pipeline + "|" + std::string(to_string(algo));
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : key) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t x = h ^ (grid_seed + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

struct PreparedSplit {
  Dataset train;       // full training split, transformed
  Dataset test;        // transformed
  Dataset fit;         // sweep training data (train, or train minus holdout)
  Dataset select;      // sweep scoring data (test, or the holdout)
};

GridResult run_cell(const PreparedSplit& data, const PipelineSpec& spec, AlgorithmKind algo,
                    const GridOptions& options, std::uint64_t grid_seed) {
  GridResult r;
  r.spec = spec;
  r.algorithm = algo;
  const std::uint64_t seed = cell_seed(grid_seed, spec, algo);
  switch (algo) {
    case AlgorithmKind::Knn: {
      const auto sweep = classifiers::knn_sweep(data.fit, data.select, 1, options.k_max);
      const auto model = classifiers::knn_fit(data.train, sweep.best);
      const auto ev = evaluate([&](const FeatureVector& x) { return model.predict(x); }, data.test);
      r.hyperparameter = sweep.best;
      r.sweep = sweep.accuracies;
      r.accuracy = ev.accuracy;
      r.confusion = ev.confusion;
      break;
    }
    case AlgorithmKind::RandomForest: {
      const auto sweep = classifiers::rf_sweep(data.fit, data.select, seed, 1, options.n_max);
      const auto model = classifiers::rf_fit(data.train, sweep.best, seed);
      const auto ev = evaluate([&](const FeatureVector& x) { return model.predict(x); }, data.test);
      r.hyperparameter = sweep.best;
      r.sweep = sweep.accuracies;
      r.accuracy = ev.accuracy;
      r.confusion = ev.confusion;
      break;
    }
    case AlgorithmKind::NeuralNetwork: {
      auto cfg = options.train;
      cfg.seed = seed;
      auto trained = classifiers::mlp_train(classifiers::mlp_init(options.mlp_widths, seed), data.train, cfg);
      const auto& model = trained.model;
      const auto ev = evaluate([&](const FeatureVector& x) { return classifiers::mlp_predict(model, x); }, data.test);
      r.accuracy = ev.accuracy;
      r.confusion = ev.confusion;
      r.curves = std::move(trained.curves);
      break;
    }
  }
  return r;
}

}  // namespace

RunReport run_grid(const Dataset& ds, const std::vector<PipelineSpec>& specs,
                   const std::vector<AlgorithmKind>& algos, const GridOptions& options) {
  if (ds.empty()) throw std::invalid_argument("cannot run a grid on an empty dataset");
  if (!(options.holdout >= 0.0 && options.holdout < 1.0)) throw std::invalid_argument("holdout must lie in [0, 1)");

  RunReport report;
  report.split_seed = options.seed;
  report.dataset_fingerprint = fingerprint(write_csv(ds));

  const auto [train, test] = split_train_test(ds, options.split_ratio, options.seed);
  Dataset fit_raw = train, select_raw = test;
  if (options.holdout > 0.0) {
    auto parts = split_train_test(train, 1.0 - options.holdout, options.seed ^ 0x5bd1e995ULL);
    fit_raw = std::move(parts.first);
    select_raw = std::move(parts.second);
  }

  std::vector<PreparedSplit> prepared;
  prepared.reserve(specs.size());
  for (const auto& spec : specs) {
    PreparedSplit p;
    p.train = preprocess::apply_pipeline(train, spec);
    p.test = preprocess::apply_pipeline(test, spec);
    if (options.holdout > 0.0) {
      p.fit = preprocess::apply_pipeline(fit_raw, spec);
      p.select = preprocess::apply_pipeline(select_raw, spec);
    } else {
      p.fit = p.train;
      p.select = p.test;
    }
    prepared.push_back(std::move(p));
  }

  const std::size_t cells = specs.size() * algos.size();
  report.results.resize(cells);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells; i = next++) {
      const std::size_t s = i / algos.size();
      const AlgorithmKind algo = algos[i % algos.size()];
      try {
        report.results[i] = run_cell(prepared[s], specs[s], algo, options, options.seed);
      } catch (const std::exception& e) {
        GridResult failed;
        failed.spec = specs[s];
        failed.algorithm = algo;
        failed.error = e.what();
        report.results[i] = std::move(failed);
      }
    }
  };

  std::size_t threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(cells, 1));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  for (AlgorithmKind algo : algos) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : report.results) {
      if (r.algorithm == algo && !r.failed()) {
        sum += r.accuracy;
        ++n;
      }
    }
    report.averages.emplace_back(algo, n ? sum / static_cast<double>(n) : 0.0);
  }
  return report;
}

std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", fraction * 100.0);
  return buf;
}

std::string render_table(const RunReport& report, TableFormat format) {
  std::vector<std::vector<preprocess::Step>> rows;
  for (const auto& r : report.results) {
    if (std::find(rows.begin(), rows.end(), r.spec.steps) == rows.end()) rows.push_back(r.spec.steps);
  }

  auto cell = [&](const std::vector<preprocess::Step>& steps, BoxKind box, AlgorithmKind algo) -> std::string {
    const GridResult* r = report.find(PipelineSpec{steps, box}, algo);
    if (!r || r->failed()) return "—";
    return format_percent(r->accuracy);
  };

  std::string out;
  const std::array<BoxKind, 2> boxes{BoxKind::Cuboidal, BoxKind::Cubical};
  if (format == TableFormat::Markdown) {
    out += "| Pre-processing Combination |";
    for (BoxKind box : boxes) {
      for (AlgorithmKind algo : kAllAlgorithms) {
        out += " " + std::string(display_name(algo)) + " (" + (box == BoxKind::Cuboidal ? "Cuboidal" : "Cubical") + ") |";
      }
    }
    out += "\n|---|---:|---:|---:|---:|---:|---:|\n";
    for (const auto& steps : rows) {
      out += "| " + preprocess::describe_steps(steps) + " |";
      for (BoxKind box : boxes)
        for (AlgorithmKind algo : kAllAlgorithms) out += " " + cell(steps, box, algo) + " |";
      out += '\n';
    }
  } else {
    out += "combination";
    for (BoxKind box : boxes)
      for (AlgorithmKind algo : kAllAlgorithms)
        out += "," + std::string(to_string(algo)) + "_" + std::string(preprocess::to_string(box));
    out += '\n';
    for (const auto& steps : rows) {
      out += preprocess::steps_to_string(steps);
      for (BoxKind box : boxes)
        for (AlgorithmKind algo : kAllAlgorithms) out += "," + cell(steps, box, algo);
      out += '\n';
    }
  }
  return out;
}

std::string export_curves(const RunReport& report) {
  std::string out = "spec,algorithm,epoch,loss,accuracy\n";
  for (const auto& r : report.results) {
    if (!r.curves) continue;
    for (std::size_t e = 0; e < r.curves->loss.size(); ++e) {
      out += r.spec.to_string() + "," + std::string(to_string(r.algorithm)) + "," + std::to_string(e + 1) + "," +
             format_coordinate(r.curves->loss[e]) + "," + format_coordinate(r.curves->accuracy[e]) + "\n";
    }
  }
  return out;
}

}  // namespace asl::experiment
