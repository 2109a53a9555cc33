// Command-line front end: synthetic data, the preprocessing grid, single-model
// training/evaluation, one-off prediction and the HTTP service.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "asl/dataset.hpp"
#include "asl/experiment.hpp"
#include "asl/forest.hpp"
#include "asl/knn.hpp"
#include "asl/mlp.hpp"
#include "asl/model_io.hpp"
#include "asl/preprocess.hpp"
#include "asl/service.hpp"

namespace fs = std::filesystem;
using namespace asl;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << bytes;
}

Dataset load_dataset(const fs::path& path) { return parse_csv(read_file(path)); }

std::vector<double> parse_feature_list(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    while (used < tok.size() && std::isspace(static_cast<unsigned char>(tok[used]))) ++used;
    if (used != tok.size()) throw std::invalid_argument("bad feature value '" + tok + "'");
    values.push_back(v);
  }
  return values;
}

struct GenerateArgs {
  SyntheticOptions synth;
  bool no_placement = false;
  std::string out;
};

struct GridArgs {
  std::string data;
  std::uint64_t seed = 0;
  bool holdout = false;
  double holdout_fraction = 0.2;
  std::string out;
  std::vector<std::string> algos{"knn", "rf", "mlp"};
  std::size_t epochs = 128;
  std::size_t threads = 0;
};

struct TrainArgs {
  std::string algo;
  std::string spec = "round+shift+scale@cubical";
  std::string data;
  std::string out;
  std::size_t k = 0;
  std::size_t trees = 0;
  std::size_t epochs = 128;
  std::uint64_t seed = 0;
};

int run_generate(const GenerateArgs& a) {
  auto opts = a.synth;
  opts.placement = !a.no_placement;
  const std::string csv = write_csv(generate_synthetic(opts));
  if (a.out.empty() || a.out == "-") {
    std::cout << csv;
  } else {
    write_file(a.out, csv);
    std::clog << "wrote " << opts.per_class * kNumLabels << " samples to " << a.out << "\n";
  }
  return 0;
}

int run_grid(const GridArgs& a) {
  const Dataset ds = load_dataset(a.data);
  experiment::GridOptions opts;
  opts.seed = a.seed;
  opts.holdout = a.holdout ? a.holdout_fraction : 0.0;
  opts.train.epochs = a.epochs;
  opts.threads = a.threads;
  std::vector<experiment::AlgorithmKind> algos;
  for (const auto& name : a.algos) algos.push_back(experiment::parse_algorithm(name));

  const auto start = std::chrono::steady_clock::now();
  const auto report = experiment::run_grid(ds, preprocess::enumerate_grid_configurations(), algos, opts);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const fs::path out(a.out);
  fs::create_directories(out / "confusion");
  write_file(out / "table.md", experiment::render_table(report, experiment::TableFormat::Markdown));
  write_file(out / "table.csv", experiment::render_table(report, experiment::TableFormat::Csv));
  write_file(out / "curves.csv", experiment::export_curves(report));

  nlohmann::ordered_json summary;
  summary["dataset"] = report.dataset_fingerprint;
  summary["split_seed"] = report.split_seed;
  summary["holdout"] = opts.holdout;
  summary["seconds"] = secs;
  for (const auto& [algo, avg] : report.averages) summary["averages"][std::string(experiment::to_string(algo))] = avg;
  for (const auto& r : report.results) {
    const std::string name = r.spec.to_string() + "__" + std::string(experiment::to_string(r.algorithm));
    nlohmann::ordered_json cell;
    cell["spec"] = r.spec.to_string();
    cell["algorithm"] = std::string(experiment::to_string(r.algorithm));
    if (r.failed()) {
      cell["error"] = *r.error;
    } else {
      cell["accuracy"] = r.accuracy;
      if (r.hyperparameter) cell["hyperparameter"] = *r.hyperparameter;
      write_file(out / "confusion" / (name + ".csv"),
                 experiment::export_confusion(r.confusion, experiment::ConfusionFormat::Csv));
    }
    summary["cells"].push_back(cell);
  }
  write_file(out / "summary.json", summary.dump(2) + "\n");

  std::cout << experiment::render_table(report, experiment::TableFormat::Markdown) << "\n";
  for (const auto& [algo, avg] : report.averages) {
    std::cout << "average " << experiment::display_name(algo) << ": " << experiment::format_percent(avg) << "\n";
  }
  std::clog << "grid finished in " << secs << " s; outputs in " << out.string() << "\n";
  return 0;
}

int run_train(const TrainArgs& a) {
  const auto algo = experiment::parse_algorithm(a.algo);
  const auto spec = preprocess::PipelineSpec::parse(a.spec);
  const Dataset train = preprocess::apply_pipeline(load_dataset(a.data), spec);
  if (train.empty()) throw std::runtime_error("training data is empty");

  // Hyperparameters left at 0 are picked by a sweep on an internal 80:20 split.
  auto internal_split = [&] { return split_train_test(train, 0.8, a.seed); };
  serve::ModelPayload payload = classifiers::MlpModel{};
  switch (algo) {
    case experiment::AlgorithmKind::Knn: {
      std::size_t k = a.k;
      if (k == 0) {
        const auto [fit, val] = internal_split();
        k = classifiers::knn_sweep(fit, val, 1, std::min<std::size_t>(25, fit.size())).best;
        std::clog << "selected k=" << k << "\n";
      }
      payload = classifiers::knn_fit(train, k);
      break;
    }
    case experiment::AlgorithmKind::RandomForest: {
      std::size_t n = a.trees;
      if (n == 0) {
        const auto [fit, val] = internal_split();
        n = classifiers::rf_sweep(fit, val, a.seed, 1, 200).best;
        std::clog << "selected n=" << n << "\n";
      }
      payload = classifiers::rf_fit(train, n, a.seed);
      break;
    }
    case experiment::AlgorithmKind::NeuralNetwork: {
      classifiers::TrainConfig cfg;
      cfg.epochs = a.epochs;
      cfg.seed = a.seed;
      auto result = classifiers::mlp_train(classifiers::mlp_init(classifiers::default_mlp_widths(), a.seed), train, cfg);
      if (!result.curves.loss.empty()) {
        std::clog << "final loss " << result.curves.loss.back() << ", training accuracy "
                  << result.curves.accuracy.back() << "\n";
      }
      payload = std::move(result.model);
      break;
    }
  }
  const auto artifact = serve::make_artifact(spec, std::move(payload));
  serve::save_model(artifact, a.out);
  std::clog << "saved " << experiment::to_string(algo) << " model " << serve::model_fingerprint(artifact) << " to "
            << a.out << "\n";
  return 0;
}

int run_evaluate(const std::string& model_path, const std::string& data_path, bool per_class) {
  const auto artifact = serve::load_model(model_path);
  const Dataset ds = load_dataset(data_path);
  experiment::ConfusionMatrix cm;
  for (const auto& s : ds.samples) cm.add(s.label, serve::predict_frame(artifact, s.frame).label);
  if (cm.total() == 0) throw std::runtime_error("evaluation data is empty");
  const double acc = static_cast<double>(cm.trace()) / static_cast<double>(cm.total());
  std::cout << "accuracy " << experiment::format_percent(acc) << "% (" << cm.trace() << "/" << cm.total() << ")\n";
  if (per_class) {
    const auto pc = experiment::per_class_accuracy(cm);
    for (std::size_t i = 0; i < kNumLabels; ++i) {
      std::cout << Label::kLetters[i] << " " << (pc[i] ? experiment::format_percent(*pc[i]) : std::string("n/a")) << "\n";
    }
  }
  return 0;
}

int run_predict(const std::string& model_path, const std::string& features) {
  const auto artifact = serve::load_model(model_path);
  const auto values = parse_feature_list(features);
  const HandFrame frame = features_to_frame(values);
  std::cout << serve::response_json(serve::predict_frame(artifact, frame, serve::model_fingerprint(artifact))) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ASL fingerspelling recognition from hand landmarks"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Write a seeded synthetic landmark dataset as CSV");
  generate->add_option("--per-class", gen.synth.per_class, "Samples per letter")->check(CLI::PositiveNumber);
  generate->add_option("--jitter", gen.synth.jitter, "Gaussian noise per coordinate")->check(CLI::NonNegativeNumber);
  generate->add_option("--seed", gen.synth.seed, "Random seed");
  generate->add_flag("--no-placement", gen.no_placement, "Do not translate/scale hands randomly");
  generate->add_option("--out", gen.out, "Output CSV (default: stdout)");

  GridArgs grid;
  auto* grid_cmd = app.add_subcommand("grid", "Run every preprocessing configuration with every algorithm");
  grid_cmd->add_option("--data", grid.data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  grid_cmd->add_option("--seed", grid.seed, "Split and training seed");
  grid_cmd->add_flag("--holdout", grid.holdout, "Select k / n on a validation subset of train instead of the test set");
  grid_cmd->add_option("--holdout-fraction", grid.holdout_fraction, "Fraction of train used for validation")
      ->check(CLI::Range(0.01, 0.99));
  grid_cmd->add_option("--out", grid.out, "Output directory")->required();
  grid_cmd->add_option("--algos", grid.algos, "Subset of knn, rf, mlp");
  grid_cmd->add_option("--epochs", grid.epochs, "Network training epochs");
  grid_cmd->add_option("--threads", grid.threads, "Worker threads (0 = all cores)");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train one model and save it with its preprocessing pipeline");
  train_cmd->add_option("--algo", train.algo, "knn, rf or mlp")->required();
  train_cmd->add_option("--spec", train.spec, "Pipeline, e.g. round+shift+scale@cubical");
  train_cmd->add_option("--data", train.data, "Training CSV")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train.out, "Model file")->required();
  train_cmd->add_option("--k", train.k, "Neighbors (0 = sweep 1..25)");
  train_cmd->add_option("--trees", train.trees, "Forest size (0 = sweep 1..200)");
  train_cmd->add_option("--epochs", train.epochs, "Network training epochs");
  train_cmd->add_option("--seed", train.seed, "Random seed");

  std::string model_path, data_path, features;
  bool per_class = false;
  auto* eval_cmd = app.add_subcommand("evaluate", "Accuracy of a saved model on a labeled CSV");
  eval_cmd->add_option("--model", model_path, "Model file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", data_path, "Labeled CSV")->required()->check(CLI::ExistingFile);
  eval_cmd->add_flag("--per-class", per_class, "Also print per-letter accuracy");

  auto* predict_cmd = app.add_subcommand("predict", "Classify one landmark vector");
  predict_cmd->add_option("--model", model_path, "Model file")->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--features", features, "63 comma-separated coordinates")->required();

  serve::ServerOptions server_opts;
  std::string samples_path = "samples.csv";
  auto* serve_cmd = app.add_subcommand("serve", "Serve /health, /predict and /samples over HTTP");
  serve_cmd->add_option("--model", model_path, "Model file")->required()->check(CLI::ExistingFile);
  serve_cmd->add_option("--host", server_opts.host, "Bind address");
  serve_cmd->add_option("--port", server_opts.port, "Port");
  serve_cmd->add_option("--samples", samples_path, "CSV file receiving POST /samples");
  serve_cmd->add_option("--max-body", server_opts.max_body_bytes, "Largest accepted request body in bytes");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*generate) return run_generate(gen);
    if (*grid_cmd) return run_grid(grid);
    if (*train_cmd) return run_train(train);
    if (*eval_cmd) return run_evaluate(model_path, data_path, per_class);
    if (*predict_cmd) return run_predict(model_path, features);
    if (*serve_cmd) {
      serve::serve(serve::load_model(model_path), server_opts, samples_path);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
