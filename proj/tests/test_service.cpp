#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "asl/service.hpp"

// After Eigen: <resolv.h> defines a _res macro that breaks Eigen's headers.
#include <httplib.h>
#include <json.hpp>

using namespace asl;
using namespace asl::serve;
using preprocess::BoxKind;
using preprocess::PipelineSpec;
using preprocess::Step;
using nlohmann::json;

namespace {

const PipelineSpec kSpec{{Step::Shift, Step::Scale}, BoxKind::Cubical};

Dataset raw_data() {
  SyntheticOptions o;
  o.per_class = 3;
  o.seed = 12;
  return generate_synthetic(o);
}

ModelArtifact mlp_artifact() {
  classifiers::TrainConfig cfg;
  cfg.epochs = 2;
  const auto model = classifiers::mlp_train(classifiers::mlp_init({63, 8, 8, 8, 8, 8, 8, 8, 8, 24}, 3),
                                            preprocess::apply_pipeline(raw_data(), kSpec), cfg)
                         .model;
  return make_artifact(kSpec, model);
}

ModelArtifact knn_artifact() {
  return make_artifact(kSpec, classifiers::knn_fit(preprocess::apply_pipeline(raw_data(), kSpec), 1));
}

std::filesystem::path fresh_store(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "asl_service_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / name;
  std::filesystem::remove(path);
  return path;
}

json landmarks_json(const HandFrame& f, std::size_t count = kNumPoints) {
  json pts = json::array();
  for (std::size_t i = 0; i < count; ++i) {
    const auto& p = f.points[i % kNumPoints];
    pts.push_back({p.x, p.y, p.z});
  }
  return json{{"landmarks", pts}};
}

std::string read_all(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Runs an HttpServer on a free loopback port for the lifetime of the object.
class LiveServer {
 public:
  LiveServer(PredictionService& svc, std::size_t max_body = 64 * 1024) {
    ServerOptions opts;
    opts.port = 0;
    opts.max_body_bytes = max_body;
    server_ = std::make_unique<HttpServer>(svc, opts);
    port_ = server_->bind();
    thread_ = std::thread([this] { server_->listen(); });
    for (int i = 0; i < 200 && !server_->running(); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  ~LiveServer() {
    server_->stop();
    thread_.join();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_connection_timeout(5);
    c.set_read_timeout(10);
    return c;
  }
  int port() const { return port_; }

 private:
  std::unique_ptr<HttpServer> server_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace

TEST_CASE("landmark parsing validates the schema") {
  const HandFrame f = raw_data().samples[0].frame;
  CHECK(parse_landmarks(landmarks_json(f).dump()) == f);

  try {
    parse_landmarks(landmarks_json(f, 20).dump());
    FAIL("expected rejection");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()) == "expected 21 landmarks, got 20");
  }
  CHECK_THROWS_AS(parse_landmarks("{"), std::invalid_argument);
  CHECK_THROWS_AS(parse_landmarks("[]"), std::invalid_argument);
  CHECK_THROWS_AS(parse_landmarks(R"({"points":[]})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_landmarks(R"({"landmarks":5})"), std::invalid_argument);
  json bad = landmarks_json(f);
  bad["landmarks"][4] = json::array({1, 2});
  CHECK_THROWS_AS(parse_landmarks(bad.dump()), std::invalid_argument);
  bad["landmarks"][4] = json::array({1, "2", 3});
  CHECK_THROWS_AS(parse_landmarks(bad.dump()), std::invalid_argument);
  bad["landmarks"][4] = json::array({1, 2.5, 3});
  CHECK_NOTHROW(parse_landmarks(bad.dump()));
  std::string overflow = R"({"landmarks":[[1e999,0,0])";
  for (int i = 1; i < 21; ++i) overflow += ",[0,0,0]";
  CHECK_THROWS_AS(parse_landmarks(overflow + "]}"), std::invalid_argument);
}

TEST_CASE("handler responses follow the wire format") {
  const auto artifact = mlp_artifact();
  PredictionService svc(artifact, fresh_store("handlers.csv"));
  CHECK(svc.model_id() == model_fingerprint(artifact));

  const auto health = svc.health();
  CHECK(health.status == 200);
  CHECK(json::parse(health.body) == json{{"status", "ok"}, {"model", svc.model_id()}});

  const HandFrame f = raw_data().samples[10].frame;
  const auto ok = svc.predict(landmarks_json(f).dump());
  CHECK(ok.status == 200);
  const auto body = json::parse(ok.body);
  const auto expected = predict_frame(artifact, f, svc.model_id());
  CHECK(body["label"] == std::string(1, expected.label.letter()));
  CHECK(body["model"] == svc.model_id());
  REQUIRE(body["probabilities"].size() == 24);
  double sum = 0.0;
  for (const auto& [k, v] : body["probabilities"].items()) sum += v.get<double>();
  CHECK(std::abs(sum - 1.0) <= 1e-6);
  CHECK(ok.body.find("\"label\"") < ok.body.find("\"probabilities\""));

  const auto short_frame = svc.predict(landmarks_json(f, 20).dump());
  CHECK(short_frame.status == 400);
  CHECK(json::parse(short_frame.body)["error"] == "expected 21 landmarks, got 20");
  CHECK(svc.predict("nope").status == 400);
}

TEST_CASE("kNN responses omit probabilities") {
  PredictionService svc(knn_artifact(), fresh_store("knn.csv"));
  const auto r = svc.predict(landmarks_json(raw_data().samples[7].frame).dump());
  CHECK(r.status == 200);
  const auto body = json::parse(r.body);
  CHECK_FALSE(body.contains("probabilities"));
  CHECK(body["label"] == std::string(1, raw_data().samples[7].label.letter()));
}

TEST_CASE("samples are validated, appended and counted") {
  const auto path = fresh_store("samples.csv");
  PredictionService svc(knn_artifact(), path);
  const Dataset raw = raw_data();
  for (std::size_t i = 0; i < 5; ++i) {
    json req = landmarks_json(raw.samples[i].frame);
    req["label"] = std::string(1, raw.samples[i].label.letter());
    const auto r = svc.add_sample(req.dump());
    CHECK(r.status == 200);
    CHECK(json::parse(r.body) == json{{"stored", true}, {"count", i + 1}});
  }
  json bad = landmarks_json(raw.samples[0].frame);
  bad["label"] = "j";
  CHECK(svc.add_sample(bad.dump()).status == 400);
  bad["label"] = "ab";
  CHECK(svc.add_sample(bad.dump()).status == 400);
  bad.erase("label");
  CHECK(svc.add_sample(bad.dump()).status == 400);
  CHECK(svc.add_sample(landmarks_json(raw.samples[0].frame, 3).dump()).status == 400);
  CHECK(svc.samples().count() == 5);

  const Dataset stored = parse_csv(read_all(path));
  REQUIRE(stored.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(stored.samples[i] == raw.samples[i]);
}

TEST_CASE("sample store survives a restart") {
  const auto path = fresh_store("restart.csv");
  const Dataset raw = raw_data();
  {
    SampleStore store(path);
    CHECK(store.append(raw.samples[0]) == 1);
    CHECK(store.append(raw.samples[1]) == 2);
  }
  SampleStore reopened(path);
  CHECK(reopened.count() == 2);
  CHECK(reopened.append(raw.samples[2]) == 3);
  const Dataset stored = parse_csv(read_all(path));
  REQUIRE(stored.size() == 3);
  CHECK(stored.samples[2] == raw.samples[2]);
}

TEST_CASE("live server: endpoints, errors and CORS") {
  const auto artifact = mlp_artifact();
  PredictionService svc(artifact, fresh_store("live.csv"));
  LiveServer server(svc, 4096);
  auto cli = server.client();

  auto health = cli.Get("/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(json::parse(health->body)["status"] == "ok");
  CHECK(health->get_header_value("Access-Control-Allow-Origin") == "*");
  CHECK(health->get_header_value("Content-Type") == "application/json");

  const HandFrame f = raw_data().samples[3].frame;
  auto pred = cli.Post("/predict", landmarks_json(f).dump(), "application/json");
  REQUIRE(pred);
  CHECK(pred->status == 200);
  CHECK(pred->body == svc.predict(landmarks_json(f).dump()).body);
  CHECK(pred->get_header_value("Access-Control-Allow-Origin") == "*");

  auto bad = cli.Post("/predict", landmarks_json(f, 20).dump(), "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  CHECK(json::parse(bad->body)["error"] == "expected 21 landmarks, got 20");
  CHECK(bad->get_header_value("Access-Control-Allow-Origin") == "*");

  auto huge = cli.Post("/predict", std::string(10000, ' '), "application/json");
  REQUIRE(huge);
  CHECK(huge->status == 413);
  CHECK(json::parse(huge->body).contains("error"));
  CHECK(huge->get_header_value("Access-Control-Allow-Origin") == "*");

  auto missing = cli.Get("/nothing");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  CHECK(json::parse(missing->body).contains("error"));

  auto preflight = cli.Options("/predict");
  REQUIRE(preflight);
  CHECK(preflight->status == 204);
  CHECK(preflight->get_header_value("Access-Control-Allow-Origin") == "*");
  CHECK(preflight->get_header_value("Access-Control-Allow-Methods").find("POST") != std::string::npos);
  CHECK(preflight->get_header_value("Access-Control-Allow-Headers").find("Content-Type") != std::string::npos);
}

TEST_CASE("live server: concurrent predictions match sequential ones") {
  PredictionService svc(mlp_artifact(), fresh_store("concurrent.csv"));
  LiveServer server(svc);
  const Dataset raw = raw_data();
  std::vector<std::string> expected;
  for (std::size_t i = 0; i < 24; ++i) expected.push_back(svc.predict(landmarks_json(raw.samples[i * 3].frame).dump()).body);

  std::vector<std::vector<std::string>> got(6);
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < got.size(); ++t) {
    threads.emplace_back([&, t] {
      auto cli = server.client();
      for (std::size_t i = 0; i < 24; ++i) {
        auto r = cli.Post("/predict", landmarks_json(raw.samples[i * 3].frame).dump(), "application/json");
        got[t].push_back(r && r->status == 200 ? r->body : "failed");
      }
    });
  }
  for (auto& th : threads) th.join();
  for (const auto& g : got) CHECK(g == expected);
}

TEST_CASE("live server: concurrent sample posts are each stored once, in order per connection") {
  const auto path = fresh_store("concurrent_samples.csv");
  PredictionService svc(knn_artifact(), path);
  {
    LiveServer server(svc);
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < 4; ++t) {
      threads.emplace_back([&, t] {
        auto cli = server.client();
        for (int i = 0; i < 15; ++i) {
          HandFrame f;
          f.points[0].x = i;  // sequence number
          json req = landmarks_json(f);
          req["label"] = std::string(1, Label::from_index(t).letter());
          auto r = cli.Post("/samples", req.dump(), "application/json");
          CHECK((r && r->status == 200));
        }
      });
    }
    for (auto& th : threads) th.join();
  }
  CHECK(svc.samples().count() == 60);
  const Dataset stored = parse_csv(read_all(path));
  REQUIRE(stored.size() == 60);
  std::map<std::size_t, std::vector<double>> seq;
  for (const auto& s : stored.samples) seq[s.label.index()].push_back(s.frame.points[0].x);
  CHECK(seq.size() == 4);
  for (const auto& [label, xs] : seq) {
    REQUIRE(xs.size() == 15);
    for (int i = 0; i < 15; ++i) CHECK(xs[std::size_t(i)] == i);
  }
  CHECK(SampleStore(path).count() == 60);
}

TEST_CASE("binding an occupied port fails at startup") {
  PredictionService svc(knn_artifact(), fresh_store("bind.csv"));
  LiveServer first(svc);
  ServerOptions opts;
  opts.port = first.port();
  HttpServer second(svc, opts);
  CHECK_THROWS_AS(second.bind(), std::runtime_error);
}
