#include "asl/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <random>

namespace asl {

bool TrackPoint::finite() const noexcept {
  return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
}

bool HandFrame::finite() const noexcept {
  return std::all_of(points.begin(), points.end(), [](const TrackPoint& p) { return p.finite(); });
}

std::optional<Label> Label::try_from_char(char c) noexcept {
  if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  const auto pos = kLetters.find(c);
  if (pos == std::string_view::npos) return std::nullopt;
  return Label(static_cast<std::uint8_t>(pos));
}

Label Label::from_char(char c) {
  if (auto label = try_from_char(c)) return *label;
  throw SchemaError(std::string("invalid label '") + c + "' (valid: " + std::string(kLetters) + ")");
}

Label Label::from_index(std::size_t index) {
  if (index >= kNumLabels) throw SchemaError("label index " + std::to_string(index) + " out of range");
  return Label(static_cast<std::uint8_t>(index));
}

FeatureVector frame_to_features(const HandFrame& frame) noexcept {
  FeatureVector out{};
  for (std::size_t n = 0; n < kNumPoints; ++n) {
    out[3 * n + 0] = frame.points[n].x;
    out[3 * n + 1] = frame.points[n].y;
    out[3 * n + 2] = frame.points[n].z;
  }
  return out;
}

HandFrame features_to_frame(std::span<const double> values) {
  if (values.size() != kNumFeatures) {
    throw SchemaError("expected " + std::to_string(kNumFeatures) + " coordinates, got " +
                      std::to_string(values.size()));
  }
  HandFrame frame;
  for (std::size_t n = 0; n < kNumPoints; ++n) {
    frame.points[n] = {values[3 * n], values[3 * n + 1], values[3 * n + 2]};
  }
  if (!frame.finite()) throw SchemaError("non-finite coordinate");
  return frame;
}

std::string format_coordinate(double value) {
  // Fixed notation of a double needs at most ~330 characters.
  char buf[400];
  auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::fixed);
  return std::string(buf, res.ptr);
}

std::string csv_header() {
  std::string header;
  for (std::size_t n = 1; n <= kNumPoints; ++n) {
    for (const char* axis : {"_x,", "_y,", "_z,"}) header += std::to_string(n) + axis;
  }
  header += "label";
  return header;
}

std::string csv_row(const Sample& sample) {
  std::string row;
  row.reserve(64 * 8);
  for (double v : frame_to_features(sample.frame)) {
    row += format_coordinate(v);
    row += ',';
  }
  row += sample.label.letter();
  return row;
}

std::string write_csv(const Dataset& ds) {
  std::string out = csv_header();
  out += '\n';
  for (const auto& s : ds.samples) {
    out += csv_row(s);
    out += '\n';
  }
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_number(std::string_view field, std::size_t row, std::size_t column) {
  field = trim(field);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size()) {
    throw ParseError(row, "column " + std::to_string(column) + ": non-numeric coordinate '" +
                              std::string(field) + "'");
  }
  if (!std::isfinite(value)) {
    throw ParseError(row, "column " + std::to_string(column) + ": non-finite coordinate");
  }
  return value;
}

}  // namespace

Dataset parse_csv(std::string_view text) {
  Dataset ds;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (trim(line).empty()) continue;
    if (!header_seen) {
      if (trim(line) != csv_header()) throw ParseError(line_no, "header does not match the landmark schema");
      header_seen = true;
      continue;
    }

    std::array<double, kNumFeatures> values{};
    std::size_t column = 0;
    std::string_view rest = line;
    std::string_view label_field;
    while (true) {
      const auto comma = rest.find(',');
      const std::string_view field = rest.substr(0, comma);
      ++column;
      if (column <= kNumFeatures) {
        if (comma == std::string_view::npos) {
          throw ParseError(line_no, "expected 64 columns, got " + std::to_string(column));
        }
        values[column - 1] = parse_number(field, line_no, column);
      } else {
        if (comma != std::string_view::npos) {
          const auto total = column + static_cast<std::size_t>(std::count(rest.begin(), rest.end(), ','));
          throw ParseError(line_no, "expected 64 columns, got " + std::to_string(total));
        }
        label_field = trim(field);
        break;
      }
      rest = rest.substr(comma + 1);
    }
    if (label_field.size() != 1) {
      throw ParseError(line_no, "invalid label '" + std::string(label_field) + "'");
    }
    auto label = Label::try_from_char(label_field.front());
    if (!label) {
      throw ParseError(line_no, "unknown label '" + std::string(label_field) + "'");
    }
    ds.samples.push_back({features_to_frame(values), *label});
  }
  if (!header_seen) throw ParseError(0, "missing header row");
  return ds;
}

std::pair<Dataset, Dataset> split_train_test(const Dataset& ds, double ratio, std::uint64_t seed) {
  if (ds.empty()) throw std::invalid_argument("cannot split an empty dataset");
  if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("split ratio must lie in (0, 1)");

  std::vector<std::size_t> order(ds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(order[i], order[pick(rng)]);
  }

  const auto n_train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(ds.size())));
  std::pair<Dataset, Dataset> out;
  out.first.samples.reserve(n_train);
  out.second.samples.reserve(ds.size() - n_train);
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? out.first : out.second).samples.push_back(ds.samples[order[i]]);
  }
  return out;
}

// Synthetic hand model: wrist at the origin, palm in the x-y plane with the
// fingers pointing along +y, depth along z. Each finger is a knuckle followed
// by three segments; curling bends every joint of a finger toward -z.
namespace {

struct FingerGeometry {
  double base_angle;  // radians from +y in the palm plane
  double base_dist;
  double base_z;
  std::array<double, 3> segments;
};

constexpr std::array<FingerGeometry, 5> kFingers{{
    {-1.00, 30.0, 8.0, {22.0, 18.0, 15.0}},   // thumb
    {-0.28, 62.0, 0.0, {26.0, 16.0, 13.0}},   // index
    {-0.05, 64.0, -3.0, {28.0, 18.0, 14.0}},  // middle
    {0.18, 60.0, -2.0, {26.0, 17.0, 13.0}},   // ring
    {0.42, 54.0, 3.0, {20.0, 13.0, 11.0}},    // pinky
}};

}  // namespace

HandFrame prototype_frame(Label label) {
  const std::size_t c = label.index();

  // Base-3 digits of a bijective remap of the class index give a distinct
  // curl level (0 extended, 1 half, 2 fully curled) for every finger.
  std::size_t code = (7 * c + 3) % 243;
  std::array<int, 5> curl{};
  for (auto& level : curl) {
    level = static_cast<int>(code % 3);
    code /= 3;
  }
  const double spread = 0.10 * static_cast<double>(c % 4);   // extra finger abduction
  const double roll = (static_cast<double>(c % 6) - 2.5) * 0.12;  // whole-hand rotation about z
  const double pitch = (static_cast<double>(c % 5) - 2.0) * 0.10; // tilt about x

  HandFrame frame;
  frame.points[0] = {0.0, 0.0, 0.0};
  for (std::size_t f = 0; f < kFingers.size(); ++f) {
    const auto& g = kFingers[f];
    const double angle = g.base_angle * (1.0 + spread);
    const double dx = std::sin(angle), dy = std::cos(angle);
    double px = g.base_dist * dx, py = g.base_dist * dy, pz = g.base_z;
    frame.points[1 + 4 * f] = {px, py, pz};
    const double flex = (f == 0 ? 0.45 : 0.62) * static_cast<double>(curl[f]);
    double bend = 0.0;
    for (std::size_t s = 0; s < 3; ++s) {
      bend += flex;
      const double len = g.segments[s];
      const double planar = std::cos(bend);
      px += len * planar * dx;
      py += len * planar * dy;
      pz -= len * std::sin(bend);
      if (f == 0) pz += 0.35 * len;  // thumb leaves the palm plane
      frame.points[2 + 4 * f + s] = {px, py, pz};
    }
  }

  const double cr = std::cos(roll), sr = std::sin(roll);
  const double cp = std::cos(pitch), sp = std::sin(pitch);
  for (auto& p : frame.points) {
    const double x1 = cr * p.x - sr * p.y;
    const double y1 = sr * p.x + cr * p.y;
    const double y2 = cp * y1 - sp * p.z;
    const double z2 = sp * y1 + cp * p.z;
    p = {x1, y2, z2};
  }
  return frame;
}

Dataset generate_synthetic(const SyntheticOptions& options) {
  if (options.per_class < 1) throw std::invalid_argument("per_class must be at least 1");
  if (!(options.jitter >= 0.0)) throw std::invalid_argument("jitter must be non-negative");

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> offset_xy(-200.0, 200.0);
  std::uniform_real_distribution<double> offset_z(-60.0, 60.0);
  std::uniform_real_distribution<double> scale(0.5, 2.0);

  Dataset ds;
  ds.samples.reserve(options.per_class * kNumLabels);
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    const Label label = Label::from_index(c);
    const HandFrame proto = prototype_frame(label);
    for (std::size_t i = 0; i < options.per_class; ++i) {
      HandFrame frame = proto;
      for (auto& p : frame.points) {
        p.x += options.jitter * noise(rng);
        p.y += options.jitter * noise(rng);
        p.z += options.jitter * noise(rng);
      }
      if (options.placement) {
        const double ox = offset_xy(rng), oy = offset_xy(rng), oz = offset_z(rng);
        const double s = scale(rng);
        for (auto& p : frame.points) p = {s * p.x + ox, s * p.y + oy, s * p.z + oz};
      }
      ds.samples.push_back({frame, label});
    }
  }
  return ds;
}

std::string fingerprint(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
    h >>= 4;
  }
  return out;
}

}  // namespace asl
