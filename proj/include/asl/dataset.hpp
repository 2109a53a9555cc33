#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace asl {

inline constexpr std::size_t kNumPoints = 21;
inline constexpr std::size_t kNumFeatures = 3 * kNumPoints;
inline constexpr std::size_t kNumLabels = 24;

/// Thrown when a value does not fit the landmark schema (length, finiteness).
class SchemaError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown by the CSV reader; the message names the offending row.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t row, const std::string& what)
      : std::runtime_error("row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

struct TrackPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  bool finite() const noexcept;
  friend bool operator==(const TrackPoint&, const TrackPoint&) = default;
};

/// 21 landmarks in fixed positional order; slot n-1 holds landmark n.
struct HandFrame {
  std::array<TrackPoint, kNumPoints> points{};

  bool finite() const noexcept;
  friend bool operator==(const HandFrame&, const HandFrame&) = default;
};

using FeatureVector = std::array<double, kNumFeatures>;

/// One of the 24 static fingerspelling letters (j and z need motion and are excluded).
class Label {
 public:
  static constexpr std::string_view kLetters = "abcdefghiklmnopqrstuvwxy";

  /// Accepts upper or lower case. Throws SchemaError for anything else, including j and z.
  static Label from_char(char c);
  static std::optional<Label> try_from_char(char c) noexcept;
  static Label from_index(std::size_t index);

  std::size_t index() const noexcept { return index_; }
  char letter() const noexcept { return kLetters[index_]; }

  friend bool operator==(Label, Label) = default;
  friend auto operator<=>(Label, Label) = default;

 private:
  explicit constexpr Label(std::uint8_t index) : index_(index) {}
  std::uint8_t index_ = 0;
};

struct Sample {
  HandFrame frame;
  Label label;
  friend bool operator==(const Sample&, const Sample&) = default;
};

struct Dataset {
  std::vector<Sample> samples;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

FeatureVector frame_to_features(const HandFrame& frame) noexcept;

/// Throws SchemaError if the span is not exactly 63 finite values.
HandFrame features_to_frame(std::span<const double> values);

Dataset parse_csv(std::string_view text);
std::string write_csv(const Dataset& ds);

/// Header line without the trailing newline: "1_x,1_y,1_z,...,21_z,label".
std::string csv_header();
/// One data row without the trailing newline.
std::string csv_row(const Sample& sample);

/// Shortest decimal text that reads back to exactly `value`, in plain (non-exponent) notation.
std::string format_coordinate(double value);

/// Seeded Fisher-Yates over indices; the first floor(ratio * N) shuffled samples form the train set.
std::pair<Dataset, Dataset> split_train_test(const Dataset& ds, double ratio, std::uint64_t seed);

struct SyntheticOptions {
  std::size_t per_class = 120;
  double jitter = 14.0;  // standard deviation in hand-space units (palm length ~100)
  bool placement = true;
  std::uint64_t seed = 0;
};

/// Deterministic class prototype for a label (independent of any seed).
HandFrame prototype_frame(Label label);

Dataset generate_synthetic(const SyntheticOptions& options);

/// 64-bit FNV-1a digest, rendered as 16 lowercase hex digits.
std::string fingerprint(std::string_view bytes);

}  // namespace asl
