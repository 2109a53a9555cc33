#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "asl/dataset.hpp"

namespace asl::preprocess {

/// Side length of the standard cube that Scale maps every bounding box onto.
inline constexpr double kTargetEdge = 255.0;

enum class BoxKind { Cuboidal, Cubical };
enum class Step { Shift, Scale, Round };

using Vec3 = std::array<double, 3>;

struct BoundingBox {
  Vec3 min{};
  Vec3 max{};
  BoxKind kind = BoxKind::Cuboidal;

  Vec3 extent() const noexcept { return {max[0] - min[0], max[1] - min[1], max[2] - min[2]}; }
};

struct ScaleFactors {
  Vec3 f{1.0, 1.0, 1.0};
};

/// Ordered preprocessing steps plus the bounding-box kind used by Shift and Scale.
struct PipelineSpec {
  std::vector<Step> steps;
  BoxKind box = BoxKind::Cuboidal;

  /// Canonical form, e.g. "round+shift+scale@cubical" or "none@cuboidal".
  std::string to_string() const;
  /// Case-insensitive inverse of to_string(). Throws std::invalid_argument on malformed input.
  static PipelineSpec parse(std::string_view text);

  bool contains(Step s) const noexcept;
  friend bool operator==(const PipelineSpec&, const PipelineSpec&) = default;
};

std::string_view to_string(BoxKind kind) noexcept;
std::string_view to_string(Step step) noexcept;
/// Human-readable row caption, e.g. "Rounding + Shifting + Scaling" or "No Pre-processing".
std::string describe_steps(const std::vector<Step>& steps);
/// Step sequence alone, e.g. "round+shift+scale" or "none".
std::string steps_to_string(const std::vector<Step>& steps);

BoundingBox compute_bbox(const HandFrame& frame, BoxKind kind) noexcept;
HandFrame shift(const HandFrame& frame, const BoundingBox& box) noexcept;
ScaleFactors scale_factors(const BoundingBox& box) noexcept;
HandFrame scale(const HandFrame& frame, const ScaleFactors& factors) noexcept;

/// Round half away from zero to 3 fraction digits, applied to the shortest
/// decimal representation of the value (so -1.0005 rounds to -1.001).
double round3(double value);
HandFrame round3(const HandFrame& frame);

HandFrame apply_pipeline(const HandFrame& frame, const PipelineSpec& spec);
Dataset apply_pipeline(const Dataset& ds, const PipelineSpec& spec);

/// The 14 step sequences of the experiment grid, each under both box kinds
/// (Cuboidal first), 28 configurations in total.
std::vector<PipelineSpec> enumerate_grid_configurations();
/// The 14 step sequences alone, in row order.
std::vector<std::vector<Step>> grid_step_sequences();

}  // namespace asl::preprocess
