#include "asl/preprocess.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <stdexcept>

namespace asl::preprocess {

std::string_view to_string(BoxKind kind) noexcept {
  return kind == BoxKind::Cuboidal ? "cuboidal" : "cubical";
}

std::string_view to_string(Step step) noexcept {
  switch (step) {
    case Step::Shift: return "shift";
    case Step::Scale: return "scale";
    case Step::Round: return "round";
  }
  return "?";
}

std::string steps_to_string(const std::vector<Step>& steps) {
  if (steps.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i) out += '+';
    out += to_string(steps[i]);
  }
  return out;
}

std::string describe_steps(const std::vector<Step>& steps) {
  if (steps.empty()) return "No Pre-processing";
  std::string out;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i) out += " + ";
    switch (steps[i]) {
      case Step::Shift: out += "Shifting"; break;
      case Step::Scale: out += "Scaling"; break;
      case Step::Round: out += "Rounding"; break;
    }
  }
  return out;
}

std::string PipelineSpec::to_string() const {
  return steps_to_string(steps) + "@" + std::string(preprocess::to_string(box));
}

bool PipelineSpec::contains(Step s) const noexcept {
  return std::find(steps.begin(), steps.end(), s) != steps.end();
}

PipelineSpec PipelineSpec::parse(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  const auto at = lower.find('@');
  if (at == std::string::npos || lower.find('@', at + 1) != std::string::npos) {
    throw std::invalid_argument("pipeline '" + std::string(text) + "' must have the form <steps>@<box>");
  }
  PipelineSpec spec;
  const std::string box = lower.substr(at + 1);
  if (box == "cuboidal") {
    spec.box = BoxKind::Cuboidal;
  } else if (box == "cubical") {
    spec.box = BoxKind::Cubical;
  } else {
    throw std::invalid_argument("unknown bounding box kind '" + box + "'");
  }

  const std::string steps = lower.substr(0, at);
  if (steps == "none") return spec;
  std::size_t pos = 0;
  while (true) {
    const auto plus = steps.find('+', pos);
    const std::string name = steps.substr(pos, plus == std::string::npos ? std::string::npos : plus - pos);
    if (name == "shift") {
      spec.steps.push_back(Step::Shift);
    } else if (name == "scale") {
      spec.steps.push_back(Step::Scale);
    } else if (name == "round") {
      spec.steps.push_back(Step::Round);
    } else {
      throw std::invalid_argument("unknown preprocessing step '" + name + "'");
    }
    if (plus == std::string::npos) break;
    pos = plus + 1;
  }
  return spec;
}

BoundingBox compute_bbox(const HandFrame& frame, BoxKind kind) noexcept {
  BoundingBox box;
  box.kind = kind;
  const auto& p0 = frame.points.front();
  box.min = box.max = {p0.x, p0.y, p0.z};
  for (const auto& p : frame.points) {
    const Vec3 v{p.x, p.y, p.z};
    for (std::size_t a = 0; a < 3; ++a) {
      box.min[a] = std::min(box.min[a], v[a]);
      box.max[a] = std::max(box.max[a], v[a]);
    }
  }
  if (kind == BoxKind::Cubical) {
    const Vec3 ext = box.extent();
    const double edge = std::max({ext[0], ext[1], ext[2]});
    for (std::size_t a = 0; a < 3; ++a) {
      if (ext[a] < edge) {
        const double pad = (edge - ext[a]) / 2.0;
        box.min[a] -= pad;
        box.max[a] += pad;
      }
    }
  }
  return box;
}

HandFrame shift(const HandFrame& frame, const BoundingBox& box) noexcept {
  HandFrame out = frame;
  for (auto& p : out.points) {
    p.x -= box.min[0];
    p.y -= box.min[1];
    p.z -= box.min[2];
  }
  return out;
}

ScaleFactors scale_factors(const BoundingBox& box) noexcept {
  ScaleFactors sf;
  const Vec3 ext = box.extent();
  for (std::size_t a = 0; a < 3; ++a) sf.f[a] = ext[a] > 0.0 ? kTargetEdge / ext[a] : 1.0;
  return sf;
}

HandFrame scale(const HandFrame& frame, const ScaleFactors& factors) noexcept {
  HandFrame out = frame;
  for (auto& p : out.points) {
    p.x *= factors.f[0];
    p.y *= factors.f[1];
    p.z *= factors.f[2];
  }
  return out;
}

double round3(double value) {
  if (!std::isfinite(value)) return value;
  char buf[400];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::fixed);
  std::string text(buf, res.ptr);

  const bool negative = !text.empty() && text.front() == '-';
  if (negative) text.erase(0, 1);
  const auto dot = text.find('.');
  if (dot == std::string::npos || text.size() - dot - 1 <= 3) return value;

  const bool round_up = text[dot + 4] >= '5';
  std::string digits = text.substr(0, dot) + text.substr(dot + 1, 3);
  if (round_up) {
    std::size_t i = digits.size();
    while (i > 0) {
      --i;
      if (digits[i] == '9') {
        digits[i] = '0';
      } else {
        ++digits[i];
        break;
      }
      if (i == 0) digits.insert(digits.begin(), '1');
    }
  }
  std::string rounded = (negative ? "-" : "") + digits.substr(0, digits.size() - 3) + "." +
                        digits.substr(digits.size() - 3);
  double out = 0.0;
  std::from_chars(rounded.data(), rounded.data() + rounded.size(), out);
  return out;
}

HandFrame round3(const HandFrame& frame) {
  HandFrame out = frame;
  for (auto& p : out.points) {
    p.x = round3(p.x);
    p.y = round3(p.y);
    p.z = round3(p.z);
  }
  return out;
}

HandFrame apply_pipeline(const HandFrame& frame, const PipelineSpec& spec) {
  HandFrame current = frame;
  for (Step step : spec.steps) {
    switch (step) {
      case Step::Shift:
        current = shift(current, compute_bbox(current, spec.box));
        break;
      case Step::Scale:
        current = scale(current, scale_factors(compute_bbox(current, spec.box)));
        break;
      case Step::Round:
        current = round3(current);
        break;
    }
  }
  return current;
}

Dataset apply_pipeline(const Dataset& ds, const PipelineSpec& spec) {
  Dataset out;
  out.samples.reserve(ds.size());
  for (const auto& s : ds.samples) out.samples.push_back({apply_pipeline(s.frame, spec), s.label});
  return out;
}

std::vector<std::vector<Step>> grid_step_sequences() {
  using S = Step;
  return {
      {},
      {S::Shift},
      {S::Scale},
      {S::Round},
      {S::Scale, S::Shift},
      {S::Scale, S::Round},
      {S::Round, S::Scale},
      {S::Shift, S::Round},
      {S::Round, S::Shift},
      {S::Round, S::Shift, S::Scale},
      {S::Shift, S::Scale, S::Round},
      {S::Round, S::Scale, S::Round},
      {S::Round, S::Shift, S::Round},
      {S::Round, S::Shift, S::Scale, S::Round},
  };
}

std::vector<PipelineSpec> enumerate_grid_configurations() {
  std::vector<PipelineSpec> out;
  for (auto& steps : grid_step_sequences()) {
    out.push_back({steps, BoxKind::Cuboidal});
    out.push_back({steps, BoxKind::Cubical});
  }
  return out;
}

}  // namespace asl::preprocess
