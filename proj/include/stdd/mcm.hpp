#pragma once

// Multi-scale channel mixing of window-shifted tokens across frames.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stdd/attention.hpp"

namespace stdd {

enum class MixMode { separate, continual };

inline std::string to_string(MixMode m) { return m == MixMode::separate ? "separate" : "continual"; }

inline MixMode mix_mode_from_string(const std::string& s) {
  if (s == "separate") return MixMode::separate;
  if (s == "continual") return MixMode::continual;
  throw ConfigError("unknown mix mode '" + s + "'", "mix_mode");
}

// What a mixed token does when frame t + offset falls outside the clip.
enum class Boundary { zero_fill, self_fill };

inline std::string to_string(Boundary b) { return b == Boundary::zero_fill ? "zero_fill" : "self_fill"; }

inline Boundary boundary_from_string(const std::string& s) {
  if (s == "zero_fill" || s == "zero-fill") return Boundary::zero_fill;
  if (s == "self_fill" || s == "self-fill") return Boundary::self_fill;
  throw ConfigError("unknown boundary policy '" + s + "'", "boundary");
}

// Channels [start, end) of a mixed token come from frame t + offset.
struct ChannelSegment {
  int offset = 0;
  std::size_t start = 0;
  std::size_t end = 0;

  friend bool operator==(const ChannelSegment&, const ChannelSegment&) = default;
};

struct ChannelPlan {
  std::vector<ChannelSegment> segments;

  std::size_t extent() const { return segments.empty() ? 0 : segments.back().end; }

  // Ordered, contiguous cover of [0, D) whose last segment is the only
  // zero-offset one.
  void validate(std::size_t channels) const {
    std::size_t pos = 0;
    std::size_t self = 0;
    for (const auto& s : segments) {
      if (s.start != pos || s.end < s.start) throw ConfigError("channel plan segments are not contiguous", "gamma");
      pos = s.end;
      if (s.offset == 0) ++self;
    }
    if (pos != channels)
      throw DimensionError("channel plan covers " + std::to_string(pos) + " of " + std::to_string(channels) + " channels");
    if (self != 1 || segments.back().offset != 0)
      throw ConfigError("channel plan must end with its single self segment", "gamma");
  }

  friend bool operator==(const ChannelPlan&, const ChannelPlan&) = default;
};

inline nlohmann::json to_json(const ChannelPlan& plan) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& s : plan.segments) out.push_back({{"offset", s.offset}, {"start", s.start}, {"end", s.end}});
  return out;
}

struct MixSpec {
  std::vector<std::size_t> scales{1, 2};  // each delta acts as +-delta
  double gamma = 0.125;                   // d_delta = gamma * D
  MixMode mode = MixMode::continual;
  // Test hook: when non-empty, one plan per scale used verbatim (unchecked).
  std::vector<ChannelPlan> plan_override;

  std::size_t donated_channels(std::size_t channels) const {
    const double d = gamma * static_cast<double>(channels);
    const double rounded = std::round(d);
    if (!(gamma > 0.0 && gamma < 0.5) || std::abs(d - rounded) > 1e-9 || rounded < 1)
      throw ConfigError("gamma * D = " + std::to_string(d) + " must be a positive integer with gamma in (0, 0.5)", "gamma");
    return static_cast<std::size_t>(rounded);
  }

  void validate(std::size_t channels) const {
    if (scales.empty()) throw ConfigError("at least one temporal scale is required", "scales");
    const std::size_t d = donated_channels(channels);
    if (2 * d > channels) throw ConfigError("2 * gamma * D exceeds D", "gamma");
    for (std::size_t delta : scales) {
      if (delta == 0) throw ConfigError("temporal scales must be positive", "scales");
      if (mode == MixMode::continual && d % delta != 0)
        throw ConfigError("continual mixing needs gamma * D = " + std::to_string(d) + " divisible by scale " +
                              std::to_string(delta),
                          "gamma");
    }
    if (!plan_override.empty() && plan_override.size() != scales.size())
      throw ConfigError("plan override count differs from scale count", "scales");
  }
};

inline ChannelPlan plan_channels(std::size_t channels, std::size_t delta, const MixSpec& spec) {
  MixSpec single = spec;
  single.scales = {delta};
  single.plan_override.clear();
  single.validate(channels);
  const std::size_t d = spec.donated_channels(channels);
  const int sd = static_cast<int>(delta);
  ChannelPlan plan;
  if (spec.mode == MixMode::separate || delta == 1) {
    plan.segments = {{-sd, 0, d}, {sd, d, 2 * d}};
  } else {
    const std::size_t w = d / delta;
    std::size_t pos = 0;
    for (int off = -sd; off <= -1; ++off, pos += w) plan.segments.push_back({off, pos, pos + w});
    for (int off = 1; off <= sd; ++off, pos += w) plan.segments.push_back({off, pos, pos + w});
  }
  plan.segments.push_back({0, 2 * d, channels});
  plan.validate(channels);
  return plan;
}

// Rebuilds every frame of `frames` ([N', D] each) from the plan: channels of
// a segment with offset o are read from frame t + o. Channels outside every
// segment come out as zero.
inline std::vector<Var> mix(const std::vector<Var>& frames, const ChannelPlan& plan,
                            Boundary boundary = Boundary::zero_fill) {
  if (frames.empty()) return {};
  Tape& tape = frames.front().tape();
  const Shape shape = frames.front().shape();
  if (shape.size() != 2) throw DimensionError("mix: frames must be [N', D]");
  const std::size_t rows = shape[0], channels = shape[1];
  if (plan.extent() != channels)
    throw DimensionError("mix: plan spans " + std::to_string(plan.extent()) + " channels, tokens have " +
                         std::to_string(channels));
  for (const auto& f : frames)
    if (f.shape() != shape) throw DimensionError("mix: frames differ in shape");

  std::vector<ChannelSegment> segs = plan.segments;
  std::sort(segs.begin(), segs.end(), [](const auto& a, const auto& b) { return a.start < b.start; });

  const long long count = static_cast<long long>(frames.size());
  std::vector<Var> out;
  out.reserve(frames.size());
  for (long long t = 0; t < count; ++t) {
    std::vector<Var> parts;
    std::size_t pos = 0;
    for (const auto& s : segs) {
      if (s.start > pos) parts.push_back(tape.constant(Tensor({rows, s.start - pos})));
      if (s.end == s.start) continue;
      const long long src = t + s.offset;
      if (src >= 0 && src < count) {
        parts.push_back(slice_cols(frames[static_cast<std::size_t>(src)], s.start, s.end));
      } else if (boundary == Boundary::self_fill) {
        parts.push_back(slice_cols(frames[static_cast<std::size_t>(t)], s.start, s.end));
      } else {
        parts.push_back(tape.constant(Tensor({rows, s.end - s.start})));
      }
      pos = s.end;
    }
    out.push_back(parts.size() == 1 ? parts.front() : concat_cols(parts));
  }
  return out;
}

// Per scale: mix, then attention with residual over each frame's N' tokens;
// the result is the arithmetic mean over scales. `attn` and the layer norm
// are the block's own spatial parameters.
inline std::vector<Var> multiscale_attend(const std::vector<Var>& frames, const MixSpec& spec,
                                          const AttentionWeights& attn, const Var& ln_gain, const Var& ln_bias,
                                          real ln_eps = real(1e-5), Boundary boundary = Boundary::zero_fill) {
  if (frames.empty()) return {};
  const std::size_t channels = frames.front().shape().at(1);
  spec.validate(channels);
  std::vector<std::vector<Var>> per_scale;
  per_scale.reserve(spec.scales.size());
  for (std::size_t i = 0; i < spec.scales.size(); ++i) {
    const ChannelPlan plan = spec.plan_override.empty() ? plan_channels(channels, spec.scales[i], spec)
                                                        : spec.plan_override[i];
    std::vector<Var> mixed = mix(frames, plan, boundary);
    std::vector<Var> attended;
    attended.reserve(mixed.size());
    for (const auto& m : mixed) attended.push_back(add(mhsa(layer_norm(m, ln_gain, ln_bias, ln_eps), attn), m));
    per_scale.push_back(std::move(attended));
  }
  std::vector<Var> out;
  out.reserve(frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (per_scale.size() == 1) {
      out.push_back(per_scale.front()[t]);
      continue;
    }
    std::vector<Var> parts;
    for (const auto& s : per_scale) parts.push_back(s[t]);
    out.push_back(mean_of(parts));
  }
  return out;
}

}  // namespace stdd
