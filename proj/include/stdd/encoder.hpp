#pragma once

// Toy vision transformer with space-time cross attention blocks.
//
// Each block runs, per frame t:
//   z'_t  = MHSA(LN1(z_t)) + z_t                          spatial path
//   zdot  = retained patch rows of z_t under the frame's mask
//   zbar  = mean over scales of MHSA(LN1(mix(zdot))) + mix(zdot)
//   ztil  = z'_t with retained rows replaced by zbar       padding
//   z_t  <- MLP(LN2(z'_t)) + ztil                          short-cut
// The dynamic path reuses the block's LN1 and attention weights, so the
// parameter set is identical to a spatial-only block.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "stdd/attention.hpp"
#include "stdd/mcm.hpp"
#include "stdd/serialize.hpp"
#include "stdd/wsm.hpp"

namespace stdd {

enum class Variant { stca, spatial_only, full_spacetime, factorized };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::stca: return "stca";
    case Variant::spatial_only: return "spatial_only";
    case Variant::full_spacetime: return "full_spacetime";
    case Variant::factorized: return "factorized";
  }
  return "?";
}

inline Variant variant_from_string(const std::string& s) {
  for (auto v : {Variant::stca, Variant::spatial_only, Variant::full_spacetime, Variant::factorized})
    if (to_string(v) == s) return v;
  throw ConfigError("unknown variant '" + s + "'", "variant");
}

struct EncoderConfig {
  std::size_t frames = 8;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t patch = 8;
  std::size_t channels = 64;
  std::size_t layers = 4;
  std::size_t heads = 4;
  std::size_t mlp_ratio = 4;
  WindowSpec window{};
  MixSpec mix{};
  Variant variant = Variant::stca;
  Boundary boundary = Boundary::zero_fill;
  MaskStrategy mask_strategy = MaskStrategy::repeat_window_shift;
  std::uint64_t mask_seed = 0;
  real ln_eps = real(1e-5);

  TokenGrid grid() const { return TokenGrid::from_pixels(height, width, patch); }
  std::size_t patches() const { return grid().count(); }

  void validate() const {
    if (frames == 0) throw ConfigError("need at least one frame", "T");
    if (channels == 0) throw ConfigError("channel width must be positive", "D");
    if (heads == 0 || channels % heads != 0)
      throw ConfigError("D = " + std::to_string(channels) + " is not divisible by heads = " + std::to_string(heads), "heads");
    if (mlp_ratio == 0) throw ConfigError("mlp_ratio must be positive", "mlp_ratio");
    const TokenGrid g = grid();
    if (variant == Variant::stca) {
      window.validate(g);
      mix.validate(channels);
    }
  }
};

// ------------------------------------------------------------------ parameters

using Parameters = NamedTensors;

inline std::string block_prefix(std::size_t layer) { return "blocks." + std::to_string(layer) + "."; }

inline std::size_t parameter_count(const Parameters& params) {
  std::size_t n = 0;
  for (const auto& [_, t] : params) n += t.size();
  return n;
}

// Symmetric uniform initialization scaled by 1/sqrt(fan_in); LN gains start
// at 1 and LN biases at 0. The variant does not influence the parameter set.
inline Parameters init_parameters(const EncoderConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  const std::size_t d = cfg.channels;
  const std::size_t patch_dim = 3 * cfg.patch * cfg.patch;
  const std::size_t hidden = cfg.mlp_ratio * d;
  Parameters p;
  auto uni = [&](Shape shape, std::size_t fan_in) {
    const real a = real(1) / std::sqrt(static_cast<real>(fan_in));
    return Tensor::uniform(std::move(shape), -a, a, rng);
  };
  p["patch_embed.weight"] = uni({patch_dim, d}, patch_dim);
  p["patch_embed.bias"] = uni({d}, patch_dim);
  p["cls"] = uni({d}, d);
  p["pos"] = uni({cfg.patches(), d}, d);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string b = block_prefix(l);
    p[b + "ln1.gain"] = Tensor({d}, real(1));
    p[b + "ln1.bias"] = Tensor({d});
    for (const char* proj : {"q", "k", "v", "o"}) {
      p[b + "attn.w" + proj] = uni({d, d}, d);
      p[b + "attn.b" + proj] = uni({d}, d);
    }
    p[b + "ln2.gain"] = Tensor({d}, real(1));
    p[b + "ln2.bias"] = Tensor({d});
    p[b + "mlp.fc1.weight"] = uni({d, hidden}, d);
    p[b + "mlp.fc1.bias"] = uni({hidden}, d);
    p[b + "mlp.fc2.weight"] = uni({hidden, d}, hidden);
    p[b + "mlp.fc2.bias"] = uni({d}, hidden);
  }
  return p;
}

// Parameters registered as leaves of one tape.
class BoundParameters {
 public:
  BoundParameters(Tape& tape, const Parameters& params, bool trainable) {
    for (const auto& [name, t] : params) vars_.emplace(name, tape.leaf(t, trainable));
  }

  const Var& operator[](const std::string& name) const {
    auto it = vars_.find(name);
    if (it == vars_.end()) throw ConfigError("missing parameter '" + name + "'", "weights");
    return it->second;
  }
  const std::map<std::string, Var>& vars() const noexcept { return vars_; }

  AttentionWeights attention(std::size_t layer, std::size_t heads) const {
    const std::string b = block_prefix(layer) + "attn.";
    return AttentionWeights{(*this)[b + "wq"], (*this)[b + "bq"], (*this)[b + "wk"], (*this)[b + "bk"],
                            (*this)[b + "wv"], (*this)[b + "bv"], (*this)[b + "wo"], (*this)[b + "bo"], heads};
  }

 private:
  std::map<std::string, Var> vars_;
};

// ------------------------------------------------------------------ video

// Frames as [T, H, W, 3] with channel values in [0, 1].
using Video = Tensor;

// Flattened non-overlapping patches of one frame: [N, 3 * P * P], patches in
// row-major grid order, each patch flattened as (row, col, channel).
inline Tensor extract_patches(const Video& video, std::size_t frame, std::size_t patch) {
  const std::size_t h = video.dim(1), w = video.dim(2);
  const std::size_t gr = h / patch, gc = w / patch;
  const std::size_t pd = 3 * patch * patch;
  Tensor out({gr * gc, pd});
  const std::size_t frame_off = frame * h * w * 3;
  for (std::size_t pr = 0; pr < gr; ++pr)
    for (std::size_t pc = 0; pc < gc; ++pc) {
      real* dst = out.data().data() + (pr * gc + pc) * pd;
      for (std::size_t y = 0; y < patch; ++y)
        for (std::size_t x = 0; x < patch; ++x)
          for (std::size_t c = 0; c < 3; ++c)
            *dst++ = video[frame_off + (((pr * patch + y) * w) + (pc * patch + x)) * 3 + c];
    }
  return out;
}

// Per-frame tokens [N+1, D]: CLS row, then projected patches plus the
// frame-shared positional embedding.
inline std::vector<Var> patch_embed(Tape& tape, const Video& video, const BoundParameters& p, const EncoderConfig& cfg) {
  if (video.rank() != 4 || video.dim(0) != cfg.frames || video.dim(1) != cfg.height || video.dim(2) != cfg.width ||
      video.dim(3) != 3)
    throw DimensionError("patch_embed: video " + shape_str(video.shape()) + " does not match config [" +
                         std::to_string(cfg.frames) + "," + std::to_string(cfg.height) + "," + std::to_string(cfg.width) + ",3]");
  const Var cls = reshape(p["cls"], {1, cfg.channels});
  std::vector<Var> out;
  out.reserve(cfg.frames);
  for (std::size_t t = 0; t < cfg.frames; ++t) {
    Var patches = tape.constant(extract_patches(video, t, cfg.patch));
    Var tokens = add(linear(patches, p["patch_embed.weight"], p["patch_embed.bias"]), p["pos"]);
    out.push_back(concat_rows({cls, tokens}));
  }
  return out;
}

// ------------------------------------------------------------------ blocks

// z' rows at retained positions replaced by zbar; CLS and masked rows keep z'.
inline Var pad_and_fuse(const Var& spatial, const Var& dynamic, const VisibilityMap& map) {
  const Tensor& zs = spatial.value();
  if (zs.rank() != 2 || zs.dim(0) != map.size() + 1)
    throw DimensionError("pad_and_fuse: spatial tokens " + shape_str(zs.shape()) + " vs map of " +
                         std::to_string(map.size()) + " cells");
  std::vector<std::size_t> rows;
  for (std::size_t c = 0; c < map.size(); ++c)
    if (map[c]) rows.push_back(c + 1);
  if (dynamic.value().rank() != 2 || dynamic.value().dim(0) != rows.size())
    throw DimensionError("pad_and_fuse: " + std::to_string(dynamic.value().dim(0)) + " dynamic rows for " +
                         std::to_string(rows.size()) + " retained cells");
  return scatter_rows(spatial, dynamic, rows);
}

inline Var mlp(const Var& x, const BoundParameters& p, std::size_t layer) {
  const std::string b = block_prefix(layer) + "mlp.";
  return linear(gelu(linear(x, p[b + "fc1.weight"], p[b + "fc1.bias"])), p[b + "fc2.weight"], p[b + "fc2.bias"]);
}

inline Var ln(const Var& x, const BoundParameters& p, std::size_t layer, const char* which, real eps) {
  const std::string b = block_prefix(layer) + which;
  return layer_norm(x, p[b + ".gain"], p[b + ".bias"], eps);
}

inline std::vector<Var> block_forward(const std::vector<Var>& z, const BoundParameters& p, std::size_t layer,
                                      const MaskSchedule* schedule, const EncoderConfig& cfg) {
  const AttentionWeights attn = p.attention(layer, cfg.heads);
  const std::size_t frames = z.size();
  std::vector<Var> spatial(frames), fused(frames), out(frames);

  switch (cfg.variant) {
    case Variant::full_spacetime: {
      std::vector<Var> normed;
      for (const auto& zt : z) normed.push_back(ln(zt, p, layer, "ln1", cfg.ln_eps));
      Var joint = mhsa(concat_rows(normed), attn);
      const std::size_t rows = z.front().shape()[0];
      for (std::size_t t = 0; t < frames; ++t) {
        spatial[t] = add(slice_rows(joint, t * rows, (t + 1) * rows), z[t]);
        fused[t] = spatial[t];
      }
      break;
    }
    case Variant::factorized: {
      for (std::size_t t = 0; t < frames; ++t) spatial[t] = add(mhsa(ln(z[t], p, layer, "ln1", cfg.ln_eps), attn), z[t]);
      // temporal attention: one sequence of T rows per token position
      const std::size_t rows = z.front().shape()[0];
      std::vector<std::vector<Var>> per_pos(frames);
      for (std::size_t pos = 0; pos < rows; ++pos) {
        std::vector<Var> seq;
        for (std::size_t t = 0; t < frames; ++t) seq.push_back(slice_rows(spatial[t], pos, pos + 1));
        Var s = concat_rows(seq);
        Var upd = add(mhsa(ln(s, p, layer, "ln1", cfg.ln_eps), attn), s);
        for (std::size_t t = 0; t < frames; ++t) per_pos[t].push_back(slice_rows(upd, t, t + 1));
      }
      for (std::size_t t = 0; t < frames; ++t) {
        spatial[t] = concat_rows(per_pos[t]);
        fused[t] = spatial[t];
      }
      break;
    }
    case Variant::spatial_only:
    case Variant::stca: {
      for (std::size_t t = 0; t < frames; ++t) spatial[t] = add(mhsa(ln(z[t], p, layer, "ln1", cfg.ln_eps), attn), z[t]);
      if (cfg.variant == Variant::spatial_only) {
        fused = spatial;
        break;
      }
      if (schedule == nullptr) throw ConfigError("stca block needs a mask schedule", "variant");
      if (schedule->frames() != frames || schedule->grid().count() + 1 != z.front().shape()[0])
        throw ConfigError("mask schedule does not match the clip (" + std::to_string(schedule->frames()) + " frames, " +
                              std::to_string(schedule->grid().count()) + " cells)",
                          "T");
      std::vector<Var> masked;
      masked.reserve(frames);
      for (std::size_t t = 0; t < frames; ++t) masked.push_back(apply_mask(z[t], schedule->map(t, layer)).tokens);
      const std::string b = block_prefix(layer);
      std::vector<Var> dyn = multiscale_attend(masked, cfg.mix, attn, p[b + "ln1.gain"], p[b + "ln1.bias"],
                                               cfg.ln_eps, cfg.boundary);
      for (std::size_t t = 0; t < frames; ++t) fused[t] = pad_and_fuse(spatial[t], dyn[t], schedule->map(t, layer));
      break;
    }
  }

  for (std::size_t t = 0; t < frames; ++t)
    out[t] = add(mlp(ln(spatial[t], p, layer, "ln2", cfg.ln_eps), p, layer), fused[t]);
  return out;
}

inline MaskSchedule schedule_for(const EncoderConfig& cfg) {
  return build_mask_schedule(cfg.grid(), cfg.window, cfg.frames, cfg.layers, cfg.mask_strategy, cfg.mask_seed);
}

// All token states z^0 .. z^L, each a per-frame list of [N+1, D] values.
inline std::vector<std::vector<Var>> encode_tokens(Tape& tape, const Video& video, const BoundParameters& p,
                                                   const EncoderConfig& cfg) {
  cfg.validate();
  std::optional<MaskSchedule> schedule;
  if (cfg.variant == Variant::stca) schedule.emplace(schedule_for(cfg));
  std::vector<std::vector<Var>> states;
  states.push_back(patch_embed(tape, video, p, cfg));
  for (std::size_t l = 0; l < cfg.layers; ++l)
    states.push_back(block_forward(states.back(), p, l, schedule ? &*schedule : nullptr, cfg));
  return states;
}

// Final-layer CLS row of each frame, L2-normalized: [T, D].
inline Var encode_video(Tape& tape, const Video& video, const BoundParameters& p, const EncoderConfig& cfg) {
  const auto states = encode_tokens(tape, video, p, cfg);
  std::vector<Var> cls;
  for (const auto& zt : states.back()) cls.push_back(slice_rows(zt, 0, 1));
  return l2_normalize_rows(concat_rows(cls));
}

// Convenience: inference-only encoding to a plain tensor.
inline Tensor encode_video(const Video& video, const Parameters& params, const EncoderConfig& cfg) {
  Tape tape(false);
  BoundParameters p(tape, params, false);
  return encode_video(tape, video, p, cfg).value();
}

// Spatial-only snapshot whose features regularize the tuned encoder. Bound
// as constants, so it never appears in a gradient map.
struct FrozenTwin {
  Parameters snapshot;
  EncoderConfig config;

  FrozenTwin(Parameters params, EncoderConfig cfg) : snapshot(std::move(params)), config(std::move(cfg)) {
    config.variant = Variant::spatial_only;
  }

  Var encode(Tape& tape, const Video& video) const {
    BoundParameters p(tape, snapshot, false);
    return encode_video(tape, video, p, config);
  }
};

// ------------------------------------------------------------------ complexity

struct PairCounts {
  std::uint64_t closed_form = 0;
  std::uint64_t measured = 0;
};

// Query-key pairs per clip for the configured variant:
//   spatial_only    L * T (N+1)^2
//   stca            L * [T (N+1)^2 + S T N'^2]
//   full_spacetime  L * (T (N+1))^2
//   factorized      L * [T (N+1)^2 + (N+1) T^2]
inline std::uint64_t closed_form_pairs(const EncoderConfig& cfg) {
  const std::uint64_t t = cfg.frames, l = cfg.layers;
  const std::uint64_t n1 = cfg.patches() + 1;
  switch (cfg.variant) {
    case Variant::spatial_only: return l * t * n1 * n1;
    case Variant::stca: {
      const std::uint64_t np = visible_count(cfg.grid(), cfg.window);
      return l * (t * n1 * n1 + cfg.mix.scales.size() * t * np * np);
    }
    case Variant::full_spacetime: return l * (t * n1) * (t * n1);
    case Variant::factorized: return l * (t * n1 * n1 + n1 * t * t);
  }
  return 0;
}

// Runs one inference pass on a zero video and reads the tape's counter.
inline PairCounts pair_interaction_count(const EncoderConfig& cfg, std::uint64_t seed = 0) {
  cfg.validate();
  const Parameters params = init_parameters(cfg, seed);
  Tape tape(false);
  BoundParameters p(tape, params, false);
  encode_video(tape, Video({cfg.frames, cfg.height, cfg.width, 3}), p, cfg);
  return PairCounts{closed_form_pairs(cfg), tape.pair_interactions()};
}

}  // namespace stdd
