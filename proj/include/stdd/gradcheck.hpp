#pragma once

// Central finite-difference check of the full pipeline gradient:
// patch embedding, STCA blocks, alignment scores, CE + distillation.

#include <cmath>
#include <functional>
#include <random>
#include <string>

#include "stdd/alignment.hpp"
#include "stdd/encoder.hpp"

namespace stdd {

// Two frames of 16x16 pixels (N = 4), D = 8, two blocks, two heads.
// gamma = 1/4 gives d = 2, divisible by both scales.
inline EncoderConfig micro_config() {
  EncoderConfig c;
  c.frames = 2;
  c.height = 16;
  c.width = 16;
  c.patch = 8;
  c.channels = 8;
  c.layers = 2;
  c.heads = 2;
  c.mix.gamma = 0.25;
  return c;
}

// |a - n| / max(|a|, |n|, floor)
inline double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

struct GradCheckResult {
  double max_rel_error = 0;
  std::string worst;  // "name[index]"
  std::size_t checked = 0;
};

using LossBuilder = std::function<Var(Tape&, const BoundParameters&)>;

inline GradCheckResult gradcheck(const Parameters& params, const LossBuilder& build, double step = 1e-5,
                                 double floor = 1e-5) {
  Tape tape;
  BoundParameters bound(tape, params, true);
  const GradientMap grads = tape.backward(build(tape, bound));
  GradCheckResult r;
  Parameters probe = params;
  auto eval = [&] {
    Tape t(false);
    BoundParameters b(t, probe, false);
    return static_cast<double>(build(t, b).value().item());
  };
  for (const auto& [name, var] : bound.vars()) {
    Tensor& w = probe.at(name);
    const Tensor& g = grads.at(var);
    for (std::size_t i = 0; i < w.size(); ++i) {
      const real orig = w[i];
      w[i] = orig + static_cast<real>(step);
      const double up = eval();
      w[i] = orig - static_cast<real>(step);
      const double down = eval();
      w[i] = orig;
      const double e = relative_error(g[i], (up - down) / (2 * step), floor);
      ++r.checked;
      if (e > r.max_rel_error) {
        r.max_rel_error = e;
        r.worst = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return r;
}

// Two random clips, two classes with two prompts each, labels {0, 1}; the
// frozen features come from an independently initialized spatial twin.
inline GradCheckResult pipeline_gradcheck(std::uint64_t seed = 0, double step = 1e-5, double floor = 1e-5,
                                          EncoderConfig cfg = micro_config()) {
  std::mt19937_64 rng(seed);
  const Parameters params = init_parameters(cfg, seed);
  const FrozenTwin twin(init_parameters(cfg, seed + 1), cfg);
  std::vector<Video> videos;
  for (int i = 0; i < 2; ++i)
    videos.push_back(Tensor::uniform({cfg.frames, cfg.height, cfg.width, 3}, 0, 1, rng));
  const TextBank bank({"a", "b"}, {Tensor::normal({2, cfg.channels}, 1, rng), Tensor::normal({2, cfg.channels}, 1, rng)});
  const LossConfig loss{real(1), real(100)};
  const std::vector<std::size_t> labels{0, 1};
  const LossBuilder build = [&](Tape& tape, const BoundParameters& p) {
    std::vector<Var> z, zf;
    for (const auto& v : videos) {
      z.push_back(encode_video(tape, v, p, cfg));
      zf.push_back(twin.encode(tape, v));
    }
    return total_loss(score(z, bank, loss.logit_scale).s, labels, z, zf, loss);
  };
  return gradcheck(params, build, step, floor);
}

}  // namespace stdd
