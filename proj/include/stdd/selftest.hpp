#pragma once

// Built-in invariant checks behind the `selftest` command.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stdd/alignment.hpp"
#include "stdd/gradcheck.hpp"

namespace stdd {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SelftestOptions {
  bool inject_plan_gap = false;  // corrupts the mixing plan of the collapse check
  std::uint64_t seed = 0;
};

// Clip whose frames are all equal to one random frame.
inline Video constant_video(std::size_t frames, std::size_t height, std::size_t width, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Tensor f = Tensor::uniform({height, width, 3}, 0, 1, rng);
  std::vector<Tensor> v(frames, f);
  return stack(v);
}

inline std::vector<ChannelPlan> identity_plans(std::size_t channels, std::size_t scales) {
  return std::vector<ChannelPlan>(scales, ChannelPlan{{{0, 0, channels}}});
}

// At full retention a time-constant clip gives time-constant retained
// tokens, so STCA with temporal mixing equals STCA whose plans keep every
// channel in place.
inline CheckResult check_mixing_collapse(const EncoderConfig& base, const SelftestOptions& opt) {
  EncoderConfig mixed = base;
  mixed.variant = Variant::stca;
  mixed.boundary = Boundary::self_fill;
  mixed.window.r = 1.0;
  if (opt.inject_plan_gap) {
    for (std::size_t delta : mixed.mix.scales) {
      ChannelPlan p = plan_channels(mixed.channels, delta, mixed.mix);
      p.segments.erase(p.segments.begin());
      mixed.mix.plan_override.push_back(p);
    }
  }
  EncoderConfig still = mixed;
  still.mix.plan_override = identity_plans(mixed.channels, mixed.mix.scales.size());
  const Parameters params = init_parameters(mixed, opt.seed);
  const Video video = constant_video(mixed.frames, mixed.height, mixed.width, opt.seed + 1);
  const double diff = max_abs_diff(encode_video(video, params, mixed), encode_video(video, params, still));
  return {"mixing_collapse", diff <= 1e-10, "max |difference| = " + std::to_string(diff)};
}

inline CheckResult check_mask_balance(const EncoderConfig& cfg) {
  const std::size_t frames = 4 * cfg.window.cells();
  const MaskSchedule s = build_mask_schedule(cfg.grid(), cfg.window, frames, cfg.layers);
  const std::size_t keep = visible_count(cfg.grid(), cfg.window);
  const std::size_t period = s.period();
  bool ok = period == cfg.window.cells() || (cfg.window.r == 1.0 && period == 1);
  for (std::size_t t = 0; t < frames && ok; ++t) {
    ok = s.visible(t).size() == keep;
    if (t + period < frames) ok = ok && s.map(t) == s.map(t + period);
  }
  const auto per_cell = static_cast<std::size_t>(std::llround(cfg.window.r * static_cast<double>(period)));
  for (std::size_t start = 0; start + period <= frames && ok; ++start)
    for (std::size_t c = 0; c < cfg.patches() && ok; ++c) {
      std::size_t count = 0;
      for (std::size_t t = start; t < start + period; ++t) count += s.map(t)[c];
      ok = count == per_cell;
    }
  return {"mask_balance", ok, "period " + std::to_string(period) + ", N' = " + std::to_string(keep)};
}

inline CheckResult check_channel_plans() {
  bool ok = true;
  for (std::size_t d : {8, 16, 32, 64})
    for (double g : {0.125, 0.25})
      for (std::size_t delta : {1, 2}) {
        MixSpec spec{{delta}, g, MixMode::continual, {}};
        try {
          const ChannelPlan c = plan_channels(d, delta, spec);
          std::size_t width = 0;
          for (const auto& s : c.segments) width += s.end - s.start;
          ok = ok && width == d;
          if (delta == 1) {
            spec.mode = MixMode::separate;
            ok = ok && plan_channels(d, delta, spec) == c;
          }
        } catch (const ConfigError&) {
          // gamma * D not integral or not divisible; skipped
        }
      }
  return {"channel_plans", ok, ok ? "plans cover D; continual equals separate at scale 1" : "plan mismatch"};
}

// Scores from plain loops over frames and prompts.
inline Tensor brute_force_scores(const Tensor& z, const TextBank& bank, real scale, bool v2t) {
  const std::size_t b = z.dim(0), t_n = z.dim(1), d = z.dim(2);
  Tensor out({b, bank.classes()});
  for (std::size_t n = 0; n < b; ++n)
    for (std::size_t k = 0; k < bank.classes(); ++k) {
      const Tensor c = bank.prompts(k);
      auto dot = [&](std::size_t t, std::size_t j) {
        real s = 0;
        for (std::size_t x = 0; x < d; ++x) s += z[(n * t_n + t) * d + x] * c.at(j, x);
        return s;
      };
      real acc = 0;
      if (v2t) {
        for (std::size_t t = 0; t < t_n; ++t) {
          real best = dot(t, 0);
          for (std::size_t j = 1; j < c.dim(0); ++j) best = std::max(best, dot(t, j));
          acc += best;
        }
        acc /= static_cast<real>(t_n);
      } else {
        for (std::size_t j = 0; j < c.dim(0); ++j) {
          real best = dot(0, j);
          for (std::size_t t = 1; t < t_n; ++t) best = std::max(best, dot(t, j));
          acc += best;
        }
        acc /= static_cast<real>(c.dim(0));
      }
      out.at(n, k) = scale * acc;
    }
  return out;
}

inline CheckResult check_alignment_oracle(std::uint64_t seed, std::size_t instances = 20) {
  std::mt19937_64 rng(seed);
  double worst = 0;
  for (std::size_t i = 0; i < instances; ++i) {
    const std::size_t b = 1 + rng() % 4, t = 1 + rng() % 4, k = 1 + rng() % 5, d = 2 + rng() % 7;
    std::vector<Tensor> per_class;
    std::vector<std::string> names;
    for (std::size_t c = 0; c < k; ++c) {
      per_class.push_back(Tensor::normal({1 + rng() % 4, d}, 1, rng));
      names.push_back(std::to_string(c));
    }
    const TextBank bank(names, per_class);
    Tape tape(false);
    const Tensor z = l2_normalize_rows(tape.constant(Tensor::normal({b * t, d}, 1, rng))).value().reshaped({b, t, d});
    worst = std::max(worst, static_cast<double>(max_abs_diff(score_v2t(z, bank, 1), brute_force_scores(z, bank, 1, true))));
    worst = std::max(worst, static_cast<double>(max_abs_diff(score_t2v(z, bank, 1), brute_force_scores(z, bank, 1, false))));
  }
  Tape tape(false);
  const real ce = cross_entropy(tape.constant(Tensor({3, 5}, real(2))), {0, 3, 4}).value().item();
  const double ce_err = std::abs(static_cast<double>(ce) - std::log(5.0));
  const bool ok = worst <= 1e-12 && ce_err <= 1e-12;
  return {"alignment_oracle", ok,
          "max score error " + std::to_string(worst) + ", uniform CE error " + std::to_string(ce_err)};
}

inline CheckResult check_gradient(std::uint64_t seed) {
  const GradCheckResult g = pipeline_gradcheck(seed);
  return {"gradient", g.max_rel_error < 1e-4,
          "max relative error " + std::to_string(g.max_rel_error) + " at " + g.worst + " over " +
              std::to_string(g.checked) + " parameters"};
}

inline std::vector<CheckResult> run_selftest(const EncoderConfig& cfg, const SelftestOptions& opt = {}) {
  cfg.validate();
  return {check_gradient(opt.seed), check_mixing_collapse(cfg, opt), check_mask_balance(cfg), check_channel_plans(),
          check_alignment_oracle(opt.seed)};
}

inline nlohmann::json to_json(const std::vector<CheckResult>& checks) {
  nlohmann::json arr = nlohmann::json::array();
  bool all = true;
  for (const auto& c : checks) {
    arr.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    all = all && c.passed;
  }
  return {{"kind", "selftest"}, {"checks", arr}, {"pass", all}};
}

}  // namespace stdd
