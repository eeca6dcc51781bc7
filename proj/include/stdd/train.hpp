#pragma once

// Toy end-to-end training: synthetic two-class clips, synthetic prompt
// embeddings, plain gradient descent on CE + distillation.

#include <chrono>
#include <string>
#include <vector>

#include "stdd/alignment.hpp"
#include "stdd/video.hpp"

namespace stdd {

// Small encoder for training runs; the full toy config is used elsewhere.
inline EncoderConfig training_encoder_config() {
  EncoderConfig c;
  c.frames = 8;
  c.height = 16;
  c.width = 16;
  c.patch = 8;
  c.channels = 32;
  c.layers = 2;
  c.heads = 2;
  return c;
}

inline const std::vector<std::string>& toy_class_names() {
  static const std::vector<std::string> names{"moving square", "static texture"};
  return names;
}

struct ToyBatch {
  std::vector<Video> videos;
  std::vector<std::size_t> labels;
};

inline ToyBatch toy_batch(const EncoderConfig& cfg, std::size_t per_class, std::uint64_t seed) {
  ToyBatch b;
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t i = 0; i < per_class; ++i) {
      b.videos.push_back(synthetic_video(static_cast<SyntheticClass>(k), cfg.frames, cfg.height, cfg.width,
                                         seed * 100003 + k * 1009 + i));
      b.labels.push_back(k);
    }
  return b;
}

inline void sgd_step(Parameters& params, const BoundParameters& bound, const GradientMap& grads, real lr) {
  for (const auto& [name, var] : bound.vars()) {
    if (!grads.contains(var)) continue;
    Tensor& w = params.at(name);
    const Tensor& g = grads.at(var);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
  }
}

struct TrainReport {
  std::vector<real> ce;     // CE before each step, plus the value after the last
  std::vector<real> total;  // same for CE + lambda * distill
  double seconds = 0;

  real initial_ce() const { return ce.front(); }
  real final_ce() const { return ce.back(); }
  real reduction() const { return 1 - final_ce() / initial_ce(); }
};

struct TrainSpec {
  EncoderConfig encoder = training_encoder_config();
  LossConfig loss{};
  real lr = real(0.05);
  std::size_t steps = 50;
  std::size_t videos_per_class = 8;
  std::size_t prompts_per_class = 3;
  real prompt_spread = real(0.3);
  std::uint64_t seed = 0;
};

inline TrainReport train_toy(const TrainSpec& spec, Parameters* trained = nullptr) {
  const auto start = std::chrono::steady_clock::now();
  spec.encoder.validate();
  spec.loss.validate();
  Parameters params = init_parameters(spec.encoder, spec.seed);
  const FrozenTwin twin(params, spec.encoder);
  const TextBank bank = synthetic_text_bank(toy_class_names(), spec.prompts_per_class, spec.encoder.channels,
                                            spec.prompt_spread, spec.seed + 7919);
  const ToyBatch batch = toy_batch(spec.encoder, spec.videos_per_class, spec.seed);
  std::vector<Tensor> frozen;
  for (const auto& v : batch.videos) frozen.push_back(encode_video(v, twin.snapshot, twin.config));

  TrainReport report;
  for (std::size_t step = 0;; ++step) {
    Tape tape;
    BoundParameters bound(tape, params, true);
    std::vector<Var> z, zf;
    for (std::size_t i = 0; i < batch.videos.size(); ++i) {
      z.push_back(encode_video(tape, batch.videos[i], bound, spec.encoder));
      zf.push_back(tape.constant(frozen[i]));
    }
    const ScoreVars s = score(z, bank, spec.loss.logit_scale);
    Var ce = ce_loss(s.s, batch.labels);
    Var loss = spec.loss.lambda_distill == 0 ? ce : add(ce, scale(distill_loss(z, zf), spec.loss.lambda_distill));
    report.ce.push_back(ce.value().item());
    report.total.push_back(loss.value().item());
    if (!loss.value().all_finite()) throw NumericError("training loss became non-finite at step " + std::to_string(step));
    if (step == spec.steps) break;
    sgd_step(params, bound, tape.backward(loss), spec.lr);
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (trained) *trained = std::move(params);
  return report;
}

}  // namespace stdd
