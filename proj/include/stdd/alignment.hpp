#pragma once

// Frame/prompt alignment scores, training losses, zero-shot aggregation.
//
//   v2t[n,k] = s * mean_t max_j <z_nt, c_kj>
//   t2v[n,k] = s * mean_j max_t <z_nt, c_kj>
//   S        = (v2t + t2v) / 2
// with s the logit scale and ties of every max resolved to the lowest index.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stdd/ops.hpp"
#include "stdd/serialize.hpp"

namespace stdd {

// Per-class prompt embeddings, stored padded as [K, Nmax, D] with a valid
// row count per class. Padding rows never take part in scoring.
class TextBank {
 public:
  TextBank() = default;

  // One [N_k, D] matrix per class; rows are normalized on entry.
  TextBank(std::vector<std::string> names, const std::vector<Tensor>& per_class) : names_(std::move(names)) {
    if (per_class.empty()) throw ValidationError("text bank needs at least one class");
    if (names_.size() != per_class.size()) throw ValidationError("text bank: class name count differs from class count");
    std::size_t nmax = 0;
    const std::size_t d = per_class.front().rank() == 2 ? per_class.front().dim(1) : 0;
    for (std::size_t k = 0; k < per_class.size(); ++k) {
      const Tensor& c = per_class[k];
      if (c.rank() != 2 || c.dim(1) != d || d == 0)
        throw DimensionError("text bank class '" + names_[k] + "' has shape " + shape_str(c.shape()));
      if (c.dim(0) == 0) throw ValidationError("text bank class '" + names_[k] + "' has no prompts");
      nmax = std::max(nmax, c.dim(0));
      counts_.push_back(c.dim(0));
    }
    emb_ = Tensor({per_class.size(), nmax, d});
    for (std::size_t k = 0; k < per_class.size(); ++k)
      for (std::size_t j = 0; j < counts_[k]; ++j) {
        real norm = 0;
        for (std::size_t c = 0; c < d; ++c) norm += per_class[k].at(j, c) * per_class[k].at(j, c);
        norm = std::sqrt(norm);
        if (!(norm > 0)) throw ValidationError("text bank class '" + names_[k] + "' has a zero embedding");
        for (std::size_t c = 0; c < d; ++c) emb_[(k * nmax + j) * d + c] = per_class[k].at(j, c) / norm;
      }
  }

  std::size_t classes() const noexcept { return counts_.size(); }
  std::size_t dim() const { return emb_.dim(2); }
  std::size_t max_prompts() const { return emb_.dim(1); }
  std::size_t count(std::size_t k) const { return counts_.at(k); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const Tensor& embeddings() const noexcept { return emb_; }

  // Valid rows of class k: [N_k, D].
  Tensor prompts(std::size_t k) const {
    const std::size_t d = dim(), nmax = max_prompts();
    Tensor out({count(k), d});
    for (std::size_t j = 0; j < count(k); ++j)
      for (std::size_t c = 0; c < d; ++c) out.at(j, c) = emb_[(k * nmax + j) * d + c];
    return out;
  }

 private:
  std::vector<std::string> names_;
  Tensor emb_;
  std::vector<std::size_t> counts_;
};

struct ScoreVars {
  Var v2t;  // [B, K]
  Var t2v;  // [B, K]
  Var s;    // [B, K]
};

// Z holds one [T, D] matrix of unit frame features per video.
inline ScoreVars score(const std::vector<Var>& z, const TextBank& bank, real logit_scale) {
  if (z.empty()) throw DimensionError("score: empty batch");
  Tape& tape = z.front().tape();
  std::vector<Var> bank_vars;
  for (std::size_t k = 0; k < bank.classes(); ++k) bank_vars.push_back(tape.constant(bank.prompts(k)));
  std::vector<Var> v2t_rows, t2v_rows;
  for (const auto& zn : z) {
    if (zn.shape().size() != 2 || zn.shape()[1] != bank.dim())
      throw DimensionError("score: frame features " + shape_str(zn.shape()) + " vs bank width " +
                           std::to_string(bank.dim()));
    std::vector<Var> v2t, t2v;
    for (const auto& ck : bank_vars) {
      Var sims = matmul_nt(zn, ck);  // [T, N_k]
      v2t.push_back(reshape(mean_all(row_max(sims)), {1, 1}));
      t2v.push_back(reshape(mean_all(col_max(sims)), {1, 1}));
    }
    v2t_rows.push_back(concat_cols(v2t));
    t2v_rows.push_back(concat_cols(t2v));
  }
  ScoreVars out;
  out.v2t = scale(concat_rows(v2t_rows), logit_scale);
  out.t2v = scale(concat_rows(t2v_rows), logit_scale);
  out.s = scale(add(out.v2t, out.t2v), real(0.5));
  return out;
}

namespace detail {

inline std::vector<Var> frames_of(Tape& tape, const Tensor& z) {
  if (z.rank() != 3) throw DimensionError("expected frame features [B, T, D], got " + shape_str(z.shape()));
  std::vector<Var> out;
  for (std::size_t n = 0; n < z.dim(0); ++n) out.push_back(tape.constant(z.slice0(n)));
  return out;
}

}  // namespace detail

inline Tensor score_v2t(const Tensor& z, const TextBank& bank, real logit_scale) {
  Tape tape(false);
  return score(detail::frames_of(tape, z), bank, logit_scale).v2t.value();
}

inline Tensor score_t2v(const Tensor& z, const TextBank& bank, real logit_scale) {
  Tape tape(false);
  return score(detail::frames_of(tape, z), bank, logit_scale).t2v.value();
}

inline Tensor overall_score(const Tensor& v2t, const Tensor& t2v) {
  if (v2t.shape() != t2v.shape())
    throw DimensionError("overall_score: " + shape_str(v2t.shape()) + " vs " + shape_str(t2v.shape()));
  Tensor out(v2t.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (v2t[i] + t2v[i]) / 2;
  return out;
}

inline Var ce_loss(const Var& scores, const std::vector<std::size_t>& labels) { return cross_entropy(scores, labels); }

// Mean over frames of ||norm(a) - norm(b)||^2. `frozen` is expected to come
// from constants, so no gradient reaches it.
inline Var distill_loss(const std::vector<Var>& tuned, const std::vector<Var>& frozen) {
  if (tuned.size() != frozen.size() || tuned.empty())
    throw DimensionError("distill_loss: " + std::to_string(tuned.size()) + " tuned vs " +
                         std::to_string(frozen.size()) + " frozen videos");
  std::vector<Var> per_video;
  std::size_t rows = 0;
  for (std::size_t n = 0; n < tuned.size(); ++n) {
    if (tuned[n].shape() != frozen[n].shape())
      throw DimensionError("distill_loss: " + shape_str(tuned[n].shape()) + " vs " + shape_str(frozen[n].shape()));
    Var d = sub(l2_normalize_rows(tuned[n]), l2_normalize_rows(frozen[n]));
    per_video.push_back(sum(mul(d, d)));
    rows += tuned[n].value().rows();
  }
  Var total = per_video.front();
  for (std::size_t n = 1; n < per_video.size(); ++n) total = add(total, per_video[n]);
  return scale(total, real(1) / static_cast<real>(rows));
}

struct LossConfig {
  real lambda_distill = 1;
  real logit_scale = 100;

  void validate() const {
    if (!std::isfinite(lambda_distill) || lambda_distill < 0)
      throw ConfigError("lambda must be finite and nonnegative", "lambda");
    if (!std::isfinite(logit_scale) || logit_scale <= 0)
      throw ConfigError("logit scale must be finite and positive", "logit_scale");
  }
};

inline Var total_loss(const Var& scores, const std::vector<std::size_t>& labels, const std::vector<Var>& tuned,
                      const std::vector<Var>& frozen, const LossConfig& cfg) {
  cfg.validate();
  Var ce = ce_loss(scores, labels);
  if (cfg.lambda_distill == 0) return ce;
  return add(ce, scale(distill_loss(tuned, frozen), cfg.lambda_distill));
}

struct Prediction {
  std::size_t predicted = 0;
  Tensor aggregated;
};

// Unweighted mean of per-view class scores; argmax ties go to the lowest class.
inline Prediction zero_shot_predict(const std::vector<Tensor>& views) {
  if (views.empty()) throw ValidationError("zero_shot_predict: no views");
  Prediction p;
  p.aggregated = Tensor(views.front().shape());
  for (const auto& v : views) {
    if (v.shape() != views.front().shape() || v.rank() != 1 || v.size() == 0)
      throw DimensionError("zero_shot_predict: view scores must be equally sized vectors");
    for (std::size_t i = 0; i < v.size(); ++i) p.aggregated[i] += v[i];
  }
  for (auto& x : p.aggregated.data()) x /= static_cast<real>(views.size());
  for (std::size_t i = 1; i < p.aggregated.size(); ++i)
    if (p.aggregated[i] > p.aggregated[p.predicted]) p.predicted = i;
  return p;
}

// ------------------------------------------------------------------ loading

// STDD file with one [N_k, D] array per class; classes in file order (by name).
inline TextBank load_text_bank_stdd(const std::string& path) {
  const NamedTensors arrays = load_stdd(path);
  std::vector<std::string> names;
  std::vector<Tensor> mats;
  for (const auto& [name, t] : arrays) {
    names.push_back(name);
    mats.push_back(t);
  }
  return TextBank(std::move(names), mats);
}

// JSON sidecar:
//   {"embeddings": "bank.stdd",
//    "classes": [{"name": "archery", "array": "archery", "prompts": ["..."]}]}
// "embeddings" is resolved relative to the sidecar. "array" defaults to the
// class name; when "prompts" is present its length must match the row count.
inline TextBank load_text_bank_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open text bank " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (!doc.contains("embeddings") || !doc.contains("classes") || !doc["classes"].is_array())
    throw ParseError(path + ": text bank sidecar needs \"embeddings\" and \"classes\"");
  const auto emb_path = std::filesystem::path(path).parent_path() / doc["embeddings"].get<std::string>();
  const NamedTensors arrays = load_stdd(emb_path.string());
  std::vector<std::string> names;
  std::vector<Tensor> mats;
  for (const auto& c : doc["classes"]) {
    const auto name = c.at("name").get<std::string>();
    const auto array = c.value("array", name);
    auto it = arrays.find(array);
    if (it == arrays.end()) throw IoError(emb_path.string() + ": missing array '" + array + "'");
    if (c.contains("prompts") && c["prompts"].size() != it->second.dim(0))
      throw ValidationError("class '" + name + "': " + std::to_string(c["prompts"].size()) + " prompts but " +
                            std::to_string(it->second.dim(0)) + " embeddings");
    names.push_back(name);
    mats.push_back(it->second);
  }
  return TextBank(std::move(names), mats);
}

inline TextBank load_text_bank(const std::string& path) {
  return std::filesystem::path(path).extension() == ".json" ? load_text_bank_json(path) : load_text_bank_stdd(path);
}

inline NamedTensors to_named(const TextBank& bank) {
  NamedTensors out;
  for (std::size_t k = 0; k < bank.classes(); ++k) out[bank.names()[k]] = bank.prompts(k);
  return out;
}

// Class-structured random bank: each class has a random unit center and its
// prompts scatter around it with relative noise `spread`.
inline TextBank synthetic_text_bank(const std::vector<std::string>& names, std::size_t prompts, std::size_t dim,
                                    real spread, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Tensor> mats;
  for (std::size_t k = 0; k < names.size(); ++k) {
    Tensor center = Tensor::normal({dim}, 1, rng);
    Tensor m({prompts, dim});
    for (std::size_t j = 0; j < prompts; ++j) {
      Tensor noise = Tensor::normal({dim}, 1, rng);
      for (std::size_t c = 0; c < dim; ++c) m.at(j, c) = center[c] + spread * noise[c];
    }
    mats.push_back(std::move(m));
  }
  return TextBank(names, mats);
}

}  // namespace stdd
