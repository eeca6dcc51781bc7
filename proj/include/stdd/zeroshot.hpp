#pragma once

// Multi-view zero-shot evaluation: temporal x spatial views per clip,
// per-view class scores, unweighted aggregation.

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "stdd/alignment.hpp"
#include "stdd/train.hpp"
#include "stdd/video.hpp"

namespace stdd {

struct LabeledClip {
  std::string id;
  std::optional<std::size_t> label;
  Video source;  // any length, at least H x W
};

struct ZeroshotSpec {
  EncoderConfig encoder{};
  std::size_t temporal_views = 3;
  std::size_t spatial_views = 1;
  real logit_scale = real(100);
  std::size_t threads = 0;  // 0 = hardware concurrency
};

// Features of every view of a clip: temporal views outer, spatial inner.
inline std::vector<Tensor> view_features(const LabeledClip& clip, const Parameters& params, const ZeroshotSpec& spec) {
  const EncoderConfig& cfg = spec.encoder;
  std::vector<Tensor> out;
  for (std::size_t tv = 0; tv < spec.temporal_views; ++tv) {
    const Video frames = select_frames(clip.source, view_frame_indices(clip.source.dim(0), cfg.frames, tv, spec.temporal_views));
    for (std::size_t sv = 0; sv < spec.spatial_views; ++sv)
      out.push_back(encode_video(spatial_crop(frames, cfg.height, cfg.width, sv, spec.spatial_views), params, cfg));
  }
  return out;
}

struct ClipResult {
  std::vector<Tensor> per_view;
  Prediction prediction;
};

inline ClipResult classify_clip(const LabeledClip& clip, const Parameters& params, const TextBank& bank,
                                const ZeroshotSpec& spec) {
  ClipResult r;
  for (const Tensor& z : view_features(clip, params, spec)) {
    const Tensor zb = z.reshaped({1, z.dim(0), z.dim(1)});
    const Tensor s = overall_score(score_v2t(zb, bank, spec.logit_scale), score_t2v(zb, bank, spec.logit_scale));
    r.per_view.push_back(s.reshaped({bank.classes()}));
  }
  r.prediction = zero_shot_predict(r.per_view);
  return r;
}

inline nlohmann::json zeroshot_report(const std::vector<LabeledClip>& clips, const Parameters& params,
                                      const TextBank& bank, const ZeroshotSpec& spec) {
  spec.encoder.validate();
  if (spec.temporal_views == 0 || spec.spatial_views == 0) throw ConfigError("need at least one view", "temporal_views");
  if (bank.dim() != spec.encoder.channels)
    throw DimensionError("text bank dimension " + std::to_string(bank.dim()) + " != D = " +
                         std::to_string(spec.encoder.channels));
  std::vector<ClipResult> results(clips.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < clips.size(); i = next++) {
      try {
        results[i] = classify_clip(clips[i], params, bank, spec);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::size_t n_threads = spec.threads ? spec.threads : std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min(n_threads, std::max<std::size_t>(clips.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < n_threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  nlohmann::json videos = nlohmann::json::array();
  std::size_t labeled = 0, correct = 0;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const ClipResult& r = results[i];
    nlohmann::json views = nlohmann::json::array();
    for (const auto& v : r.per_view) views.push_back(v.data());
    nlohmann::json entry = {{"video_id", clips[i].id},
                            {"per_view_scores", views},
                            {"aggregated", r.prediction.aggregated.data()},
                            {"predicted_class", bank.names()[r.prediction.predicted]}};
    if (clips[i].label) {
      entry["label"] = bank.names()[*clips[i].label];
      ++labeled;
      correct += *clips[i].label == r.prediction.predicted;
    }
    videos.push_back(entry);
  }
  nlohmann::json report = {{"kind", "zeroshot"},
                           {"classes", bank.names()},
                           {"temporal_views", spec.temporal_views},
                           {"spatial_views", spec.spatial_views},
                           {"videos", videos}};
  report["accuracy"] = labeled ? nlohmann::json(static_cast<double>(correct) / static_cast<double>(labeled)) : nlohmann::json();
  return report;
}

// ------------------------------------------------------------------ sources

// Source clips are twice as long as the encoder input and one patch wider per
// extra spatial view.
inline std::vector<LabeledClip> synthetic_clips(const ZeroshotSpec& spec, std::size_t per_class, std::uint64_t seed) {
  const EncoderConfig& c = spec.encoder;
  const std::size_t width = c.width + c.patch * (spec.spatial_views - 1);
  std::vector<LabeledClip> out;
  for (std::size_t k = 0; k < toy_class_names().size(); ++k)
    for (std::size_t i = 0; i < per_class; ++i) {
      const auto cls = static_cast<SyntheticClass>(k);
      out.push_back({to_string(cls) + "_" + std::to_string(i), k,
                     synthetic_video(cls, 2 * c.frames, c.height, width, seed * 100003 + k * 1009 + i)});
    }
  return out;
}

// Layout <root>/<class>/<clip>/frame_*.rgb; underscores in class directory
// names read as spaces. Classes absent from the bank are kept unlabeled.
inline std::vector<LabeledClip> load_clip_tree(const std::filesystem::path& root, const TextBank& bank) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw IoError("video directory not found: " + root.string());
  std::vector<fs::path> class_dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) class_dirs.push_back(e.path());
  std::sort(class_dirs.begin(), class_dirs.end());
  std::vector<LabeledClip> out;
  for (const auto& cd : class_dirs) {
    std::string name = cd.filename().string();
    std::replace(name.begin(), name.end(), '_', ' ');
    std::optional<std::size_t> label;
    const auto& names = bank.names();
    if (auto it = std::find(names.begin(), names.end(), name); it != names.end())
      label = static_cast<std::size_t>(it - names.begin());
    std::vector<fs::path> clips;
    for (const auto& e : fs::directory_iterator(cd))
      if (e.is_directory()) clips.push_back(e.path());
    std::sort(clips.begin(), clips.end());
    for (const auto& clip : clips)
      out.push_back({cd.filename().string() + "/" + clip.filename().string(), label, read_frame_dir(clip.string())});
  }
  if (out.empty()) throw IoError("no clips under " + root.string());
  return out;
}

// Bank whose prompts are encoder features of held-out clips: one row per clip,
// the mean of its frame features.
inline TextBank prototype_bank(const Parameters& params, const EncoderConfig& cfg, std::size_t per_class,
                               std::uint64_t seed) {
  std::vector<Tensor> mats;
  for (std::size_t k = 0; k < toy_class_names().size(); ++k) {
    Tensor m({per_class, cfg.channels});
    for (std::size_t i = 0; i < per_class; ++i) {
      const Video v = synthetic_video(static_cast<SyntheticClass>(k), cfg.frames, cfg.height, cfg.width,
                                      (seed + 7919) * 100003 + k * 1009 + i);
      const Tensor z = encode_video(v, params, cfg);
      for (std::size_t t = 0; t < z.dim(0); ++t)
        for (std::size_t d = 0; d < cfg.channels; ++d) m.at(i, d) += z.at(t, d) / static_cast<real>(z.dim(0));
    }
    mats.push_back(std::move(m));
  }
  return TextBank(toy_class_names(), mats);
}

}  // namespace stdd
