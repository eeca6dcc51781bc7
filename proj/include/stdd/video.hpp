#pragma once

// Video sources: raw RGB frame directories, synthetic clips, view sampling.
//
// Raw frame file: u32 width, u32 height (little-endian), then width*height
// RGB8 triples in row-major order. A clip directory holds one such file per
// frame; frames are taken in lexicographic file-name order.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "stdd/encoder.hpp"

namespace stdd {

enum class SyntheticClass { moving_square = 0, static_texture = 1 };

inline std::string to_string(SyntheticClass c) {
  return c == SyntheticClass::moving_square ? "moving_square" : "static_texture";
}

inline Tensor read_raw_frame(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open frame " + path);
  std::uint32_t w = 0, h = 0;
  if (!is.read(reinterpret_cast<char*>(&w), 4) || !is.read(reinterpret_cast<char*>(&h), 4))
    throw IoError(path + ": truncated frame header");
  if (w == 0 || h == 0) throw IoError(path + ": empty frame");
  std::vector<unsigned char> bytes(static_cast<std::size_t>(w) * h * 3);
  if (!is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size())))
    throw IoError(path + ": truncated frame payload");
  Tensor out({h, w, 3});
  for (std::size_t i = 0; i < bytes.size(); ++i) out[i] = static_cast<real>(bytes[i]) / real(255);
  return out;
}

inline void write_raw_frame(const std::string& path, const Tensor& frame) {
  if (frame.rank() != 3 || frame.dim(2) != 3) throw DimensionError("write_raw_frame: expected [H, W, 3]");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  const auto h = static_cast<std::uint32_t>(frame.dim(0)), w = static_cast<std::uint32_t>(frame.dim(1));
  os.write(reinterpret_cast<const char*>(&w), 4);
  os.write(reinterpret_cast<const char*>(&h), 4);
  for (std::size_t i = 0; i < frame.size(); ++i) {
    const real v = std::clamp(frame[i], real(0), real(1));
    const auto b = static_cast<unsigned char>(std::lround(v * 255));
    os.put(static_cast<char>(b));
  }
  if (!os) throw IoError("write failed: " + path);
}

inline Video read_frame_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("not a frame directory: " + dir);
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path().string());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no frames in " + dir);
  std::vector<Tensor> frames;
  for (const auto& f : files) {
    frames.push_back(read_raw_frame(f));
    if (frames.back().shape() != frames.front().shape())
      throw IoError(f + ": frame size differs from " + files.front());
  }
  return stack(frames);
}

inline void write_frame_dir(const std::string& dir, const Video& video) {
  std::filesystem::create_directories(dir);
  for (std::size_t t = 0; t < video.dim(0); ++t) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%05zu.rgb", t);
    write_raw_frame((std::filesystem::path(dir) / name).string(), video.slice0(t));
  }
}

// moving_square: a bright square crossing a dark noisy background, one step
// per frame. static_texture: diagonal stripes with a random phase, identical
// in every frame.
inline Video synthetic_video(SyntheticClass cls, std::size_t frames, std::size_t height, std::size_t width,
                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor v({frames, height, width, 3});
  auto px = [&](std::size_t t, std::size_t y, std::size_t x, std::size_t c) -> real& {
    return v.data()[((t * height + y) * width + x) * 3 + c];
  };
  if (cls == SyntheticClass::moving_square) {
    const std::size_t side = std::max<std::size_t>(1, std::min(height, width) / 4);
    const std::size_t y0 = static_cast<std::size_t>(u(rng) * static_cast<double>(height - side + 1)) % (height - side + 1);
    const std::size_t x0 = static_cast<std::size_t>(u(rng) * static_cast<double>(width));
    const std::size_t step = std::max<std::size_t>(1, side / 2);
    const double hue = u(rng);
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x)
          for (std::size_t c = 0; c < 3; ++c) px(t, y, x, c) = static_cast<real>(0.1 * u(rng));
      const std::size_t xs = (x0 + t * step) % width;
      for (std::size_t y = y0; y < y0 + side; ++y)
        for (std::size_t dx = 0; dx < side; ++dx) {
          const std::size_t x = (xs + dx) % width;
          px(t, y, x, 0) = static_cast<real>(0.8 + 0.2 * hue);
          px(t, y, x, 1) = static_cast<real>(0.9);
          px(t, y, x, 2) = static_cast<real>(0.8 + 0.2 * (1 - hue));
        }
    }
  } else {
    const double phase = u(rng) * 2 * std::numbers::pi;
    const double freq = 2 * std::numbers::pi / (4.0 + 4.0 * u(rng));
    const double tint = u(rng);
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x) {
        const double s = 0.5 + 0.4 * std::sin(freq * static_cast<double>(x + y) + phase);
        for (std::size_t t = 0; t < frames; ++t) {
          px(t, y, x, 0) = static_cast<real>(s);
          px(t, y, x, 1) = static_cast<real>(s * (0.5 + 0.5 * tint));
          px(t, y, x, 2) = static_cast<real>(1 - s);
        }
      }
  }
  return v;
}

// Clip of `frames` frames taken with uniform stride from a longer source.
// View v of `views` starts at phase (v * stride) / views, so views cover
// interleaved frame subsets. Short sources repeat their frames.
inline std::vector<std::size_t> view_frame_indices(std::size_t source_frames, std::size_t frames, std::size_t view,
                                                   std::size_t views) {
  if (source_frames == 0 || frames == 0 || views == 0 || view >= views)
    throw ValidationError("view sampling needs a non-empty source and view < views");
  const double stride = static_cast<double>(source_frames) / static_cast<double>(frames);
  const double phase = stride * static_cast<double>(view) / static_cast<double>(views);
  std::vector<std::size_t> idx(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    const auto f = static_cast<std::size_t>(std::floor(phase + stride * static_cast<double>(i)));
    idx[i] = std::min(f, source_frames - 1);
  }
  return idx;
}

inline Video select_frames(const Video& source, const std::vector<std::size_t>& idx) {
  std::vector<Tensor> frames;
  frames.reserve(idx.size());
  for (std::size_t i : idx) frames.push_back(source.slice0(i));
  return stack(frames);
}

// Central [height, width] window of every frame.
inline Video center_crop(const Video& video, std::size_t height, std::size_t width) {
  if (video.rank() != 4 || video.dim(1) < height || video.dim(2) < width)
    throw DimensionError("center_crop: " + shape_str(video.shape()) + " smaller than crop");
  const std::size_t t_n = video.dim(0), h = video.dim(1), w = video.dim(2);
  const std::size_t y0 = (h - height) / 2, x0 = (w - width) / 2;
  Tensor out({t_n, height, width, 3});
  for (std::size_t t = 0; t < t_n; ++t)
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x)
        for (std::size_t c = 0; c < 3; ++c)
          out.data()[((t * height + y) * width + x) * 3 + c] = video[((t * h + y + y0) * w + x + x0) * 3 + c];
  return out;
}

// Spatial view v of `views`: crops evenly spaced along each axis with slack,
// centered when views == 1.
inline Video spatial_crop(const Video& video, std::size_t height, std::size_t width, std::size_t view,
                          std::size_t views) {
  if (views == 0 || view >= views) throw ValidationError("spatial view index out of range");
  if (video.rank() != 4 || video.dim(1) < height || video.dim(2) < width)
    throw DimensionError("spatial_crop: " + shape_str(video.shape()) + " smaller than crop");
  if (views == 1) return center_crop(video, height, width);
  const std::size_t t_n = video.dim(0), h = video.dim(1), w = video.dim(2);
  const std::size_t y0 = (h - height) * view / (views - 1), x0 = (w - width) * view / (views - 1);
  Tensor out({t_n, height, width, 3});
  for (std::size_t t = 0; t < t_n; ++t)
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x)
        for (std::size_t c = 0; c < 3; ++c)
          out.data()[((t * height + y) * width + x) * 3 + c] = video[((t * h + y + y0) * w + x + x0) * 3 + c];
  return out;
}

}  // namespace stdd
