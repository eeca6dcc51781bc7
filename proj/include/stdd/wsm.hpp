#pragma once

// Window shift masking: periodic per-frame token retention maps.
//
// The patch grid is tiled by w1 x w2 windows. Inside a window, cells are
// numbered row-major 0 .. w1*w2-1. With k = r*w1*w2 cells kept per window,
// the default strategy keeps cell c at frame t (0-based) iff
// ((c - t) mod w1*w2) < k, the same pattern in every window of a frame.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stdd/ops.hpp"

namespace stdd {

struct TokenGrid {
  std::size_t rows = 0;  // patches per column (H / P)
  std::size_t cols = 0;  // patches per row (W / P)

  std::size_t count() const noexcept { return rows * cols; }

  static TokenGrid from_pixels(std::size_t height, std::size_t width, std::size_t patch) {
    if (patch == 0) throw ConfigError("patch size must be positive", "P");
    if (height % patch != 0) throw ConfigError("frame height " + std::to_string(height) + " is not divisible by patch size " + std::to_string(patch), "H");
    if (width % patch != 0) throw ConfigError("frame width " + std::to_string(width) + " is not divisible by patch size " + std::to_string(patch), "W");
    if (height == 0 || width == 0) throw ConfigError("frame extents must be positive", "H");
    return TokenGrid{height / patch, width / patch};
  }
};

struct WindowSpec {
  std::size_t w1 = 2;
  std::size_t w2 = 2;
  double r = 0.5;  // fraction of tokens retained

  std::size_t cells() const noexcept { return w1 * w2; }

  // r * w1 * w2; rejects anything that is not a positive integer.
  std::size_t keep_per_window() const {
    if (w1 == 0 || w2 == 0) throw ConfigError("window extents must be positive", "w1");
    const double k = r * static_cast<double>(cells());
    const double rounded = std::round(k);
    if (!(r > 0.0 && r <= 1.0) || std::abs(k - rounded) > 1e-9 || rounded < 1)
      throw ConfigError("r * w1 * w2 = " + std::to_string(k) + " must be a positive integer no larger than w1 * w2", "r");
    return static_cast<std::size_t>(rounded);
  }

  void validate(const TokenGrid& grid) const {
    keep_per_window();
    if (grid.rows % w1 != 0) throw ConfigError("grid rows " + std::to_string(grid.rows) + " not divisible by window height", "w1");
    if (grid.cols % w2 != 0) throw ConfigError("grid cols " + std::to_string(grid.cols) + " not divisible by window width", "w2");
  }
};

enum class MaskStrategy {
  repeat_window_shift,  // same contiguous pattern in every window, cyclic shift per frame
  random,               // independent random N' cells per frame, no shift
  random_shift,         // random N' cells in frame 0, then cyclic shift within windows
  uniform_shift,        // evenly strided cells in frame 0, then cyclic shift
  random_window_shift,  // independent random k cells per window in frame 0, then shift
};

inline std::string to_string(MaskStrategy s) {
  switch (s) {
    case MaskStrategy::repeat_window_shift: return "repeat_window_shift";
    case MaskStrategy::random: return "random";
    case MaskStrategy::random_shift: return "random_shift";
    case MaskStrategy::uniform_shift: return "uniform_shift";
    case MaskStrategy::random_window_shift: return "random_window_shift";
  }
  return "?";
}

inline MaskStrategy mask_strategy_from_string(const std::string& s) {
  for (auto m : {MaskStrategy::repeat_window_shift, MaskStrategy::random, MaskStrategy::random_shift,
                 MaskStrategy::uniform_shift, MaskStrategy::random_window_shift})
    if (to_string(m) == s) return m;
  throw ConfigError("unknown mask strategy '" + s + "'", "mask_strategy");
}

// Binary map over the N patch cells of one frame; 1 = retained.
using VisibilityMap = std::vector<std::uint8_t>;

class MaskSchedule {
 public:
  MaskSchedule(TokenGrid grid, WindowSpec window, std::size_t layers, std::size_t period,
               std::vector<VisibilityMap> maps)
      : grid_(grid), window_(window), layers_(layers), period_(period), maps_(std::move(maps)) {
    visible_.reserve(maps_.size());
    for (const auto& m : maps_) {
      std::vector<std::size_t> idx;
      for (std::size_t c = 0; c < m.size(); ++c)
        if (m[c]) idx.push_back(c);
      visible_.push_back(std::move(idx));
    }
  }

  const TokenGrid& grid() const noexcept { return grid_; }
  const WindowSpec& window() const noexcept { return window_; }
  std::size_t frames() const noexcept { return maps_.size(); }
  std::size_t layers() const noexcept { return layers_; }
  // Frames after which maps repeat; 0 when the schedule is aperiodic.
  std::size_t period() const noexcept { return period_; }

  // Every layer uses the same map for a given frame.
  const VisibilityMap& map(std::size_t frame, std::size_t layer = 0) const {
    check(frame, layer);
    return maps_[frame];
  }
  // Retained flat cell indices of a frame, ascending.
  const std::vector<std::size_t>& visible(std::size_t frame, std::size_t layer = 0) const {
    check(frame, layer);
    return visible_[frame];
  }
  const std::vector<VisibilityMap>& maps() const noexcept { return maps_; }

 private:
  void check(std::size_t frame, std::size_t layer) const {
    if (frame >= maps_.size()) throw DimensionError("mask schedule has no frame " + std::to_string(frame));
    if (layers_ != 0 && layer >= layers_) throw DimensionError("mask schedule has no layer " + std::to_string(layer));
  }

  TokenGrid grid_;
  WindowSpec window_;
  std::size_t layers_;
  std::size_t period_;
  std::vector<VisibilityMap> maps_;
  std::vector<std::vector<std::size_t>> visible_;
};

// N' = r * N, cross-checked against (L1/w1 * L2/w2) * (r * w1 * w2).
inline std::size_t visible_count(const TokenGrid& grid, const WindowSpec& win) {
  win.validate(grid);
  const std::size_t windows = (grid.rows / win.w1) * (grid.cols / win.w2);
  const std::size_t by_windows = windows * win.keep_per_window();
  const double by_ratio = win.r * static_cast<double>(grid.count());
  if (std::abs(by_ratio - static_cast<double>(by_windows)) > 1e-9)
    throw ConfigError("inconsistent visible count", "r");
  return by_windows;
}

namespace detail {

struct WindowLayout {
  TokenGrid grid;
  WindowSpec win;

  std::size_t window_of(std::size_t flat) const {
    const std::size_t row = flat / grid.cols, col = flat % grid.cols;
    return (row / win.w1) * (grid.cols / win.w2) + col / win.w2;
  }
  std::size_t cell_of(std::size_t flat) const {
    const std::size_t row = flat / grid.cols, col = flat % grid.cols;
    return (row % win.w1) * win.w2 + col % win.w2;
  }
};

// Frame-t map obtained by rotating the frame-0 pattern of each window by t cells.
inline VisibilityMap shifted(const VisibilityMap& first, const WindowLayout& layout, std::size_t t) {
  const std::size_t w = layout.win.cells();
  const std::size_t n = first.size();
  // pattern[window][cell]
  const std::size_t windows = n / w;
  std::vector<std::uint8_t> pattern(windows * w, 0);
  for (std::size_t f = 0; f < n; ++f) pattern[layout.window_of(f) * w + layout.cell_of(f)] = first[f];
  VisibilityMap out(n, 0);
  for (std::size_t f = 0; f < n; ++f) {
    const std::size_t c = layout.cell_of(f);
    const std::size_t src = (c + w - (t % w)) % w;
    out[f] = pattern[layout.window_of(f) * w + src];
  }
  return out;
}

// Smallest p dividing w1*w2 with shifted(first, p) == first.
inline std::size_t shift_period(const VisibilityMap& first, const WindowLayout& layout) {
  const std::size_t w = layout.win.cells();
  for (std::size_t p = 1; p < w; ++p)
    if (w % p == 0 && shifted(first, layout, p) == first) return p;
  return w;
}

}  // namespace detail

inline MaskSchedule build_mask_schedule(const TokenGrid& grid, const WindowSpec& win, std::size_t frames,
                                        std::size_t layers = 1,
                                        MaskStrategy strategy = MaskStrategy::repeat_window_shift,
                                        std::uint64_t seed = 0) {
  win.validate(grid);
  const std::size_t n = grid.count();
  const std::size_t k = win.keep_per_window();
  const std::size_t w = win.cells();
  const std::size_t keep_total = visible_count(grid, win);
  const detail::WindowLayout layout{grid, win};
  std::mt19937_64 rng(seed);

  auto random_cells = [&](std::size_t count) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    VisibilityMap m(n, 0);
    for (std::size_t i = 0; i < count; ++i) m[order[i]] = 1;
    return m;
  };

  std::vector<VisibilityMap> maps;
  maps.reserve(frames);
  if (strategy == MaskStrategy::random) {
    for (std::size_t t = 0; t < frames; ++t) maps.push_back(random_cells(keep_total));
    return MaskSchedule(grid, win, layers, 0, std::move(maps));
  }

  VisibilityMap first(n, 0);
  switch (strategy) {
    case MaskStrategy::repeat_window_shift:
      for (std::size_t f = 0; f < n; ++f) first[f] = layout.cell_of(f) < k ? 1 : 0;
      break;
    case MaskStrategy::random_shift:
      first = random_cells(keep_total);
      break;
    case MaskStrategy::uniform_shift:
      // keep flat index i iff floor((i+1) k / w) > floor(i k / w)
      for (std::size_t f = 0; f < n; ++f) first[f] = ((f + 1) * k) / w > (f * k) / w ? 1 : 0;
      break;
    case MaskStrategy::random_window_shift: {
      const std::size_t windows = n / w;
      std::vector<std::vector<std::uint8_t>> pattern(windows, std::vector<std::uint8_t>(w, 0));
      for (auto& p : pattern) {
        std::vector<std::size_t> order(w);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t i = 0; i < k; ++i) p[order[i]] = 1;
      }
      for (std::size_t f = 0; f < n; ++f) first[f] = pattern[layout.window_of(f)][layout.cell_of(f)];
      break;
    }
    case MaskStrategy::random:
      break;
  }
  for (std::size_t t = 0; t < frames; ++t) maps.push_back(detail::shifted(first, layout, t));
  return MaskSchedule(grid, win, layers, detail::shift_period(first, layout), std::move(maps));
}

inline nlohmann::json to_json(const MaskSchedule& s) {
  nlohmann::json maps = nlohmann::json::array();
  for (const auto& m : s.maps()) {
    nlohmann::json row = nlohmann::json::array();
    for (auto v : m) row.push_back(static_cast<int>(v));
    maps.push_back(std::move(row));
  }
  return {{"period", s.period()}, {"maps", std::move(maps)}};
}

struct MaskedTokens {
  Var tokens;                         // [N', D]
  std::vector<std::size_t> kept_idx;  // flat patch index of each row
};

// Selects the retained patch rows of one frame's tokens [N+1, D]; row 0 is
// the CLS token and is never selected.
inline MaskedTokens apply_mask(const Var& frame_tokens, const VisibilityMap& map) {
  const Tensor& z = frame_tokens.value();
  if (z.rank() != 2 || z.dim(0) != map.size() + 1)
    throw DimensionError("apply_mask: tokens " + shape_str(z.shape()) + " do not match a map over " +
                         std::to_string(map.size()) + " cells plus CLS");
  MaskedTokens out;
  std::vector<std::size_t> rows;
  for (std::size_t c = 0; c < map.size(); ++c)
    if (map[c]) {
      out.kept_idx.push_back(c);
      rows.push_back(c + 1);
    }
  out.tokens = gather_rows(frame_tokens, rows);
  return out;
}

}  // namespace stdd
