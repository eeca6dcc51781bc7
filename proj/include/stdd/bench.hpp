#pragma once

// Attention-pair accounting and wall-time scaling benchmarks.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stdd/encoder.hpp"

namespace stdd {

inline const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> v{Variant::spatial_only, Variant::stca, Variant::full_spacetime,
                                      Variant::factorized};
  return v;
}

// Frame side in pixels giving a square grid of n patches.
inline std::size_t side_for_patches(std::size_t n, std::size_t patch) {
  const auto s = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
  if (s * s != n) throw ConfigError("patch count " + std::to_string(n) + " is not a square", "N");
  return s * patch;
}

// ------------------------------------------------------------------ pair counts

struct FlopsOptions {
  std::vector<std::size_t> frames{4, 8, 16};
  std::vector<std::size_t> patches{4, 16, 64};
  std::size_t channels = 16;
  std::size_t max_measured_tokens = 2048;  // larger joint sequences report the closed form only
  std::size_t random_configs = 20;
  std::uint64_t seed = 0;
};

inline nlohmann::json random_count_checks(std::size_t configs, std::uint64_t seed);

inline nlohmann::json bench_flops(const EncoderConfig& base, const FlopsOptions& opt = {}) {
  nlohmann::json points = nlohmann::json::array();
  bool counts_ok = true, ratio_ok = true, scaling_ok = true;
  const double s = static_cast<double>(base.mix.scales.size());
  const double bound = 1 + s * base.window.r * base.window.r;
  std::map<std::pair<std::string, std::size_t>, std::map<std::size_t, std::uint64_t>> by_variant_n;

  for (std::size_t n : opt.patches)
    for (std::size_t t : opt.frames) {
      EncoderConfig cfg = base;
      cfg.frames = t;
      cfg.height = cfg.width = side_for_patches(n, cfg.patch);
      cfg.channels = opt.channels;
      cfg.layers = 1;
      cfg.heads = 1;
      nlohmann::json variants = nlohmann::json::object();
      std::map<Variant, std::uint64_t> closed;
      for (Variant v : all_variants()) {
        cfg.variant = v;
        const std::uint64_t cf = closed_form_pairs(cfg);
        closed[v] = cf;
        by_variant_n[{to_string(v), n}][t] = cf;
        nlohmann::json entry = {{"closed_form", cf}};
        const std::size_t joint = v == Variant::full_spacetime ? t * (n + 1) : n + 1;
        if (joint <= opt.max_measured_tokens) {
          const PairCounts pc = pair_interaction_count(cfg);
          entry["measured"] = pc.measured;
          entry["match"] = pc.measured == cf;
          counts_ok = counts_ok && pc.measured == cf;
        } else {
          entry["measured"] = nullptr;
          entry["match"] = nullptr;
        }
        variants[to_string(v)] = entry;
      }
      const double ratio = static_cast<double>(closed[Variant::stca]) / static_cast<double>(closed[Variant::spatial_only]);
      ratio_ok = ratio_ok && ratio <= bound;
      points.push_back({{"T", t}, {"N", n}, {"variants", variants}, {"stca_ratio", ratio}, {"ratio_ok", ratio <= bound}});
    }

  // doubling T: full space-time quadruples, stca doubles
  nlohmann::json doubling = nlohmann::json::array();
  for (const auto& [key, series] : by_variant_n) {
    const auto& [variant, n] = key;
    if (variant != "stca" && variant != "full_spacetime") continue;
    const std::uint64_t factor = variant == "stca" ? 2 : 4;
    for (const auto& [t, count] : series) {
      auto it = series.find(2 * t);
      if (it == series.end()) continue;
      const bool ok = it->second == factor * count;
      scaling_ok = scaling_ok && ok;
      doubling.push_back({{"variant", variant}, {"N", n}, {"T", t}, {"factor", factor}, {"ok", ok}});
    }
  }
  const nlohmann::json random = random_count_checks(opt.random_configs, opt.seed);
  bool random_ok = true;
  for (const auto& r : random) random_ok = random_ok && r.at("match").get<bool>();
  return {{"kind", "flops"},
          {"ratio_bound", bound},
          {"points", points},
          {"doubling", doubling},
          {"random_configs", random},
          {"pass", counts_ok && ratio_ok && scaling_ok && random_ok},
          {"checks",
           {{"counts_match", counts_ok},
            {"ratio_within_bound", ratio_ok},
            {"doubling_exact", scaling_ok},
            {"random_counts_match", random_ok}}}};
}

// Measured counts against closed forms for random valid configurations.
inline nlohmann::json random_count_checks(std::size_t configs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto pick = [&](std::vector<std::size_t> v) { return v[rng() % v.size()]; };
  nlohmann::json out = nlohmann::json::array();
  std::size_t made = 0;
  while (made < configs) {
    EncoderConfig c;
    c.frames = pick({1, 2, 3, 4, 5, 8});
    c.patch = 4;
    const std::size_t rows = pick({2, 4, 6}), cols = pick({2, 4, 6});
    c.height = rows * c.patch;
    c.width = cols * c.patch;
    c.channels = pick({8, 16, 32});
    c.heads = pick({1, 2, 4});
    c.layers = pick({1, 2, 3});
    c.window.w1 = pick({1, 2});
    c.window.w2 = pick({1, 2});
    const std::size_t cells = c.window.w1 * c.window.w2;
    c.window.r = static_cast<double>(1 + rng() % cells) / static_cast<double>(cells);
    c.mix.gamma = 0.25;
    c.mix.scales = rng() % 2 ? std::vector<std::size_t>{1, 2} : std::vector<std::size_t>{1};
    c.mix.mode = rng() % 2 ? MixMode::continual : MixMode::separate;
    c.variant = all_variants()[rng() % all_variants().size()];
    try {
      c.validate();
    } catch (const ConfigError&) {
      continue;
    }
    const PairCounts pc = pair_interaction_count(c, seed + made);
    out.push_back({{"T", c.frames}, {"N", c.patches()}, {"D", c.channels}, {"L", c.layers}, {"heads", c.heads},
                   {"r", c.window.r}, {"S", c.mix.scales.size()}, {"variant", to_string(c.variant)},
                   {"closed_form", pc.closed_form}, {"measured", pc.measured}, {"match", pc.closed_form == pc.measured}});
    ++made;
  }
  return out;
}

// ------------------------------------------------------------------ runtime

// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("slope fit needs at least two points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double num = 0, den = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    num += dx * (std::log(y[i]) - my);
    den += dx * dx;
  }
  return num / den;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

struct RuntimeOptions {
  std::vector<std::size_t> frames{4, 8, 16, 32};
  std::size_t patches = 16;
  std::size_t repeats = 5;
  double min_seconds = 1e-4;  // below this a timing is inconclusive
  double stca_lo = 0.8, stca_hi = 1.3, full_min = 1.6;
};

inline bool release_build() {
#ifdef NDEBUG
  return true;
#else
  return false;
#endif
}

inline nlohmann::json bench_runtime(const EncoderConfig& base, const RuntimeOptions& opt = {}) {
  nlohmann::json series = nlohmann::json::object();
  nlohmann::json slopes = nlohmann::json::object();
  bool inconclusive = false;
  std::vector<double> xs;
  for (std::size_t t : opt.frames) xs.push_back(static_cast<double>(t));
  std::map<std::string, double> slope_of;
  for (Variant v : all_variants()) {
    EncoderConfig cfg = base;
    cfg.variant = v;
    cfg.height = cfg.width = side_for_patches(opt.patches, cfg.patch);
    const Parameters params = init_parameters(cfg, 0);
    nlohmann::json rows = nlohmann::json::array();
    std::vector<double> medians;
    for (std::size_t t : opt.frames) {
      cfg.frames = t;
      std::mt19937_64 rng(t);
      const Video video = Tensor::uniform({t, cfg.height, cfg.width, 3}, 0, 1, rng);
      std::vector<double> times;
      for (std::size_t rep = 0; rep < opt.repeats; ++rep) {
        const auto start = std::chrono::steady_clock::now();
        Tape tape(false);
        BoundParameters p(tape, params, false);
        encode_video(tape, video, p, cfg);
        times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
      }
      const double m = median(times);
      if (m < opt.min_seconds) inconclusive = true;
      medians.push_back(m);
      rows.push_back({{"T", t}, {"N", opt.patches}, {"median_seconds", m}, {"seconds", times}});
    }
    slope_of[to_string(v)] = loglog_slope(xs, medians);
    series[to_string(v)] = rows;
    slopes[to_string(v)] = slope_of[to_string(v)];
  }
  const bool stca_ok = slope_of["stca"] >= opt.stca_lo && slope_of["stca"] <= opt.stca_hi;
  const bool full_ok = slope_of["full_spacetime"] >= opt.full_min;
  return {{"kind", "runtime"},
          {"release_build", release_build()},
          {"repeats", opt.repeats},
          {"series", series},
          {"slopes", slopes},
          {"inconclusive", inconclusive},
          {"checks", {{"stca_slope_in_band", stca_ok}, {"full_spacetime_slope_min", full_ok}}},
          {"pass", stca_ok && full_ok}};
}

// ------------------------------------------------------------------ SVG

// Line chart of one numeric field against T, one polyline per variant,
// log-log axes.
inline std::string svg_chart(const std::string& title, const std::map<std::string, std::vector<std::pair<double, double>>>& lines) {
  const double w = 640, h = 400, ml = 60, mr = 160, mt = 40, mb = 50;
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& [_, pts] : lines)
    for (auto [x, y] : pts) {
      if (x <= 0 || y <= 0) continue;
      x0 = std::min(x0, std::log10(x));
      x1 = std::max(x1, std::log10(x));
      y0 = std::min(y0, std::log10(y));
      y1 = std::max(y1, std::log10(y));
    }
  if (x1 <= x0) x1 = x0 + 1;
  if (y1 <= y0) y1 = y0 + 1;
  auto px = [&](double x) { return ml + (std::log10(x) - x0) / (x1 - x0) * (w - ml - mr); };
  auto py = [&](double y) { return h - mb - (std::log10(y) - y0) / (y1 - y0) * (h - mt - mb); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << ml << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n"
     << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr << "\" y2=\"" << h - mb << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << h - mb << "\" stroke=\"black\"/>\n"
     << "<text x=\"" << (w - mr + ml) / 2 << "\" y=\"" << h - 12 << "\" font-family=\"sans-serif\" font-size=\"12\">T (log)</text>\n";
  std::size_t i = 0;
  for (const auto& [name, pts] : lines) {
    const char* c = colors[i % 5];
    os << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"2\" points=\"";
    for (auto [x, y] : pts)
      if (x > 0 && y > 0) os << px(x) << "," << py(y) << " ";
    os << "\"/>\n";
    for (auto [x, y] : pts)
      if (x > 0 && y > 0) os << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"3\" fill=\"" << c << "\"/>\n";
    os << "<text x=\"" << w - mr + 10 << "\" y=\"" << mt + 18 * static_cast<double>(i) << "\" fill=\"" << c
       << "\" font-family=\"sans-serif\" font-size=\"12\">" << name << "</text>\n";
    ++i;
  }
  os << "</svg>\n";
  return os.str();
}

inline std::string flops_svg(const nlohmann::json& report, std::size_t n) {
  std::map<std::string, std::vector<std::pair<double, double>>> lines;
  for (const auto& p : report.at("points")) {
    if (p.at("N").get<std::size_t>() != n) continue;
    for (const auto& [name, v] : p.at("variants").items())
      lines[name].push_back({p.at("T").get<double>(), v.at("closed_form").get<double>()});
  }
  return svg_chart("attention pairs vs T (N = " + std::to_string(n) + ")", lines);
}

inline std::string runtime_svg(const nlohmann::json& report) {
  std::map<std::string, std::vector<std::pair<double, double>>> lines;
  for (const auto& [name, rows] : report.at("series").items())
    for (const auto& r : rows) lines[name].push_back({r.at("T").get<double>(), r.at("median_seconds").get<double>()});
  return svg_chart("median forward time vs T", lines);
}

}  // namespace stdd
