#pragma once

// Plain-text run configuration: one "key = value" per line, '#' comments.

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stdd/alignment.hpp"
#include "stdd/encoder.hpp"

namespace stdd {

struct RunConfig {
  EncoderConfig encoder{};
  LossConfig loss{};
  std::uint64_t seed = 0;
  std::size_t temporal_views = 3;
  std::size_t spatial_views = 1;
  real lr = real(0.05);
  std::size_t steps = 50;
  std::size_t videos_per_class = 8;
  std::string weights;  // STDD parameter file; empty = seeded init
  std::string bank;     // text bank (.stdd or .json sidecar)
  std::string videos;   // directory of clip directories; empty = synthetic
  std::string out;      // report path; empty = stdout

  void set(const std::string& key, const std::string& value);
  std::vector<std::string> keys() const;
  void validate() const {
    encoder.validate();
    loss.validate();
    if (temporal_views == 0) throw ConfigError("need at least one temporal view", "temporal_views");
    if (spatial_views == 0) throw ConfigError("need at least one spatial view", "spatial_views");
    if (!(lr > 0)) throw ConfigError("learning rate must be positive", "lr");
    if (videos_per_class == 0) throw ConfigError("need at least one video per class", "videos_per_class");
  }
};

namespace detail {

inline std::string trim_ws(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

inline std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("expected a non-negative integer, got '" + v + "'", key);
  return out;
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("expected a number, got '" + v + "'", key);
  }
}

// "1/8" or "0.125"
inline double to_fraction(const std::string& key, const std::string& v) {
  const auto slash = v.find('/');
  if (slash == std::string::npos) return to_double(key, v);
  const double den = to_double(key, trim_ws(v.substr(slash + 1)));
  if (den == 0) throw ConfigError("zero denominator", key);
  return to_double(key, trim_ws(v.substr(0, slash))) / den;
}

inline std::vector<std::size_t> to_size_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim_ws(item);
    if (!item.empty() && item.front() == '+') item = item.substr(1);
    out.push_back(to_size(key, item));
  }
  if (out.empty()) throw ConfigError("empty list", key);
  return out;
}

template <class F>
auto rethrow_keyed(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    if (e.key() == key) throw;
    throw ConfigError(e.what(), key);
  }
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

inline const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> s = [] {
    std::map<std::string, Setter> m;
    auto size_field = [](std::size_t RunConfig::*f) {
      return [f](RunConfig& c, const std::string& k, const std::string& v) { c.*f = to_size(k, v); };
    };
    auto enc_size = [](std::size_t EncoderConfig::*f) {
      return [f](RunConfig& c, const std::string& k, const std::string& v) { c.encoder.*f = to_size(k, v); };
    };
    auto str_field = [](std::string RunConfig::*f) {
      return [f](RunConfig& c, const std::string&, const std::string& v) { c.*f = v; };
    };
    m["T"] = enc_size(&EncoderConfig::frames);
    m["H"] = enc_size(&EncoderConfig::height);
    m["W"] = enc_size(&EncoderConfig::width);
    m["P"] = enc_size(&EncoderConfig::patch);
    m["D"] = enc_size(&EncoderConfig::channels);
    m["L"] = enc_size(&EncoderConfig::layers);
    m["heads"] = enc_size(&EncoderConfig::heads);
    m["mlp_ratio"] = enc_size(&EncoderConfig::mlp_ratio);
    m["w1"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.encoder.window.w1 = to_size(k, v); };
    m["w2"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.encoder.window.w2 = to_size(k, v); };
    m["r"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.encoder.window.r = to_fraction(k, v); };
    m["scales"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.encoder.mix.scales = to_size_list(k, v); };
    m["gamma"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.encoder.mix.gamma = to_fraction(k, v); };
    m["mix_mode"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.encoder.mix.mode = rethrow_keyed(k, [&] { return mix_mode_from_string(v); });
    };
    m["boundary"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.encoder.boundary = rethrow_keyed(k, [&] { return boundary_from_string(v); });
    };
    m["mask_strategy"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.encoder.mask_strategy = rethrow_keyed(k, [&] { return mask_strategy_from_string(v); });
    };
    m["mask_seed"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.encoder.mask_seed = to_size(k, v); };
    m["variant"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.encoder.variant = rethrow_keyed(k, [&] { return variant_from_string(v); });
    };
    m["ln_eps"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.encoder.ln_eps = static_cast<real>(to_double(k, v));
    };
    m["lambda"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.loss.lambda_distill = static_cast<real>(to_double(k, v));
    };
    m["logit_scale"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.loss.logit_scale = static_cast<real>(to_double(k, v));
    };
    m["seed"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = to_size(k, v); };
    m["temporal_views"] = size_field(&RunConfig::temporal_views);
    m["spatial_views"] = size_field(&RunConfig::spatial_views);
    m["lr"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.lr = static_cast<real>(to_double(k, v)); };
    m["steps"] = size_field(&RunConfig::steps);
    m["videos_per_class"] = size_field(&RunConfig::videos_per_class);
    m["weights"] = str_field(&RunConfig::weights);
    m["bank"] = str_field(&RunConfig::bank);
    m["videos"] = str_field(&RunConfig::videos);
    m["out"] = str_field(&RunConfig::out);
    return m;
  }();
  return s;
}

}  // namespace detail

inline void RunConfig::set(const std::string& key, const std::string& value) {
  const auto& s = detail::setters();
  auto it = s.find(key);
  if (it == s.end()) throw ConfigError("unknown configuration key", key);
  it->second(*this, key, detail::trim_ws(value));
}

inline std::vector<std::string> RunConfig::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : detail::setters()) out.push_back(k);
  return out;
}

// "key=value" or "key = value"
inline void apply_assignment(RunConfig& cfg, const std::string& line) {
  const auto eq = line.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + line + "'", detail::trim_ws(line));
  cfg.set(detail::trim_ws(line.substr(0, eq)), line.substr(eq + 1));
}

inline void apply_config_text(RunConfig& cfg, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    if (detail::trim_ws(line).empty()) continue;
    apply_assignment(cfg, line);
  }
}

inline void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  apply_config_text(cfg, ss.str());
}

inline nlohmann::json to_json(const RunConfig& c) {
  const EncoderConfig& e = c.encoder;
  return {{"T", e.frames},
          {"H", e.height},
          {"W", e.width},
          {"P", e.patch},
          {"D", e.channels},
          {"L", e.layers},
          {"heads", e.heads},
          {"mlp_ratio", e.mlp_ratio},
          {"w1", e.window.w1},
          {"w2", e.window.w2},
          {"r", e.window.r},
          {"scales", e.mix.scales},
          {"gamma", e.mix.gamma},
          {"mix_mode", to_string(e.mix.mode)},
          {"boundary", to_string(e.boundary)},
          {"mask_strategy", to_string(e.mask_strategy)},
          {"mask_seed", e.mask_seed},
          {"variant", to_string(e.variant)},
          {"ln_eps", e.ln_eps},
          {"lambda", c.loss.lambda_distill},
          {"logit_scale", c.loss.logit_scale},
          {"seed", c.seed},
          {"temporal_views", c.temporal_views},
          {"spatial_views", c.spatial_views},
          {"lr", c.lr},
          {"steps", c.steps},
          {"videos_per_class", c.videos_per_class}};
}

}  // namespace stdd
