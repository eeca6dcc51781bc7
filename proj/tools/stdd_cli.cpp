// stdd_cli: benchmarks, self-tests, encoding, zero-shot evaluation, knowledge
// graph construction and toy training.
//
// Exit codes: 0 success, 1 invariant failure, 2 configuration or usage error,
// 3 I/O error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "stdd/askg/http_client.hpp"
#include "stdd/stdd.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kInvariant = 1, kUsage = 2, kIo = 3 };

struct Common {
  std::string config_file;
  std::vector<std::string> sets;
  std::string report;
};

stdd::RunConfig load_config(const Common& c, stdd::RunConfig cfg = {}) {
  if (!c.config_file.empty()) stdd::apply_config_file(cfg, c.config_file);
  for (const auto& s : c.sets) stdd::apply_assignment(cfg, s);
  if (!c.report.empty()) cfg.out = c.report;
  cfg.validate();
  return cfg;
}

void write_file(const std::string& path, const std::string& text) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os) throw stdd::IoError("cannot open " + path + " for writing");
  os << text;
  if (!os) throw stdd::IoError("write failed: " + path);
}

void emit(const stdd::RunConfig& cfg, const json& report) {
  const std::string text = report.dump(2) + "\n";
  if (cfg.out.empty())
    std::cout << text;
  else
    write_file(cfg.out, text);
}

stdd::Parameters load_weights(const stdd::RunConfig& cfg) {
  if (cfg.weights.empty()) return stdd::init_parameters(cfg.encoder, cfg.seed);
  stdd::Parameters p = stdd::load_stdd(cfg.weights);
  const stdd::Parameters expect = stdd::init_parameters(cfg.encoder, 0);
  for (const auto& [name, t] : expect) {
    auto it = p.find(name);
    if (it == p.end()) throw stdd::IoError(cfg.weights + ": missing parameter '" + name + "'");
    if (it->second.shape() != t.shape())
      throw stdd::IoError(cfg.weights + ": parameter '" + name + "' has shape " + stdd::shape_str(it->second.shape()) +
                          ", expected " + stdd::shape_str(t.shape()));
  }
  return p;
}

int selftest(const Common& common, bool inject) {
  const stdd::RunConfig cfg = load_config(common);
  const auto checks = stdd::run_selftest(cfg.encoder, {inject, cfg.seed});
  const json report = stdd::to_json(checks);
  emit(cfg, report);
  for (const auto& c : checks)
    if (!c.passed) std::cerr << "FAILED " << c.name << ": " << c.detail << "\n";
  return report["pass"].get<bool>() ? kOk : kInvariant;
}

int bench_flops(const Common& common, const std::string& svg) {
  const stdd::RunConfig cfg = load_config(common);
  stdd::FlopsOptions opt;
  opt.seed = cfg.seed;
  const json report = stdd::bench_flops(cfg.encoder, opt);
  emit(cfg, report);
  if (!svg.empty()) write_file(svg, stdd::flops_svg(report, opt.patches.back()));
  return report["pass"].get<bool>() ? kOk : kInvariant;
}

int bench_runtime(const Common& common, const std::vector<std::size_t>& frames, std::size_t patches,
                  std::size_t repeats, const std::string& svg) {
  const stdd::RunConfig cfg = load_config(common);
  if (!stdd::release_build()) std::cerr << "warning: not a release build; timings are not representative\n";
  stdd::RuntimeOptions opt;
  opt.frames = frames;
  opt.patches = patches;
  opt.repeats = repeats;
  if (frames.size() < 2) throw stdd::ConfigError("need at least two frame counts", "frames");
  const json report = stdd::bench_runtime(cfg.encoder, opt);
  emit(cfg, report);
  if (!svg.empty()) write_file(svg, stdd::runtime_svg(report));
  if (report["inconclusive"].get<bool>()) {
    std::cerr << "warning: timings below resolution; slopes are inconclusive\n";
    return kOk;
  }
  return report["pass"].get<bool>() ? kOk : kInvariant;
}

int encode(const Common& common, const std::string& video_dir, const std::string& synthetic, const std::string& save) {
  const stdd::RunConfig cfg = load_config(common);
  const stdd::EncoderConfig& e = cfg.encoder;
  stdd::Video video;
  std::string id;
  if (!video_dir.empty()) {
    const stdd::Video src = stdd::read_frame_dir(video_dir);
    video = stdd::center_crop(stdd::select_frames(src, stdd::view_frame_indices(src.dim(0), e.frames, 0, 1)), e.height,
                              e.width);
    id = fs::path(video_dir).filename().string();
  } else {
    const auto cls = synthetic == "static_texture" ? stdd::SyntheticClass::static_texture : stdd::SyntheticClass::moving_square;
    if (synthetic != "static_texture" && synthetic != "moving_square")
      throw stdd::ConfigError("expected moving_square or static_texture, got '" + synthetic + "'", "synthetic");
    video = stdd::synthetic_video(cls, e.frames, e.height, e.width, cfg.seed);
    id = synthetic;
  }
  const stdd::Tensor z = stdd::encode_video(video, load_weights(cfg), e);
  json rows = json::array();
  for (std::size_t t = 0; t < z.dim(0); ++t) {
    const stdd::Tensor row = z.slice0(t);
    rows.push_back(row.data());
  }
  emit(cfg, {{"kind", "encode"}, {"video_id", id}, {"variant", stdd::to_string(e.variant)}, {"features", rows}});
  if (!save.empty()) stdd::save_stdd(save, {{"features", z}});
  return kOk;
}

int zeroshot(const Common& common, std::size_t prototypes, std::size_t threads) {
  const stdd::RunConfig cfg = load_config(common);
  stdd::ZeroshotSpec spec;
  spec.encoder = cfg.encoder;
  spec.temporal_views = cfg.temporal_views;
  spec.spatial_views = cfg.spatial_views;
  spec.logit_scale = cfg.loss.logit_scale;
  spec.threads = threads;
  const stdd::Parameters params = load_weights(cfg);
  const stdd::TextBank bank =
      cfg.bank.empty() ? stdd::prototype_bank(params, cfg.encoder, prototypes, cfg.seed) : stdd::load_text_bank(cfg.bank);
  const auto clips = cfg.videos.empty() ? stdd::synthetic_clips(spec, cfg.videos_per_class, cfg.seed)
                                        : stdd::load_clip_tree(cfg.videos, bank);
  emit(cfg, stdd::zeroshot_report(clips, params, bank, spec));
  return kOk;
}

std::vector<std::string> read_classes(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw stdd::IoError("cannot open class list " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(is, line)) {
    const std::string name = stdd::askg::normalize_name(line);
    if (!name.empty() && name.front() != '#') out.push_back(name);
  }
  if (out.empty()) throw stdd::ValidationError(path + ": no class names");
  return out;
}

int askg_build(const Common& common, const std::string& classes, const std::string& fixtures,
               const std::string& endpoint, const std::string& out, const std::string& cache, std::size_t k) {
  stdd::RunConfig cfg = load_config(common);
  if (fixtures.empty() == endpoint.empty()) {
    std::cerr << "askg build: exactly one of --fixtures or --endpoint is required\n";
    return kUsage;
  }
  std::unique_ptr<stdd::askg::LLMClient> client;
  if (!fixtures.empty())
    client = std::make_unique<stdd::askg::FixtureClient>(fixtures);
  else
    client = std::make_unique<stdd::askg::HTTPClient>(endpoint);
  json actions = json::array();
  bool all_valid = true;
  for (const auto& action : read_classes(classes)) {
    const stdd::askg::BuildResult r = stdd::askg::build_action(*client, action, k);
    const stdd::askg::ValidationReport v = stdd::askg::validate_graph(r.graph);
    const fs::path file = stdd::askg::write_graph(out, r.graph);
    if (!cache.empty()) stdd::askg::write_replay(cache, r);
    for (const auto& w : r.warnings) std::cerr << "warning: " << action << ": " << w << "\n";
    all_valid = all_valid && v.ok();
    actions.push_back({{"action", r.graph.action},
                       {"graph", file.string()},
                       {"objects", r.graph.objects.size()},
                       {"sub_actions", r.graph.sub_actions.size()},
                       {"triples", r.graph.triples.size()},
                       {"warnings", r.warnings},
                       {"validation", stdd::askg::to_json(v)}});
  }
  emit(cfg, {{"kind", "askg_build"}, {"actions", actions}, {"pass", all_valid}});
  return all_valid ? kOk : kInvariant;
}

int askg_prompts(const Common& common, const std::string& graph, const std::string& out) {
  stdd::RunConfig cfg = load_config(common);
  std::vector<fs::path> files;
  if (fs::is_directory(graph)) {
    for (const auto& e : fs::directory_iterator(graph))
      if (e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
  } else if (fs::is_regular_file(graph)) {
    files.push_back(graph);
  } else {
    throw stdd::IoError("graph path not found: " + graph);
  }
  if (files.empty()) throw stdd::IoError("no graph files in " + graph);
  json banks = json::array();
  for (const auto& f : files) {
    const stdd::askg::ActionSubgraph g = stdd::askg::read_graph(f);
    const stdd::askg::PromptBank bank = stdd::askg::triples_to_prompts(g);
    const fs::path target = fs::path(out) / (stdd::askg::slug(g.action) + ".prompts.json");
    write_file(target.string(), stdd::askg::to_json(bank).dump(2) + "\n");
    banks.push_back({{"action", g.action},
                     {"file", target.string()},
                     {"spatial", bank.spatial.size()},
                     {"temporal", bank.temporal.size()}});
  }
  emit(cfg, {{"kind", "askg_prompts"}, {"banks", banks}});
  return kOk;
}

int train_toy(const Common& common, const std::string& save) {
  stdd::RunConfig base;
  base.encoder = stdd::training_encoder_config();
  const stdd::RunConfig cfg = load_config(common, base);
  stdd::TrainSpec spec;
  spec.encoder = cfg.encoder;
  spec.loss = cfg.loss;
  spec.lr = cfg.lr;
  spec.steps = cfg.steps;
  spec.videos_per_class = cfg.videos_per_class;
  spec.seed = cfg.seed;
  stdd::Parameters trained;
  const stdd::TrainReport r = stdd::train_toy(spec, &trained);
  std::cerr << "trained " << spec.steps << " steps in " << r.seconds << " s\n";
  const bool pass = r.reduction() >= 0.5;
  emit(cfg, {{"kind", "train"},
             {"seed", cfg.seed},
             {"steps", spec.steps},
             {"ce", r.ce},
             {"total", r.total},
             {"initial_ce", r.initial_ce()},
             {"final_ce", r.final_ce()},
             {"reduction", r.reduction()},
             {"pass", pass}});
  if (!save.empty()) stdd::save_stdd(save, trained);
  return pass ? kOk : kInvariant;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Space-time cross attention toolkit"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--config", common.config_file, "key=value configuration file");
  app.add_option("--set", common.sets, "override one configuration key (key=value)")->allow_extra_args(false);
  app.add_option("--report", common.report, "write the JSON report here instead of stdout");
  app.fallthrough();

  bool inject = false;
  auto* st = app.add_subcommand("selftest", "run the built-in invariant checks");
  st->add_flag("--inject-wrong-plan", inject, "corrupt the mixing plan of the collapse check");

  std::string svg;
  auto* bf = app.add_subcommand("bench-flops", "attention pair counts against closed forms");
  bf->add_option("--svg", svg, "write a chart of counts vs T");

  std::vector<std::size_t> frames{4, 8, 16, 32};
  std::size_t patches = 16, repeats = 5;
  auto* br = app.add_subcommand("bench-runtime", "forward-pass wall time against T");
  br->add_option("--frames", frames, "frame counts")->delimiter(',');
  br->add_option("--patches", patches, "patches per frame (a square)");
  br->add_option("--repeats", repeats, "timed repeats per point")->check(CLI::PositiveNumber);
  br->add_option("--svg", svg, "write a chart of median time vs T");

  std::string video_dir, synthetic = "moving_square", save;
  auto* en = app.add_subcommand("encode", "encode one clip into per-frame features");
  en->add_option("--video", video_dir, "directory of raw frames");
  en->add_option("--synthetic", synthetic, "moving_square or static_texture");
  en->add_option("--save", save, "also write the features as an STDD file");

  std::size_t prototypes = 3, threads = 0;
  auto* zs = app.add_subcommand("zeroshot", "multi-view zero-shot classification");
  zs->add_option("--prototypes", prototypes, "clips per class for the default feature bank")->check(CLI::PositiveNumber);
  zs->add_option("--threads", threads, "worker threads (0 = all cores)");

  std::string classes, fixtures, endpoint, out = "graphs", cache, graph;
  std::size_t k = 7;
  auto* ak = app.add_subcommand("askg", "action knowledge graphs and prompts");
  ak->require_subcommand(1);
  auto* ab = ak->add_subcommand("build", "query the language model for each class");
  ab->add_option("--classes", classes, "one class name per line")->required();
  ab->add_option("--fixtures", fixtures, "directory of recorded responses");
  ab->add_option("--endpoint", endpoint, "chat-completions URL");
  ab->add_option("--out", out, "graph output directory");
  ab->add_option("--cache", cache, "record responses here for replay");
  ab->add_option("--k", k, "objects per action");
  auto* ap = ak->add_subcommand("prompts", "turn graphs into prompt banks");
  ap->add_option("--graph", graph, "graph file or directory")->required();
  ap->add_option("--out", out, "prompt bank output directory")->required();

  auto* tt = app.add_subcommand("train-toy", "gradient descent on synthetic two-class data");
  tt->add_option("--save", save, "write trained weights as an STDD file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (st->parsed()) return selftest(common, inject);
    if (bf->parsed()) return bench_flops(common, svg);
    if (br->parsed()) return bench_runtime(common, frames, patches, repeats, svg);
    if (en->parsed()) return encode(common, video_dir, synthetic, save);
    if (zs->parsed()) return zeroshot(common, prototypes, threads);
    if (ab->parsed()) return askg_build(common, classes, fixtures, endpoint, out, cache, k);
    if (ap->parsed()) return askg_prompts(common, graph, out);
    if (tt->parsed()) return train_toy(common, save);
  } catch (const stdd::ConfigError& e) {
    std::cerr << "configuration error [" << e.key() << "]: " << e.what() << "\n";
    return kUsage;
  } catch (const stdd::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const stdd::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const stdd::ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvariant;
  }
  return kUsage;
}
