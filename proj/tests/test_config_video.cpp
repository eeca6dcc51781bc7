#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "stdd/config.hpp"
#include "stdd/video.hpp"

using namespace stdd;

namespace {

std::string key_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "none";
}

std::filesystem::path scratch(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST(RunConfigTest, Defaults) {
  const RunConfig c;
  EXPECT_EQ(c.encoder.frames, 8u);
  EXPECT_EQ(c.encoder.window.r, 0.5);
  EXPECT_EQ(c.encoder.mix.gamma, 0.125);
  EXPECT_EQ(c.encoder.variant, Variant::stca);
  EXPECT_EQ(c.temporal_views, 3u);
  EXPECT_EQ(c.spatial_views, 1u);
  EXPECT_EQ(c.loss.lambda_distill, 1);
  EXPECT_EQ(c.loss.logit_scale, 100);
  EXPECT_NO_THROW(c.validate());
}

TEST(RunConfigTest, ParsesTextWithCommentsAndFractions) {
  RunConfig c;
  apply_config_text(c,
                    "# toy run\n"
                    "T = 4\n"
                    "gamma = 1/4   # quarter\n"
                    "scales = 1, +2\n"
                    "\n"
                    "mix_mode=separate\n"
                    "boundary = self_fill\n"
                    "variant = factorized\n"
                    "lambda = 0.5\n"
                    "out = report.json\n");
  EXPECT_EQ(c.encoder.frames, 4u);
  EXPECT_EQ(c.encoder.mix.gamma, 0.25);
  EXPECT_EQ(c.encoder.mix.scales, (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(c.encoder.mix.mode, MixMode::separate);
  EXPECT_EQ(c.encoder.boundary, Boundary::self_fill);
  EXPECT_EQ(c.encoder.variant, Variant::factorized);
  EXPECT_EQ(c.loss.lambda_distill, real(0.5));
  EXPECT_EQ(c.out, "report.json");
}

TEST(RunConfigTest, EveryKeyRoundTripsThroughJson) {
  const RunConfig c;
  const auto j = to_json(c);
  for (const auto& k : c.keys()) {
    if (k == "weights" || k == "bank" || k == "videos" || k == "out") continue;
    EXPECT_TRUE(j.contains(k)) << k;
  }
  RunConfig d;
  for (const auto& [k, v] : j.items()) d.set(k, v.is_array() ? "1,2" : v.is_string() ? v.get<std::string>() : v.dump());
  EXPECT_EQ(to_json(d), j);
}

TEST(RunConfigTest, ErrorsNameTheKey) {
  RunConfig c;
  EXPECT_EQ(key_of([&] { c.set("frames", "8"); }), "frames");
  EXPECT_EQ(key_of([&] { c.set("T", "eight"); }), "T");
  EXPECT_EQ(key_of([&] { c.set("T", "-1"); }), "T");
  EXPECT_EQ(key_of([&] { c.set("gamma", "1/0"); }), "gamma");
  EXPECT_EQ(key_of([&] { c.set("variant", "joint"); }), "variant");
  EXPECT_EQ(key_of([&] { c.set("mix_mode", "both"); }), "mix_mode");
  EXPECT_EQ(key_of([&] { c.set("boundary", "wrap"); }), "boundary");
  EXPECT_EQ(key_of([&] { c.set("scales", ""); }), "scales");
  EXPECT_EQ(key_of([&] { apply_config_text(c, "T 8\n"); }), "T 8");
  RunConfig bad;
  bad.set("r", "0.3");
  EXPECT_EQ(key_of([&] { bad.validate(); }), "r");
  bad = RunConfig{};
  bad.set("lambda", "-1");
  EXPECT_EQ(key_of([&] { bad.validate(); }), "lambda");
  bad = RunConfig{};
  bad.set("temporal_views", "0");
  EXPECT_EQ(key_of([&] { bad.validate(); }), "temporal_views");
  EXPECT_THROW(apply_config_file(c, "/nonexistent/run.cfg"), IoError);
}

TEST(RawFrames, WriteReadRoundTrip) {
  const auto dir = scratch("stdd_frames");
  std::mt19937_64 rng(1);
  Tensor frame = Tensor::uniform({5, 7, 3}, 0, 1, rng);
  for (auto& v : frame.data()) v = std::round(v * 255) / 255;
  std::filesystem::create_directories(dir);
  write_raw_frame((dir / "a.rgb").string(), frame);
  EXPECT_EQ(std::filesystem::file_size(dir / "a.rgb"), 8u + 5 * 7 * 3);
  EXPECT_LT(max_abs_diff(read_raw_frame((dir / "a.rgb").string()), frame), 1e-15);
  std::filesystem::remove_all(dir);
}

TEST(RawFrames, DirectoryOrderAndErrors) {
  const auto dir = scratch("stdd_frame_dir");
  const Video v = synthetic_video(SyntheticClass::moving_square, 12, 8, 8, 2);
  write_frame_dir(dir.string(), v);
  const Video back = read_frame_dir(dir.string());
  EXPECT_EQ(back.shape(), v.shape());
  EXPECT_LT(max_abs_diff(back, v), 0.5 / 255 + 1e-12);

  std::ofstream(dir / "frame_99999.rgb", std::ios::binary) << "abc";
  EXPECT_THROW(read_frame_dir(dir.string()), IoError);
  std::filesystem::remove(dir / "frame_99999.rgb");
  write_raw_frame((dir / "frame_99999.rgb").string(), Tensor({4, 4, 3}));
  EXPECT_THROW(read_frame_dir(dir.string()), IoError);
  std::filesystem::remove_all(dir);
  EXPECT_THROW(read_frame_dir(dir.string()), IoError);
  std::filesystem::create_directories(dir);
  EXPECT_THROW(read_frame_dir(dir.string()), IoError);
  std::filesystem::remove_all(dir);
}

TEST(Synthetic, ClassesDifferInMotion) {
  const Video sq = synthetic_video(SyntheticClass::moving_square, 4, 16, 16, 3);
  const Video tx = synthetic_video(SyntheticClass::static_texture, 4, 16, 16, 3);
  EXPECT_GT(max_abs_diff(sq.slice0(0), sq.slice0(1)), 0.5);
  EXPECT_EQ(max_abs_diff(tx.slice0(0), tx.slice0(3)), 0);
  EXPECT_EQ(max_abs_diff(synthetic_video(SyntheticClass::moving_square, 4, 16, 16, 3), sq), 0);
  EXPECT_GT(max_abs_diff(synthetic_video(SyntheticClass::moving_square, 4, 16, 16, 4), sq), 0);
  for (real x : sq.data()) {
    EXPECT_GE(x, 0);
    EXPECT_LE(x, 1);
  }
}

TEST(ViewSampling, UniformStrideWithPhase) {
  EXPECT_EQ(view_frame_indices(16, 8, 0, 1), (std::vector<std::size_t>{0, 2, 4, 6, 8, 10, 12, 14}));
  EXPECT_EQ(view_frame_indices(16, 8, 1, 2), (std::vector<std::size_t>{1, 3, 5, 7, 9, 11, 13, 15}));
  EXPECT_EQ(view_frame_indices(24, 8, 2, 3), (std::vector<std::size_t>{2, 5, 8, 11, 14, 17, 20, 23}));
  EXPECT_EQ(view_frame_indices(8, 8, 2, 3), (std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7}));
  EXPECT_EQ(view_frame_indices(1, 8, 2, 3), std::vector<std::size_t>(8, 0));
  EXPECT_EQ(view_frame_indices(4, 8, 0, 1), (std::vector<std::size_t>{0, 0, 1, 1, 2, 2, 3, 3}));
  EXPECT_THROW(view_frame_indices(0, 8, 0, 1), ValidationError);
  EXPECT_THROW(view_frame_indices(8, 8, 3, 3), ValidationError);
}

TEST(ViewSampling, PropertyIndicesInRangeAndNondecreasing) {
  for (std::size_t src = 1; src <= 40; ++src)
    for (std::size_t views = 1; views <= 4; ++views)
      for (std::size_t v = 0; v < views; ++v) {
        const auto idx = view_frame_indices(src, 8, v, views);
        ASSERT_EQ(idx.size(), 8u);
        for (std::size_t i = 0; i < 8; ++i) {
          EXPECT_LT(idx[i], src);
          if (i) EXPECT_LE(idx[i - 1], idx[i]);
        }
      }
}

TEST(Crops, CenterAndSpatialViews) {
  Tensor v({1, 4, 6, 3});
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 6; ++x) v[(y * 6 + x) * 3] = static_cast<real>(10 * y + x);
  const Video c = center_crop(v, 2, 2);
  EXPECT_EQ(c[0], 12);
  EXPECT_EQ(c[3 * 3], 23);
  EXPECT_EQ(max_abs_diff(spatial_crop(v, 2, 2, 0, 1), c), 0);
  EXPECT_EQ(spatial_crop(v, 2, 2, 0, 3)[0], 0);
  EXPECT_EQ(spatial_crop(v, 2, 2, 1, 3)[0], 12);
  EXPECT_EQ(spatial_crop(v, 2, 2, 2, 3)[0], 24);
  EXPECT_EQ(max_abs_diff(spatial_crop(v, 4, 6, 1, 2), v), 0);
  EXPECT_THROW(center_crop(v, 5, 2), DimensionError);
  EXPECT_THROW(spatial_crop(v, 2, 2, 3, 3), ValidationError);
  EXPECT_THROW(spatial_crop(v, 2, 7, 0, 2), DimensionError);
}
