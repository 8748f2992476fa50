#include <cstdio>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "aqua/checkpoint.hpp"
#include "aqua/config.hpp"
#include "aqua/dataset.hpp"
#include "aqua/image.hpp"
#include "aqua/rng.hpp"

namespace fs = std::filesystem;
using aqua::RgbImage8;
using aqua::Shape;
using aqua::Tensor;

namespace {

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("aqua_io_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  fs::path dir_;
};

RgbImage8 random_image(int h, int w, std::uint64_t seed) {
  RgbImage8 img(h, w);
  aqua::CounterRng rng(seed, "img");
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    img.pixels[i] = static_cast<std::uint8_t>(rng.below(i, 256));
  }
  return img;
}

}  // namespace

using PngIo = TempDir;
using CheckpointIo = TempDir;
using Manifest = TempDir;

TEST_F(PngIo, RoundTripIsLossless) {
  auto img = random_image(33, 47, 1);
  aqua::save_png(path("a.png"), img);
  auto back = aqua::load_png(path("a.png"));
  EXPECT_EQ(back, img);
}

TEST_F(PngIo, GrayscaleExpandsToThreeChannels) {
  std::vector<std::uint8_t> gray(64);
  for (std::size_t i = 0; i < gray.size(); ++i) gray[i] = static_cast<std::uint8_t>(4 * i);
  aqua::save_png_gray(path("g.png"), 8, 8, gray);
  auto img = aqua::load_png(path("g.png"));
  ASSERT_EQ(img.h, 8);
  ASSERT_EQ(img.w, 8);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      const std::uint8_t v = gray[static_cast<std::size_t>(y) * 8 + x];
      EXPECT_EQ(img.px(y, x)[0], v);
      EXPECT_EQ(img.px(y, x)[1], v);
      EXPECT_EQ(img.px(y, x)[2], v);
    }
  }
}

TEST_F(PngIo, TruncatedFileFailsCleanly) {
  auto img = random_image(32, 32, 2);
  aqua::save_png(path("t.png"), img);
  const auto full = fs::file_size(path("t.png"));
  fs::resize_file(path("t.png"), full / 2);
  EXPECT_THROW(aqua::load_png(path("t.png")), aqua::FormatError);
}

TEST_F(PngIo, MissingFileAndGarbageFail) {
  EXPECT_THROW(aqua::load_png(path("absent.png")), aqua::IoError);
  std::ofstream f(path("junk.png"), std::ios::binary);
  f << "this is not a png";
  f.close();
  EXPECT_THROW(aqua::load_png(path("junk.png")), aqua::FormatError);
}

TEST_F(PngIo, SaveIsDeterministic) {
  auto img = random_image(21, 19, 3);
  aqua::save_png(path("d1.png"), img);
  aqua::save_png(path("d2.png"), img);
  std::ifstream a(path("d1.png"), std::ios::binary), b(path("d2.png"), std::ios::binary);
  std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  EXPECT_EQ(sa, sb);
}

TEST(ModelRange, AffineSpotValues) {
  RgbImage8 img(1, 3);
  img.px(0, 0)[0] = 0;
  img.px(0, 1)[0] = 255;
  img.px(0, 2)[0] = 127;
  auto t = aqua::image_to_tensor<float>(img);
  EXPECT_FLOAT_EQ(t.at(0, 0, 0, 0), -1.0f);
  EXPECT_FLOAT_EQ(t.at(0, 0, 0, 1), 1.0f);
  EXPECT_NEAR(t.at(0, 0, 0, 2), -0.0039215686f, 1e-7);
}

TEST(ModelRange, RoundTripQuantizationBound) {
  auto img = random_image(16, 16, 4);
  auto t = aqua::image_to_tensor<float>(img);
  auto back = aqua::from_model_range(t);
  int worst = 0;
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    worst = std::max(worst, std::abs(int(img.pixels[i]) - int(back.pixels[i])));
  }
  EXPECT_LE(worst, 1);
}

TEST(ModelRange, OutOfRangeClamps) {
  Tensor<float> t(Shape{1, 3, 1, 1});
  t[0] = 1.7f;
  t[1] = -3.0f;
  t[2] = 0.0f;
  auto img = aqua::from_model_range(t);
  EXPECT_EQ(img.px(0, 0)[0], 255);
  EXPECT_EQ(img.px(0, 0)[1], 0);
  EXPECT_EQ(img.px(0, 0)[2], 128);  // (0+1)*127.5 = 127.5 rounds half-up
}

TEST(ModelRange, ResizePathMatchesManualChain) {
  auto img = random_image(20, 28, 5);
  auto direct = aqua::to_model_range(img, 16);
  ASSERT_EQ(direct.shape(), (Shape{1, 3, 16, 16}));
  // Manual: native float tensor in [0,255], bilinear, affine map.
  Tensor<float> native(Shape{1, 3, 20, 28});
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 20; ++y) {
      for (int x = 0; x < 28; ++x) native.at(0, c, y, x) = img.px(y, x)[c];
    }
  }
  auto resized = aqua::ops::bilinear_resize(native, 16, 16);
  for (std::int64_t i = 0; i < direct.numel(); ++i) {
    ASSERT_NEAR(direct[i], resized[i] / 127.5f - 1.0f, 1e-6);
  }
  EXPECT_THROW(aqua::to_model_range(img, 12), aqua::ContractError);
}

TEST(Padding, ReflectToMultipleRestoresByCrop) {
  auto x = Tensor<float>::uniform(Shape{1, 3, 100, 100}, 6, "x");
  auto padded = aqua::pad_reflect_to_multiple(x, 8);
  EXPECT_EQ(padded.shape(), (Shape{1, 3, 104, 104}));
  auto back = aqua::crop_top_left(padded, 100, 100);
  EXPECT_TRUE(back == x);
  // Reflection rule: row 100 mirrors row 98 (no edge repeat).
  for (int c = 0; c < 3; ++c) {
    for (int xx = 0; xx < 100; ++xx) {
      EXPECT_EQ(padded.at(0, c, 100, xx), x.at(0, c, 98, xx));
      EXPECT_EQ(padded.at(0, c, 103, xx), x.at(0, c, 95, xx));
    }
  }
}

TEST_F(CheckpointIo, RoundTripIsBitwise) {
  aqua::AquaNetConfig cfg;
  cfg.base_channels = 4;
  auto params = aqua::init_params<float>(cfg, 7);
  aqua::save_checkpoint(params, path("m.aqnt"));
  auto loaded = aqua::load_checkpoint(path("m.aqnt"), cfg);
  auto a = params.all();
  auto b = loaded.all();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i]->name, b[i]->name);
    EXPECT_TRUE(a[i]->value == b[i]->value) << a[i]->name;
  }
}

TEST_F(CheckpointIo, BadMagicRejected) {
  std::ofstream f(path("x.aqnt"), std::ios::binary);
  f << "XXXXsome bytes";
  f.close();
  EXPECT_THROW(aqua::read_checkpoint_raw(path("x.aqnt")), aqua::FormatError);
}

TEST_F(CheckpointIo, TruncationRejected) {
  aqua::AquaNetConfig cfg;
  cfg.base_channels = 4;
  auto params = aqua::init_params<float>(cfg, 8);
  aqua::save_checkpoint(params, path("m.aqnt"));
  fs::resize_file(path("m.aqnt"), fs::file_size(path("m.aqnt")) - 37);
  EXPECT_THROW(aqua::read_checkpoint_raw(path("m.aqnt")), aqua::FormatError);
}

TEST_F(CheckpointIo, WidthMismatchIsConfigIncompatibility) {
  aqua::AquaNetConfig small;
  small.base_channels = 4;
  auto params = aqua::init_params<float>(small, 9);
  aqua::save_checkpoint(params, path("m.aqnt"));
  aqua::AquaNetConfig big;
  big.base_channels = 8;
  EXPECT_THROW(aqua::load_checkpoint(path("m.aqnt"), big), aqua::ConfigError);
}

TEST_F(CheckpointIo, AblationNameSetMismatchListsNames) {
  aqua::AquaNetConfig base;
  base.base_channels = 4;
  base.enable_frequency = false;
  base.enable_illumination = false;
  auto params = aqua::init_params<float>(base, 10);
  aqua::save_checkpoint(params, path("base.aqnt"));
  aqua::AquaNetConfig full = base;
  full.enable_frequency = true;
  full.enable_illumination = true;
  try {
    aqua::load_checkpoint(path("base.aqnt"), full);
    FAIL() << "expected ConfigError";
  } catch (const aqua::ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("missing"), std::string::npos);
    EXPECT_NE(msg.find("freq.alpha"), std::string::npos);
  }
}

TEST_F(CheckpointIo, InferredConfigMatchesSaved) {
  aqua::AquaNetConfig cfg;
  cfg.base_channels = 6;
  cfg.enable_illumination = false;
  auto params = aqua::init_params<float>(cfg, 11);
  aqua::save_checkpoint(params, path("m.aqnt"));
  auto loaded = aqua::load_checkpoint_infer(path("m.aqnt"));
  EXPECT_EQ(loaded.config.base_channels, 6);
  EXPECT_TRUE(loaded.config.enable_frequency);
  EXPECT_FALSE(loaded.config.enable_illumination);
}

TEST_F(Manifest, PairedLayoutBuilds) {
  fs::create_directories(dir_ / "raw");
  fs::create_directories(dir_ / "reference");
  for (const char* name : {"b.png", "a.png"}) {
    aqua::save_png((dir_ / "raw" / name).string(), random_image(8, 8, 12));
    aqua::save_png((dir_ / "reference" / name).string(), random_image(8, 8, 13));
  }
  auto m = aqua::build_manifest(dir_.string());
  ASSERT_EQ(m.pairs.size(), 2u);
  EXPECT_TRUE(m.has_references);
  EXPECT_EQ(m.pairs[0].name, "a.png");  // sorted
  EXPECT_EQ(m.pairs[1].name, "b.png");
  EXPECT_TRUE(m.pairs[0].has_reference());
}

TEST_F(Manifest, MissingReferenceRejected) {
  fs::create_directories(dir_ / "raw");
  fs::create_directories(dir_ / "reference");
  aqua::save_png((dir_ / "raw" / "a.png").string(), random_image(8, 8, 14));
  EXPECT_THROW(aqua::build_manifest(dir_.string()), aqua::ManifestError);
}

TEST_F(Manifest, ExtraReferenceRejected) {
  fs::create_directories(dir_ / "raw");
  fs::create_directories(dir_ / "reference");
  aqua::save_png((dir_ / "raw" / "a.png").string(), random_image(8, 8, 15));
  aqua::save_png((dir_ / "reference" / "a.png").string(), random_image(8, 8, 16));
  aqua::save_png((dir_ / "reference" / "b.png").string(), random_image(8, 8, 17));
  EXPECT_THROW(aqua::build_manifest(dir_.string()), aqua::ManifestError);
}

TEST_F(Manifest, UnpairedLayoutAndMissingRoot) {
  fs::create_directories(dir_ / "raw");
  aqua::save_png((dir_ / "raw" / "only.png").string(), random_image(8, 8, 18));
  auto m = aqua::build_manifest(dir_.string());
  EXPECT_FALSE(m.has_references);
  ASSERT_EQ(m.pairs.size(), 1u);
  EXPECT_FALSE(m.pairs[0].has_reference());
  EXPECT_THROW(aqua::build_manifest((dir_ / "nope").string()), aqua::ManifestError);
}

TEST(RunConfigParse, DefaultsAndOverrides) {
  auto cfg = aqua::parse_run_config_text("");
  EXPECT_DOUBLE_EQ(cfg.train.lr, 0.001);
  EXPECT_EQ(cfg.train.batch, 8);
  EXPECT_EQ(cfg.train.epochs, 100);
  EXPECT_EQ(cfg.train.input_size, 128);
  EXPECT_EQ(cfg.train.loss, "l1");
  EXPECT_EQ(cfg.train.ablation, aqua::Ablation::kFull);
  EXPECT_EQ(cfg.train.base_channels, 19);

  auto cfg2 = aqua::parse_run_config_text(
      "# comment\n"
      "lr = 0.01\n"
      "batch=2\n"
      "epochs = 3\n"
      "ablation = base+freq\n"
      "seed = 42\n"
      "data = /tmp/ds\n"
      "out = /tmp/out\n");
  EXPECT_DOUBLE_EQ(cfg2.train.lr, 0.01);
  EXPECT_EQ(cfg2.train.batch, 2);
  EXPECT_EQ(cfg2.train.epochs, 3);
  EXPECT_EQ(cfg2.train.ablation, aqua::Ablation::kBaseFreq);
  EXPECT_EQ(cfg2.train.seed, 42u);
  EXPECT_EQ(cfg2.data, "/tmp/ds");
  EXPECT_EQ(cfg2.out, "/tmp/out");
}

TEST(RunConfigParse, RejectsUnknownAndMalformed) {
  EXPECT_THROW(aqua::parse_run_config_text("plumbus = 3\n"), aqua::ConfigError);
  EXPECT_THROW(aqua::parse_run_config_text("lr = fast\n"), aqua::ConfigError);
  EXPECT_THROW(aqua::parse_run_config_text("epochs\n"), aqua::ConfigError);
  EXPECT_THROW(aqua::parse_run_config_text("input_size = 100\n"), aqua::ConfigError);
  EXPECT_THROW(aqua::parse_run_config_text("ablation = everything\n"), aqua::ConfigError);
  EXPECT_THROW(aqua::parse_run_config_text("loss = l2\n"), aqua::ConfigError);
}

TEST(AblationNames, RoundTrip) {
  for (auto a : {aqua::Ablation::kBase, aqua::Ablation::kBaseFreq, aqua::Ablation::kBaseIllum,
                 aqua::Ablation::kFull}) {
    EXPECT_EQ(aqua::parse_ablation(aqua::ablation_name(a)), a);
  }
}
