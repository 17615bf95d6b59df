/*
   Copyright 2026 The drnet Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

      http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "drnet/config.hpp"
#include "drnet/error.hpp"
#include "drnet/image_io.hpp"
#include "drnet/manifest.hpp"

namespace drnet {
namespace {

namespace fs = std::filesystem;

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           (std::string("drnet_io_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

TEST(Config, DefaultsAndOverrides) {
  const RunConfig c = parse_config("# desk run\nseed = 7\ntrain.dehaze_steps = 12  # short\n");
  EXPECT_EQ(c.dataset.seed, 7u);
  EXPECT_EQ(c.train.seed, 7u);
  EXPECT_EQ(c.train.dehaze_steps, 12);
  EXPECT_EQ(c.dataset.train_samples(), 256u);
  EXPECT_DOUBLE_EQ(c.train.adam.learning_rate, 2e-4);

  const RunConfig p = parse_config("scale = reference\n");
  EXPECT_EQ(p.dataset.train_scenes, 1299);
  EXPECT_EQ(p.dataset.width, 310);
  EXPECT_EQ(p.train.batch_size_dehaze, 16);
}

TEST(Config, ErrorsNameTheKeys) {
  try {
    parse_config("bogus = 1\ntrain.nope = 2\n", "x.cfg");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::config);
    const std::string m = e.what();
    EXPECT_NE(m.find("bogus"), std::string::npos);
    EXPECT_NE(m.find("train.nope"), std::string::npos);
  }
  EXPECT_THROW(parse_config("train.dehaze_steps = many\n"), Error);
  EXPECT_THROW(parse_config("scale = huge\n"), Error);
  EXPECT_THROW(parse_config("ssim.window = round\n"), Error);
  EXPECT_THROW(parse_config("no equals sign\n"), Error);
}

TEST(Config, FormatRoundTripAndHash) {
  RunConfig c = parse_config("seed = 3\nssim.window = gaussian\ntrain.learning_rate = 0.000123\n");
  const std::string text = format_config(c);
  EXPECT_EQ(format_config(parse_config(text)), text);
  EXPECT_EQ(config_hash(c.train), config_hash(parse_config(text).train));
  RunConfig d = c;
  d.train.dehaze_steps += 1;
  EXPECT_NE(config_hash(c.train), config_hash(d.train));
}

TEST_F(TempDir, PngAndPnmRoundTrip) {
  std::mt19937_64 rng(1);
  for (int bits : {8, 16}) {
    for (int channels : {1, 3}) {
      Image img;
      img.width = 5;
      img.height = 3;
      img.channels = channels;
      img.bit_depth = bits;
      std::uniform_int_distribution<int> u(0, img.max_value());
      for (int i = 0; i < 15 * channels; ++i) img.samples.push_back(static_cast<std::uint16_t>(u(rng)));
      const std::string ext = channels == 1 ? ".pgm" : ".ppm";
      for (const std::string& e : {std::string(".png"), ext}) {
        const fs::path p = dir_ / ("img" + std::to_string(bits) + std::to_string(channels) + e);
        write_image(p, img);
        const Image back = read_image(p);
        EXPECT_EQ(back.samples, img.samples) << p;
        EXPECT_EQ(back.bit_depth, bits);
        EXPECT_EQ(back.channels, channels);
      }
    }
  }
  EXPECT_THROW(read_image(dir_ / "absent.png"), Error);
  EXPECT_THROW(write_image(dir_ / "x.bmp", Image{1, 1, 1, 8, {0}}), Error);
}

TEST(ImageTensor, QuantizationRoundTrip) {
  Tensor<float> t(Shape{1, 3, 2, 2}, {0.0f, 0.5f, 1.0f, 1.5f, -0.2f, 0.25f, 0.75f, 0.1f,
                                      0.9f, 0.3f, 0.6f, 0.4f});
  const Image img = tensor_to_image(t);
  EXPECT_EQ(img.samples[0], 0);
  EXPECT_EQ(img.samples[3], 128);  // interleaved: pixel 1, channel 0
  EXPECT_EQ(img.samples[9], 255);  // 1.5 clamps
  const Tensor<float> back = image_to_tensor(img);
  EXPECT_EQ(back.shape(), t.shape());
  for (std::size_t i = 0; i < t.numel(); ++i) {
    EXPECT_NEAR(back[i], std::clamp(t[i], 0.0f, 1.0f), 0.5f / 255.0f + 1e-6f);
  }
  EXPECT_THROW(tensor_to_image(Tensor<float>(Shape{2, 3, 2, 2})), Error);
}

TEST_F(TempDir, ManifestRoundTripAndValidation) {
  Manifest m;
  m.config = "seed = 1\n";
  ManifestRecord r;
  r.split = "train";
  r.scene_id = 2;
  r.sample_id = 1;
  r.scene_seed = 3;
  r.clear = "c.png";
  r.hazy = "h.png";
  r.transmission = "t.png";
  r.depth = "d.png";
  r.airlight = 0.8;
  r.beta = 1.0;
  r.width = 4;
  r.height = 2;
  m.records.push_back(r);
  const Manifest back = manifest_from_json(manifest_to_json(m));
  EXPECT_EQ(manifest_to_json(back), manifest_to_json(m));
  EXPECT_EQ(back.records[0].hazy, "h.png");

  try {
    validate_manifest(m, dir_);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::manifest);
    EXPECT_NE(std::string(e.what()).find("c.png"), std::string::npos);
  }
  const Image rgb{4, 2, 3, 8, std::vector<std::uint16_t>(24, 100)};
  const Image gray{4, 2, 1, 16, std::vector<std::uint16_t>(8, 30000)};
  write_image(dir_ / "c.png", rgb);
  write_image(dir_ / "h.png", rgb);
  write_image(dir_ / "t.png", gray);
  write_image(dir_ / "d.png", gray);
  EXPECT_NO_THROW(validate_manifest(m, dir_));
  const auto data = load_dataset(m, dir_);
  ASSERT_EQ(data.train.size(), 1u);
  EXPECT_EQ(data.train[0].hazy.shape(), (Shape{1, 3, 2, 4}));

  m.records[0].airlight = 2.0;
  EXPECT_THROW(validate_manifest(m, dir_), Error);
  EXPECT_THROW(manifest_from_json("{\"records\": 3}"), Error);
  EXPECT_THROW(load_manifest(dir_ / "none.json"), Error);
}

}  // namespace
}  // namespace drnet
