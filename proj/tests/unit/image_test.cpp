// Copyright 2026 The uniseq Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "../oracle_values.hpp"
#include "uniseq/image.hpp"

namespace uniseq {
namespace {

ImageRaster Noise(int h, int w, int c, unsigned seed) {
  ImageRaster img(h, w, c);
  std::mt19937 rng(seed);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng() & 0xff);
  return img;
}

// Reference bilinear sample of one channel at output pixel (y, x), written
// from the half-pixel-center definition.
double ReferenceBilinear(const ImageRaster& in, int out_h, int out_w, int y, int x,
                         int c) {
  auto source = [](int i, int in_n, int out_n) {
    const double s = (i + 0.5) * in_n / out_n - 0.5;
    return std::min(std::max(s, 0.0), in_n - 1.0);
  };
  const double sy = source(y, in.height, out_h);
  const double sx = source(x, in.width, out_w);
  double acc = 0.0;
  for (int yy = 0; yy < in.height; ++yy) {
    for (int xx = 0; xx < in.width; ++xx) {
      const double ky = std::max(0.0, 1.0 - std::abs(sy - yy));
      const double kx = std::max(0.0, 1.0 - std::abs(sx - xx));
      acc += ky * kx * in.at(yy, xx, c);
    }
  }
  return acc;
}

TEST_CASE("canvas of a 256 image is the image") {
  const ImageRaster img = Noise(256, 256, 3, 1);
  const PreprocessedImage p = PreprocessImage(img);
  CHECK(p.canvas == img);
  CHECK(p.center.height == 128);
  CHECK(p.center.at(0, 0, 1) == img.at(64, 64, 1));
  CHECK(p.center.at(127, 127, 2) == img.at(191, 191, 2));
}

TEST_CASE("constant images stay constant") {
  const ImageRaster img(512, 512, 3, 77);
  const PreprocessedImage p = PreprocessImage(img);
  CHECK(p.canvas == ImageRaster(256, 256, 3, 77));
}

TEST_CASE("box crop keeps the top-left quadrant") {
  const ImageRaster img = Noise(512, 512, 3, 2);
  const PreprocessedImage p = PreprocessImage(img, BoundingBox{0, 0, 0.5, 0.5});
  bool same = true;
  for (int y = 0; y < 256; ++y) {
    for (int x = 0; x < 256; ++x) {
      for (int c = 0; c < 3; ++c) same = same && p.canvas.at(y, x, c) == img.at(y, x, c);
    }
  }
  CHECK(same);
  CHECK_THROWS_AS(PreprocessImage(img, BoundingBox{0.2, 0.2, 0.2, 0.6}), ImageError);
}

TEST_CASE("bilinear resize matches the reference interpolation") {
  const ImageRaster img = Noise(5, 7, 3, 3);
  for (auto [h, w] : {std::pair{12, 9}, std::pair{3, 4}, std::pair{10, 14}}) {
    const ImageRaster out = ResizeBilinear(img, h, w);
    double worst = 0.0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        for (int c = 0; c < 3; ++c) {
          const double ref = ReferenceBilinear(img, h, w, y, x, c);
          worst = std::max(worst, std::abs(out.at(y, x, c) - ref));
        }
      }
    }
    CHECK(worst <= 0.5 + 1e-9);
  }
}

TEST_CASE("surrogate codebook on uniform regions") {
  const UnifiedVocab v = UnifiedVocab::StandardPreset();
  const auto black = QuantizeImagePatches(ImageRaster(128, 128, 3, 0), v);
  const auto white = QuantizeImagePatches(ImageRaster(128, 128, 3, 255), v);
  const auto gray = QuantizeImagePatches(ImageRaster(128, 128, 3, 128), v);
  REQUIRE(black.size() == 256);
  CHECK(std::all_of(black.begin(), black.end(),
                    [&](TokenId t) { return t == v.visual_token(0); }));
  CHECK(std::all_of(white.begin(), white.end(), [&](TokenId t) {
    return t == v.visual_token(oracle::kWhiteCode);
  }));
  CHECK(std::all_of(gray.begin(), gray.end(), [&](TokenId t) {
    return t == v.visual_token(oracle::kGrayCode);
  }));
  CHECK_THROWS_AS(QuantizeImagePatches(ImageRaster(100, 100, 3, 0), v), ImageError);
}

TEST_CASE("patches come out in raster order") {
  const ImageRaster img = Noise(16, 24, 3, 4);
  const auto patches = ExtractPatches(img, 8);
  REQUIRE(patches.size() == 6);
  CHECK(patches[4].row == 1);
  CHECK(patches[4].col == 1);
  CHECK(patches[4].pixels.size() == 192);
  CHECK(patches[4].pixels[0] == img.at(8, 8, 0));
  CHECK(patches[4].pixels[191] == img.at(15, 15, 2));
}

TEST_CASE("png and base64 round trip") {
  for (int channels : {1, 3}) {
    const ImageRaster img = Noise(9, 13, channels, 5);
    const auto bytes = EncodePng(img);
    CHECK(DecodePng(Base64Decode(Base64Encode(bytes))) == img);
  }
  CHECK_THROWS_AS(Base64Decode("abc"), ImageError);
  const std::vector<std::uint8_t> junk{1, 2, 3, 4, 5, 6, 7, 8};
  CHECK_THROWS_AS(DecodePng(junk), ImageError);
}

}  // namespace
}  // namespace uniseq
