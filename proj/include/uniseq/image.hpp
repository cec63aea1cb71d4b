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

#ifndef UNISEQ_IMAGE_HPP_
#define UNISEQ_IMAGE_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "uniseq/vocab.hpp"

namespace uniseq {

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kCanvasSize = 256;
inline constexpr int kCenterSize = 128;

/// Interleaved (row-major, channel-last) 8-bit raster with 1 or 3 channels.
struct ImageRaster {
  int height = 0;
  int width = 0;
  int channels = 3;
  std::vector<std::uint8_t> pixels;

  ImageRaster() = default;
  ImageRaster(int h, int w, int c, std::uint8_t fill = 0);

  std::uint8_t& at(int y, int x, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  bool empty() const { return height == 0 || width == 0; }
  void Validate() const;

  friend bool operator==(const ImageRaster&, const ImageRaster&) = default;
};

/// Bilinear resampling with half-pixel centers; same-size resize is exact.
ImageRaster ResizeBilinear(const ImageRaster& image, int height, int width);

/// Pixel window covered by a normalized box (floor/ceil at the edges).
ImageRaster CropToBox(const ImageRaster& image, const BoundingBox& box);

/// Axis-aligned central window of the given side.
ImageRaster CenterWindow(const ImageRaster& image, int side);

ImageRaster ToRgb(const ImageRaster& image);

struct PreprocessedImage {
  ImageRaster canvas;  // 256 x 256
  ImageRaster center;  // central 128 x 128 of the canvas
};

PreprocessedImage PreprocessImage(
    const ImageRaster& image,
    const std::optional<BoundingBox>& object_box = std::nullopt);

/// One square patch of an image grid. Masked patches carry no pixels.
struct ImagePatch {
  std::vector<std::uint8_t> pixels;
  int row = 0;
  int col = 0;
  bool masked = false;

  friend bool operator==(const ImagePatch&, const ImagePatch&) = default;
};

/// Raster-order patch grid; side lengths must be divisible by patch_size.
std::vector<ImagePatch> ExtractPatches(const ImageRaster& image,
                                       int patch_size);

/// Maps a patch's pixels to a discrete code in [0, size()).
class VisualCodebook {
 public:
  virtual ~VisualCodebook() = default;
  virtual int size() const = 0;
  virtual int Code(std::span<const std::uint8_t> patch_pixels) const = 0;
};

/// Deterministic surrogate: floor(mean / 256 * size), clamped.
class MeanIntensityCodebook final : public VisualCodebook {
 public:
  explicit MeanIntensityCodebook(int size) : size_(size) {}
  int size() const override { return size_; }
  int Code(std::span<const std::uint8_t> patch_pixels) const override;

 private:
  int size_;
};

/// Visual token ids for `region` in raster patch order. Uses the surrogate
/// codebook sized to the vocab's visual range unless one is supplied.
std::vector<TokenId> QuantizeImagePatches(
    const ImageRaster& region, const UnifiedVocab& vocab, int patch_size = 8,
    const VisualCodebook* codebook = nullptr);

std::vector<std::uint8_t> EncodePng(const ImageRaster& image);
ImageRaster DecodePng(std::span<const std::uint8_t> bytes);

std::string Base64Encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> Base64Decode(std::string_view text);

}  // namespace uniseq

#endif  // UNISEQ_IMAGE_HPP_
