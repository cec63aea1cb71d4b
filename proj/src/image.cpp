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

#include "uniseq/image.hpp"

#include <openssl/evp.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace uniseq {

ImageRaster::ImageRaster(int h, int w, int c, std::uint8_t fill)
    : height(h), width(w), channels(c),
      pixels(static_cast<std::size_t>(h) * w * c, fill) {}

void ImageRaster::Validate() const {
  if (height <= 0 || width <= 0) throw ImageError("empty image");
  if (channels != 1 && channels != 3) {
    throw ImageError("image must have 1 or 3 channels");
  }
  if (pixels.size() != static_cast<std::size_t>(height) * width * channels) {
    throw ImageError("pixel buffer does not match image shape");
  }
}

ImageRaster ResizeBilinear(const ImageRaster& image, int height, int width) {
  image.Validate();
  if (height <= 0 || width <= 0) throw ImageError("resize to empty shape");
  if (height == image.height && width == image.width) return image;
  ImageRaster out(height, width, image.channels);
  const double sy = static_cast<double>(image.height) / height;
  const double sx = static_cast<double>(image.width) / width;
  for (int y = 0; y < height; ++y) {
    const double fy =
        std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx =
          std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < image.channels; ++c) {
        const double top =
            image.at(y0, x0, c) * (1 - wx) + image.at(y0, x1, c) * wx;
        const double bottom =
            image.at(y1, x0, c) * (1 - wx) + image.at(y1, x1, c) * wx;
        const double v = top * (1 - wy) + bottom * wy;
        out.at(y, x, c) =
            static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
      }
    }
  }
  return out;
}

ImageRaster CropToBox(const ImageRaster& image, const BoundingBox& box) {
  image.Validate();
  box.Validate();
  if (box.x2 <= box.x1 || box.y2 <= box.y1) throw ImageError("zero-area crop box");
  const int x0 = static_cast<int>(std::floor(box.x1 * image.width));
  const int y0 = static_cast<int>(std::floor(box.y1 * image.height));
  const int x1 = static_cast<int>(std::ceil(box.x2 * image.width));
  const int y1 = static_cast<int>(std::ceil(box.y2 * image.height));
  if (x1 <= x0 || y1 <= y0) throw ImageError("zero-area crop box");
  ImageRaster out(y1 - y0, x1 - x0, image.channels);
  for (int y = y0; y < y1; ++y) {
    const auto* src = &image.pixels[(static_cast<std::size_t>(y) * image.width +
                                     x0) * image.channels];
    std::copy_n(src, static_cast<std::size_t>(x1 - x0) * image.channels,
                &out.pixels[static_cast<std::size_t>(y - y0) * out.width *
                            out.channels]);
  }
  return out;
}

ImageRaster CenterWindow(const ImageRaster& image, int side) {
  image.Validate();
  if (side > image.height || side > image.width) {
    throw ImageError("center window larger than image");
  }
  const int top = (image.height - side) / 2;
  const int left = (image.width - side) / 2;
  ImageRaster out(side, side, image.channels);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      for (int c = 0; c < image.channels; ++c) {
        out.at(y, x, c) = image.at(top + y, left + x, c);
      }
    }
  }
  return out;
}

ImageRaster ToRgb(const ImageRaster& image) {
  image.Validate();
  if (image.channels == 3) return image;
  ImageRaster out(image.height, image.width, 3);
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    std::fill_n(&out.pixels[i * 3], 3, image.pixels[i]);
  }
  return out;
}

PreprocessedImage PreprocessImage(const ImageRaster& image,
                                  const std::optional<BoundingBox>& object_box) {
  image.Validate();
  ImageRaster cropped = object_box ? CropToBox(image, *object_box) : image;
  PreprocessedImage out;
  out.canvas = ResizeBilinear(cropped, kCanvasSize, kCanvasSize);
  out.center = CenterWindow(out.canvas, kCenterSize);
  return out;
}

std::vector<ImagePatch> ExtractPatches(const ImageRaster& image,
                                       int patch_size) {
  image.Validate();
  if (patch_size <= 0 || image.height % patch_size != 0 ||
      image.width % patch_size != 0) {
    throw ImageError("image side not divisible by patch size " +
                     std::to_string(patch_size));
  }
  const int rows = image.height / patch_size;
  const int cols = image.width / patch_size;
  std::vector<ImagePatch> patches;
  patches.reserve(static_cast<std::size_t>(rows) * cols);
  const std::size_t row_bytes =
      static_cast<std::size_t>(patch_size) * image.channels;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      ImagePatch patch;
      patch.row = r;
      patch.col = c;
      patch.pixels.reserve(row_bytes * patch_size);
      for (int y = 0; y < patch_size; ++y) {
        const auto* src =
            &image.pixels[(static_cast<std::size_t>(r * patch_size + y) *
                               image.width +
                           c * patch_size) *
                          image.channels];
        patch.pixels.insert(patch.pixels.end(), src, src + row_bytes);
      }
      patches.push_back(std::move(patch));
    }
  }
  return patches;
}

int MeanIntensityCodebook::Code(
    std::span<const std::uint8_t> patch_pixels) const {
  if (patch_pixels.empty()) throw ImageError("empty patch");
  long sum = 0;
  for (auto p : patch_pixels) sum += p;
  // floor(mean / 256 * size) == floor(sum * size / (256 * count))
  const long long num = static_cast<long long>(sum) * size_;
  const long long den = 256LL * static_cast<long long>(patch_pixels.size());
  return static_cast<int>(std::min<long long>(num / den, size_ - 1));
}

std::vector<TokenId> QuantizeImagePatches(const ImageRaster& region,
                                          const UnifiedVocab& vocab,
                                          int patch_size,
                                          const VisualCodebook* codebook) {
  MeanIntensityCodebook fallback(vocab.visual_size());
  const VisualCodebook& book = codebook ? *codebook : fallback;
  if (book.size() > vocab.visual_size()) {
    throw ImageError("codebook larger than the visual id range");
  }
  std::vector<TokenId> ids;
  for (const auto& patch : ExtractPatches(region, patch_size)) {
    ids.push_back(vocab.visual_token(book.Code(patch.pixels)));
  }
  return ids;
}

namespace {

void PngWriteToVector(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

struct PngReadState {
  std::span<const std::uint8_t> bytes;
  std::size_t offset = 0;
};

void PngReadFromSpan(png_structp png, png_bytep data, png_size_t length) {
  auto* state = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (state->offset + length > state->bytes.size()) {
    png_error(png, "truncated PNG stream");
  }
  std::memcpy(data, state->bytes.data() + state->offset, length);
  state->offset += length;
}

[[noreturn]] void PngErrorHandler(png_structp, png_const_charp message) {
  throw ImageError(std::string("PNG: ") + message);
}

void PngWarningHandler(png_structp, png_const_charp) {}

}  // namespace

std::vector<std::uint8_t> EncodePng(const ImageRaster& image) {
  image.Validate();
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            PngErrorHandler, PngWarningHandler);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw ImageError("PNG: cannot allocate writer");
  }
  std::vector<std::uint8_t> out;
  try {
    png_set_write_fn(png, &out, PngWriteToVector, nullptr);
    png_set_IHDR(png, info, image.width, image.height, 8,
                 image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t stride =
        static_cast<std::size_t>(image.width) * image.channels;
    for (int y = 0; y < image.height; ++y) {
      png_write_row(png, const_cast<png_bytep>(&image.pixels[y * stride]));
    }
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
  return out;
}

ImageRaster DecodePng(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw ImageError("not a PNG stream");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                           PngErrorHandler, PngWarningHandler);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageError("PNG: cannot allocate reader");
  }
  PngReadState state{bytes, 0};
  ImageRaster image;
  try {
    png_set_read_fn(png, &state, PngReadFromSpan);
    png_read_info(png, info);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    png_read_update_info(png, info);
    const int channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) {
      throw ImageError("PNG: unsupported channel layout");
    }
    image = ImageRaster(static_cast<int>(png_get_image_height(png, info)),
                        static_cast<int>(png_get_image_width(png, info)),
                        channels);
    const std::size_t stride =
        static_cast<std::size_t>(image.width) * image.channels;
    std::vector<png_bytep> rows(image.height);
    for (int y = 0; y < image.height; ++y) rows[y] = &image.pixels[y * stride];
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

std::string Base64Encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                bytes.data(), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> Base64Decode(std::string_view text) {
  if (text.size() % 4 != 0) throw ImageError("base64 length not a multiple of 4");
  std::vector<std::uint8_t> out(3 * (text.size() / 4));
  const int n = EVP_DecodeBlock(
      out.data(), reinterpret_cast<const unsigned char*>(text.data()),
      static_cast<int>(text.size()));
  if (n < 0) throw ImageError("invalid base64 payload");
  // EVP_DecodeBlock keeps the zero bytes implied by '=' padding.
  std::size_t size = static_cast<std::size_t>(n);
  if (!text.empty() && text.back() == '=') --size;
  if (text.size() > 1 && text[text.size() - 2] == '=') --size;
  out.resize(size);
  return out;
}

}  // namespace uniseq
