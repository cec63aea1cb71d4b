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

#include <algorithm>
#include <array>
#include <cstdlib>
#include <random>

#include "uniseq/corpus.hpp"

namespace uniseq {
namespace {

struct Rgb {
  std::uint8_t r, g, b;
};

const std::array<Rgb, 4> kPalette = {
    Rgb{220, 40, 40}, Rgb{40, 200, 60}, Rgb{50, 90, 230}, Rgb{230, 210, 40}};

bool Inside(int shape, int dx, int dy, int radius) {
  switch (shape) {
    case 0:  // circle
      return dx * dx + dy * dy <= radius * radius;
    case 1:  // square
      return std::abs(dx) <= radius && std::abs(dy) <= radius;
    case 2:  // triangle, apex up
      return dy >= -radius && dy <= radius && 2 * std::abs(dx) <= dy + radius;
    default: {  // cross
      const int arm = std::max(1, radius / 3);
      return (std::abs(dx) <= arm && std::abs(dy) <= radius) ||
             (std::abs(dy) <= arm && std::abs(dx) <= radius);
    }
  }
}

struct DrawnShape {
  int shape = 0;
  int color = 0;
  BoundingBox box;
  bool left = true;
};

DrawnShape DrawRandomShape(ImageRaster& image, std::mt19937_64& rng) {
  const int side = image.width;
  std::uniform_int_distribution<int> pick_shape(0, 3);
  std::uniform_int_distribution<int> pick_color(0, 3);
  std::uniform_int_distribution<int> pick_radius(side * 12 / 64,
                                                 std::max(side * 20 / 64, 2));
  DrawnShape out;
  out.shape = pick_shape(rng);
  out.color = pick_color(rng);
  const int radius = pick_radius(rng);
  std::uniform_int_distribution<int> pick_center(radius, side - 1 - radius);
  const int cx = pick_center(rng);
  const int cy = pick_center(rng);
  const Rgb rgb = kPalette[out.color];

  int x_min = side, y_min = side, x_max = -1, y_max = -1;
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      if (!Inside(out.shape, x - cx, y - cy, radius)) continue;
      image.at(y, x, 0) = rgb.r;
      image.at(y, x, 1) = rgb.g;
      image.at(y, x, 2) = rgb.b;
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
      y_min = std::min(y_min, y);
      y_max = std::max(y_max, y);
    }
  }
  const double s = side;
  out.box = {x_min / s, y_min / s, (x_max + 1) / s, (y_max + 1) / s};
  out.left = 2 * cx < side;
  return out;
}

}  // namespace

const std::vector<std::string>& SyntheticShapes() {
  static const std::vector<std::string> kShapes = {"circle", "square",
                                                   "triangle", "cross"};
  return kShapes;
}

const std::vector<std::string>& SyntheticColors() {
  static const std::vector<std::string> kColors = {"red", "green", "blue",
                                                   "yellow"};
  return kColors;
}

std::vector<CorpusRecord> GenerateSyntheticCorpus(
    int n_records, std::uint64_t seed, const SyntheticOptions& options) {
  if (n_records < 0) throw CorpusError("record count must be nonnegative");
  if (options.tasks.empty()) throw CorpusError("no task kinds requested");
  if (options.image_size < 16) throw CorpusError("synthetic images too small");
  const auto& shapes = SyntheticShapes();
  const auto& colors = SyntheticColors();
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  std::vector<CorpusRecord> records;
  records.reserve(n_records);
  for (int i = 0; i < n_records; ++i) {
    const TaskKind kind = options.tasks[i % options.tasks.size()];
    ImageRaster image(options.image_size, options.image_size, 3, 0);
    const DrawnShape drawn = DrawRandomShape(image, rng);
    const std::string& shape = shapes[drawn.shape];
    const std::string& color = colors[drawn.color];
    const std::string side = drawn.left ? "left" : "right";

    CorpusRecord r;
    r.task = std::string(TaskName(kind));
    auto attach_image = [&] { r.image = Base64Encode(EncodePng(image)); };
    switch (kind) {
      case TaskKind::kMim:
        attach_image();
        break;
      case TaskKind::kMlm:
        r.text = "a " + color + " " + shape + " is drawn on the " + side +
                 " side of a black background";
        break;
      case TaskKind::kDetection:
        attach_image();
        r.objects = std::vector<DetectionObject>{{drawn.box, shape}};
        break;
      case TaskKind::kCaption:
        attach_image();
        r.text = "a " + color + " " + shape;
        break;
      case TaskKind::kVqa:
        attach_image();
        if (coin(rng)) {
          r.question = "what color is the shape?";
          r.answer = color;
        } else {
          r.question = "what shape is shown?";
          r.answer = shape;
        }
        break;
      case TaskKind::kClassification:
        attach_image();
        r.label = shape;
        break;
      case TaskKind::kSummarization:
        r.text = "the picture contains one " + color + " " + shape +
                 " placed near the " + side + " edge of a dark background";
        r.summary = color + " " + shape + " on the " + side;
        break;
      case TaskKind::kNli: {
        std::string other_color = color, other_shape = shape;
        if (coin(rng)) {
          std::uniform_int_distribution<int> pick(1, 3);
          if (coin(rng)) {
            other_color = colors[(drawn.color + pick(rng)) % 4];
          } else {
            other_shape = shapes[(drawn.shape + pick(rng)) % 4];
          }
        }
        r.premise = "a " + color + " " + shape + " is shown";
        r.hypothesis = "a " + other_color + " " + other_shape + " is shown";
        r.nli_label =
            (other_color == color && other_shape == shape) ? "yes" : "no";
        break;
      }
    }
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace uniseq
