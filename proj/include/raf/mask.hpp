#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "raf/tensor.hpp"

namespace raf {

// Binary grid, 1 = masked/hole, 0 = valid.
struct Mask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> bits;  // row-major, values strictly in {0, 1}

  Mask() = default;
  Mask(int h, int w) : height(h), width(w), bits(static_cast<std::size_t>(h) * w, 0) {}

  std::uint8_t get(int r, int c) const { return bits[static_cast<std::size_t>(r) * width + c]; }
  void set(int r, int c, std::uint8_t v) { bits[static_cast<std::size_t>(r) * width + c] = v; }
  std::int64_t foreground_count() const;
  bool operator==(const Mask&) const = default;
};

struct MaskSequence {
  std::vector<Mask> frames;
  // Per-frame (dx, dy) displacement from the previous frame, dx = columns,
  // dy = rows; entry 0 is (0, 0).
  std::vector<std::pair<int, int>> motion_log;
};

// Wire generation parameters ("num" and "shape" of the generator inputs).
struct WireSpec {
  int num = 3;
  std::pair<int, int> len_range{50, 300};
  std::pair<int, int> width_range{1, 5};
  int dilate_kernel = 3;
  int max_dilate_times = 2;
  int max_move = 5;
  std::uint64_t seed = 0;
};

struct Rect {
  int row = 0, col = 0, height = 0, width = 0;
  bool operator==(const Rect&) const = default;
};

// Draws spec.num random wires (random segment -> random affine -> random
// translation, cropped to the canvas), dilates a random number of times in
// [0, max_dilate_times], and returns the tight crop around the foreground.
// An empty result (num = 0 or every wire skipped) comes back canvas-sized.
Mask create_wire_mask(const WireSpec& spec, int canvas_h, int canvas_w, Rng& rng);

// Places the stamp at a random position on a canvas_h x canvas_w frame, then
// translates it by uniform (dx, dy) with |dx|,|dy| <= max_move per frame,
// clipping at borders. Returns len frames plus the motion log.
MaskSequence create_video_mask(const Mask& stamp, int canvas_h, int canvas_w, int len,
                               int max_move, Rng& rng);

// One random filled simple polygon with 4-12 vertices covering 5-30% of the
// canvas.
Mask create_pp_mask(int canvas_h, int canvas_w, Rng& rng);

// Binary morphological dilation with an all-ones kernel_size^2 structuring
// element, iterated `times` times. kernel_size must be odd.
Mask dilate(const Mask& mask, int kernel_size, int times);

// Tight axis-aligned box per 8-connected foreground component, ordered by
// (row, col) of the top-left corner.
std::vector<Rect> bounding_boxes(const Mask& mask);

// 8-connected component count (used by generator checks).
int count_components(const Mask& mask);

}  // namespace raf
