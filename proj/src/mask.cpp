#include "raf/mask.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace raf {

namespace {

constexpr int kWireRetries = 10;

struct Vec2 {
  double x, y;
};

// Draws a straight stroke of the given width between two endpoints. Bresenham
// along the major axis with a perpendicular span fill; no anti-aliasing.
// Returns the number of pixels that landed on the canvas.
std::int64_t draw_thick_line(Mask& m, Vec2 p0, Vec2 p1, int width) {
  const double dx = p1.x - p0.x, dy = p1.y - p0.y;
  const double len = std::hypot(dx, dy);
  if (len < 1e-9) return 0;
  const double px = -dy / len, py = dx / len;  // unit perpendicular
  const int steps = static_cast<int>(std::ceil(len));
  const int lo = -((width - 1) / 2), hi = width / 2;
  std::int64_t drawn = 0;
  for (int s = 0; s <= steps; ++s) {
    const double t = static_cast<double>(s) / steps;
    const double cx = p0.x + t * dx, cy = p0.y + t * dy;
    for (int off = lo; off <= hi; ++off) {
      const int ix = static_cast<int>(std::lround(cx + off * px));
      const int iy = static_cast<int>(std::lround(cy + off * py));
      if (iy < 0 || iy >= m.height || ix < 0 || ix >= m.width) continue;
      if (!m.get(iy, ix)) {
        m.set(iy, ix, 1);
        ++drawn;
      }
    }
  }
  return drawn;
}

Rect foreground_bbox(const Mask& m) {
  int rmin = m.height, rmax = -1, cmin = m.width, cmax = -1;
  for (int r = 0; r < m.height; ++r)
    for (int c = 0; c < m.width; ++c)
      if (m.get(r, c)) {
        rmin = std::min(rmin, r);
        rmax = std::max(rmax, r);
        cmin = std::min(cmin, c);
        cmax = std::max(cmax, c);
      }
  if (rmax < 0) return Rect{0, 0, 0, 0};
  return Rect{rmin, cmin, rmax - rmin + 1, cmax - cmin + 1};
}

Mask crop(const Mask& m, const Rect& r) {
  Mask out(r.height, r.width);
  for (int i = 0; i < r.height; ++i)
    for (int j = 0; j < r.width; ++j) out.set(i, j, m.get(r.row + i, r.col + j));
  return out;
}

// OR-paste of the stamp at (top, left); parts outside the canvas are dropped.
void paste(Mask& canvas, const Mask& stamp, int top, int left) {
  const int r0 = std::max(0, top), r1 = std::min(canvas.height, top + stamp.height);
  const int c0 = std::max(0, left), c1 = std::min(canvas.width, left + stamp.width);
  for (int r = r0; r < r1; ++r)
    for (int c = c0; c < c1; ++c)
      if (stamp.get(r - top, c - left)) canvas.set(r, c, 1);
}

}  // namespace

std::int64_t Mask::foreground_count() const {
  std::int64_t n = 0;
  for (std::uint8_t b : bits) n += b;
  return n;
}

Mask create_wire_mask(const WireSpec& spec, int canvas_h, int canvas_w, Rng& rng) {
  if (canvas_h < 1 || canvas_w < 1)
    throw ArgumentError("create_wire_mask: canvas extents must be positive");
  if (spec.num < 0) throw ArgumentError("create_wire_mask: num must be >= 0");
  if (spec.width_range.first < 1)
    throw ArgumentError("create_wire_mask: width_range.min must be >= 1");
  const double diag = std::hypot(canvas_h, canvas_w);
  if (spec.len_range.second > diag)
    throw ArgumentError("create_wire_mask: len_range.max exceeds the frame diagonal");

  Mask canvas(canvas_h, canvas_w);
  for (int wire = 0; wire < spec.num; ++wire) {
    for (int attempt = 0; attempt < kWireRetries; ++attempt) {
      const auto len = static_cast<double>(
          rng.next_int(spec.len_range.first, spec.len_range.second));
      const int width = static_cast<int>(
          rng.next_int(spec.width_range.first, spec.width_range.second));
      const double theta = rng.next_real(0.0, 2.0 * std::numbers::pi);
      const double shear = rng.next_real(-0.3, 0.3);
      const double scale = rng.next_real(0.7, 1.3);

      // Segment (-len/2, 0) .. (len/2, 0) through scale, shear-in-x, rotation.
      const double ct = std::cos(theta), st = std::sin(theta);
      auto map = [&](double x, double y) {
        const double sx = scale * x + shear * scale * y;
        const double sy = scale * y;
        return Vec2{ct * sx - st * sy, st * sx + ct * sy};
      };
      Vec2 a = map(-len / 2.0, 0.0), b = map(len / 2.0, 0.0);

      const double tx = rng.next_real(0.0, static_cast<double>(canvas_w));
      const double ty = rng.next_real(0.0, static_cast<double>(canvas_h));
      a.x += tx; a.y += ty; b.x += tx; b.y += ty;

      const int eff_width = std::max(1, static_cast<int>(std::lround(scale * width)));
      if (draw_thick_line(canvas, a, b, eff_width) > 0) break;
    }
  }

  // The drawing canvas already sits at the target resolution, so the resize
  // step of the generator is the identity here.
  if (spec.max_dilate_times > 0) {
    const int times = static_cast<int>(rng.next_int(0, spec.max_dilate_times));
    canvas = dilate(canvas, spec.dilate_kernel, times);
  }

  const Rect box = foreground_bbox(canvas);
  if (box.height == 0) return canvas;  // nothing drawn; keep canvas-sized zeros
  return crop(canvas, box);
}

MaskSequence create_video_mask(const Mask& stamp, int canvas_h, int canvas_w, int len,
                               int max_move, Rng& rng) {
  if (len < 1) throw ArgumentError("create_video_mask: len must be >= 1");
  if (max_move < 0) throw ArgumentError("create_video_mask: max_move must be >= 0");

  MaskSequence seq;
  seq.frames.reserve(static_cast<std::size_t>(len));
  seq.motion_log.reserve(static_cast<std::size_t>(len));

  int top = static_cast<int>(rng.next_int(0, std::max(0, canvas_h - stamp.height)));
  int left = static_cast<int>(rng.next_int(0, std::max(0, canvas_w - stamp.width)));
  for (int f = 0; f < len; ++f) {
    int dx = 0, dy = 0;
    if (f > 0) {
      dx = static_cast<int>(rng.next_int(-max_move, max_move));
      dy = static_cast<int>(rng.next_int(-max_move, max_move));
      left += dx;
      top += dy;
    }
    Mask frame(canvas_h, canvas_w);
    paste(frame, stamp, top, left);
    seq.frames.push_back(std::move(frame));
    seq.motion_log.emplace_back(dx, dy);
  }
  return seq;
}

Mask create_pp_mask(int canvas_h, int canvas_w, Rng& rng) {
  if (canvas_h < 1 || canvas_w < 1)
    throw ArgumentError("create_pp_mask: canvas extents must be positive");
  const double min_dim = std::min(canvas_h, canvas_w);
  const double area = static_cast<double>(canvas_h) * canvas_w;

  Mask mask(canvas_h, canvas_w);
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::fill(mask.bits.begin(), mask.bits.end(), 0);
    const int nv = static_cast<int>(rng.next_int(4, 12));
    const double cx = rng.next_real(0.3, 0.7) * canvas_w;
    const double cy = rng.next_real(0.3, 0.7) * canvas_h;

    // Star-shaped polygon: strictly increasing angles keep it simple.
    std::vector<double> xs(nv), ys(nv);
    for (int i = 0; i < nv; ++i) {
      const double base = 2.0 * std::numbers::pi * i / nv;
      const double ang = base + rng.next_real(0.05, 0.95) * (2.0 * std::numbers::pi / nv);
      const double rad = rng.next_real(0.15, 0.40) * min_dim;
      xs[static_cast<std::size_t>(i)] = cx + rad * std::cos(ang);
      ys[static_cast<std::size_t>(i)] = cy + rad * std::sin(ang);
    }

    // Even-odd scanline fill against the canvas.
    for (int r = 0; r < canvas_h; ++r) {
      const double y = r + 0.5;
      std::vector<double> crossings;
      for (int i = 0; i < nv; ++i) {
        const int j = (i + 1) % nv;
        const double y0 = ys[static_cast<std::size_t>(i)], y1 = ys[static_cast<std::size_t>(j)];
        if ((y0 <= y) == (y1 <= y)) continue;
        const double t = (y - y0) / (y1 - y0);
        crossings.push_back(xs[static_cast<std::size_t>(i)] +
                            t * (xs[static_cast<std::size_t>(j)] - xs[static_cast<std::size_t>(i)]));
      }
      std::sort(crossings.begin(), crossings.end());
      for (std::size_t s = 0; s + 1 < crossings.size(); s += 2) {
        const int c0 = std::max(0, static_cast<int>(std::ceil(crossings[s] - 0.5)));
        const int c1 = std::min(canvas_w - 1, static_cast<int>(std::floor(crossings[s + 1] - 0.5)));
        for (int c = c0; c <= c1; ++c) mask.set(r, c, 1);
      }
    }

    const double coverage = static_cast<double>(mask.foreground_count()) / area;
    if (coverage >= 0.05 && coverage <= 0.30) break;
  }
  return mask;
}

Mask dilate(const Mask& mask, int kernel_size, int times) {
  if (kernel_size < 1 || kernel_size % 2 == 0)
    throw ArgumentError("dilate: kernel size must be odd and >= 1, got " +
                        std::to_string(kernel_size));
  if (times < 0) throw ArgumentError("dilate: times must be >= 0");

  const int radius = (kernel_size - 1) / 2;
  Mask cur = mask;
  for (int it = 0; it < times; ++it) {
    // Separable max filter: horizontal pass, then vertical.
    Mask tmp(cur.height, cur.width);
    for (int r = 0; r < cur.height; ++r)
      for (int c = 0; c < cur.width; ++c) {
        std::uint8_t v = 0;
        for (int d = -radius; d <= radius && !v; ++d) {
          const int cc = c + d;
          if (cc >= 0 && cc < cur.width) v = cur.get(r, cc);
        }
        tmp.set(r, c, v);
      }
    Mask next(cur.height, cur.width);
    for (int r = 0; r < cur.height; ++r)
      for (int c = 0; c < cur.width; ++c) {
        std::uint8_t v = 0;
        for (int d = -radius; d <= radius && !v; ++d) {
          const int rr = r + d;
          if (rr >= 0 && rr < cur.height) v = tmp.get(rr, c);
        }
        next.set(r, c, v);
      }
    cur = std::move(next);
  }
  return cur;
}

namespace {

// Flood-fill labeling over 8-connectivity; returns per-component bboxes in
// first-encounter (row-major scan) order.
std::vector<Rect> label_components(const Mask& mask) {
  std::vector<Rect> boxes;
  std::vector<std::uint8_t> seen(mask.bits.size(), 0);
  std::vector<std::pair<int, int>> stack;
  for (int r = 0; r < mask.height; ++r)
    for (int c = 0; c < mask.width; ++c) {
      const std::size_t root = static_cast<std::size_t>(r) * mask.width + c;
      if (!mask.bits[root] || seen[root]) continue;
      Rect box{r, c, 1, 1};
      int rmin = r, rmax = r, cmin = c, cmax = c;
      stack.assign(1, {r, c});
      seen[root] = 1;
      while (!stack.empty()) {
        auto [cr, cc] = stack.back();
        stack.pop_back();
        rmin = std::min(rmin, cr);
        rmax = std::max(rmax, cr);
        cmin = std::min(cmin, cc);
        cmax = std::max(cmax, cc);
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc) {
            if (!dr && !dc) continue;
            const int nr = cr + dr, nc = cc + dc;
            if (nr < 0 || nr >= mask.height || nc < 0 || nc >= mask.width) continue;
            const std::size_t ni = static_cast<std::size_t>(nr) * mask.width + nc;
            if (mask.bits[ni] && !seen[ni]) {
              seen[ni] = 1;
              stack.emplace_back(nr, nc);
            }
          }
      }
      box = Rect{rmin, cmin, rmax - rmin + 1, cmax - cmin + 1};
      boxes.push_back(box);
    }
  return boxes;
}

}  // namespace

std::vector<Rect> bounding_boxes(const Mask& mask) {
  std::vector<Rect> boxes = label_components(mask);
  std::sort(boxes.begin(), boxes.end(), [](const Rect& a, const Rect& b) {
    return std::pair(a.row, a.col) < std::pair(b.row, b.col);
  });
  return boxes;
}

int count_components(const Mask& mask) {
  return static_cast<int>(label_components(mask).size());
}

}  // namespace raf
