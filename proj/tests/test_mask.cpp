#include <doctest.h>

#include <algorithm>
#include <queue>
#include <set>

#include "raf/mask.hpp"

using raf::Mask;

namespace {

Mask random_mask(int h, int w, double density, raf::Rng& rng) {
  Mask m(h, w);
  for (auto& b : m.bits) b = rng.next_double() < density ? 1 : 0;
  return m;
}

bool contains(const Mask& big, const Mask& small) {
  for (std::size_t i = 0; i < big.bits.size(); ++i)
    if (small.bits[i] && !big.bits[i]) return false;
  return true;
}

// Independent flood-fill oracle (BFS, 8-connected) for component boxes.
std::vector<raf::Rect> flood_boxes(const Mask& m) {
  std::vector<raf::Rect> out;
  std::vector<char> seen(m.bits.size(), 0);
  for (int r = 0; r < m.height; ++r)
    for (int c = 0; c < m.width; ++c) {
      if (!m.get(r, c) || seen[static_cast<std::size_t>(r) * m.width + c]) continue;
      int rmin = r, rmax = r, cmin = c, cmax = c;
      std::queue<std::pair<int, int>> q;
      q.push({r, c});
      seen[static_cast<std::size_t>(r) * m.width + c] = 1;
      while (!q.empty()) {
        auto [cr, cc] = q.front();
        q.pop();
        rmin = std::min(rmin, cr); rmax = std::max(rmax, cr);
        cmin = std::min(cmin, cc); cmax = std::max(cmax, cc);
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc) {
            const int nr = cr + dr, nc = cc + dc;
            if (nr < 0 || nr >= m.height || nc < 0 || nc >= m.width) continue;
            auto& s = seen[static_cast<std::size_t>(nr) * m.width + nc];
            if (m.get(nr, nc) && !s) {
              s = 1;
              q.push({nr, nc});
            }
          }
      }
      out.push_back({rmin, cmin, rmax - rmin + 1, cmax - cmin + 1});
    }
  std::sort(out.begin(), out.end(), [](const raf::Rect& a, const raf::Rect& b) {
    return std::pair(a.row, a.col) < std::pair(b.row, b.col);
  });
  return out;
}

// Binary erosion with a square structuring element (oracle helper).
Mask erode(const Mask& m, int size) {
  const int r0 = (size - 1) / 2;
  Mask out(m.height, m.width);
  for (int r = 0; r < m.height; ++r)
    for (int c = 0; c < m.width; ++c) {
      bool all = true;
      for (int dr = -r0; dr <= r0 && all; ++dr)
        for (int dc = -r0; dc <= r0 && all; ++dc) {
          const int nr = r + dr, nc = c + dc;
          if (nr < 0 || nr >= m.height || nc < 0 || nc >= m.width || !m.get(nr, nc))
            all = false;
        }
      out.set(r, c, all ? 1 : 0);
    }
  return out;
}

}  // namespace

TEST_CASE("dilate basics") {
  Mask m(7, 7);
  m.set(3, 3, 1);
  CHECK(raf::dilate(m, 3, 0) == m);

  const Mask once = raf::dilate(m, 3, 1);
  CHECK(once.foreground_count() == 9);
  for (int r = 2; r <= 4; ++r)
    for (int c = 2; c <= 4; ++c) CHECK(once.get(r, c) == 1);

  const Mask twice = raf::dilate(m, 3, 2);
  CHECK(twice.foreground_count() == 25);
  for (int r = 1; r <= 5; ++r)
    for (int c = 1; c <= 5; ++c) CHECK(twice.get(r, c) == 1);
  CHECK(twice == raf::dilate(once, 3, 1));

  CHECK_THROWS_AS(raf::dilate(m, 4, 1), raf::ArgumentError);
  CHECK_THROWS_AS(raf::dilate(m, 3, -1), raf::ArgumentError);
}

TEST_CASE("dilate is extensive and monotone in times") {
  raf::Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const Mask m = random_mask(17, 23, 0.08, rng);
    Mask prev = m;
    for (int times = 1; times <= 3; ++times) {
      const Mask d = raf::dilate(m, 3, times);
      CHECK(contains(d, m));
      CHECK(contains(d, prev));
      prev = d;
    }
  }
}

TEST_CASE("bounding_boxes") {
  Mask empty(5, 5);
  CHECK(raf::bounding_boxes(empty).empty());

  Mask single(6, 7);
  single.set(2, 4, 1);
  const auto boxes = raf::bounding_boxes(single);
  REQUIRE(boxes.size() == 1);
  CHECK(boxes[0] == raf::Rect{2, 4, 1, 1});

  Mask blocks(8, 8);
  for (int r = 1; r <= 2; ++r)
    for (int c = 1; c <= 2; ++c) blocks.set(r, c, 1);
  for (int r = 5; r <= 6; ++r)
    for (int c = 4; c <= 5; ++c) blocks.set(r, c, 1);
  CHECK(raf::bounding_boxes(blocks) == flood_boxes(blocks));
  CHECK(raf::bounding_boxes(blocks).size() == 2);

  // Diagonal touch merges under 8-connectivity.
  Mask diag(4, 4);
  diag.set(0, 0, 1);
  diag.set(1, 1, 1);
  CHECK(raf::bounding_boxes(diag).size() == 1);
  CHECK(raf::count_components(diag) == 1);

  raf::Rng rng(22);
  for (int trial = 0; trial < 25; ++trial) {
    const Mask m = random_mask(20, 30, 0.15, rng);
    CHECK(raf::bounding_boxes(m) == flood_boxes(m));
  }
}

TEST_CASE("create_wire_mask empty and deterministic") {
  raf::WireSpec spec;
  spec.num = 0;
  spec.len_range = {30, 120};
  raf::Rng r1(5);
  const Mask empty = raf::create_wire_mask(spec, 120, 160, r1);
  CHECK(empty.height == 120);
  CHECK(empty.width == 160);
  CHECK(empty.foreground_count() == 0);

  spec.num = 3;
  spec.len_range = {30, 120};
  spec.width_range = {1, 5};
  raf::Rng a(77), b(77);
  const Mask ma = raf::create_wire_mask(spec, 120, 160, a);
  const Mask mb = raf::create_wire_mask(spec, 120, 160, b);
  CHECK(ma == mb);
  CHECK(ma.foreground_count() > 0);
  for (auto bit : ma.bits) CHECK((bit == 0 || bit == 1));
}

TEST_CASE("create_wire_mask stroke geometry") {
  raf::WireSpec spec;
  spec.num = 3;
  spec.len_range = {40, 150};
  spec.width_range = {1, 5};
  spec.max_dilate_times = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    raf::Rng rng(seed);
    const Mask m = raf::create_wire_mask(spec, 160, 200, rng);
    CHECK(raf::count_components(m) <= 3);
  }

  // A single undilated wire of width <= 5 cannot survive 7x7 erosion.
  spec.num = 1;
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    raf::Rng rng(seed);
    const Mask m = raf::create_wire_mask(spec, 160, 200, rng);
    CHECK(erode(m, 7).foreground_count() == 0);
  }
}

TEST_CASE("create_wire_mask validates the spec") {
  raf::WireSpec spec;
  spec.width_range = {0, 3};
  raf::Rng rng(1);
  CHECK_THROWS_AS(raf::create_wire_mask(spec, 100, 100, rng), raf::ArgumentError);
  spec.width_range = {1, 3};
  spec.len_range = {10, 10000};
  CHECK_THROWS_AS(raf::create_wire_mask(spec, 100, 100, rng), raf::ArgumentError);
}

TEST_CASE("create_video_mask single frame") {
  Mask stamp(3, 4);
  for (auto& b : stamp.bits) b = 1;
  raf::Rng rng(9);
  const raf::MaskSequence seq = raf::create_video_mask(stamp, 20, 20, 1, 3, rng);
  REQUIRE(seq.frames.size() == 1);
  REQUIRE(seq.motion_log.size() == 1);
  CHECK(seq.motion_log[0] == std::pair{0, 0});
  CHECK(seq.frames[0].foreground_count() == stamp.foreground_count());
}

TEST_CASE("create_video_mask clipping only removes") {
  Mask stamp(5, 5);
  for (auto& b : stamp.bits) b = 1;
  raf::Rng rng(10);
  const raf::MaskSequence seq = raf::create_video_mask(stamp, 12, 12, 40, 4, rng);
  for (const Mask& f : seq.frames)
    CHECK(f.foreground_count() <= stamp.foreground_count());
}

TEST_CASE("create_video_mask unclipped frames are exact translates") {
  Mask stamp(4, 6);
  stamp.set(0, 0, 1);
  stamp.set(1, 2, 1);
  stamp.set(3, 5, 1);
  stamp.set(2, 1, 1);
  raf::Rng rng(11);
  const int len = 30;
  const raf::MaskSequence seq = raf::create_video_mask(stamp, 64, 64, len, 2, rng);
  REQUIRE(seq.frames.size() == len);

  // Track the cumulative displacement; whenever both endpoints kept all
  // foreground, the frame must equal frame 1 shifted by the running offset.
  int off_r = 0, off_c = 0;
  const auto count0 = seq.frames[0].foreground_count();
  for (int t = 1; t < len; ++t) {
    off_c += seq.motion_log[static_cast<std::size_t>(t)].first;
    off_r += seq.motion_log[static_cast<std::size_t>(t)].second;
    const Mask& f = seq.frames[static_cast<std::size_t>(t)];
    if (f.foreground_count() != count0 || count0 != stamp.foreground_count()) continue;
    for (int r = 0; r < f.height; ++r)
      for (int c = 0; c < f.width; ++c) {
        const int sr = r - off_r, sc = c - off_c;
        const std::uint8_t expect =
            (sr >= 0 && sr < f.height && sc >= 0 && sc < f.width)
                ? seq.frames[0].get(sr, sc)
                : 0;
        CHECK(f.get(r, c) == expect);
      }
  }
}

TEST_CASE("create_video_mask centroid displacement matches the motion log") {
  Mask stamp(3, 3);
  for (auto& b : stamp.bits) b = 1;
  raf::Rng rng(12);
  const raf::MaskSequence seq = raf::create_video_mask(stamp, 40, 40, 25, 2, rng);
  const auto n = stamp.foreground_count();
  auto coord_sums = [](const Mask& m) {
    std::int64_t sr = 0, sc = 0;
    for (int r = 0; r < m.height; ++r)
      for (int c = 0; c < m.width; ++c)
        if (m.get(r, c)) {
          sr += r;
          sc += c;
        }
    return std::pair{sr, sc};
  };
  for (std::size_t t = 1; t < seq.frames.size(); ++t) {
    if (seq.frames[t - 1].foreground_count() != n ||
        seq.frames[t].foreground_count() != n)
      continue;  // clipped; centroid contract does not apply
    const auto [pr, pc] = coord_sums(seq.frames[t - 1]);
    const auto [cr, cc] = coord_sums(seq.frames[t]);
    CHECK(cc - pc == n * seq.motion_log[t].first);
    CHECK(cr - pr == n * seq.motion_log[t].second);
  }
}

TEST_CASE("create_pp_mask coverage, connectivity, determinism") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    raf::Rng rng(seed);
    const Mask m = raf::create_pp_mask(120, 160, rng);
    const double coverage =
        static_cast<double>(m.foreground_count()) / (120.0 * 160.0);
    CHECK(coverage >= 0.05);
    CHECK(coverage <= 0.30);
    CHECK(raf::count_components(m) == 1);
  }
  raf::Rng a(7), b(7);
  CHECK(raf::create_pp_mask(100, 100, a) == raf::create_pp_mask(100, 100, b));
}
