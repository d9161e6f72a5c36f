#include "raf/losses.hpp"

#include <cmath>

namespace raf {

double reconstruction_loss(const Tensor& y, const Tensor& x, const MaskSequence& masks) {
  if (!y.same_shape(x))
    throw ArgumentError("reconstruction_loss: shape mismatch " + shape_string(y.shape()) +
                        " vs " + shape_string(x.shape()));
  if (y.rank() != 4)
    throw ArgumentError("reconstruction_loss expects TxHxWxC, got " + shape_string(y.shape()));
  const std::int64_t t_count = y.extent(0), h = y.extent(1), w = y.extent(2),
                     c = y.extent(3);
  if (static_cast<std::int64_t>(masks.frames.size()) != t_count)
    throw ArgumentError("reconstruction_loss: mask count differs from frame count");

  double hole_sum = 0.0, valid_sum = 0.0;
  std::int64_t hole_n = 0, valid_n = 0;
  const float* py = y.data();
  const float* px = x.data();
  for (std::int64_t t = 0; t < t_count; ++t) {
    const Mask& m = masks.frames[static_cast<std::size_t>(t)];
    if (m.height != h || m.width != w)
      throw ArgumentError("reconstruction_loss: mask resolution differs from frames");
    for (std::int64_t p = 0; p < h * w; ++p) {
      const std::int64_t base = (t * h * w + p) * c;
      double d = 0.0;
      for (std::int64_t ch = 0; ch < c; ++ch)
        d += std::abs(static_cast<double>(py[base + ch]) - static_cast<double>(px[base + ch]));
      if (m.bits[static_cast<std::size_t>(p)]) {
        hole_sum += d;
        hole_n += c;
      } else {
        valid_sum += d;
        valid_n += c;
      }
    }
  }
  if (hole_n == 0 || valid_n == 0)
    throw ArgumentError("reconstruction_loss: degenerate mask (needs at least one hole "
                        "and one valid pixel)");
  return hole_sum / static_cast<double>(hole_n) + valid_sum / static_cast<double>(valid_n);
}

LossReport adversarial_losses(const Tensor& d_fake, const Tensor& d_real,
                              double lambda_adv, double rec) {
  if (d_fake.size() == 0 || d_real.size() == 0)
    throw ArgumentError("adversarial_losses: empty score tensor");

  auto mean_of = [](const Tensor& t, auto&& f) {
    double acc = 0.0;
    for (float v : t.values()) acc += f(static_cast<double>(v));
    return acc / static_cast<double>(t.size());
  };
  auto relu = [](double v) { return v > 0.0 ? v : 0.0; };

  LossReport r;
  r.lambda_adv = lambda_adv;
  r.rec = rec;
  r.adv_d = mean_of(d_fake, [&](double v) { return relu(1.0 - v); }) +
            mean_of(d_real, [&](double v) { return relu(1.0 + v); });
  r.adv_g = -mean_of(d_fake, [](double v) { return v; });
  r.total = rec + lambda_adv * r.adv_g;
  return r;
}

}  // namespace raf
