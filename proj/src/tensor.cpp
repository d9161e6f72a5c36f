#include "raf/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace raf {

namespace {

std::int64_t checked_volume(const std::vector<std::int64_t>& shape) {
  if (shape.empty()) throw ArgumentError("tensor shape must have rank >= 1");
  std::int64_t n = 1;
  for (std::int64_t e : shape) {
    if (e < 1) throw ArgumentError("tensor extents must be >= 1, got " + shape_string(shape));
    n *= e;
  }
  return n;
}

}  // namespace

std::string shape_string(const std::vector<std::int64_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += " x ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(std::vector<std::int64_t> shape) : shape_(std::move(shape)) {
  data_.assign(static_cast<std::size_t>(checked_volume(shape_)), 0.0f);
}

Tensor::Tensor(std::vector<std::int64_t> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (checked_volume(shape_) != static_cast<std::int64_t>(data_.size()))
    throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_string(shape_));
}

Tensor Tensor::full(std::vector<std::int64_t> shape, float value) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

std::int64_t Tensor::extent(std::int64_t axis) const {
  if (axis < 0 || axis >= rank())
    throw ArgumentError("axis " + std::to_string(axis) + " out of range for " + shape_string(shape_));
  return shape_[static_cast<std::size_t>(axis)];
}

std::int64_t Tensor::flat_index(std::initializer_list<std::int64_t> idx) const {
  if (static_cast<std::int64_t>(idx.size()) != rank())
    throw ArgumentError("expected " + std::to_string(rank()) + " indices, got " +
                        std::to_string(idx.size()));
  std::int64_t flat = 0;
  std::int64_t axis = 0;
  for (std::int64_t i : idx) {
    const std::int64_t e = shape_[static_cast<std::size_t>(axis)];
    if (i < 0 || i >= e)
      throw ArgumentError("index " + std::to_string(i) + " out of bounds for axis " +
                          std::to_string(axis) + " of " + shape_string(shape_));
    flat = flat * e + i;
    ++axis;
  }
  return flat;
}

float Tensor::at(std::initializer_list<std::int64_t> idx) const {
  return data_[static_cast<std::size_t>(flat_index(idx))];
}

float& Tensor::at(std::initializer_list<std::int64_t> idx) {
  return data_[static_cast<std::size_t>(flat_index(idx))];
}

Tensor Tensor::reshaped(std::vector<std::int64_t> new_shape) const& {
  if (checked_volume(new_shape) != size())
    throw DimensionError("cannot reshape " + shape_string(shape_) + " to " +
                         shape_string(new_shape));
  return Tensor(std::move(new_shape), data_);
}

Tensor Tensor::reshaped(std::vector<std::int64_t> new_shape) && {
  if (checked_volume(new_shape) != size())
    throw DimensionError("cannot reshape " + shape_string(shape_) + " to " +
                         shape_string(new_shape));
  return Tensor(std::move(new_shape), std::move(data_));
}

std::uint64_t Rng::next_u64() {
  state_ += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

float Rng::next_float() {
  return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f;
}

double Rng::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::int64_t Rng::next_int(std::int64_t lo, std::int64_t hi) {
  if (lo > hi) throw ArgumentError("next_int: empty range [" + std::to_string(lo) + ", " +
                                   std::to_string(hi) + "]");
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1u;
  if (span == 0) return static_cast<std::int64_t>(next_u64());  // full-width range
  const std::uint64_t v = static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(next_u64()) * span) >> 64);
  return lo + static_cast<std::int64_t>(v);
}

double Rng::next_real(double lo, double hi) {
  return lo + (hi - lo) * next_double();
}

namespace detail {

using MatF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void gemm(const float* a, const float* b, float* c, std::int64_t m, std::int64_t p,
          std::int64_t q) {
  Eigen::Map<const MatF> ma(a, m, p);
  Eigen::Map<const MatF> mb(b, p, q);
  Eigen::Map<MatF> mc(c, m, q);
  mc = (ma.cast<double>() * mb.cast<double>()).cast<float>();
}

void gemm_nt(const float* a, const float* b, float* c, std::int64_t m, std::int64_t p,
             std::int64_t q) {
  Eigen::Map<const MatF> ma(a, m, p);
  Eigen::Map<const MatF> mb(b, q, p);
  Eigen::Map<MatF> mc(c, m, q);
  mc = (ma.cast<double>() * mb.cast<double>().transpose()).cast<float>();
}

}  // namespace detail

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw DimensionError("matmul expects rank-2 operands, got " + shape_string(a.shape()) +
                         " and " + shape_string(b.shape()));
  const std::int64_t m = a.extent(0), p = a.extent(1), q = b.extent(1);
  if (b.extent(0) != p)
    throw DimensionError("matmul inner extents differ: " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  Tensor c({m, q});
  detail::gemm(a.data(), b.data(), c.data(), m, p, q);
  return c;
}

Tensor softmax_lastdim(const Tensor& x) {
  const std::int64_t d = x.extent(x.rank() - 1);
  const std::int64_t slices = x.size() / d;
  Tensor out(x.shape());
  const float* in = x.data();
  float* o = out.data();
  for (std::int64_t s = 0; s < slices; ++s, in += d, o += d) {
    float mx = in[0];
    for (std::int64_t i = 1; i < d; ++i) mx = std::max(mx, in[i]);
    double sum = 0.0;
    for (std::int64_t i = 0; i < d; ++i) {
      const double e = std::exp(static_cast<double>(in[i]) - static_cast<double>(mx));
      o[i] = static_cast<float>(e);
      sum += e;
    }
    const double inv = 1.0 / sum;
    for (std::int64_t i = 0; i < d; ++i) o[i] = static_cast<float>(o[i] * inv);
  }
  return out;
}

Tensor layer_norm(const Tensor& x, float eps) {
  const std::int64_t d = x.extent(x.rank() - 1);
  const std::int64_t slices = x.size() / d;
  Tensor out(x.shape());
  const float* in = x.data();
  float* o = out.data();
  for (std::int64_t s = 0; s < slices; ++s, in += d, o += d) {
    double mean = 0.0;
    for (std::int64_t i = 0; i < d; ++i) mean += in[i];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::int64_t i = 0; i < d; ++i) {
      const double c = in[i] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + static_cast<double>(eps));
    for (std::int64_t i = 0; i < d; ++i)
      o[i] = static_cast<float>((in[i] - mean) * inv);
  }
  return out;
}

std::vector<int> top_k_indices(std::span<const float> scores, std::int64_t k) {
  const std::int64_t n = static_cast<std::int64_t>(scores.size());
  if (k < 1 || k > n)
    throw ArgumentError("top_k_indices: k = " + std::to_string(k) +
                        " out of range for " + std::to_string(n) + " scores");
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](int a, int b) {
    if (scores[static_cast<std::size_t>(a)] != scores[static_cast<std::size_t>(b)])
      return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
    return a < b;
  });
  idx.resize(static_cast<std::size_t>(k));
  std::sort(idx.begin(), idx.end());
  return idx;
}

namespace {

// im2col + GEMM path shared by both conv entry points.
Tensor conv3x3(const Tensor& x, const Tensor& kernel, const Tensor& bias,
               std::int64_t stride) {
  if (x.rank() != 3) throw DimensionError("conv2d input must be HxWxC, got " + shape_string(x.shape()));
  if (kernel.rank() != 4 || kernel.extent(0) != 3 || kernel.extent(1) != 3)
    throw DimensionError("conv2d kernel must be 3x3xCinxCout, got " + shape_string(kernel.shape()));
  const std::int64_t h = x.extent(0), w = x.extent(1), cin = x.extent(2);
  const std::int64_t cout = kernel.extent(3);
  if (kernel.extent(2) != cin)
    throw DimensionError("conv2d channel mismatch: input " + shape_string(x.shape()) +
                         " vs kernel " + shape_string(kernel.shape()));
  if (bias.rank() != 1 || bias.extent(0) != cout)
    throw DimensionError("conv2d bias must have extent " + std::to_string(cout) + ", got " +
                         shape_string(bias.shape()));
  if (stride < 1) throw ArgumentError("conv2d stride must be >= 1");

  const std::int64_t oh = (h + 2 - 3) / stride + 1;
  const std::int64_t ow = (w + 2 - 3) / stride + 1;
  const std::int64_t patch = 9 * cin;

  std::vector<float> cols(static_cast<std::size_t>(oh * ow * patch), 0.0f);
  const float* in = x.data();
  for (std::int64_t oi = 0; oi < oh; ++oi) {
    for (std::int64_t oj = 0; oj < ow; ++oj) {
      float* row = cols.data() + (oi * ow + oj) * patch;
      for (std::int64_t ky = 0; ky < 3; ++ky) {
        const std::int64_t iy = oi * stride + ky - 1;
        if (iy < 0 || iy >= h) continue;
        for (std::int64_t kx = 0; kx < 3; ++kx) {
          const std::int64_t ix = oj * stride + kx - 1;
          if (ix < 0 || ix >= w) continue;
          const float* src = in + (iy * w + ix) * cin;
          std::copy(src, src + cin, row + (ky * 3 + kx) * cin);
        }
      }
    }
  }

  Tensor out({oh, ow, cout});
  detail::gemm(cols.data(), kernel.data(), out.data(), oh * ow, patch, cout);
  float* o = out.data();
  const float* b = bias.data();
  for (std::int64_t px = 0; px < oh * ow; ++px, o += cout)
    for (std::int64_t c = 0; c < cout; ++c) o[c] += b[c];
  return out;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
  return conv3x3(x, kernel, bias, 1);
}

Tensor conv2d_stride(const Tensor& x, const Tensor& kernel, const Tensor& bias,
                     std::int64_t stride) {
  return conv3x3(x, kernel, bias, stride);
}

Tensor upsample_nn2x(const Tensor& x) {
  if (x.rank() != 3)
    throw DimensionError("upsample_nn2x input must be HxWxC, got " + shape_string(x.shape()));
  const std::int64_t h = x.extent(0), w = x.extent(1), c = x.extent(2);
  Tensor out({2 * h, 2 * w, c});
  const float* in = x.data();
  float* o = out.data();
  for (std::int64_t i = 0; i < 2 * h; ++i)
    for (std::int64_t j = 0; j < 2 * w; ++j) {
      const float* src = in + ((i / 2) * w + (j / 2)) * c;
      std::copy(src, src + c, o + (i * 2 * w + j) * c);
    }
  return out;
}

Tensor leaky_relu(const Tensor& x, float slope) {
  if (!(slope > 0.0f && slope < 1.0f))
    throw ArgumentError("leaky_relu slope must lie in (0, 1), got " + std::to_string(slope));
  Tensor out(x.shape());
  const float* in = x.data();
  float* o = out.data();
  const std::int64_t n = x.size();
  for (std::int64_t i = 0; i < n; ++i) o[i] = in[i] >= 0.0f ? in[i] : slope * in[i];
  return out;
}

}  // namespace raf
