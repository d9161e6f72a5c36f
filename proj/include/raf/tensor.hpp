#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "raf/errors.hpp"

namespace raf {

// Dense row-major tensor of 32-bit floats. Immutable-by-convention value
// type: kernels return fresh tensors and never alias their inputs.
class Tensor {
 public:
  Tensor() = default;

  // Zero-filled tensor. All extents must be >= 1.
  explicit Tensor(std::vector<std::int64_t> shape);

  Tensor(std::vector<std::int64_t> shape, std::vector<float> data);

  static Tensor full(std::vector<std::int64_t> shape, float value);

  std::int64_t rank() const { return static_cast<std::int64_t>(shape_.size()); }
  const std::vector<std::int64_t>& shape() const { return shape_; }
  std::int64_t extent(std::int64_t axis) const;
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

  // Bounds-checked element access; index count must equal rank.
  float at(std::initializer_list<std::int64_t> idx) const;
  float& at(std::initializer_list<std::int64_t> idx);

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }

  // Same data, new shape; element counts must agree.
  Tensor reshaped(std::vector<std::int64_t> new_shape) const&;
  Tensor reshaped(std::vector<std::int64_t> new_shape) &&;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  std::int64_t flat_index(std::initializer_list<std::int64_t> idx) const;

  std::vector<std::int64_t> shape_;
  std::vector<float> data_;
};

std::string shape_string(const std::vector<std::int64_t>& shape);

// Seedable PRNG with a pinned algorithm (splitmix64) so that draw sequences
// are identical across platforms for a given seed.
//
//   state += 0x9E3779B97F4A7C15
//   z = state; z = (z ^ z>>30) * 0xBF58476D1CE4E5B9
//   z = (z ^ z>>27) * 0x94D049BB133111EB; return z ^ z>>31
//
// Derived draws: next_float/next_double take the top 24/53 bits; next_int
// maps one u64 through a 128-bit multiply-shift onto [lo, hi].
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();
  float next_float();    // [0, 1)
  double next_double();  // [0, 1)
  std::int64_t next_int(std::int64_t lo, std::int64_t hi);  // inclusive
  double next_real(double lo, double hi);

 private:
  std::uint64_t state_;
};

// c[i][j] = sum_k a[i][k] * b[k][j]; both operands rank 2, accumulation in
// 64-bit, result rounded to 32-bit.
Tensor matmul(const Tensor& a, const Tensor& b);

// Softmax over the last dimension with max-subtraction; each slice sums to 1.
Tensor softmax_lastdim(const Tensor& x);

// (x - mean) / sqrt(var + eps) over the last dimension.
Tensor layer_norm(const Tensor& x, float eps = 1e-5f);

// Indices of the k largest scores, ties broken toward the lower index,
// returned in ascending index order.
std::vector<int> top_k_indices(std::span<const float> scores, std::int64_t k);

// 3x3 cross-correlation, stride 1, zero padding 1. x is HxWxCin, kernel is
// 3x3xCinxCout, bias is Cout. Output HxWxCout.
Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias);

// Same kernel geometry with configurable stride (padding stays 1).
Tensor conv2d_stride(const Tensor& x, const Tensor& kernel, const Tensor& bias,
                     std::int64_t stride);

// Nearest-neighbor 2x upsample of an HxWxC map: out[i][j] = x[i/2][j/2].
Tensor upsample_nn2x(const Tensor& x);

// x >= 0 -> x; x < 0 -> slope * x. slope must lie in (0, 1).
Tensor leaky_relu(const Tensor& x, float slope = 0.2f);

namespace detail {
// Row-major f32 GEMM with f64 accumulation: c[m x q] = a[m x p] * b[p x q].
void gemm(const float* a, const float* b, float* c, std::int64_t m,
          std::int64_t p, std::int64_t q);
// c[m x q] = a[m x p] * b^T where b is q x p row-major.
void gemm_nt(const float* a, const float* b, float* c, std::int64_t m,
             std::int64_t p, std::int64_t q);
}  // namespace detail

}  // namespace raf
