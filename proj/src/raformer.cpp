#include "raf/raformer.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include "raf/config_json.hpp"

namespace raf {

int RaformerConfig::group_count() const {
  const int n = windows_per_frame();
  const int k = keep;
  if (4 * k < n) return 1;  // duplication path
  if ((4 * k) % n != 0)
    throw ConfigError("group count 4k/n is fractional: k=" + std::to_string(k) +
                      ", n=" + std::to_string(n));
  return (4 * k) / n;
}

void RaformerConfig::validate() const {
  auto req = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  req(frames >= 1, "frames must be >= 1");
  req(height >= 8 && height % 8 == 0, "height must be a positive multiple of 8");
  req(width >= 8 && width % 8 == 0, "width must be a positive multiple of 8");
  req(channels >= 1, "channels must be >= 1");
  req(win_h >= 1 && grid_h() % win_h == 0,
      "win_h must divide H/4 = " + std::to_string(grid_h()));
  req(win_w >= 1 && grid_w() % win_w == 0,
      "win_w must divide W/4 = " + std::to_string(grid_w()));
  const int n = windows_per_frame();
  req(keep >= 1 && keep <= n,
      "keep must lie in [1, " + std::to_string(n) + "], got " + std::to_string(keep));
  group_count();  // throws on fractional 4k/n
  req(layers >= 1, "layers must be >= 1");
  req(heads >= 1 && embed_dim % heads == 0, "embed_dim must be divisible by heads");
  req(ffn_dim >= 1, "ffn_dim must be >= 1");
  req(ss_kernel >= 1 && ss_stride >= 1 && ss_pad >= 0, "bad soft-split geometry");
  req(leaky_slope > 0.0 && leaky_slope < 1.0, "leaky_slope must lie in (0, 1)");
  // Count identity g*(H/8)*(W/8) == k*h*w when the kept content fills its
  // groups exactly.
  const int g = group_count();
  if (4 * keep >= n && static_cast<std::int64_t>(g) * (height / 8) * (width / 8) !=
                           static_cast<std::int64_t>(keep) * win_h * win_w)
    throw ConfigError("packing count identity violated");
}

RaformerConfig resolved(RaformerConfig cfg) {
  if (cfg.keep == 0) cfg.keep = std::max(1, cfg.windows_per_frame() / 2);
  cfg.validate();
  return cfg;
}

namespace {

using detail::gemm;
using detail::gemm_nt;

int mid_channels(int c) { return std::max(4, c / 2); }

// x2d is R x D row-major; returns R x E.
Tensor linear(const Tensor& x2d, const Tensor& w, const Tensor* bias) {
  const std::int64_t rows = x2d.extent(0), d = x2d.extent(1), e = w.extent(1);
  if (w.extent(0) != d)
    throw DimensionError("linear: " + shape_string(x2d.shape()) + " vs " +
                         shape_string(w.shape()));
  Tensor out({rows, e});
  gemm(x2d.data(), w.data(), out.data(), rows, d, e);
  if (bias) {
    const float* b = bias->data();
    float* o = out.data();
    for (std::int64_t r = 0; r < rows; ++r, o += e)
      for (std::int64_t j = 0; j < e; ++j) o[j] += b[j];
  }
  return out;
}

// Per-channel scale/shift over the last dimension, in place.
void affine_lastdim(Tensor& x, const Tensor& scale, const Tensor& shift) {
  const std::int64_t d = x.extent(x.rank() - 1);
  const std::int64_t slices = x.size() / d;
  const float* g = scale.data();
  const float* b = shift.data();
  float* o = x.data();
  for (std::int64_t s = 0; s < slices; ++s, o += d)
    for (std::int64_t i = 0; i < d; ++i) o[i] = o[i] * g[i] + b[i];
}

void add_inplace(Tensor& x, const Tensor& y) {
  float* o = x.data();
  const float* p = y.data();
  for (std::int64_t i = 0; i < x.size(); ++i) o[i] += p[i];
}

Tensor frame_of(const Tensor& batch, std::int64_t t) {
  std::vector<std::int64_t> sh(batch.shape().begin() + 1, batch.shape().end());
  std::int64_t vol = 1;
  for (auto e : sh) vol *= e;
  Tensor f(sh);
  std::copy_n(batch.data() + t * vol, vol, f.data());
  return f;
}

void set_frame(Tensor& batch, std::int64_t t, const Tensor& f) {
  std::copy_n(f.data(), f.size(), batch.data() + t * f.size());
}

}  // namespace

Tensor soft_split(const Tensor& feature, int kernel, int stride, int pad) {
  if (kernel <= 0 || stride <= 0) throw ArgumentError("soft_split: kernel and stride must be positive");
  if (pad < 0) throw ArgumentError("soft_split: pad must be >= 0");
  if (feature.rank() != 4)
    throw DimensionError("soft_split expects TxHxWxC, got " + shape_string(feature.shape()));
  const std::int64_t t_count = feature.extent(0), h = feature.extent(1),
                     w = feature.extent(2), c = feature.extent(3);
  const std::int64_t oh = (h + 2 * pad - kernel) / stride + 1;
  const std::int64_t ow = (w + 2 * pad - kernel) / stride + 1;
  if (oh < 1 || ow < 1) throw ArgumentError("soft_split: geometry yields no tokens");

  const std::int64_t tok_dim = static_cast<std::int64_t>(kernel) * kernel * c;
  Tensor out({t_count, oh * ow, tok_dim});
  const float* in = feature.data();
  float* o = out.data();
  for (std::int64_t t = 0; t < t_count; ++t) {
    const float* ft = in + t * h * w * c;
    for (std::int64_t oy = 0; oy < oh; ++oy)
      for (std::int64_t ox = 0; ox < ow; ++ox) {
        float* tok = o + ((t * oh * ow) + oy * ow + ox) * tok_dim;
        for (std::int64_t ky = 0; ky < kernel; ++ky) {
          const std::int64_t iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= h) continue;
          for (std::int64_t kx = 0; kx < kernel; ++kx) {
            const std::int64_t ix = ox * stride + kx - pad;
            if (ix < 0 || ix >= w) continue;
            std::copy_n(ft + (iy * w + ix) * c, c, tok + (ky * kernel + kx) * c);
          }
        }
      }
  }
  return out;
}

Tensor soft_composite(const Tensor& tokens, int out_h, int out_w, int channels,
                      int kernel, int stride, int pad) {
  if (kernel <= 0 || stride <= 0) throw ArgumentError("soft_composite: kernel and stride must be positive");
  if (tokens.rank() != 3)
    throw DimensionError("soft_composite expects TxNxD tokens, got " + shape_string(tokens.shape()));
  const std::int64_t oh = (out_h + 2 * pad - kernel) / stride + 1;
  const std::int64_t ow = (out_w + 2 * pad - kernel) / stride + 1;
  const std::int64_t tok_dim = static_cast<std::int64_t>(kernel) * kernel * channels;
  if (tokens.extent(1) != oh * ow || tokens.extent(2) != tok_dim)
    throw DimensionError("soft_composite: tokens " + shape_string(tokens.shape()) +
                         " do not match geometry (" + std::to_string(oh * ow) + " x " +
                         std::to_string(tok_dim) + ")");

  const std::int64_t t_count = tokens.extent(0);
  Tensor out({t_count, out_h, out_w, channels});
  std::vector<double> acc(static_cast<std::size_t>(out_h * out_w * channels));
  std::vector<std::int32_t> cover(static_cast<std::size_t>(out_h * out_w));
  const float* in = tokens.data();
  for (std::int64_t t = 0; t < t_count; ++t) {
    std::fill(acc.begin(), acc.end(), 0.0);
    std::fill(cover.begin(), cover.end(), 0);
    for (std::int64_t oy = 0; oy < oh; ++oy)
      for (std::int64_t ox = 0; ox < ow; ++ox) {
        const float* tok = in + ((t * oh * ow) + oy * ow + ox) * tok_dim;
        for (std::int64_t ky = 0; ky < kernel; ++ky) {
          const std::int64_t iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= out_h) continue;
          for (std::int64_t kx = 0; kx < kernel; ++kx) {
            const std::int64_t ix = ox * stride + kx - pad;
            if (ix < 0 || ix >= out_w) continue;
            double* dst = acc.data() + (iy * out_w + ix) * channels;
            const float* src = tok + (ky * kernel + kx) * channels;
            for (std::int64_t ch = 0; ch < channels; ++ch) dst[ch] += src[ch];
            ++cover[static_cast<std::size_t>(iy * out_w + ix)];
          }
        }
      }
    float* o = out.data() + t * out_h * out_w * channels;
    for (std::int64_t p = 0; p < out_h * out_w; ++p) {
      const std::int32_t n = cover[static_cast<std::size_t>(p)];
      for (std::int64_t ch = 0; ch < channels; ++ch)
        o[p * channels + ch] =
            n > 0 ? static_cast<float>(acc[static_cast<std::size_t>(p * channels + ch)] / n)
                  : 0.0f;
    }
  }
  return out;
}

Tensor transformer_block(const Tensor& f_prev, const LayerWeights& lw,
                         const RaformerConfig& cfg) {
  if (f_prev.rank() != 4 || f_prev.extent(0) != cfg.frames ||
      f_prev.extent(1) != cfg.grid_h() || f_prev.extent(2) != cfg.grid_w() ||
      f_prev.extent(3) != cfg.channels)
    throw DimensionError("transformer_block: input " + shape_string(f_prev.shape()) +
                         " does not match config grid");

  const int e = cfg.embed_dim;
  const int dh = e / cfg.heads;
  const Tensor raw = soft_split(f_prev, cfg.ss_kernel, cfg.ss_stride, cfg.ss_pad);
  const std::int64_t n_tok = raw.extent(1);
  const std::int64_t rows = cfg.frames * n_tok;
  const std::int64_t tok_dim = raw.extent(2);

  const Tensor u0 = linear(raw.reshaped({rows, tok_dim}), lw.ss_proj, &lw.ss_proj_b);

  // Attention path: pre-norm, joint over every token of every frame.
  Tensor a = layer_norm(u0);
  affine_lastdim(a, lw.ln1_scale, lw.ln1_shift);
  const Tensor q = linear(a, lw.wq, &lw.bq);
  const Tensor k = linear(a, lw.wk, &lw.bk);
  const Tensor v = linear(a, lw.wv, &lw.bv);

  Tensor heads_out({rows, e});
  std::vector<float> qh(static_cast<std::size_t>(rows * dh)), kh(qh.size()), vh(qh.size());
  const float scale = 1.0f / std::sqrt(static_cast<float>(dh));
  for (int head = 0; head < cfg.heads; ++head) {
    const std::int64_t off = static_cast<std::int64_t>(head) * dh;
    for (std::int64_t r = 0; r < rows; ++r)
      for (int j = 0; j < dh; ++j) {
        qh[static_cast<std::size_t>(r * dh + j)] = q.data()[r * e + off + j] * scale;
        kh[static_cast<std::size_t>(r * dh + j)] = k.data()[r * e + off + j];
        vh[static_cast<std::size_t>(r * dh + j)] = v.data()[r * e + off + j];
      }
    Tensor scores({rows, rows});
    gemm_nt(qh.data(), kh.data(), scores.data(), rows, dh, rows);
    const Tensor attn = softmax_lastdim(scores);
    std::vector<float> ctx(static_cast<std::size_t>(rows * dh));
    gemm(attn.data(), vh.data(), ctx.data(), rows, rows, dh);
    for (std::int64_t r = 0; r < rows; ++r)
      for (int j = 0; j < dh; ++j)
        heads_out.data()[r * e + off + j] = ctx[static_cast<std::size_t>(r * dh + j)];
  }
  Tensor u1 = linear(heads_out, lw.wo, &lw.bo);
  add_inplace(u1, u0);

  Tensor b2 = layer_norm(u1);
  affine_lastdim(b2, lw.ln2_scale, lw.ln2_shift);
  const Tensor hidden = leaky_relu(linear(b2, lw.ffn_w1, &lw.ffn_b1), static_cast<float>(cfg.leaky_slope));
  Tensor u2 = linear(hidden, lw.ffn_w2, &lw.ffn_b2);
  add_inplace(u2, u1);

  // Token update back to patch space; composite adds it onto the input grid.
  Tensor du = u2;
  {
    float* o = du.data();
    const float* p = u0.data();
    for (std::int64_t i = 0; i < du.size(); ++i) o[i] -= p[i];
  }
  const Tensor delta = linear(du, lw.sc_proj, nullptr)
                           .reshaped({cfg.frames, n_tok, tok_dim});
  Tensor out = soft_composite(delta, cfg.grid_h(), cfg.grid_w(), cfg.channels,
                              cfg.ss_kernel, cfg.ss_stride, cfg.ss_pad);
  add_inplace(out, f_prev);
  return out;
}

WindowSet window_partition(const Tensor& f_star, int win_h, int win_w) {
  if (f_star.rank() != 4)
    throw DimensionError("window_partition expects TxHxWxC, got " + shape_string(f_star.shape()));
  const std::int64_t t_count = f_star.extent(0), gh = f_star.extent(1),
                     gw = f_star.extent(2), c = f_star.extent(3);
  if (win_h < 1 || win_w < 1 || gh % win_h != 0 || gw % win_w != 0)
    throw ArgumentError("window_partition: " + std::to_string(win_h) + "x" +
                        std::to_string(win_w) + " does not divide grid " +
                        std::to_string(gh) + "x" + std::to_string(gw));
  const std::int64_t rows = gh / win_h, cols = gw / win_w, n = rows * cols;
  const std::int64_t hw = static_cast<std::int64_t>(win_h) * win_w;

  WindowSet ws;
  ws.grid_rows = static_cast<int>(rows);
  ws.grid_cols = static_cast<int>(cols);
  ws.win_h = win_h;
  ws.win_w = win_w;
  ws.windows = Tensor({t_count, n, hw, c});
  const float* in = f_star.data();
  float* o = ws.windows.data();
  for (std::int64_t t = 0; t < t_count; ++t)
    for (std::int64_t wr = 0; wr < rows; ++wr)
      for (std::int64_t wc = 0; wc < cols; ++wc) {
        const std::int64_t win = wr * cols + wc;
        for (std::int64_t pr = 0; pr < win_h; ++pr)
          for (std::int64_t pc = 0; pc < win_w; ++pc) {
            const std::int64_t iy = wr * win_h + pr, ix = wc * win_w + pc;
            std::copy_n(in + ((t * gh + iy) * gw + ix) * c, c,
                        o + (((t * n + win) * hw) + pr * win_w + pc) * c);
          }
      }
  return ws;
}

Tensor window_unpartition(const WindowSet& ws) {
  const std::int64_t t_count = ws.windows.extent(0), n = ws.windows.extent(1),
                     hw = ws.windows.extent(2), c = ws.windows.extent(3);
  const std::int64_t rows = ws.grid_rows, cols = ws.grid_cols;
  if (n != rows * cols)
    throw DimensionError("window_unpartition: selected set cannot be unpartitioned");
  if (hw != static_cast<std::int64_t>(ws.win_h) * ws.win_w)
    throw DimensionError("window_unpartition: window volume mismatch");
  const std::int64_t gh = rows * ws.win_h, gw = cols * ws.win_w;

  Tensor out({t_count, gh, gw, c});
  const float* in = ws.windows.data();
  float* o = out.data();
  for (std::int64_t t = 0; t < t_count; ++t)
    for (std::int64_t wr = 0; wr < rows; ++wr)
      for (std::int64_t wc = 0; wc < cols; ++wc) {
        const std::int64_t win = wr * cols + wc;
        for (std::int64_t pr = 0; pr < ws.win_h; ++pr)
          for (std::int64_t pc = 0; pc < ws.win_w; ++pc) {
            const std::int64_t iy = wr * ws.win_h + pr, ix = wc * ws.win_w + pc;
            std::copy_n(in + (((t * n + win) * hw) + pr * ws.win_w + pc) * c, c,
                        o + ((t * gh + iy) * gw + ix) * c);
          }
      }
  return out;
}

Tensor window_importance(const WindowSet& ws, const LayerWeights& lw) {
  const std::int64_t t_count = ws.windows.extent(0), n = ws.windows.extent(1),
                     hw = ws.windows.extent(2), c = ws.windows.extent(3);

  Tensor means({t_count * n, c});
  const float* in = ws.windows.data();
  for (std::int64_t row = 0; row < t_count * n; ++row) {
    const float* win = in + row * hw * c;
    for (std::int64_t ch = 0; ch < c; ++ch) {
      double acc = 0.0;
      for (std::int64_t p = 0; p < hw; ++p) acc += win[p * c + ch];
      means.data()[row * c + ch] = static_cast<float>(acc / static_cast<double>(hw));
    }
  }

  Tensor q = layer_norm(means);
  affine_lastdim(q, lw.lnq_scale, lw.lnq_shift);
  Tensor k = layer_norm(means);
  affine_lastdim(k, lw.lnk_scale, lw.lnk_shift);

  Tensor scores({t_count * n, t_count * n});
  gemm_nt(q.data(), k.data(), scores.data(), t_count * n, c, t_count * n);
  const Tensor aw = softmax_lastdim(scores);

  Tensor importance({t_count, n});
  const float* a = aw.data();
  for (std::int64_t j = 0; j < t_count * n; ++j) {
    double acc = 0.0;
    for (std::int64_t i = 0; i < t_count * n; ++i) acc += a[i * t_count * n + j];
    importance.data()[j] = static_cast<float>(acc);
  }
  return importance;
}

WindowSet select_topk_windows(const WindowSet& ws, const Tensor& scores, int k) {
  const std::int64_t t_count = ws.windows.extent(0), n = ws.windows.extent(1),
                     hw = ws.windows.extent(2), c = ws.windows.extent(3);
  if (scores.rank() != 2 || scores.extent(0) != t_count || scores.extent(1) != n)
    throw DimensionError("select_topk_windows: scores " + shape_string(scores.shape()) +
                         " do not match " + std::to_string(t_count) + " x " + std::to_string(n));
  if (k < 1 || k > n)
    throw ArgumentError("select_topk_windows: k = " + std::to_string(k) +
                        " out of range [1, " + std::to_string(n) + "]");

  WindowSet out;
  out.grid_rows = ws.grid_rows;
  out.grid_cols = ws.grid_cols;
  out.win_h = ws.win_h;
  out.win_w = ws.win_w;
  out.windows = Tensor({t_count, k, hw, c});
  const float* in = ws.windows.data();
  float* o = out.windows.data();
  for (std::int64_t t = 0; t < t_count; ++t) {
    const std::span<const float> row(scores.data() + t * n, static_cast<std::size_t>(n));
    std::vector<int> kept = top_k_indices(row, k);
    for (std::int64_t i = 0; i < k; ++i)
      std::copy_n(in + ((t * n + kept[static_cast<std::size_t>(i)]) * hw) * c, hw * c,
                  o + ((t * k + i) * hw) * c);
    out.kept.push_back(std::move(kept));
  }
  return out;
}

Tensor reverse_pack(const WindowSet& wnr, int groups) {
  if (groups < 1) throw ConfigError("reverse_pack: group count must be >= 1");
  const std::int64_t t_count = wnr.windows.extent(0), k = wnr.windows.extent(1),
                     hw = wnr.windows.extent(2), c = wnr.windows.extent(3);
  const std::int64_t h8 = static_cast<std::int64_t>(wnr.grid_rows) * wnr.win_h / 2;
  const std::int64_t w8 = static_cast<std::int64_t>(wnr.grid_cols) * wnr.win_w / 2;
  if (h8 < 1 || w8 < 1) throw ConfigError("reverse_pack: grid too small to halve");
  const std::int64_t capacity = static_cast<std::int64_t>(groups) * h8 * w8;
  const std::int64_t stream_len = k * hw;
  if (capacity != stream_len && !(groups == 1 && stream_len < capacity))
    throw ConfigError("reverse_pack: " + std::to_string(stream_len) +
                      " kept positions cannot fill " + std::to_string(groups) +
                      " groups of " + std::to_string(h8 * w8));

  Tensor out({groups, t_count, h8, w8, c});
  const float* in = wnr.windows.data();
  float* o = out.data();
  for (std::int64_t t = 0; t < t_count; ++t) {
    const float* stream = in + t * stream_len * c;  // kept windows, ascending order
    for (std::int64_t g = 0; g < groups; ++g)
      for (std::int64_t p = 0; p < h8 * w8; ++p) {
        const std::int64_t src = (g * h8 * w8 + p) % stream_len;
        std::copy_n(stream + src * c, c, o + (((g * t_count + t) * h8 * w8) + p) * c);
      }
  }
  return out;
}

Tensor sfa_align(const Tensor& f_alpha, const LayerWeights& lw,
                 const RaformerConfig& cfg) {
  if (f_alpha.rank() != 5)
    throw DimensionError("sfa_align expects g x T x H/8 x W/8 x C, got " +
                         shape_string(f_alpha.shape()));
  const std::int64_t groups = f_alpha.extent(0), t_count = f_alpha.extent(1),
                     h8 = f_alpha.extent(2), w8 = f_alpha.extent(3), c = f_alpha.extent(4);
  if (t_count != cfg.frames || h8 != cfg.height / 8 || w8 != cfg.width / 8 ||
      c != cfg.channels)
    throw DimensionError("sfa_align: " + shape_string(f_alpha.shape()) +
                         " does not match config");
  if (lw.sfa_conv1_k.extent(2) != groups * c)
    throw DimensionError("sfa_align: conv1 expects " +
                         std::to_string(lw.sfa_conv1_k.extent(2)) + " channels, got " +
                         std::to_string(groups * c));

  // Composite step: group-major channel concatenation.
  Tensor merged({t_count, h8, w8, groups * c});
  const float* in = f_alpha.data();
  float* m = merged.data();
  for (std::int64_t g = 0; g < groups; ++g)
    for (std::int64_t t = 0; t < t_count; ++t)
      for (std::int64_t p = 0; p < h8 * w8; ++p)
        std::copy_n(in + (((g * t_count + t) * h8 * w8) + p) * c, c,
                    m + ((t * h8 * w8 + p) * groups + g) * c);

  Tensor aligned({t_count, 2 * h8, 2 * w8, c});
  for (std::int64_t t = 0; t < t_count; ++t) {
    const Tensor up = upsample_nn2x(frame_of(merged, t));
    const Tensor a1 = conv2d(up, lw.sfa_conv1_k, lw.sfa_conv1_b);
    const Tensor a2 = conv2d(leaky_relu(a1, cfg.leaky_slope), lw.sfa_conv2_k, lw.sfa_conv2_b);
    set_frame(aligned, t, a2);
  }

  // Final soft split: 3x3/1/1 neighborhoods projected back to C channels.
  const std::int64_t gh = 2 * h8, gw = 2 * w8;
  const Tensor neigh = soft_split(aligned, 3, 1, 1);
  return linear(neigh.reshaped({t_count * gh * gw, 9 * c}), lw.sfa_ss_proj,
                &lw.sfa_ss_proj_b)
      .reshaped({t_count, gh, gw, c});
}

Tensor raformer_layer(const Tensor& f_prev, const LayerWeights& lw,
                      const RaformerConfig& cfg,
                      std::vector<std::vector<int>>* kept_out) {
  const Tensor f_star = transformer_block(f_prev, lw, cfg);
  const WindowSet ws = window_partition(f_star, cfg.win_h, cfg.win_w);
  const Tensor scores = window_importance(ws, lw);
  const WindowSet wnr = select_topk_windows(ws, scores, cfg.keep);
  if (kept_out) *kept_out = wnr.kept;
  const Tensor f_alpha = reverse_pack(wnr, cfg.group_count());
  const Tensor f_nr = sfa_align(f_alpha, lw, cfg);

  Tensor out(f_star.shape());
  const float* pnr = f_nr.data();
  const float* pst = f_star.data();
  float* o = out.data();
  for (std::int64_t i = 0; i < out.size(); ++i)
    o[i] = lw.beta * pnr[i] + lw.gamma * pst[i];
  return out;
}

Tensor encode_frames(const Tensor& clip, const MaskSequence* masks,
                     const ModelWeights& mw) {
  const RaformerConfig& cfg = mw.config;
  if (clip.rank() != 4 || clip.extent(3) != 3)
    throw DimensionError("encode_frames expects TxHxWx3, got " + shape_string(clip.shape()));
  const std::int64_t t_count = clip.extent(0), h = clip.extent(1), w = clip.extent(2);
  if (t_count != cfg.frames || h != cfg.height || w != cfg.width)
    throw DimensionError("encode_frames: clip " + shape_string(clip.shape()) +
                         " does not match config " + std::to_string(cfg.frames) + "x" +
                         std::to_string(cfg.height) + "x" + std::to_string(cfg.width));
  if (masks && static_cast<std::int64_t>(masks->frames.size()) != t_count)
    throw DimensionError("encode_frames: mask count differs from frame count");

  Tensor feat({t_count, cfg.grid_h(), cfg.grid_w(), cfg.channels});
  for (std::int64_t t = 0; t < t_count; ++t) {
    Tensor x = frame_of(clip, t);
    float* p = x.data();
    if (masks) {
      const Mask& m = masks->frames[static_cast<std::size_t>(t)];
      if (m.height != h || m.width != w)
        throw DimensionError("encode_frames: mask resolution differs from clip");
      for (std::int64_t px = 0; px < h * w; ++px) {
        const float keep = m.bits[static_cast<std::size_t>(px)] ? 0.0f : 1.0f;
        for (int ch = 0; ch < 3; ++ch) p[px * 3 + ch] *= keep / 255.0f;
      }
    } else {
      for (std::int64_t i = 0; i < x.size(); ++i) p[i] /= 255.0f;
    }
    const Tensor h1 = leaky_relu(conv2d_stride(x, mw.enc1_k, mw.enc1_b, 2), static_cast<float>(cfg.leaky_slope));
    set_frame(feat, t, conv2d_stride(h1, mw.enc2_k, mw.enc2_b, 2));
  }
  return feat;
}

Tensor decode_features(const Tensor& features, const ModelWeights& mw) {
  const RaformerConfig& cfg = mw.config;
  if (features.rank() != 4 || features.extent(0) != cfg.frames ||
      features.extent(1) != cfg.grid_h() || features.extent(2) != cfg.grid_w() ||
      features.extent(3) != cfg.channels)
    throw DimensionError("decode_features: " + shape_string(features.shape()) +
                         " does not match config grid");
  Tensor out({cfg.frames, cfg.height, cfg.width, 3});
  for (std::int64_t t = 0; t < cfg.frames; ++t) {
    const Tensor u1 = upsample_nn2x(frame_of(features, t));
    const Tensor d1 = leaky_relu(conv2d(u1, mw.dec1_k, mw.dec1_b), static_cast<float>(cfg.leaky_slope));
    const Tensor u2 = upsample_nn2x(d1);
    set_frame(out, t, conv2d(u2, mw.dec2_k, mw.dec2_b));
  }
  return out;
}

Tensor run_raformer(const Tensor& clip, const MaskSequence* masks,
                    const ModelWeights& mw, ForwardTrace* trace) {
  Tensor x = encode_frames(clip, masks, mw);
  for (int l = 0; l < mw.config.layers; ++l) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::vector<int>> kept;
    x = raformer_layer(x, mw.layers[static_cast<std::size_t>(l)], mw.config, &kept);
    const auto t1 = std::chrono::steady_clock::now();
    if (trace) {
      trace->kept.push_back(std::move(kept));
      trace->layer_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
  }
  return decode_features(x, mw);
}

namespace {

// Weight enumeration shared by init and the container codec. Order is part
// of the on-disk format and of the seeded-init contract.
template <typename W, typename Fn>
void for_each_tensor(W& mw, Fn&& fn) {
  fn("enc1.kernel", mw.enc1_k);
  fn("enc1.bias", mw.enc1_b);
  fn("enc2.kernel", mw.enc2_k);
  fn("enc2.bias", mw.enc2_b);
  fn("dec1.kernel", mw.dec1_k);
  fn("dec1.bias", mw.dec1_b);
  fn("dec2.kernel", mw.dec2_k);
  fn("dec2.bias", mw.dec2_b);
  for (std::size_t l = 0; l < mw.layers.size(); ++l) {
    auto& lw = mw.layers[l];
    const std::string p = "layers." + std::to_string(l) + ".";
    fn(p + "ss_proj", lw.ss_proj);
    fn(p + "ss_proj_b", lw.ss_proj_b);
    fn(p + "sc_proj", lw.sc_proj);
    fn(p + "ln1_scale", lw.ln1_scale);
    fn(p + "ln1_shift", lw.ln1_shift);
    fn(p + "ln2_scale", lw.ln2_scale);
    fn(p + "ln2_shift", lw.ln2_shift);
    fn(p + "wq", lw.wq);
    fn(p + "bq", lw.bq);
    fn(p + "wk", lw.wk);
    fn(p + "bk", lw.bk);
    fn(p + "wv", lw.wv);
    fn(p + "bv", lw.bv);
    fn(p + "wo", lw.wo);
    fn(p + "bo", lw.bo);
    fn(p + "ffn_w1", lw.ffn_w1);
    fn(p + "ffn_b1", lw.ffn_b1);
    fn(p + "ffn_w2", lw.ffn_w2);
    fn(p + "ffn_b2", lw.ffn_b2);
    fn(p + "lnq_scale", lw.lnq_scale);
    fn(p + "lnq_shift", lw.lnq_shift);
    fn(p + "lnk_scale", lw.lnk_scale);
    fn(p + "lnk_shift", lw.lnk_shift);
    fn(p + "sfa_conv1_k", lw.sfa_conv1_k);
    fn(p + "sfa_conv1_b", lw.sfa_conv1_b);
    fn(p + "sfa_conv2_k", lw.sfa_conv2_k);
    fn(p + "sfa_conv2_b", lw.sfa_conv2_b);
    fn(p + "sfa_ss_proj", lw.sfa_ss_proj);
    fn(p + "sfa_ss_proj_b", lw.sfa_ss_proj_b);
    fn(p + "beta", lw.beta);
    fn(p + "gamma", lw.gamma);
  }
}

ModelWeights make_empty_weights(const RaformerConfig& cfg) {
  const std::int64_t c = cfg.channels, e = cfg.embed_dim, f = cfg.ffn_dim;
  const std::int64_t mid = mid_channels(cfg.channels);
  const std::int64_t tok_dim = static_cast<std::int64_t>(cfg.ss_kernel) * cfg.ss_kernel * c;
  const std::int64_t g = cfg.group_count();

  ModelWeights mw;
  mw.config = cfg;
  mw.enc1_k = Tensor({3, 3, 3, mid});
  mw.enc1_b = Tensor({mid});
  mw.enc2_k = Tensor({3, 3, mid, c});
  mw.enc2_b = Tensor({c});
  mw.dec1_k = Tensor({3, 3, c, mid});
  mw.dec1_b = Tensor({mid});
  mw.dec2_k = Tensor({3, 3, mid, 3});
  mw.dec2_b = Tensor({3});

  mw.layers.resize(static_cast<std::size_t>(cfg.layers));
  for (auto& lw : mw.layers) {
    lw.ss_proj = Tensor({tok_dim, e});
    lw.ss_proj_b = Tensor({e});
    lw.sc_proj = Tensor({e, tok_dim});
    lw.ln1_scale = Tensor({e});
    lw.ln1_shift = Tensor({e});
    lw.ln2_scale = Tensor({e});
    lw.ln2_shift = Tensor({e});
    lw.wq = Tensor({e, e});
    lw.bq = Tensor({e});
    lw.wk = Tensor({e, e});
    lw.bk = Tensor({e});
    lw.wv = Tensor({e, e});
    lw.bv = Tensor({e});
    lw.wo = Tensor({e, e});
    lw.bo = Tensor({e});
    lw.ffn_w1 = Tensor({e, f});
    lw.ffn_b1 = Tensor({f});
    lw.ffn_w2 = Tensor({f, e});
    lw.ffn_b2 = Tensor({e});
    lw.lnq_scale = Tensor({c});
    lw.lnq_shift = Tensor({c});
    lw.lnk_scale = Tensor({c});
    lw.lnk_shift = Tensor({c});
    lw.sfa_conv1_k = Tensor({3, 3, g * c, c});
    lw.sfa_conv1_b = Tensor({c});
    lw.sfa_conv2_k = Tensor({3, 3, c, c});
    lw.sfa_conv2_b = Tensor({c});
    lw.sfa_ss_proj = Tensor({9 * c, c});
    lw.sfa_ss_proj_b = Tensor({c});
    lw.beta = static_cast<float>(cfg.beta);
    lw.gamma = static_cast<float>(cfg.gamma);
  }
  return mw;
}

bool is_norm_scale(const std::string& name) { return name.ends_with("_scale"); }

bool is_norm_param(const std::string& name) {
  return name.ends_with("_scale") || name.ends_with("_shift");
}

}  // namespace

ModelWeights init_weights(const RaformerConfig& cfg) {
  cfg.validate();
  ModelWeights mw = make_empty_weights(cfg);
  Rng rng(cfg.seed);
  for_each_tensor(mw, [&](const std::string& name, auto& t) {
    using T = std::decay_t<decltype(t)>;
    if constexpr (std::is_same_v<T, Tensor>) {
      if (is_norm_param(name)) {
        const float v = is_norm_scale(name) ? 1.0f : 0.0f;
        std::fill(t.values().begin(), t.values().end(), v);
      } else if (t.rank() == 1) {
        for (float& x : t.values()) x = static_cast<float>(rng.next_real(-0.02, 0.02));
      } else {
        // Fan-in-scaled uniform keeps activation scale stable through the
        // stack; fan-in is everything but the output extent.
        const double fan_in =
            static_cast<double>(t.size() / t.extent(t.rank() - 1));
        const double bound = std::sqrt(3.0 / fan_in);
        for (float& x : t.values())
          x = static_cast<float>(rng.next_real(-bound, bound));
      }
    }
    // beta/gamma keep their config values.
  });
  return mw;
}

namespace {

template <typename T>
void write_pod(std::ofstream& f, const T& v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_pod(std::ifstream& f, const std::filesystem::path& path) {
  T v;
  f.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!f)
    throw FormatError("weights " + path.string() + ": truncated at byte offset " +
                      std::to_string(static_cast<long long>(f.tellg())));
  return v;
}

void write_named_tensor(std::ofstream& f, const std::string& name, const Tensor& t) {
  const std::uint16_t len = static_cast<std::uint16_t>(name.size());
  write_pod(f, len);
  f.write(name.data(), len);
  const std::uint8_t rank = static_cast<std::uint8_t>(t.rank());
  write_pod(f, rank);
  for (auto e : t.shape()) write_pod(f, static_cast<std::uint32_t>(e));
  f.write(reinterpret_cast<const char*>(t.data()),
          static_cast<std::streamsize>(t.size() * sizeof(float)));
}

}  // namespace

void save_weights(const ModelWeights& mw, const std::filesystem::path& path) {
  static_assert(std::endian::native == std::endian::little,
                "weight container assumes a little-endian host");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write("RAFW", 4);
  write_pod(f, static_cast<std::uint32_t>(1));
  const std::string cfg = config_to_json(mw.config).dump();
  write_pod(f, static_cast<std::uint32_t>(cfg.size()));
  f.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  for_each_tensor(mw, [&](const std::string& name, const auto& t) {
    using T = std::decay_t<decltype(t)>;
    if constexpr (std::is_same_v<T, Tensor>) {
      write_named_tensor(f, name, t);
    } else {
      write_named_tensor(f, name, Tensor({1}, {t}));
    }
  });
  if (!f) throw IoError("short write to " + path.string());
}

ModelWeights load_weights(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "RAFW", 4) != 0)
    throw FormatError("weights " + path.string() + ": bad magic at byte offset 0");
  const auto version = read_pod<std::uint32_t>(f, path);
  if (version != 1)
    throw FormatError("weights " + path.string() + ": unsupported version " +
                      std::to_string(version));
  const auto cfg_len = read_pod<std::uint32_t>(f, path);
  std::string cfg_json(cfg_len, '\0');
  f.read(cfg_json.data(), cfg_len);
  if (!f) throw FormatError("weights " + path.string() + ": truncated config block");

  const RaformerConfig cfg = resolved(config_from_json(nlohmann::ordered_json::parse(cfg_json)));
  std::map<std::string, Tensor> tensors;
  while (true) {
    std::uint16_t len;
    f.read(reinterpret_cast<char*>(&len), sizeof len);
    if (f.eof()) break;
    if (!f) throw FormatError("weights " + path.string() + ": truncated tensor header");
    std::string name(len, '\0');
    f.read(name.data(), len);
    const auto rank = read_pod<std::uint8_t>(f, path);
    std::vector<std::int64_t> shape;
    std::int64_t vol = 1;
    for (int i = 0; i < rank; ++i) {
      const auto e = read_pod<std::uint32_t>(f, path);
      shape.push_back(static_cast<std::int64_t>(e));
      vol *= e;
    }
    std::vector<float> data(static_cast<std::size_t>(vol));
    f.read(reinterpret_cast<char*>(data.data()),
           static_cast<std::streamsize>(data.size() * sizeof(float)));
    if (!f)
      throw FormatError("weights " + path.string() + ": truncated payload of \"" + name + "\"");
    tensors.emplace(name, Tensor(std::move(shape), std::move(data)));
  }

  ModelWeights mw = make_empty_weights(cfg);
  for_each_tensor(mw, [&](const std::string& name, auto& t) {
    auto it = tensors.find(name);
    if (it == tensors.end())
      throw FormatError("weights " + path.string() + ": missing tensor \"" + name + "\"");
    using T = std::decay_t<decltype(t)>;
    if constexpr (std::is_same_v<T, Tensor>) {
      if (!t.same_shape(it->second))
        throw FormatError("weights " + path.string() + ": tensor \"" + name + "\" has shape " +
                          shape_string(it->second.shape()) + ", expected " +
                          shape_string(t.shape()));
      t = std::move(it->second);
    } else {
      if (it->second.size() != 1)
        throw FormatError("weights " + path.string() + ": tensor \"" + name +
                          "\" must be a scalar");
      t = it->second.data()[0];
    }
    tensors.erase(it);
  });
  if (!tensors.empty())
    throw FormatError("weights " + path.string() + ": unexpected tensor \"" +
                      tensors.begin()->first + "\"");
  return mw;
}

}  // namespace raf
