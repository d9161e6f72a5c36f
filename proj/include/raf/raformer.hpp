#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "raf/mask.hpp"
#include "raf/tensor.hpp"

namespace raf {

// Architecture hyperparameters. Defaults give the production geometry:
// 5-frame clips at 432x240, 8 layers, and a 10x12 window on the 60x108
// feature grid (54 windows per frame, half of them kept).
struct RaformerConfig {
  int frames = 5;    // T
  int height = 240;  // H, divisible by 8
  int width = 432;   // W, divisible by 8
  int channels = 64;  // C
  int win_h = 10;     // window extents on the (H/4) x (W/4) grid
  int win_w = 12;
  int keep = 0;  // k, kept windows per frame; 0 resolves to n/2
  int layers = 8;
  int heads = 4;
  int embed_dim = 512;  // token width inside the transformer sub-block
  int ffn_dim = 2048;
  int ss_kernel = 7;  // block-input soft split geometry
  int ss_stride = 3;
  int ss_pad = 3;
  double beta = 1.0;   // merge weight of the aligned non-redundant features
  double gamma = 1.0;  // merge weight of the transformer features
  double leaky_slope = 0.2;
  std::uint64_t seed = 0;

  int grid_h() const { return height / 4; }
  int grid_w() const { return width / 4; }
  int windows_per_frame() const {
    return (grid_h() / win_h) * (grid_w() / win_w);
  }
  // g = max(1, 4k/n); throws ConfigError when 4k/n > 1 is fractional.
  int group_count() const;
  void validate() const;
};

// Copy with keep materialized (0 -> n/2) and all invariants checked.
RaformerConfig resolved(RaformerConfig cfg);

// Partitioned feature windows with their grid geometry. `windows` holds
// T x n x (h*w) x C before selection and T x k x (h*w) x C after; `kept`
// lists each frame's retained window indices in ascending order.
struct WindowSet {
  Tensor windows;
  int grid_rows = 0;
  int grid_cols = 0;
  int win_h = 0;
  int win_w = 0;
  std::vector<std::vector<int>> kept;
};

// Learnable tensors of one layer.
struct LayerWeights {
  // Transformer sub-block (token space).
  Tensor ss_proj, ss_proj_b;  // (kernel^2*C) x E, E
  Tensor sc_proj;             // E x (kernel^2*C); bias-free so the token
                              // update vanishes with zero MSA/FFN weights
  Tensor ln1_scale, ln1_shift, ln2_scale, ln2_shift;  // E
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;              // E x E, E
  Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;              // E x F, F, F x E, E
  // Redundancy scoring.
  Tensor lnq_scale, lnq_shift, lnk_scale, lnk_shift;  // C
  // Feature alignment.
  Tensor sfa_conv1_k, sfa_conv1_b;    // 3 x 3 x (g*C) x C, C
  Tensor sfa_conv2_k, sfa_conv2_b;    // 3 x 3 x C x C, C
  Tensor sfa_ss_proj, sfa_ss_proj_b;  // (9*C) x C, C
  float beta = 1.0f;
  float gamma = 1.0f;
};

struct ModelWeights {
  RaformerConfig config;
  Tensor enc1_k, enc1_b, enc2_k, enc2_b;  // 3x3 stride-2 convs, 3 -> mid -> C
  Tensor dec1_k, dec1_b, dec2_k, dec2_b;  // upsample convs, C -> mid -> 3
  std::vector<LayerWeights> layers;
};

// Per-layer kept-window indices and wall-clock timings of one forward pass.
struct ForwardTrace {
  std::vector<std::vector<std::vector<int>>> kept;  // layer -> frame -> indices
  std::vector<double> layer_ms;
};

// Overlapping patch extraction with zero padding: T x H' x W' x C ->
// T x N x (kernel^2*C), token entries laid out (ky, kx, c).
Tensor soft_split(const Tensor& feature, int kernel, int stride, int pad);

// Overlap-add inverse of soft_split, normalized by per-pixel cover counts so
// that soft_composite(soft_split(f)) == f.
Tensor soft_composite(const Tensor& tokens, int out_h, int out_w, int channels,
                      int kernel, int stride, int pad);

// Pre-norm residual MSA + FFN over the soft-split token grid, joint across
// all frames; the token-space update is composited back onto the input:
// F* = F_prev + SC((u_out - u_in) W_sc).
Tensor transformer_block(const Tensor& f_prev, const LayerWeights& lw,
                         const RaformerConfig& cfg);

// Lossless rearrangement into n = (H/4 * W/4)/(h*w) windows per frame, in
// row-major grid order.
WindowSet window_partition(const Tensor& f_star, int win_h, int win_w);

// Inverse rearrangement; requires an unselected (n-window) set.
Tensor window_unpartition(const WindowSet& ws);

// Window means -> LN_Q/LN_K -> softmax(Q K^T) over all T*n coarse tokens;
// a window's importance is the attention it receives (column sum).
Tensor window_importance(const WindowSet& ws, const LayerWeights& lw);

// Keeps each frame's k highest-scoring windows (ties toward lower index),
// recorded in ascending index order.
WindowSet select_topk_windows(const WindowSet& ws, const Tensor& scores, int k);

// Packs kept windows, in ascending original-index order, row-major into
// `groups` maps of (H/8) x (W/8) positions per frame; when the kept content
// underfills a single group it is tiled cyclically.
Tensor reverse_pack(const WindowSet& wnr, int groups);

// Group concat -> nearest 2x upsample -> conv -> LeakyReLU -> conv ->
// 3x3/1/1 neighborhood re-split projected back to C channels.
Tensor sfa_align(const Tensor& f_alpha, const LayerWeights& lw,
                 const RaformerConfig& cfg);

// One full layer: transformer block, redundancy-aware selection, feature
// alignment, then F_n = beta * F_NR + gamma * F_star.
Tensor raformer_layer(const Tensor& f_prev, const LayerWeights& lw,
                      const RaformerConfig& cfg,
                      std::vector<std::vector<int>>* kept_out = nullptr);

// Zeroes masked pixels, then two stride-2 convolutions down to the
// T x (H/4) x (W/4) x C feature grid. Frames are 8-bit scale, scaled to
// [0, 1] internally; masks may be null (no holes).
Tensor encode_frames(const Tensor& clip, const MaskSequence* masks,
                     const ModelWeights& mw);

// Two upsample+conv stages back to T x H x W x 3 (unit scale).
Tensor decode_features(const Tensor& features, const ModelWeights& mw);

// encode -> `layers` raformer layers -> decode.
Tensor run_raformer(const Tensor& clip, const MaskSequence* masks,
                    const ModelWeights& mw, ForwardTrace* trace = nullptr);

// Deterministic init from cfg.seed: every learnable tensor is drawn
// uniform [-0.02, 0.02] in a fixed order, except LayerNorm scales (1) and
// shifts (0); beta/gamma come from the config.
ModelWeights init_weights(const RaformerConfig& cfg);

// Flat binary container: magic RAFW, version u32, length-prefixed config
// JSON, then named tensors (name length u16, name bytes, rank u8, extents
// u32 each, little-endian f32 payload) until end of file.
void save_weights(const ModelWeights& mw, const std::filesystem::path& path);
ModelWeights load_weights(const std::filesystem::path& path);

}  // namespace raf
