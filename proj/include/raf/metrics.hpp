#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "raf/mask.hpp"
#include "raf/tensor.hpp"

namespace raf {

// Zero-MSE cap; keeps identical images finite in reports.
inline constexpr double kPsnrCap = 99.0;

struct MetricRow {
  std::string video_id;
  double psnr = 0.0;
  std::optional<double> psnr_star;
  double ssim = 0.0;
};

struct MetricReport {
  std::vector<MetricRow> rows;
  double mean_psnr = 0.0;
  std::optional<double> mean_psnr_star;
  double mean_ssim = 0.0;
};

// 10*log10(255^2 / MSE) over all pixels/channels of two equal-shape 8-bit
// scale images; MSE == 0 caps at 99 dB.
double psnr(const Tensor& y, const Tensor& x);

// PSNR averaged over the tight bounding rectangles of each frame's mask
// components; absent when no frame has any foreground.
std::optional<double> psnr_star(const Tensor& y_seq, const Tensor& x_seq,
                                const MaskSequence& masks);

// Mean local SSIM, 11x11 Gaussian window sigma 1.5, C1=(0.01*255)^2,
// C2=(0.03*255)^2, per channel then averaged. Extents must be >= 11.
double ssim(const Tensor& y, const Tensor& x);

// Per-video metrics for a T x H x W x C pair: psnr/ssim are means over
// frames, psnr_star runs over mask component boxes when masks are given.
MetricRow evaluate_clip(const std::string& video_id, const Tensor& y_seq,
                        const Tensor& x_seq, const MaskSequence* masks);

MetricReport aggregate(const std::vector<MetricRow>& rows);

// CSV: header video_id,psnr,psnr_star,ssim; 4 decimals; absent psnr_star as
// an empty field; final AGGREGATE row.
void write_csv(const MetricReport& report, const std::filesystem::path& path);
MetricReport read_csv(const std::filesystem::path& path);

}  // namespace raf
