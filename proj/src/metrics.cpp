#include "raf/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace raf {

namespace {

double mse_region(const Tensor& y, const Tensor& x, std::int64_t row0, std::int64_t col0,
                  std::int64_t rows, std::int64_t cols) {
  const std::int64_t w = y.extent(1), c = y.extent(2);
  const float* py = y.data();
  const float* px = x.data();
  double acc = 0.0;
  for (std::int64_t r = row0; r < row0 + rows; ++r)
    for (std::int64_t j = col0; j < col0 + cols; ++j) {
      const std::int64_t base = (r * w + j) * c;
      for (std::int64_t ch = 0; ch < c; ++ch) {
        const double d = static_cast<double>(py[base + ch]) - static_cast<double>(px[base + ch]);
        acc += d * d;
      }
    }
  return acc / (static_cast<double>(rows) * cols * c);
}

double psnr_from_mse(double mse) {
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / mse));
}

// 11-tap Gaussian, sigma 1.5, normalized to sum 1.
std::array<double, 11> gaussian_window() {
  std::array<double, 11> g{};
  double sum = 0.0;
  for (int i = 0; i < 11; ++i) {
    const double d = i - 5.0;
    g[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
    sum += g[static_cast<std::size_t>(i)];
  }
  for (double& v : g) v /= sum;
  return g;
}

// Separable valid-mode Gaussian filter of one channel plane.
std::vector<double> gauss_valid(const std::vector<double>& plane, std::int64_t h,
                                std::int64_t w) {
  static const std::array<double, 11> g = gaussian_window();
  const std::int64_t ow = w - 10;
  std::vector<double> rows(static_cast<std::size_t>(h * ow));
  for (std::int64_t r = 0; r < h; ++r)
    for (std::int64_t c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (int t = 0; t < 11; ++t) acc += g[static_cast<std::size_t>(t)] * plane[static_cast<std::size_t>(r * w + c + t)];
      rows[static_cast<std::size_t>(r * ow + c)] = acc;
    }
  const std::int64_t oh = h - 10;
  std::vector<double> out(static_cast<std::size_t>(oh * ow));
  for (std::int64_t r = 0; r < oh; ++r)
    for (std::int64_t c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (int t = 0; t < 11; ++t) acc += g[static_cast<std::size_t>(t)] * rows[static_cast<std::size_t>((r + t) * ow + c)];
      out[static_cast<std::size_t>(r * ow + c)] = acc;
    }
  return out;
}

double ssim_channel(const std::vector<double>& x, const std::vector<double>& y,
                    std::int64_t h, std::int64_t w) {
  constexpr double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  constexpr double c2 = (0.03 * 255.0) * (0.03 * 255.0);

  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mu_x = gauss_valid(x, h, w);
  const auto mu_y = gauss_valid(y, h, w);
  const auto m_xx = gauss_valid(xx, h, w);
  const auto m_yy = gauss_valid(yy, h, w);
  const auto m_xy = gauss_valid(xy, h, w);

  double acc = 0.0;
  for (std::size_t i = 0; i < mu_x.size(); ++i) {
    const double vx = m_xx[i] - mu_x[i] * mu_x[i];
    const double vy = m_yy[i] - mu_y[i] * mu_y[i];
    const double cov = m_xy[i] - mu_x[i] * mu_y[i];
    const double num = (2.0 * mu_x[i] * mu_y[i] + c1) * (2.0 * cov + c2);
    const double den = (mu_x[i] * mu_x[i] + mu_y[i] * mu_y[i] + c1) * (vx + vy + c2);
    acc += num / den;
  }
  return acc / static_cast<double>(mu_x.size());
}

void check_pair(const Tensor& y, const Tensor& x, const char* op) {
  if (!y.same_shape(x))
    throw ArgumentError(std::string(op) + ": shape mismatch " + shape_string(y.shape()) +
                        " vs " + shape_string(x.shape()));
}

Tensor frame_of(const Tensor& seq, std::int64_t t) {
  const std::int64_t h = seq.extent(1), w = seq.extent(2), c = seq.extent(3);
  Tensor f({h, w, c});
  std::copy_n(seq.data() + t * h * w * c, h * w * c, f.data());
  return f;
}

std::string format4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

double psnr(const Tensor& y, const Tensor& x) {
  check_pair(y, x, "psnr");
  if (y.rank() != 3) throw ArgumentError("psnr expects HxWxC images, got " + shape_string(y.shape()));
  return psnr_from_mse(mse_region(y, x, 0, 0, y.extent(0), y.extent(1)));
}

std::optional<double> psnr_star(const Tensor& y_seq, const Tensor& x_seq,
                                const MaskSequence& masks) {
  check_pair(y_seq, x_seq, "psnr_star");
  if (y_seq.rank() != 4)
    throw ArgumentError("psnr_star expects TxHxWxC sequences, got " + shape_string(y_seq.shape()));
  const std::int64_t t_count = y_seq.extent(0);
  if (static_cast<std::int64_t>(masks.frames.size()) != t_count)
    throw ArgumentError("psnr_star: " + std::to_string(masks.frames.size()) + " masks vs " +
                        std::to_string(t_count) + " frames");

  double sum = 0.0;
  std::int64_t boxes = 0;
  for (std::int64_t t = 0; t < t_count; ++t) {
    const Mask& m = masks.frames[static_cast<std::size_t>(t)];
    if (m.height != y_seq.extent(1) || m.width != y_seq.extent(2))
      throw ArgumentError("psnr_star: mask resolution differs from frames");
    const Tensor yf = frame_of(y_seq, t);
    const Tensor xf = frame_of(x_seq, t);
    for (const Rect& box : bounding_boxes(m)) {
      sum += psnr_from_mse(mse_region(yf, xf, box.row, box.col, box.height, box.width));
      ++boxes;
    }
  }
  if (boxes == 0) return std::nullopt;
  return sum / static_cast<double>(boxes);
}

double ssim(const Tensor& y, const Tensor& x) {
  check_pair(y, x, "ssim");
  if (y.rank() != 3) throw ArgumentError("ssim expects HxWxC images, got " + shape_string(y.shape()));
  const std::int64_t h = y.extent(0), w = y.extent(1), c = y.extent(2);
  if (h < 11 || w < 11)
    throw ArgumentError("ssim: image " + shape_string(y.shape()) +
                        " smaller than the 11x11 window");
  double acc = 0.0;
  std::vector<double> px(static_cast<std::size_t>(h * w)), py(px.size());
  for (std::int64_t ch = 0; ch < c; ++ch) {
    const float* fx = x.data();
    const float* fy = y.data();
    for (std::int64_t i = 0; i < h * w; ++i) {
      px[static_cast<std::size_t>(i)] = fx[i * c + ch];
      py[static_cast<std::size_t>(i)] = fy[i * c + ch];
    }
    acc += ssim_channel(px, py, h, w);
  }
  return acc / static_cast<double>(c);
}

MetricRow evaluate_clip(const std::string& video_id, const Tensor& y_seq,
                        const Tensor& x_seq, const MaskSequence* masks) {
  check_pair(y_seq, x_seq, "evaluate_clip");
  if (y_seq.rank() != 4)
    throw ArgumentError("evaluate_clip expects TxHxWxC sequences, got " +
                        shape_string(y_seq.shape()));
  const std::int64_t t_count = y_seq.extent(0);
  MetricRow row;
  row.video_id = video_id;
  double psnr_acc = 0.0, ssim_acc = 0.0;
  for (std::int64_t t = 0; t < t_count; ++t) {
    const Tensor yf = frame_of(y_seq, t);
    const Tensor xf = frame_of(x_seq, t);
    psnr_acc += psnr(yf, xf);
    ssim_acc += ssim(yf, xf);
  }
  row.psnr = psnr_acc / static_cast<double>(t_count);
  row.ssim = ssim_acc / static_cast<double>(t_count);
  if (masks) row.psnr_star = psnr_star(y_seq, x_seq, *masks);
  return row;
}

MetricReport aggregate(const std::vector<MetricRow>& rows) {
  if (rows.empty()) throw ArgumentError("aggregate: no rows");
  MetricReport rep;
  rep.rows = rows;
  double psnr_acc = 0.0, ssim_acc = 0.0, star_acc = 0.0;
  std::int64_t star_count = 0;
  for (const MetricRow& r : rows) {
    psnr_acc += r.psnr;
    ssim_acc += r.ssim;
    if (r.psnr_star) {
      star_acc += *r.psnr_star;
      ++star_count;
    }
  }
  rep.mean_psnr = psnr_acc / static_cast<double>(rows.size());
  rep.mean_ssim = ssim_acc / static_cast<double>(rows.size());
  if (star_count > 0) rep.mean_psnr_star = star_acc / static_cast<double>(star_count);
  return rep;
}

void write_csv(const MetricReport& report, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << "video_id,psnr,psnr_star,ssim\n";
  auto emit = [&](const std::string& id, double p, const std::optional<double>& star,
                  double s) {
    f << id << "," << format4(p) << "," << (star ? format4(*star) : "") << ","
      << format4(s) << "\n";
  };
  for (const MetricRow& r : report.rows) emit(r.video_id, r.psnr, r.psnr_star, r.ssim);
  emit("AGGREGATE", report.mean_psnr, report.mean_psnr_star, report.mean_ssim);
  if (!f) throw IoError("short write to " + path.string());
}

MetricReport read_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(f, line) || line != "video_id,psnr,psnr_star,ssim")
    throw ParseError(path.string() + ": bad metrics CSV header");

  std::vector<MetricRow> rows;
  std::optional<MetricRow> agg;
  int lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string id, p, star, s;
    if (!std::getline(ss, id, ',') || !std::getline(ss, p, ',') ||
        !std::getline(ss, star, ',') || !std::getline(ss, s))
      throw ParseError(path.string() + " line " + std::to_string(lineno) + ": expected 4 fields");
    MetricRow row;
    row.video_id = id;
    try {
      row.psnr = std::stod(p);
      if (!star.empty()) row.psnr_star = std::stod(star);
      row.ssim = std::stod(s);
    } catch (const std::exception&) {
      throw ParseError(path.string() + " line " + std::to_string(lineno) + ": bad number");
    }
    if (id == "AGGREGATE")
      agg = row;
    else
      rows.push_back(std::move(row));
  }
  if (!agg) throw ParseError(path.string() + ": missing AGGREGATE row");
  if (rows.empty()) throw ParseError(path.string() + ": no per-video rows");

  MetricReport rep = aggregate(rows);
  // Keep the file's aggregate (it is recomputable, but trust the source).
  rep.mean_psnr = agg->psnr;
  rep.mean_psnr_star = agg->psnr_star;
  rep.mean_ssim = agg->ssim;
  return rep;
}

}  // namespace raf
