#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "raf/mask.hpp"
#include "raf/tensor.hpp"

namespace raf {

// 8-bit image, channels = 1 (gray) or 3 (color), row-major interleaved.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int h, int w, int c)
      : height(h), width(w), channels(c),
        pixels(static_cast<std::size_t>(h) * w * c, 0) {}
  bool operator==(const Image&) const = default;
};

// Binary netpbm, maxval 255: P6 for color, P5 for gray. Decode errors carry
// the byte offset of the offending header token or payload truncation.
Image decode_image(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_image(const Image& img);

// P5 payload with values strictly in {0, 255}; 255 decodes to foreground.
Mask decode_mask(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_mask(const Mask& mask);

Tensor image_to_tensor(const Image& img);        // HxWxC floats in [0, 255]
Image tensor_to_image(const Tensor& t);          // clamp + round to bytes

Image nearest_resize(const Image& img, int target_h, int target_w);
Mask nearest_resize(const Mask& mask, int target_h, int target_w);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

struct ClipManifestEntry {
  std::string id;
  std::string frames_dir;
  std::optional<std::string> masks_dir;
  std::string split = "test";        // train | test
  std::string mask_kind = "pws";     // authentic | pws | pp
  bool operator==(const ClipManifestEntry&) const = default;
};

struct Clip {
  Tensor frames;  // T x H x W x 3, 8-bit-origin floats in [0, 255]
  std::optional<MaskSequence> masks;
};

// Line-oriented JSON manifest; strict fields, duplicate ids rejected.
std::vector<ClipManifestEntry> load_manifest(const std::filesystem::path& path);
void write_manifest(const std::vector<ClipManifestEntry>& entries,
                    const std::filesystem::path& path);

// Loads `%05d.ppm` frames (and `%05d.pgm` masks when masks_dir is set),
// resized to target via nearest-neighbor when target is given. Relative
// directories resolve against base_dir.
Clip load_clip(const ClipManifestEntry& entry, const std::filesystem::path& base_dir,
               std::optional<std::pair<int, int>> target);

}  // namespace raf
