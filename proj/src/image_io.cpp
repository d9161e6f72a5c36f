#include "raf/image_io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace raf {

namespace {

using ordered_json = nlohmann::ordered_json;

struct HeaderReader {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError("netpbm: " + what + " at byte offset " + std::to_string(pos));
  }

  void skip_space_and_comments() {
    while (pos < bytes.size()) {
      const char c = static_cast<char>(bytes[pos]);
      if (c == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        ++pos;
      } else {
        break;
      }
    }
  }

  int read_int() {
    skip_space_and_comments();
    if (pos >= bytes.size()) fail("truncated header");
    if (!std::isdigit(bytes[pos])) fail("expected integer");
    long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos] - '0');
      if (v > 1'000'000) fail("header value too large");
      ++pos;
    }
    return static_cast<int>(v);
  }
};

Image decode_netpbm(std::span<const std::uint8_t> bytes) {
  HeaderReader r{bytes};
  if (bytes.size() < 2) r.fail("truncated magic");
  const char m0 = static_cast<char>(bytes[0]), m1 = static_cast<char>(bytes[1]);
  if (m0 != 'P' || (m1 != '5' && m1 != '6'))
    throw FormatError("netpbm: bad magic at byte offset 0");
  const int channels = m1 == '6' ? 3 : 1;
  r.pos = 2;
  const int width = r.read_int();
  const int height = r.read_int();
  const int maxval = r.read_int();
  if (width < 1 || height < 1) r.fail("non-positive dimensions");
  if (maxval != 255)
    throw FormatError("netpbm: maxval must be 255, got " + std::to_string(maxval) +
                      " at byte offset " + std::to_string(r.pos));
  if (r.pos >= bytes.size()) r.fail("truncated payload");
  ++r.pos;  // single whitespace byte after maxval

  const std::size_t need = static_cast<std::size_t>(width) * height * channels;
  if (bytes.size() - r.pos < need)
    throw FormatError("netpbm: truncated payload, need " + std::to_string(need) +
                      " bytes at byte offset " + std::to_string(r.pos));
  Image img(height, width, channels);
  std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(r.pos), need, img.pixels.begin());
  return img;
}

std::vector<std::uint8_t> encode_netpbm(const Image& img) {
  if (img.channels != 1 && img.channels != 3)
    throw ArgumentError("encode_image: channels must be 1 or 3");
  std::string header = std::string(img.channels == 3 ? "P6" : "P5") + "\n" +
                       std::to_string(img.width) + " " + std::to_string(img.height) +
                       "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

std::filesystem::path resolve_dir(const std::string& dir,
                                  const std::filesystem::path& base) {
  std::filesystem::path p(dir);
  return p.is_absolute() ? p : base / p;
}

std::string frame_name(int index, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05d%s", index, ext);
  return buf;
}

}  // namespace

Image decode_image(std::span<const std::uint8_t> bytes) { return decode_netpbm(bytes); }

std::vector<std::uint8_t> encode_image(const Image& img) { return encode_netpbm(img); }

Mask decode_mask(std::span<const std::uint8_t> bytes) {
  const Image img = decode_netpbm(bytes);
  if (img.channels != 1) throw FormatError("netpbm: mask must be P5 gray");
  Mask mask(img.height, img.width);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const std::uint8_t v = img.pixels[i];
    if (v != 0 && v != 255)
      throw FormatError("netpbm: mask value " + std::to_string(v) +
                        " outside {0,255} at pixel " + std::to_string(i));
    mask.bits[i] = v == 255 ? 1 : 0;
  }
  return mask;
}

std::vector<std::uint8_t> encode_mask(const Mask& mask) {
  Image img(mask.height, mask.width, 1);
  for (std::size_t i = 0; i < mask.bits.size(); ++i)
    img.pixels[i] = mask.bits[i] ? 255 : 0;
  return encode_netpbm(img);
}

Tensor image_to_tensor(const Image& img) {
  Tensor t({img.height, img.width, img.channels});
  float* o = t.data();
  for (std::size_t i = 0; i < img.pixels.size(); ++i) o[i] = img.pixels[i];
  return t;
}

Image tensor_to_image(const Tensor& t) {
  if (t.rank() != 3) throw DimensionError("tensor_to_image expects HxWxC, got " + shape_string(t.shape()));
  Image img(static_cast<int>(t.extent(0)), static_cast<int>(t.extent(1)),
            static_cast<int>(t.extent(2)));
  const float* in = t.data();
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const float v = std::round(std::clamp(in[i], 0.0f, 255.0f));
    img.pixels[i] = static_cast<std::uint8_t>(v);
  }
  return img;
}

Image nearest_resize(const Image& img, int target_h, int target_w) {
  if (target_h < 1 || target_w < 1) throw ArgumentError("nearest_resize: target extents must be positive");
  Image out(target_h, target_w, img.channels);
  for (int r = 0; r < target_h; ++r) {
    const int sr = static_cast<int>(static_cast<std::int64_t>(r) * img.height / target_h);
    for (int c = 0; c < target_w; ++c) {
      const int sc = static_cast<int>(static_cast<std::int64_t>(c) * img.width / target_w);
      const std::uint8_t* src =
          img.pixels.data() + (static_cast<std::size_t>(sr) * img.width + sc) * img.channels;
      std::uint8_t* dst =
          out.pixels.data() + (static_cast<std::size_t>(r) * target_w + c) * img.channels;
      std::copy(src, src + img.channels, dst);
    }
  }
  return out;
}

Mask nearest_resize(const Mask& mask, int target_h, int target_w) {
  if (target_h < 1 || target_w < 1) throw ArgumentError("nearest_resize: target extents must be positive");
  Mask out(target_h, target_w);
  for (int r = 0; r < target_h; ++r) {
    const int sr = static_cast<int>(static_cast<std::int64_t>(r) * mask.height / target_h);
    for (int c = 0; c < target_w; ++c) {
      const int sc = static_cast<int>(static_cast<std::int64_t>(c) * mask.width / target_w);
      out.set(r, c, mask.get(sr, sc));
    }
  }
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("short write to " + path.string());
}

std::vector<ClipManifestEntry> load_manifest(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open manifest " + path.string());

  static const std::set<std::string> known = {"id", "frames_dir", "masks_dir", "split",
                                              "mask_kind"};
  std::vector<ClipManifestEntry> entries;
  std::set<std::string> ids;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("manifest line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!j.is_object())
      throw ParseError("manifest line " + std::to_string(lineno) + ": expected an object");
    for (const auto& [key, _] : j.items())
      if (!known.count(key))
        throw ParseError("manifest line " + std::to_string(lineno) + ": unknown field \"" +
                         key + "\"");

    ClipManifestEntry e;
    try {
      e.id = j.at("id").get<std::string>();
      e.frames_dir = j.at("frames_dir").get<std::string>();
      if (j.contains("masks_dir")) e.masks_dir = j["masks_dir"].get<std::string>();
      e.split = j.at("split").get<std::string>();
      e.mask_kind = j.at("mask_kind").get<std::string>();
    } catch (const nlohmann::json::exception& e2) {
      throw ParseError("manifest line " + std::to_string(lineno) + ": " + e2.what());
    }
    if (e.split != "train" && e.split != "test")
      throw ParseError("manifest line " + std::to_string(lineno) + ": split must be train|test");
    if (e.mask_kind != "authentic" && e.mask_kind != "pws" && e.mask_kind != "pp")
      throw ParseError("manifest line " + std::to_string(lineno) +
                       ": mask_kind must be authentic|pws|pp");
    if (!ids.insert(e.id).second)
      throw ParseError("manifest: duplicate id \"" + e.id + "\" at line " +
                       std::to_string(lineno));
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_manifest(const std::vector<ClipManifestEntry>& entries,
                    const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open manifest " + path.string() + " for writing");
  for (const auto& e : entries) {
    ordered_json j;
    j["id"] = e.id;
    j["frames_dir"] = e.frames_dir;
    if (e.masks_dir) j["masks_dir"] = *e.masks_dir;
    j["split"] = e.split;
    j["mask_kind"] = e.mask_kind;
    f << j.dump() << "\n";
  }
  if (!f) throw IoError("short write to " + path.string());
}

Clip load_clip(const ClipManifestEntry& entry, const std::filesystem::path& base_dir,
               std::optional<std::pair<int, int>> target) {
  namespace fs = std::filesystem;
  const fs::path frames_dir = resolve_dir(entry.frames_dir, base_dir);

  auto list_numbered = [&](const fs::path& dir, const char* ext) {
    if (!fs::is_directory(dir)) throw IoError("clip " + entry.id + ": " + dir.string() + " is not a directory");
    int count = 0;
    for (const auto& de : fs::directory_iterator(dir))
      if (de.is_regular_file() && de.path().extension() == ext) ++count;
    std::vector<fs::path> files;
    for (int i = 1; i <= count; ++i) {
      fs::path p = dir / frame_name(i, ext);
      if (!fs::exists(p))
        throw IoError("clip " + entry.id + ": missing file index " + std::to_string(i) +
                      " (" + p.string() + ")");
      files.push_back(std::move(p));
    }
    return files;
  };

  const auto frame_files = list_numbered(frames_dir, ".ppm");
  if (frame_files.empty()) throw IoError("clip " + entry.id + ": no frames in " + frames_dir.string());

  std::vector<Image> images;
  images.reserve(frame_files.size());
  for (const auto& p : frame_files) {
    Image img = decode_image(read_file(p));
    if (img.channels != 3) throw FormatError("clip " + entry.id + ": " + p.string() + " is not P6 color");
    if (target) img = nearest_resize(img, target->first, target->second);
    images.push_back(std::move(img));
  }
  const int h = images[0].height, w = images[0].width;
  for (std::size_t i = 1; i < images.size(); ++i)
    if (images[i].height != h || images[i].width != w)
      throw DimensionError("clip " + entry.id + ": frame " + std::to_string(i + 1) +
                           " resolution differs");

  Clip clip;
  clip.frames = Tensor({static_cast<std::int64_t>(images.size()), h, w, 3});
  float* o = clip.frames.data();
  for (const auto& img : images) {
    for (std::size_t i = 0; i < img.pixels.size(); ++i) o[i] = img.pixels[i];
    o += img.pixels.size();
  }

  if (entry.masks_dir) {
    const fs::path masks_dir = resolve_dir(*entry.masks_dir, base_dir);
    const auto mask_files = list_numbered(masks_dir, ".pgm");
    if (mask_files.size() != frame_files.size())
      throw IoError("clip " + entry.id + ": " + std::to_string(mask_files.size()) +
                    " masks vs " + std::to_string(frame_files.size()) + " frames");
    MaskSequence seq;
    for (const auto& p : mask_files) {
      Mask m = decode_mask(read_file(p));
      if (target) m = nearest_resize(m, target->first, target->second);
      if (m.height != h || m.width != w)
        throw DimensionError("clip " + entry.id + ": mask " + p.string() +
                             " resolution differs from frames");
      seq.frames.push_back(std::move(m));
      seq.motion_log.emplace_back(0, 0);
    }
    clip.masks = std::move(seq);
  }
  return clip;
}

}  // namespace raf
