#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "raf/image_io.hpp"

namespace fs = std::filesystem;
using raf::Image;

namespace {

fs::path fresh_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("raf_io_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_text_file(const fs::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::binary);
  f << s;
}

std::vector<std::uint8_t> bytes_of(const std::string& s) {
  return {s.begin(), s.end()};
}

}  // namespace

TEST_CASE("netpbm 1x1 color roundtrip") {
  Image img(1, 1, 3);
  img.pixels = {255, 0, 0};
  const auto bytes = raf::encode_image(img);
  CHECK(raf::decode_image(bytes) == img);
  CHECK(raf::encode_image(raf::decode_image(bytes)) == bytes);
}

TEST_CASE("netpbm random color roundtrip") {
  raf::Rng rng(3);
  Image img(16, 16, 3);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.next_int(0, 255));
  CHECK(raf::decode_image(raf::encode_image(img)) == img);
}

TEST_CASE("netpbm zero mask decodes empty") {
  raf::Mask m(4, 4);
  const auto bytes = raf::encode_mask(m);
  const raf::Mask back = raf::decode_mask(bytes);
  CHECK(back == m);
  CHECK(back.foreground_count() == 0);
}

TEST_CASE("netpbm mask polarity is foreground=255") {
  raf::Mask m(2, 2);
  m.set(0, 1, 1);
  const auto bytes = raf::encode_mask(m);
  const Image img = raf::decode_image(bytes);
  CHECK(img.pixels == std::vector<std::uint8_t>{0, 255, 0, 0});
  CHECK(raf::decode_mask(bytes) == m);
}

TEST_CASE("netpbm header comments are tolerated") {
  const auto bytes = bytes_of("P5\n# a comment\n2 1\n255\n\x01\x02");
  CHECK_THROWS_AS(raf::decode_mask(bytes), raf::FormatError);  // values not {0,255}
  const Image img = raf::decode_image(bytes);
  CHECK(img.width == 2);
  CHECK(img.pixels == std::vector<std::uint8_t>{1, 2});
}

TEST_CASE("netpbm decode errors carry byte offsets") {
  CHECK_THROWS_WITH_AS(raf::decode_image(bytes_of("P4\n1 1\n255\nx")),
                       doctest::Contains("offset 0"), raf::FormatError);
  CHECK_THROWS_WITH_AS(raf::decode_image(bytes_of("P6\n1 1\n254\nxxx")),
                       doctest::Contains("maxval"), raf::FormatError);
  CHECK_THROWS_WITH_AS(raf::decode_image(bytes_of("P6\n2 2\n255\nxx")),
                       doctest::Contains("truncated"), raf::FormatError);
}

TEST_CASE("nearest resize") {
  raf::Rng rng(4);
  Image img(6, 8, 3);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.next_int(0, 255));
  CHECK(raf::nearest_resize(img, 6, 8) == img);

  // Checkerboard downscale picks the top-left texel of each 2x2 block.
  Image board(4, 4, 1);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c)
      board.pixels[static_cast<std::size_t>(r * 4 + c)] = (r + c) % 2 ? 255 : 0;
  const Image half = raf::nearest_resize(board, 2, 2);
  for (auto p : half.pixels) CHECK(p == 0);

  raf::Mask m(4, 4);
  m.set(0, 0, 1);
  m.set(3, 3, 1);
  const raf::Mask big = raf::nearest_resize(m, 9, 9);
  for (auto b : big.bits) CHECK((b == 0 || b == 1));
}

TEST_CASE("manifest empty file") {
  const fs::path dir = fresh_dir("manifest_empty");
  write_text_file(dir / "m.jsonl", "");
  CHECK(raf::load_manifest(dir / "m.jsonl").empty());
}

TEST_CASE("manifest canonical roundtrip is byte-identical") {
  const fs::path dir = fresh_dir("manifest_rt");
  const std::string line =
      R"({"id":"v1","frames_dir":"f","masks_dir":"m","split":"test","mask_kind":"pws"})"
      "\n";
  write_text_file(dir / "m.jsonl", line);
  const auto entries = raf::load_manifest(dir / "m.jsonl");
  REQUIRE(entries.size() == 1);
  CHECK(entries[0].id == "v1");
  raf::write_manifest(entries, dir / "out.jsonl");
  std::ifstream f(dir / "out.jsonl", std::ios::binary);
  std::string back((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  CHECK(back == line);
}

TEST_CASE("manifest rejections") {
  const fs::path dir = fresh_dir("manifest_bad");

  write_text_file(dir / "dup.jsonl",
                  R"({"id":"a","frames_dir":"f","split":"test","mask_kind":"pp"})"
                  "\n"
                  R"({"id":"b","frames_dir":"f","split":"test","mask_kind":"pp"})"
                  "\n"
                  R"({"id":"a","frames_dir":"g","split":"test","mask_kind":"pp"})"
                  "\n");
  CHECK_THROWS_WITH_AS(raf::load_manifest(dir / "dup.jsonl"),
                       doctest::Contains("\"a\""), raf::ParseError);

  write_text_file(dir / "unknown.jsonl",
                  R"({"id":"a","frames_dir":"f","split":"test","mask_kind":"pp","extra":1})"
                  "\n");
  CHECK_THROWS_WITH_AS(raf::load_manifest(dir / "unknown.jsonl"),
                       doctest::Contains("extra"), raf::ParseError);

  write_text_file(dir / "broken.jsonl", "{\"id\": \n");
  CHECK_THROWS_WITH_AS(raf::load_manifest(dir / "broken.jsonl"),
                       doctest::Contains("line 1"), raf::ParseError);

  write_text_file(dir / "split.jsonl",
                  R"({"id":"a","frames_dir":"f","split":"dev","mask_kind":"pp"})"
                  "\n");
  CHECK_THROWS_AS(raf::load_manifest(dir / "split.jsonl"), raf::ParseError);
}

TEST_CASE("load_clip") {
  const fs::path dir = fresh_dir("clip");
  fs::create_directories(dir / "frames");
  fs::create_directories(dir / "masks");

  raf::Rng rng(5);
  std::vector<Image> frames;
  for (int i = 1; i <= 3; ++i) {
    Image img(8, 10, 3);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.next_int(0, 255));
    char name[16];
    std::snprintf(name, sizeof name, "%05d.ppm", i);
    raf::write_file(dir / "frames" / name, raf::encode_image(img));
    frames.push_back(std::move(img));

    raf::Mask m(8, 10);
    m.set(i, i, 1);
    std::snprintf(name, sizeof name, "%05d.pgm", i);
    raf::write_file(dir / "masks" / name, raf::encode_mask(m));
  }

  raf::ClipManifestEntry entry;
  entry.id = "c";
  entry.frames_dir = "frames";
  entry.masks_dir = "masks";

  SUBCASE("native load keeps values") {
    const raf::Clip clip = raf::load_clip(entry, dir, std::nullopt);
    CHECK(clip.frames.shape() == std::vector<std::int64_t>{3, 8, 10, 3});
    REQUIRE(clip.masks.has_value());
    CHECK(clip.masks->frames.size() == 3);
    for (std::int64_t t = 0; t < 3; ++t)
      for (std::int64_t i = 0; i < 8 * 10 * 3; ++i)
        CHECK(clip.frames.data()[t * 8 * 10 * 3 + i] ==
              static_cast<float>(frames[static_cast<std::size_t>(t)]
                                     .pixels[static_cast<std::size_t>(i)]));
  }

  SUBCASE("load at identical target changes nothing") {
    const raf::Clip clip = raf::load_clip(entry, dir, std::pair{8, 10});
    for (std::int64_t i = 0; i < 8 * 10 * 3; ++i)
      CHECK(clip.frames.data()[i] ==
            static_cast<float>(frames[0].pixels[static_cast<std::size_t>(i)]));
  }

  SUBCASE("mask binarity survives resize") {
    const raf::Clip clip = raf::load_clip(entry, dir, std::pair{16, 24});
    for (const raf::Mask& m : clip.masks->frames)
      for (auto b : m.bits) CHECK((b == 0 || b == 1));
  }

  SUBCASE("count mismatch is reported") {
    fs::remove(dir / "masks" / "00003.pgm");
    CHECK_THROWS_WITH_AS(raf::load_clip(entry, dir, std::nullopt),
                         doctest::Contains("masks"), raf::IoError);
  }

  SUBCASE("missing index is named") {
    fs::remove(dir / "frames" / "00002.ppm");
    CHECK_THROWS_WITH_AS(raf::load_clip(entry, dir, std::nullopt),
                         doctest::Contains("index 2"), raf::IoError);
  }
}
