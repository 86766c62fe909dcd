#include "nelf/image.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>

#include "nelf/serialize.hpp"

namespace nelf {

Image from_tensor(const Tensor3& t) {
  Image img(t.h, t.w, t.c);
  for (int c = 0; c < t.c; ++c)
    for (int y = 0; y < t.h; ++y)
      for (int x = 0; x < t.w; ++x) img.at(y, x, c) = static_cast<float>(t.at(c, y, x));
  return img;
}

Tensor3 to_tensor(const Image& img) {
  Tensor3 t(img.channels, img.height, img.width);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) t.at(c, y, x) = img.at(y, x, c);
  return t;
}

namespace {

void push_u32(std::vector<unsigned char>& out, uint32_t v) {
  out.push_back(static_cast<unsigned char>(v >> 24));
  out.push_back(static_cast<unsigned char>(v >> 16));
  out.push_back(static_cast<unsigned char>(v >> 8));
  out.push_back(static_cast<unsigned char>(v));
}

void push_chunk(std::vector<unsigned char>& out, const char type[4],
                const std::vector<unsigned char>& payload) {
  push_u32(out, static_cast<uint32_t>(payload.size()));
  const size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), payload.begin(), payload.end());
  const uint32_t crc = static_cast<uint32_t>(
      crc32(0L, out.data() + start, static_cast<uInt>(out.size() - start)));
  push_u32(out, crc);
}

unsigned char quantize(float v) {
  const double scaled = std::floor(static_cast<double>(v) * 255.0 + 0.5);
  return static_cast<unsigned char>(std::min(255.0, std::max(0.0, scaled)));
}

}  // namespace

void write_png(const Image& img, const std::string& path) {
  check(img.channels == 3, "write_png: expected 3 channels");
  const int h = img.height, w = img.width;

  // Scanlines with filter byte 0.
  std::vector<unsigned char> raw(size_t(h) * (size_t(w) * 3 + 1));
  size_t p = 0;
  for (int y = 0; y < h; ++y) {
    raw[p++] = 0;
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) raw[p++] = quantize(img.at(y, x, c));
  }

  uLongf comp_cap = compressBound(static_cast<uLong>(raw.size()));
  std::vector<unsigned char> comp(comp_cap);
  if (compress2(comp.data(), &comp_cap, raw.data(), static_cast<uLong>(raw.size()), 6) !=
      Z_OK)
    throw IoError("write_png: zlib compression failed");
  comp.resize(comp_cap);

  std::vector<unsigned char> png = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  std::vector<unsigned char> ihdr;
  push_u32(ihdr, static_cast<uint32_t>(w));
  push_u32(ihdr, static_cast<uint32_t>(h));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // color type: truecolor
  ihdr.push_back(0);   // compression
  ihdr.push_back(0);   // filter
  ihdr.push_back(0);   // no interlace
  push_chunk(png, "IHDR", ihdr);
  push_chunk(png, "IDAT", comp);
  push_chunk(png, "IEND", {});

  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("write_png: cannot open " + path);
  os.write(reinterpret_cast<const char*>(png.data()),
           static_cast<std::streamsize>(png.size()));
  if (!os) throw IoError("write_png: write failed for " + path);
}

void write_lavimg(const Image& img, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("write_lavimg: cannot open " + path);
  os.write("LAVIMG1", 7);
  write_le<uint32_t>(os, static_cast<uint32_t>(img.height));
  write_le<uint32_t>(os, static_cast<uint32_t>(img.width));
  write_le<uint32_t>(os, static_cast<uint32_t>(img.channels));
  write_bytes(os, img.data.data(), img.data.size() * sizeof(float));
  if (!os) throw IoError("write_lavimg: write failed for " + path);
}

Image read_lavimg(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("read_lavimg: cannot open " + path);
  char magic[7];
  read_bytes(is, magic, 7, "lavimg magic");
  if (std::memcmp(magic, "LAVIMG1", 7) != 0)
    throw IoError("read_lavimg: bad magic in " + path);
  const auto h = read_le<uint32_t>(is, "lavimg height");
  const auto w = read_le<uint32_t>(is, "lavimg width");
  const auto c = read_le<uint32_t>(is, "lavimg channels");
  Image img(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
  read_bytes(is, img.data.data(), img.data.size() * sizeof(float), "lavimg pixels");
  return img;
}

}  // namespace nelf
