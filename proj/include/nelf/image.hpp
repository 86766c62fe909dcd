#pragma once

#include <string>
#include <vector>

#include "nelf/common.hpp"
#include "nelf/conv.hpp"

namespace nelf {

// Interleaved HWC float image, values nominally in [0,1].
struct Image {
  int height = 0, width = 0, channels = 3;
  std::vector<float> data;

  Image() = default;
  Image(int h, int w, int c = 3)
      : height(h), width(w), channels(c), data(size_t(h) * w * c, 0.0f) {}

  float& at(int y, int x, int c) { return data[(size_t(y) * width + x) * channels + c]; }
  float at(int y, int x, int c) const {
    return data[(size_t(y) * width + x) * channels + c];
  }
  size_t size() const { return data.size(); }
};

Image from_tensor(const Tensor3& t);      // CHW double -> HWC float
Tensor3 to_tensor(const Image& img);      // HWC float -> CHW double

// 8-bit RGB PNG, fixed zlib level so identical images give identical bytes.
// Values are linearly scaled and rounded half-up.
void write_png(const Image& img, const std::string& path);

// Raw float container: magic "LAVIMG1", u32 height/width/channels, then
// row-major (channels fastest) float32 little-endian.
void write_lavimg(const Image& img, const std::string& path);
Image read_lavimg(const std::string& path);

}  // namespace nelf
