#pragma once

#include <filesystem>
#include <stdexcept>

#include "tsnca/image.hpp"

namespace tsnca::io {

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 8-bit PNG (any colour type) -> RGB in [0,1] via v/255, no gamma handling.
RgbImage read_png(const std::filesystem::path& path);

// Quantizes with round(v*255) clamped to [0,255].
void write_png(const std::filesystem::path& path, const RgbImage& image);
void write_png(const std::filesystem::path& path, const ImagePlane& gray);

std::uint8_t quantize(float v);

}  // namespace tsnca::io
