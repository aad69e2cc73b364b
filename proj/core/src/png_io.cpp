#include "tsnca/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace tsnca::io {
namespace {

// Owns a png_image for the simplified libpng API.
struct PngImage {
  png_image image{};
  PngImage() { image.version = PNG_IMAGE_VERSION; }
  ~PngImage() { png_image_free(&image); }
  PngImage(const PngImage&) = delete;
  PngImage& operator=(const PngImage&) = delete;
};

void write_buffer(const std::filesystem::path& path, std::size_t height, std::size_t width,
                  png_uint_32 format, const std::vector<std::uint8_t>& buffer) {
  PngImage png;
  png.image.width = static_cast<png_uint_32>(width);
  png.image.height = static_cast<png_uint_32>(height);
  png.image.format = format;
  if (!png_image_write_to_file(&png.image, path.string().c_str(), 0, buffer.data(), 0, nullptr)) {
    throw ImageIoError("png: cannot write '" + path.string() + "': " + png.image.message);
  }
}

}  // namespace

std::uint8_t quantize(float v) {
  const float scaled = std::round(v * 255.0f);
  return static_cast<std::uint8_t>(std::clamp(scaled, 0.0f, 255.0f));
}

RgbImage read_png(const std::filesystem::path& path) {
  PngImage png;
  if (!png_image_begin_read_from_file(&png.image, path.string().c_str())) {
    throw ImageIoError("png: cannot read '" + path.string() + "': " + png.image.message);
  }
  png.image.format = PNG_FORMAT_RGB;
  const std::size_t width = png.image.width, height = png.image.height;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(png.image));
  if (!png_image_finish_read(&png.image, nullptr, buffer.data(), 0, nullptr)) {
    throw ImageIoError("png: cannot decode '" + path.string() + "': " + png.image.message);
  }
  RgbImage out(height, width);
  for (std::size_t i = 0; i < height * width; ++i)
    for (std::size_t c = 0; c < 3; ++c)
      out.planes[c].values[i] = static_cast<float>(buffer[3 * i + c]) / 255.0f;
  return out;
}

void write_png(const std::filesystem::path& path, const RgbImage& image) {
  std::vector<std::uint8_t> buffer(3 * image.pixels());
  for (std::size_t i = 0; i < image.pixels(); ++i)
    for (std::size_t c = 0; c < 3; ++c) buffer[3 * i + c] = quantize(image.planes[c].values[i]);
  write_buffer(path, image.height(), image.width(), PNG_FORMAT_RGB, buffer);
}

void write_png(const std::filesystem::path& path, const ImagePlane& gray) {
  std::vector<std::uint8_t> buffer(gray.size());
  for (std::size_t i = 0; i < gray.size(); ++i) buffer[i] = quantize(gray.values[i]);
  write_buffer(path, gray.height, gray.width, PNG_FORMAT_GRAY, buffer);
}

}  // namespace tsnca::io
