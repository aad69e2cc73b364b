#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "tsnca/tensor.hpp"

namespace tsnca {

// Single-channel float plane, row-major.
struct ImagePlane {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> values;

  ImagePlane() = default;
  ImagePlane(std::size_t h, std::size_t w, float fill = 0.0f)
      : height(h), width(w), values(h * w, fill) {}

  std::size_t size() const { return values.size(); }
  float& at(std::size_t y, std::size_t x) { return values[y * width + x]; }
  float at(std::size_t y, std::size_t x) const { return values[y * width + x]; }
  bool same_dims(const ImagePlane& o) const { return height == o.height && width == o.width; }
  bool operator==(const ImagePlane&) const = default;
};

// Three planes that share dimensions. Values nominally in [0,1].
struct ThreePlaneImage {
  std::array<ImagePlane, 3> planes;

  ThreePlaneImage() = default;
  ThreePlaneImage(std::size_t h, std::size_t w, float fill = 0.0f)
      : planes{ImagePlane(h, w, fill), ImagePlane(h, w, fill), ImagePlane(h, w, fill)} {}

  std::size_t height() const { return planes[0].height; }
  std::size_t width() const { return planes[0].width; }
  std::size_t pixels() const { return planes[0].size(); }
  bool same_dims(const ThreePlaneImage& o) const { return planes[0].same_dims(o.planes[0]); }
  bool operator==(const ThreePlaneImage&) const = default;
};

// Planes R, G, B.
struct RgbImage : ThreePlaneImage {
  using ThreePlaneImage::ThreePlaneImage;
  ImagePlane& r() { return planes[0]; }
  ImagePlane& g() { return planes[1]; }
  ImagePlane& b() { return planes[2]; }
  const ImagePlane& r() const { return planes[0]; }
  const ImagePlane& g() const { return planes[1]; }
  const ImagePlane& b() const { return planes[2]; }
};

// Planes H (hue as a fraction of a turn, [0,1)), S, V.
struct HsvImage : ThreePlaneImage {
  using ThreePlaneImage::ThreePlaneImage;
  ImagePlane& h() { return planes[0]; }
  ImagePlane& s() { return planes[1]; }
  ImagePlane& v() { return planes[2]; }
  const ImagePlane& h() const { return planes[0]; }
  const ImagePlane& s() const { return planes[1]; }
  const ImagePlane& v() const { return planes[2]; }
};

// Throws RangeError when any value lies outside [0,1] or is non-finite.
void validate_unit_range(const ImagePlane& plane, const char* what);
void validate_unit_range(const ThreePlaneImage& image, const char* what);

// Stacks planes into a [1,C,H,W] tensor and back.
template <typename T>
Tensor<T> to_tensor(const ThreePlaneImage& image);
template <typename T>
Tensor<T> to_tensor(const ImagePlane& plane);
// Extracts sample n of a [N,3,H,W] tensor.
template <typename T>
RgbImage rgb_from_tensor(const Tensor<T>& t, std::size_t n = 0);
// Extracts channel c of sample n.
template <typename T>
ImagePlane plane_from_tensor(const Tensor<T>& t, std::size_t n = 0, std::size_t c = 0);

// Crop [y0, y0+h) x [x0, x0+w).
ImagePlane crop(const ImagePlane& plane, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w);
template <typename Image>
Image crop(const Image& image, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) {
  Image out;
  for (std::size_t c = 0; c < 3; ++c) out.planes[c] = crop(image.planes[c], y0, x0, h, w);
  return out;
}

// Mirror-pads bottom/right edges to the given extents.
ImagePlane reflect_pad(const ImagePlane& plane, std::size_t h, std::size_t w);
template <typename Image>
Image reflect_pad(const Image& image, std::size_t h, std::size_t w) {
  Image out;
  for (std::size_t c = 0; c < 3; ++c) out.planes[c] = reflect_pad(image.planes[c], h, w);
  return out;
}

}  // namespace tsnca
