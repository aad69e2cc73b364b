#include "tsnca/image.hpp"

#include <cmath>
#include <string>

#include "tsnca/ops.hpp"

namespace tsnca {

void validate_unit_range(const ImagePlane& plane, const char* what) {
  if (plane.values.size() != plane.height * plane.width) {
    throw ShapeError(std::string(what) + ": plane storage does not match its dimensions");
  }
  for (const float v : plane.values) {
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw RangeError(std::string(what) + ": value " + std::to_string(v) + " outside [0,1]");
    }
  }
}

void validate_unit_range(const ThreePlaneImage& image, const char* what) {
  for (const auto& p : image.planes) {
    if (!p.same_dims(image.planes[0])) {
      throw ShapeError(std::string(what) + ": planes have different dimensions");
    }
    validate_unit_range(p, what);
  }
}

template <typename T>
Tensor<T> to_tensor(const ThreePlaneImage& image) {
  const std::size_t hw = image.pixels();
  std::vector<T> data(3 * hw);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < hw; ++i) data[c * hw + i] = static_cast<T>(image.planes[c].values[i]);
  return Tensor<T>::from_data({1, 3, image.height(), image.width()}, std::move(data));
}

template <typename T>
Tensor<T> to_tensor(const ImagePlane& plane) {
  std::vector<T> data(plane.values.begin(), plane.values.end());
  return Tensor<T>::from_data({1, 1, plane.height, plane.width}, std::move(data));
}

template <typename T>
ImagePlane plane_from_tensor(const Tensor<T>& t, std::size_t n, std::size_t c) {
  if (t.rank() != 4 || n >= t.dim(0) || c >= t.dim(1)) {
    throw ShapeError("plane_from_tensor: cannot take sample " + std::to_string(n) + " channel " +
                     std::to_string(c) + " of " + shape_to_string(t.shape()));
  }
  ImagePlane p(t.dim(2), t.dim(3));
  const std::size_t hw = p.size();
  auto src = t.data().subspan((n * t.dim(1) + c) * hw, hw);
  for (std::size_t i = 0; i < hw; ++i) p.values[i] = static_cast<float>(src[i]);
  return p;
}

template <typename T>
RgbImage rgb_from_tensor(const Tensor<T>& t, std::size_t n) {
  if (t.rank() != 4 || t.dim(1) != 3) {
    throw ShapeError("rgb_from_tensor: expected [N,3,H,W], got " + shape_to_string(t.shape()));
  }
  RgbImage img;
  for (std::size_t c = 0; c < 3; ++c) img.planes[c] = plane_from_tensor(t, n, c);
  return img;
}

ImagePlane crop(const ImagePlane& plane, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) {
  if (y0 + h > plane.height || x0 + w > plane.width) {
    throw ShapeError("crop: window exceeds " + std::to_string(plane.height) + "x" +
                     std::to_string(plane.width) + " plane");
  }
  ImagePlane out(h, w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) out.at(y, x) = plane.at(y0 + y, x0 + x);
  return out;
}

ImagePlane reflect_pad(const ImagePlane& plane, std::size_t h, std::size_t w) {
  if (h < plane.height || w < plane.width) throw ShapeError("reflect_pad: target smaller than plane");
  ImagePlane out(h, w);
  for (std::size_t y = 0; y < h; ++y) {
    const std::size_t sy = ops::reflect_index(static_cast<long long>(y), plane.height);
    for (std::size_t x = 0; x < w; ++x) {
      out.at(y, x) = plane.at(sy, ops::reflect_index(static_cast<long long>(x), plane.width));
    }
  }
  return out;
}

template Tensor<float> to_tensor<float>(const ThreePlaneImage&);
template Tensor<double> to_tensor<double>(const ThreePlaneImage&);
template Tensor<float> to_tensor<float>(const ImagePlane&);
template Tensor<double> to_tensor<double>(const ImagePlane&);
template RgbImage rgb_from_tensor<float>(const Tensor<float>&, std::size_t);
template RgbImage rgb_from_tensor<double>(const Tensor<double>&, std::size_t);
template ImagePlane plane_from_tensor<float>(const Tensor<float>&, std::size_t, std::size_t);
template ImagePlane plane_from_tensor<double>(const Tensor<double>&, std::size_t, std::size_t);

}  // namespace tsnca
