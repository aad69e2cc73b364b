#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsnca/image.hpp"

namespace tsnca {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ImagePairPaths {
  std::string name;
  std::filesystem::path low;
  std::filesystem::path high;
};

// Low/high image pairs matched by file name. Files present on only one side
// are listed in `unmatched` rather than dropped silently.
struct DatasetIndex {
  std::vector<ImagePairPaths> pairs;
  std::vector<std::filesystem::path> unmatched;

  // `root` must contain low/ and high/ subdirectories.
  static DatasetIndex discover(const std::filesystem::path& root);
  static DatasetIndex discover(const std::filesystem::path& low_dir,
                               const std::filesystem::path& high_dir);
};

struct ImagePair {
  std::string name;
  RgbImage low;
  RgbImage high;
};

// Decodes every pair; throws DatasetError when a pair's dimensions differ
// or a file cannot be read.
std::vector<ImagePair> load_pairs(const DatasetIndex& index);

// Sorted *.png files in a directory.
std::vector<std::filesystem::path> list_png_files(const std::filesystem::path& dir);

}  // namespace tsnca
