#include "tsnca/dataset.hpp"

#include <algorithm>
#include <map>

#include "tsnca/png_io.hpp"

namespace tsnca {
namespace fs = std::filesystem;

std::vector<fs::path> list_png_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DatasetError("dataset: '" + dir.string() + "' is not a directory");
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

DatasetIndex DatasetIndex::discover(const fs::path& root) {
  return discover(root / "low", root / "high");
}

DatasetIndex DatasetIndex::discover(const fs::path& low_dir, const fs::path& high_dir) {
  std::map<std::string, fs::path> low, high;
  for (const auto& p : list_png_files(low_dir)) low.emplace(p.filename().string(), p);
  for (const auto& p : list_png_files(high_dir)) high.emplace(p.filename().string(), p);
  DatasetIndex index;
  for (const auto& [name, path] : low) {
    auto it = high.find(name);
    if (it == high.end()) {
      index.unmatched.push_back(path);
    } else {
      index.pairs.push_back({name, path, it->second});
    }
  }
  for (const auto& [name, path] : high) {
    if (!low.contains(name)) index.unmatched.push_back(path);
  }
  return index;
}

std::vector<ImagePair> load_pairs(const DatasetIndex& index) {
  std::vector<ImagePair> out;
  out.reserve(index.pairs.size());
  for (const auto& p : index.pairs) {
    ImagePair pair;
    pair.name = p.name;
    try {
      pair.low = io::read_png(p.low);
      pair.high = io::read_png(p.high);
    } catch (const io::ImageIoError& e) {
      throw DatasetError(std::string("dataset: ") + e.what());
    }
    if (!pair.low.same_dims(pair.high)) {
      throw DatasetError("dataset: pair '" + p.name + "' has mismatched dimensions " +
                         std::to_string(pair.low.height()) + "x" + std::to_string(pair.low.width()) +
                         " vs " + std::to_string(pair.high.height()) + "x" +
                         std::to_string(pair.high.width()));
    }
    out.push_back(std::move(pair));
  }
  return out;
}

}  // namespace tsnca
