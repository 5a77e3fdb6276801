// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "bolt/core/error.hpp"
#include "bolt/data/dataset.hpp"
#include "bolt/data/image_io.hpp"

namespace bolt::data {

/// Loads `root/<class_name>/<image files>` into a dataset. Labels follow
/// lexicographic subdirectory order; every image is resized and converted
/// to the declared (height, width, channels).
inline LabeledDataset load_image_folder(const std::string& root, int height,
                                        int width, int channels) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root))
    throw IoError("dataset folder does not exist: " + root);

  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) class_dirs.push_back(entry.path());
  std::sort(class_dirs.begin(), class_dirs.end(),
            [](const fs::path& a, const fs::path& b) {
              return a.filename().string() < b.filename().string();
            });
  if (class_dirs.empty()) throw IoError("no class directories in " + root);

  LabeledDataset ds;
  ds.height = height;
  ds.width = width;
  ds.channels = channels;
  ds.num_classes = static_cast<int>(class_dirs.size());
  ds.provenance = "folder(" + root + ")";

  for (int cls = 0; cls < ds.num_classes; ++cls) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(class_dirs[cls]))
      if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty())
      throw IoError("empty class directory " + class_dirs[cls].string());

    for (const auto& file : files) {
      RawImage raw = read_pnm(file.string());  // throws IoError naming file
      RawImage sized = convert_raster(raw, height, width, channels);
      ImageSample s;
      s.label = cls;
      s.id = class_dirs[cls].filename().string() + "/" +
             file.filename().string();
      s.pixels = std::move(sized.pixels);
      ds.samples.push_back(std::move(s));
    }
  }
  return ds;
}

}  // namespace bolt::data
