#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "partseg/pointcloud.hpp"

namespace partseg {

struct LabeledObject {
  std::string category;
  std::string name;
  PointCloud cloud;  // carries per-point part labels
};

/// ShapeNet-part style collection: `root/<category>/<object>.txt` files in
/// xyz_label format, plus an optional `root/parts.txt` with "id name" lines.
struct Dataset {
  std::vector<LabeledObject> objects;
  std::map<PartId, std::string> part_names;

  /// Registered name, or the decimal id when the part is unnamed.
  std::string part_name(PartId id) const;
  std::set<PartId> parts() const;
  std::set<std::string> categories() const;
};

/// Objects are ordered by category directory, then file name.
Dataset load_dataset(const std::filesystem::path& root);
void save_dataset(const Dataset& dataset, const std::filesystem::path& root);

}  // namespace partseg
