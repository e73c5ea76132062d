#include "partseg/dataset.hpp"

#include <algorithm>
#include <fstream>

#include "partseg/detail/text.hpp"
#include "partseg/error.hpp"

namespace partseg {

namespace fs = std::filesystem;

std::string Dataset::part_name(PartId id) const {
  auto it = part_names.find(id);
  return it == part_names.end() ? std::to_string(id) : it->second;
}

std::set<PartId> Dataset::parts() const {
  std::set<PartId> out;
  for (const auto& obj : objects) out.insert(obj.cloud.part_labels.begin(), obj.cloud.part_labels.end());
  return out;
}

std::set<std::string> Dataset::categories() const {
  std::set<std::string> out;
  for (const auto& obj : objects) out.insert(obj.category);
  return out;
}

Dataset load_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("dataset root " + root.string() + " is not a directory");
  Dataset ds;

  const fs::path names = root / "parts.txt";
  if (fs::exists(names)) {
    std::ifstream in(names);
    if (!in) throw IoError("cannot open " + names.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      auto cols = detail::split_ws(line);
      if (cols.empty() || cols[0].front() == '#') continue;
      auto id = detail::parse_int<PartId>(cols[0]);
      if (cols.size() != 2 || !id) {
        throw ParseError(names.string() + ":" + std::to_string(line_no) + ": expected 'id name'");
      }
      ds.part_names[*id] = std::string(cols[1]);
    }
  }

  std::vector<fs::path> category_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) category_dirs.push_back(entry.path());
  }
  std::sort(category_dirs.begin(), category_dirs.end());
  for (const auto& dir : category_dirs) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      LabeledObject obj;
      obj.category = dir.filename().string();
      obj.name = file.stem().string();
      obj.cloud = load_cloud(file, CloudFormat::xyz_label);
      obj.cloud.category = obj.category;
      ds.objects.push_back(std::move(obj));
    }
  }
  if (ds.objects.empty()) throw InvalidArgument("empty dataset at " + root.string());
  return ds;
}

void save_dataset(const Dataset& dataset, const fs::path& root) {
  fs::create_directories(root);
  if (!dataset.part_names.empty()) {
    std::ofstream out(root / "parts.txt");
    if (!out) throw IoError("cannot write " + (root / "parts.txt").string());
    for (const auto& [id, name] : dataset.part_names) out << id << ' ' << name << '\n';
  }
  for (const auto& obj : dataset.objects) {
    const fs::path dir = root / obj.category;
    fs::create_directories(dir);
    save_cloud(dir / (obj.name + ".txt"), obj.cloud, CloudFormat::xyz_label);
  }
}

}  // namespace partseg
