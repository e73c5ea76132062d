#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "partseg/abl.hpp"
#include "partseg/localhdp.hpp"
#include "partseg/pipeline.hpp"
#include "partseg/protocol.hpp"

namespace partseg {

struct ExperimentPaths {
  std::string dataset_root;
  std::string checkpoint;
  std::string abl_store;
  std::string report_dir;
  friend bool operator==(const ExperimentPaths&, const ExperimentPaths&) = default;
};

/// Everything one experiment needs. Text form:
///
///   seed = 7
///   [descriptor]
///   spin_bins = 8
///   ...
///
/// Sections: descriptor, hdp, inference, training, teacher, abl, paths, mode.
struct ExperimentConfig {
  DescriptorConfig descriptor;
  HdpHyperparams hdp;
  InferenceOptions inference;
  TrainingOptions training;
  int teach_passes = 1;
  TeacherConfig teacher;
  AblOptions abl;
  double min_part_fraction = 0.1;
  ExperimentPaths paths;
  bool oracle_labels = false;
  std::uint64_t seed = 0;

  /// Enforces the numeric constraints of every owning module.
  void validate() const;
  /// Copies `seed` into the teacher and training seeds.
  void apply_seed(std::uint64_t value);

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Unknown keys and malformed values are errors; missing keys keep defaults.
ExperimentConfig parse_config(std::string_view text, std::string_view source = "<config>");
std::string serialize_config(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace partseg
