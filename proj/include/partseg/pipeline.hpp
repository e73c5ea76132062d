#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "partseg/descriptors.hpp"
#include "partseg/localhdp.hpp"
#include "partseg/pointcloud.hpp"

namespace partseg {

struct DescriptorConfig {
  int spin_bins = 8;
  int projection_bins = 5;
  double epsilon_ratio = 0.015;  // epsilon as a fraction of the support length
  double scale = 10.0;
  double leaf = 0.1;
  int normal_neighbors = 10;
  /// Spin-image support radius. 0 means the farthest point from each
  /// keypoint; a fixed value must be large enough to cover whole objects.
  double spin_radius = 0.0;
  bool spin_only = false;

  int vocabulary() const { return vocabulary_size(spin_bins, projection_bins, spin_only); }
  void validate() const;
  friend bool operator==(const DescriptorConfig&, const DescriptorConfig&) = default;
};

/// Downsampled keypoints (with normals and, when the input carries them,
/// majority-vote labels) and one document per keypoint.
struct PreparedObject {
  PointCloud keypoints;
  std::vector<PointDocument> documents;
};

PreparedObject prepare_object(const PointCloud& cloud, const DescriptorConfig& config);

std::vector<PartId> predict_parts(const PartRegistry& registry,
                                  std::span<const PointDocument> documents,
                                  const InferenceOptions& options = {});

struct Segmentation {
  PointCloud keypoints;
  std::vector<PartId> labels;  // aligned with keypoints
};

Segmentation segment_object(const PartRegistry& registry, const PointCloud& cloud,
                            const DescriptorConfig& config,
                            const InferenceOptions& options = {});

struct TrainingOptions {
  int epochs = 3;
  std::uint64_t seed = 0;
  friend bool operator==(const TrainingOptions&, const TrainingOptions&) = default;
};

using DocumentsByPart = std::map<PartId, std::vector<PointDocument>>;

/// Groups each object's documents under its keypoint labels.
void collect_documents(const PreparedObject& object, DocumentsByPart& out);

/// Offline training: registers missing parts, then runs `epochs` shuffled
/// minibatch passes over each part's documents. Returns the mean
/// per-document bound of every epoch.
std::vector<double> train_parts(PartRegistry& registry, const DocumentsByPart& documents,
                                const TrainingOptions& training,
                                const InferenceOptions& inference = {});

/// Seed of a freshly registered part model.
std::uint64_t part_seed(std::uint64_t seed, PartId label);

}  // namespace partseg
