#include "partseg/pipeline.hpp"

#include <numeric>

#include "partseg/error.hpp"

namespace partseg {

void DescriptorConfig::validate() const {
  if (spin_bins < 1 || projection_bins < 1) throw InvalidArgument("bin counts must be positive");
  if (!(epsilon_ratio > 0.0)) throw InvalidArgument("epsilon ratio must be positive");
  if (!(scale >= 1.0)) throw InvalidArgument("document scale must be at least 1");
  if (!(leaf > 0.0)) throw InvalidArgument("voxel leaf must be positive");
  if (normal_neighbors < 3) throw InvalidArgument("normal estimation needs at least 3 neighbours");
  if (!(spin_radius >= 0.0)) throw InvalidArgument("spin radius must be non-negative");
}

PreparedObject prepare_object(const PointCloud& cloud, const DescriptorConfig& config) {
  config.validate();
  if (cloud.empty()) throw InvalidArgument("empty cloud");
  PreparedObject out;
  out.keypoints = estimate_normals(voxel_downsample(cloud, config.leaf), config.normal_neighbors);
  const PointCloud& kp = out.keypoints;

  ReferenceFrame frame;
  double length = 0.0;
  if (!config.spin_only) {
    frame = pca_frame(kp);
    length = projection_support_length(kp, frame);
  }
  out.documents.reserve(kp.size());
  for (std::size_t i = 0; i < kp.size(); ++i) {
    const double radius =
        config.spin_radius > 0.0 ? config.spin_radius : global_support_radius(kp, i);
    // A lone keypoint still yields its own spin bin.
    const SpinImage spin = spin_image(kp, i, config.spin_bins, radius > 0.0 ? radius : 1.0);
    if (config.spin_only) {
      out.documents.push_back(make_document(spin, nullptr, config.scale));
    } else {
      const ProjectionDescriptor proj = pinpoint_descriptor(
          kp, i, frame, config.projection_bins, config.epsilon_ratio * length, length);
      out.documents.push_back(make_document(spin, proj, config.scale));
    }
  }
  return out;
}

std::vector<PartId> predict_parts(const PartRegistry& registry,
                                  std::span<const PointDocument> documents,
                                  const InferenceOptions& options) {
  std::vector<PartId> labels;
  labels.reserve(documents.size());
  for (const auto& doc : documents) labels.push_back(predict_part(registry, doc, options).label);
  return labels;
}

Segmentation segment_object(const PartRegistry& registry, const PointCloud& cloud,
                            const DescriptorConfig& config, const InferenceOptions& options) {
  if (registry.empty()) throw InvalidArgument("no parts registered");
  if (registry.vocabulary() != config.vocabulary()) {
    throw InvalidArgument("descriptor vocabulary " + std::to_string(config.vocabulary()) +
                          " does not match model vocabulary " +
                          std::to_string(registry.vocabulary()));
  }
  PreparedObject prepared = prepare_object(cloud, config);
  Segmentation seg;
  seg.labels = predict_parts(registry, prepared.documents, options);
  seg.keypoints = std::move(prepared.keypoints);
  return seg;
}

void collect_documents(const PreparedObject& object, DocumentsByPart& out) {
  if (!object.keypoints.has_labels()) throw InvalidArgument("object has no part labels");
  for (std::size_t i = 0; i < object.documents.size(); ++i) {
    out[object.keypoints.part_labels[i]].push_back(object.documents[i]);
  }
}

std::uint64_t part_seed(std::uint64_t seed, PartId label) {
  // splitmix64 finaliser over (seed, label)
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (static_cast<std::uint64_t>(label) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::vector<double> train_parts(PartRegistry& registry, const DocumentsByPart& documents,
                                const TrainingOptions& training,
                                const InferenceOptions& inference) {
  if (documents.empty()) throw InvalidArgument("no training documents");
  if (training.epochs < 1) throw InvalidArgument("training needs at least one epoch");
  for (const auto& [label, docs] : documents) {
    if (!registry.contains(label)) new_part(registry, label, part_seed(training.seed, label));
  }

  const auto batch = static_cast<std::size_t>(registry.hyper().batch_size);
  Rng rng(training.seed);
  std::vector<double> epoch_means;
  for (int epoch = 0; epoch < training.epochs; ++epoch) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& [label, docs] : documents) {
      LocalPartModel& model = registry.model(label);
      std::vector<std::size_t> order(docs.size());
      std::iota(order.begin(), order.end(), 0);
      shuffle(std::span(order), rng);
      std::vector<PointDocument> minibatch;
      for (std::size_t start = 0; start < order.size(); start += batch) {
        minibatch.clear();
        for (std::size_t i = start; i < std::min(order.size(), start + batch); ++i) {
          minibatch.push_back(docs[order[i]]);
        }
        const double mean = update_minibatch(model, minibatch, inference, epoch == 0);
        sum += mean * static_cast<double>(minibatch.size());
        count += minibatch.size();
      }
    }
    epoch_means.push_back(sum / static_cast<double>(count));
  }
  return epoch_means;
}

}  // namespace partseg
