#pragma once

// Open-ended evaluation with a simulated teacher, part-wise mIoU, and the
// occlusion recognition experiment.

#include <cstdint>
#include <iosfwd>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "partseg/abl.hpp"
#include "partseg/dataset.hpp"
#include "partseg/localhdp.hpp"
#include "partseg/pipeline.hpp"

namespace partseg {

/// Mean over `parts` of |pred = p and gt = p| / |pred = p or gt = p|.
/// Parts whose union is empty are skipped.
double part_miou(std::span<const PartId> pred, std::span<const PartId> gt,
                 const std::set<PartId>& parts);

struct TeacherConfig {
  double threshold = 0.75;
  int stall_iterations = 100;
  int teach_count = 3;
  int window_factor = 3;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const TeacherConfig&, const TeacherConfig&) = default;
};

enum class StopReason { all_taught, stalled };
std::string_view to_string(StopReason reason);

struct TrajectoryPoint {
  int iteration = 0;
  int parts = 0;
  double window_miou = 0.0;
  friend bool operator==(const TrajectoryPoint&, const TrajectoryPoint&) = default;
};

struct ProtocolReport {
  int learned_parts = 0;          // #LP
  int correction_iterations = 0;  // #CI: presentations that triggered feedback
  int presentations = 0;          // all test presentations
  int stored_instances = 0;       // teaching objects plus corrected objects
  double avg_instances_per_part = 0.0;  // AIP
  std::vector<TrajectoryPoint> trajectory;
  double final_miou = 0.0;
  StopReason stop_reason = StopReason::stalled;
  std::vector<PartId> teaching_order;

  friend bool operator==(const ProtocolReport&, const ProtocolReport&) = default;
};

/// One annotated object at keypoint granularity.
struct ProtocolObject {
  std::string category;
  std::vector<PointDocument> documents;
  std::vector<PartId> labels;  // ground truth, aligned with documents
};

std::vector<ProtocolObject> prepare_protocol_objects(const Dataset& dataset,
                                                     const DescriptorConfig& config);

/// What the simulated teacher interacts with.
class PartLearner {
 public:
  virtual ~PartLearner() = default;
  virtual void add_part(PartId part) = 0;
  /// Feeds documents known to belong to `part`.
  virtual void train(PartId part, std::span<const PointDocument> documents) = 0;
  virtual std::vector<PartId> predict(std::span<const PointDocument> documents) const = 0;
};

/// Local-HDP learner over a part registry.
class HdpLearner : public PartLearner {
 public:
  HdpLearner(PartRegistry& registry, std::uint64_t seed, InferenceOptions inference = {},
             int passes = 1);

  void add_part(PartId part) override;
  void train(PartId part, std::span<const PointDocument> documents) override;
  std::vector<PartId> predict(std::span<const PointDocument> documents) const override;

 private:
  PartRegistry& registry_;
  std::uint64_t seed_;
  InferenceOptions inference_;
  int passes_;
  Rng rng_;
};

/// Teach/test loop: introduce parts in first-appearance order of the
/// shuffled objects, test on one object per iteration, correct objects whose
/// mIoU falls below the threshold, and advance once the window mIoU exceeds
/// it. Deterministic given `config.seed` and a deterministic learner.
ProtocolReport run_open_ended(std::span<const ProtocolObject> objects,
                              const TeacherConfig& config, PartLearner& learner);

/// "key = value" lines.
void write_report(std::ostream& out, const ProtocolReport& report);
/// "iteration,n_parts,window_miou" header plus one row per test iteration.
void write_trajectory_csv(std::ostream& out, const ProtocolReport& report);

/// Distinct part names covering at least `min_fraction` of the labels.
SymbolSet part_symbols(std::span<const PartId> labels, const Dataset& dataset,
                       double min_fraction);

struct OcclusionOptions {
  DescriptorConfig descriptor;  // spin-only documents are used throughout
  TrainingOptions training;
  InferenceOptions inference;
  AblOptions abl;
  /// Use ground-truth labels for the classifier (training and test) instead
  /// of segmentation output.
  bool oracle_labels = false;
  double min_part_fraction = 0.1;
  double test_fraction = 0.1;
};

struct OcclusionResult {
  double acc_original = 0.0;
  double acc_occluded = 0.0;
  /// Nearest-centroid classifier on a global projection histogram.
  double baseline_original = 0.0;
  double baseline_occluded = 0.0;
  std::size_t train_objects = 0;
  std::size_t test_objects = 0;
};

/// Global shape histogram of the naive baseline: occupancy of the three
/// PCA-plane projections, each normalised to unit mass.
std::vector<double> global_projection_histogram(const PointCloud& cloud, int bins);

/// Stratified split (per category, seeded), segmentation and classifier
/// training on the training part, then recognition of every test object as
/// is and after `occlude`.
OcclusionResult run_occlusion_experiment(const Dataset& dataset, std::uint64_t split_seed,
                                         PartRegistry& registry, ArgumentationModel& abl,
                                         const OcclusionOptions& options);

}  // namespace partseg
