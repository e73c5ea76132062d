#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "partseg/pointcloud.hpp"

namespace partseg {

/// Local-to-global spin image: a bins_per_side x bins_per_side histogram of
/// (alpha, beta) cylindrical coordinates around the keypoint normal.
/// Row 0 holds the largest beta (points far along the normal).
struct SpinImage {
  int bins_per_side = 0;
  double support_radius = 0.0;
  std::size_t keypoint_index = 0;
  std::vector<double> bins;  // row-major

  double at(int row, int col) const { return bins[row * bins_per_side + col]; }
  double total() const;
};

enum class ProjectionPlane { XoY = 0, XoZ = 1, YoZ = 2 };
inline constexpr std::array<ProjectionPlane, 3> kProjectionPlanes{
    ProjectionPlane::XoY, ProjectionPlane::XoZ, ProjectionPlane::YoZ};

/// Global-to-local pinpoint descriptor: three PCA-plane grids whose bins
/// accumulate distance-weighted evidence of the keypoint location.
struct ProjectionDescriptor {
  int bins_per_side = 0;
  double support_length = 0.0;
  double epsilon = 0.0;
  std::array<std::vector<double>, 3> planes;  // each row-major

  double at(ProjectionPlane plane, int row, int col) const {
    return planes[static_cast<int>(plane)][row * bins_per_side + col];
  }
};

struct WordCount {
  int word = 0;
  int count = 0;
  friend bool operator==(const WordCount&, const WordCount&) = default;
};

/// Sparse bag of words for one keypoint, sorted by word id.
struct PointDocument {
  int vocabulary = 0;
  std::vector<WordCount> words;

  bool empty() const { return words.empty(); }
  long long total_count() const;
  friend bool operator==(const PointDocument&, const PointDocument&) = default;
};

/// Largest distance from the keypoint to any cloud point; the radius that
/// makes a spin image cover the whole object.
double global_support_radius(const PointCloud& cloud, std::size_t keypoint);

SpinImage spin_image(const PointCloud& cloud, std::size_t keypoint, int bins_per_side,
                     double radius);

/// (alpha, beta) of `p` on one plane of `frame`.
std::pair<double, double> project_point(const Point3& p, const ReferenceFrame& frame,
                                        ProjectionPlane plane);

struct BinIndex {
  int row = 0;
  int col = 0;
  friend bool operator==(const BinIndex&, const BinIndex&) = default;
};

/// Projection grid cell of (alpha, beta). Throws InvalidArgument if either
/// coordinate lies outside [-length/2, length/2].
BinIndex bin_index(double alpha, double beta, double length, int bins, double epsilon);

/// Contribution of a point at distance `d` from the keypoint: ((l - d) / l)^2,
/// clamped at zero beyond the support.
double pinpoint_weight(double distance, double length);

/// Twice the largest absolute frame coordinate, so the centred square of side
/// l contains every projected point.
double projection_support_length(const PointCloud& cloud, const ReferenceFrame& frame);

ProjectionDescriptor pinpoint_descriptor(const PointCloud& cloud, std::size_t keypoint,
                                         const ReferenceFrame& frame, int bins,
                                         double epsilon, double length);

/// Uses projection_support_length for l.
ProjectionDescriptor pinpoint_descriptor(const PointCloud& cloud, std::size_t keypoint,
                                         const ReferenceFrame& frame, int bins,
                                         double epsilon);

/// Vocabulary size for the combined document: n_s^2 + 3 n^2, or n_s^2 for
/// spin-only documents.
int vocabulary_size(int spin_bins, int projection_bins, bool spin_only);

/// Spin words come first (row-major), then the three projection planes in
/// XoY, XoZ, YoZ order. Pass no projection for a spin-only document.
PointDocument make_document(const SpinImage& spin,
                            const ProjectionDescriptor* projection, double scale);
PointDocument make_document(const SpinImage& spin, const ProjectionDescriptor& projection,
                            double scale);

/// "doc_id word:count word:count ..."
std::string format_document(std::string_view doc_id, const PointDocument& doc);
std::pair<std::string, PointDocument> parse_document(std::string_view line, int vocabulary);

}  // namespace partseg
