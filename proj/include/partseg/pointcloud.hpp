#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "partseg/random.hpp"

namespace partseg {

using Point3 = Eigen::Vector3d;
using PartId = int;

/// A point set with optional per-point normals and part annotations.
///
/// `normals` and `part_labels` are either empty or parallel to `points`.
struct PointCloud {
  std::vector<Point3> points;
  std::vector<Point3> normals;
  std::vector<PartId> part_labels;
  std::optional<std::string> category;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_normals() const { return !normals.empty(); }
  bool has_labels() const { return !part_labels.empty(); }

  /// Throws InvalidArgument when a parallel list has the wrong length, a
  /// coordinate is not finite, or a normal is not unit length.
  void validate() const;

  /// Keeps the entries selected by `indices`, in that order.
  PointCloud subset(const std::vector<std::size_t>& indices) const;
};

enum class CloudFormat { xyz, xyz_label, off };

CloudFormat parse_cloud_format(std::string_view name);
std::string_view to_string(CloudFormat format);

/// Guesses the format from the extension: `.off` is a mesh, anything else is
/// treated as labelled when every line has four columns.
CloudFormat detect_cloud_format(const std::filesystem::path& path);

PointCloud read_cloud(std::istream& in, CloudFormat format,
                      std::string_view source = "<stream>");
PointCloud load_cloud(const std::filesystem::path& path, CloudFormat format);

/// Writes coordinates with round-trip precision. `xyz_label` requires labels.
void write_cloud(std::ostream& out, const PointCloud& cloud, CloudFormat format);
void save_cloud(const std::filesystem::path& path, const PointCloud& cloud,
                CloudFormat format);

/// Grid cells are anchored at the world origin, so the output is a fixed
/// point of the operation.
PointCloud voxel_downsample(const PointCloud& cloud, double leaf);

PointCloud estimate_normals(const PointCloud& cloud, int k);

Point3 centroid(const std::vector<Point3>& points);

/// Principal-axis frame; rows of `axes` are unit eigenvectors in descending
/// eigenvalue order.
struct ReferenceFrame {
  Point3 origin = Point3::Zero();
  Eigen::Matrix3d axes = Eigen::Matrix3d::Identity();
  /// False when two covariance eigenvalues (nearly) coincide.
  bool stable = true;

  Point3 to_local(const Point3& p) const { return axes * (p - origin); }
};

ReferenceFrame pca_frame(const PointCloud& cloud);

/// Uniformly distributed rotation (Shoemake's unit-quaternion method).
Eigen::Matrix3d random_rotation_matrix(Rng& rng);

PointCloud rotate(const PointCloud& cloud, const Eigen::Matrix3d& rotation);
PointCloud random_rotation(const PointCloud& cloud, std::uint64_t seed);

/// Cut range for an x-extent [min_x, max_x]: the middle half of it.
std::pair<double, double> occlusion_cut_range(double min_x, double max_x);

struct Occlusion {
  PointCloud cloud;     // surviving points, in the rotated pose
  double cut = 0.0;     // points with x < cut were removed
  std::size_t removed = 0;
};

Occlusion occlude_detailed(const PointCloud& cloud, std::uint64_t seed);
PointCloud occlude(const PointCloud& cloud, std::uint64_t seed);

}  // namespace partseg
