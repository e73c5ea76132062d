#include "partseg/pointcloud.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include "partseg/detail/text.hpp"
#include "partseg/error.hpp"

namespace partseg {

namespace {

constexpr double kUnitTolerance = 1e-6;

[[noreturn]] void parse_fail(std::string_view source, std::size_t line,
                             const std::string& what) {
  throw ParseError(std::string(source) + ":" + std::to_string(line) + ": " + what);
}

Point3 parse_point(const std::vector<std::string_view>& cols, std::string_view source,
                   std::size_t line) {
  Point3 p;
  for (int i = 0; i < 3; ++i) {
    auto v = detail::parse_double(cols[i]);
    if (!v || !std::isfinite(*v)) {
      parse_fail(source, line, "bad coordinate '" + std::string(cols[i]) + "'");
    }
    p[i] = *v;
  }
  return p;
}

bool is_skippable(std::string_view line) {
  const auto t = detail::trim(line);
  return t.empty() || t.front() == '#';
}

}  // namespace

void PointCloud::validate() const {
  if (!normals.empty() && normals.size() != points.size()) {
    throw InvalidArgument("normals length differs from points length");
  }
  if (!part_labels.empty() && part_labels.size() != points.size()) {
    throw InvalidArgument("part_labels length differs from points length");
  }
  for (const auto& p : points) {
    if (!p.allFinite()) throw InvalidArgument("non-finite coordinate");
  }
  for (const auto& n : normals) {
    if (std::abs(n.norm() - 1.0) > kUnitTolerance) {
      throw InvalidArgument("normal is not unit length");
    }
  }
}

PointCloud PointCloud::subset(const std::vector<std::size_t>& indices) const {
  PointCloud out;
  out.category = category;
  out.points.reserve(indices.size());
  for (auto i : indices) out.points.push_back(points.at(i));
  if (has_normals()) {
    out.normals.reserve(indices.size());
    for (auto i : indices) out.normals.push_back(normals[i]);
  }
  if (has_labels()) {
    out.part_labels.reserve(indices.size());
    for (auto i : indices) out.part_labels.push_back(part_labels[i]);
  }
  return out;
}

CloudFormat parse_cloud_format(std::string_view name) {
  if (name == "xyz") return CloudFormat::xyz;
  if (name == "xyz_label") return CloudFormat::xyz_label;
  if (name == "off") return CloudFormat::off;
  throw InvalidArgument("unknown cloud format '" + std::string(name) + "'");
}

std::string_view to_string(CloudFormat format) {
  switch (format) {
    case CloudFormat::xyz: return "xyz";
    case CloudFormat::xyz_label: return "xyz_label";
    case CloudFormat::off: return "off";
  }
  return "xyz";
}

CloudFormat detect_cloud_format(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".off") return CloudFormat::off;
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  while (std::getline(in, line)) {
    if (is_skippable(line)) continue;
    return detail::split_ws(line).size() == 4 ? CloudFormat::xyz_label : CloudFormat::xyz;
  }
  return CloudFormat::xyz;
}

PointCloud read_cloud(std::istream& in, CloudFormat format, std::string_view source) {
  PointCloud cloud;
  std::string line;
  std::size_t line_no = 0;

  if (format == CloudFormat::off) {
    // Header: "OFF" optionally followed by the counts on the same line.
    std::vector<std::string_view> counts;
    bool header_seen = false;
    std::string header_rest;
    while (std::getline(in, line)) {
      ++line_no;
      if (is_skippable(line)) continue;
      auto t = detail::trim(line);
      if (!header_seen) {
        if (t.substr(0, 3) != "OFF") parse_fail(source, line_no, "missing OFF header");
        header_seen = true;
        header_rest = std::string(detail::trim(t.substr(3)));
        if (header_rest.empty()) continue;
        counts = detail::split_ws(header_rest);
      } else {
        header_rest = std::string(t);
        counts = detail::split_ws(header_rest);
      }
      break;
    }
    if (!header_seen) throw ParseError(std::string(source) + ": empty cloud");
    if (counts.empty()) parse_fail(source, line_no, "missing vertex count");
    auto n_vertices = detail::parse_int<std::size_t>(counts[0]);
    if (!n_vertices) parse_fail(source, line_no, "bad vertex count");
    cloud.points.reserve(*n_vertices);
    while (cloud.points.size() < *n_vertices && std::getline(in, line)) {
      ++line_no;
      if (is_skippable(line)) continue;
      auto cols = detail::split_ws(line);
      if (cols.size() < 3) parse_fail(source, line_no, "expected 3 coordinates");
      cloud.points.push_back(parse_point(cols, source, line_no));
    }
    if (cloud.points.size() < *n_vertices) {
      parse_fail(source, line_no, "truncated vertex list");
    }
  } else {
    const bool labelled = format == CloudFormat::xyz_label;
    while (std::getline(in, line)) {
      ++line_no;
      if (is_skippable(line)) continue;
      auto cols = detail::split_ws(line);
      if (labelled ? cols.size() != 4 : cols.size() < 3) {
        parse_fail(source, line_no,
                   labelled ? "expected 'x y z label'" : "expected 'x y z'");
      }
      cloud.points.push_back(parse_point(cols, source, line_no));
      if (labelled) {
        auto label = detail::parse_int<PartId>(cols[3]);
        if (!label || *label < 0) {
          parse_fail(source, line_no, "bad part label '" + std::string(cols[3]) + "'");
        }
        cloud.part_labels.push_back(*label);
      }
    }
  }
  if (cloud.empty()) throw ParseError(std::string(source) + ": empty cloud");
  return cloud;
}

PointCloud load_cloud(const std::filesystem::path& path, CloudFormat format) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_cloud(in, format, path.string());
}

void write_cloud(std::ostream& out, const PointCloud& cloud, CloudFormat format) {
  using detail::format_double;
  if (format == CloudFormat::xyz_label && !cloud.has_labels()) {
    throw InvalidArgument("xyz_label output requires part labels");
  }
  if (format == CloudFormat::off) {
    out << "OFF\n" << cloud.size() << " 0 0\n";
  }
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    out << format_double(p.x()) << ' ' << format_double(p.y()) << ' ' << format_double(p.z());
    if (format == CloudFormat::xyz_label) out << ' ' << cloud.part_labels[i];
    out << '\n';
  }
}

void save_cloud(const std::filesystem::path& path, const PointCloud& cloud,
                CloudFormat format) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_cloud(out, cloud, format);
  if (!out) throw IoError("write failed for " + path.string());
}

PointCloud voxel_downsample(const PointCloud& cloud, double leaf) {
  if (!(leaf > 0.0) || !std::isfinite(leaf)) {
    throw InvalidArgument("voxel leaf size must be positive");
  }
  using Key = std::array<std::int64_t, 3>;
  std::map<Key, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    Key key{static_cast<std::int64_t>(std::floor(p.x() / leaf)),
            static_cast<std::int64_t>(std::floor(p.y() / leaf)),
            static_cast<std::int64_t>(std::floor(p.z() / leaf))};
    cells[key].push_back(i);
  }

  PointCloud out;
  out.category = cloud.category;
  out.points.reserve(cells.size());
  for (const auto& [key, members] : cells) {
    Point3 sum = Point3::Zero();
    Point3 lo = cloud.points[members.front()];
    Point3 hi = lo;
    for (auto i : members) {
      sum += cloud.points[i];
      lo = lo.cwiseMin(cloud.points[i]);
      hi = hi.cwiseMax(cloud.points[i]);
    }
    // Clamping keeps rounding from pushing the centroid out of its cell.
    Point3 c = (sum / static_cast<double>(members.size())).cwiseMax(lo).cwiseMin(hi);
    out.points.push_back(c);

    if (cloud.has_normals()) {
      Point3 n = Point3::Zero();
      for (auto i : members) n += cloud.normals[i];
      out.normals.push_back(n.norm() > 0.0 ? Point3(n.normalized())
                                           : cloud.normals[members.front()]);
    }
    if (cloud.has_labels()) {
      std::map<PartId, std::size_t> votes;
      for (auto i : members) ++votes[cloud.part_labels[i]];
      // std::map iterates in ascending label order, so ties keep the smallest id.
      auto best = votes.begin();
      for (auto it = votes.begin(); it != votes.end(); ++it) {
        if (it->second > best->second) best = it;
      }
      out.part_labels.push_back(best->first);
    }
  }
  return out;
}

Point3 centroid(const std::vector<Point3>& points) {
  Point3 sum = Point3::Zero();
  for (const auto& p : points) sum += p;
  return points.empty() ? sum : Point3(sum / static_cast<double>(points.size()));
}

PointCloud estimate_normals(const PointCloud& cloud, int k) {
  if (k < 3) throw InvalidArgument("normal estimation needs k >= 3");
  if (cloud.size() < static_cast<std::size_t>(k)) {
    throw InvalidArgument("cloud has fewer points than k");
  }
  const Point3 center = centroid(cloud.points);
  const std::size_t n = cloud.size();

  PointCloud out = cloud;
  out.normals.assign(n, Point3::Zero());
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Point3& p = cloud.points[i];
    for (std::size_t j = 0; j < n; ++j) {
      dist[j] = {(cloud.points[j] - p).squaredNorm(), j};
    }
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());

    Point3 mean = Point3::Zero();
    for (int m = 0; m < k; ++m) mean += cloud.points[dist[m].second];
    mean /= k;
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (int m = 0; m < k; ++m) {
      const Point3 d = cloud.points[dist[m].second] - mean;
      cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
    Point3 normal = solver.eigenvectors().col(0).normalized();
    if (normal.dot(p - center) < 0.0) normal = -normal;
    out.normals[i] = normal;
  }
  return out;
}

ReferenceFrame pca_frame(const PointCloud& cloud) {
  if (cloud.size() < 3) throw InvalidArgument("degenerate frame");
  ReferenceFrame frame;
  frame.origin = centroid(cloud.points);

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : cloud.points) {
    const Point3 d = p - frame.origin;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(cloud.size());

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  const Eigen::Vector3d ev = solver.eigenvalues();  // ascending
  const double largest = ev[2];
  if (!(largest > 0.0) || ev[1] <= 1e-12 * largest) {
    throw InvalidArgument("degenerate frame");
  }
  const double gap01 = (ev[2] - ev[1]) / largest;
  const double gap12 = (ev[1] - ev[0]) / largest;
  frame.stable = gap01 >= 1e-9 && gap12 >= 1e-9;

  // Each axis points towards its heavier tail (sign of sum sign(x) * x^2).
  // A left-handed result is repaired by flipping the least skewed axis.
  std::array<double, 3> confidence{};
  for (int row = 0; row < 3; ++row) {
    Point3 axis = solver.eigenvectors().col(2 - row).normalized();
    double skew = 0.0;
    double energy = 0.0;
    for (const auto& p : cloud.points) {
      const double x = axis.dot(p - frame.origin);
      skew += (x < 0.0 ? -x * x : x * x);
      energy += x * x;
    }
    confidence[row] = energy > 0.0 ? std::abs(skew) / energy : 0.0;
    bool flip = skew < 0.0;
    if (confidence[row] <= 1e-9) {
      // Symmetric along this axis: largest component positive.
      Eigen::Index idx = 0;
      axis.cwiseAbs().maxCoeff(&idx);
      flip = axis[idx] < 0.0;
      frame.stable = false;
    }
    if (flip) axis = -axis;
    frame.axes.row(row) = axis.transpose();
  }
  if (frame.axes.determinant() < 0.0) {
    int weakest = 0;
    for (int row = 1; row < 3; ++row) {
      if (confidence[row] < confidence[weakest]) weakest = row;
    }
    frame.axes.row(weakest) *= -1.0;
  }
  return frame;
}

Eigen::Matrix3d random_rotation_matrix(Rng& rng) {
  constexpr double two_pi = 6.283185307179586476925;
  const double u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  const double u3 = uniform01(rng);
  const double a = std::sqrt(1.0 - u1);
  const double b = std::sqrt(u1);
  Eigen::Quaterniond q(b * std::cos(two_pi * u3), a * std::sin(two_pi * u2),
                       a * std::cos(two_pi * u2), b * std::sin(two_pi * u3));
  return q.normalized().toRotationMatrix();
}

PointCloud rotate(const PointCloud& cloud, const Eigen::Matrix3d& rotation) {
  PointCloud out = cloud;
  for (auto& p : out.points) p = rotation * p;
  for (auto& n : out.normals) n = rotation * n;
  return out;
}

PointCloud random_rotation(const PointCloud& cloud, std::uint64_t seed) {
  Rng rng(seed);
  return rotate(cloud, random_rotation_matrix(rng));
}

std::pair<double, double> occlusion_cut_range(double min_x, double max_x) {
  const double quarter = (max_x - min_x) / 4.0;
  return {min_x + quarter, max_x - quarter};
}

Occlusion occlude_detailed(const PointCloud& cloud, std::uint64_t seed) {
  if (cloud.empty()) throw InvalidArgument("cannot occlude an empty cloud");
  Rng rng(seed);
  const PointCloud rotated = rotate(cloud, random_rotation_matrix(rng));

  double min_x = rotated.points.front().x();
  double max_x = min_x;
  for (const auto& p : rotated.points) {
    min_x = std::min(min_x, p.x());
    max_x = std::max(max_x, p.x());
  }
  const auto [lo, hi] = occlusion_cut_range(min_x, max_x);

  Occlusion result;
  result.cut = uniform(rng, lo, hi);
  std::vector<std::size_t> keep;
  keep.reserve(rotated.size());
  for (std::size_t i = 0; i < rotated.size(); ++i) {
    if (!(rotated.points[i].x() < result.cut)) keep.push_back(i);
  }
  result.removed = rotated.size() - keep.size();
  result.cloud = rotated.subset(keep);
  return result;
}

PointCloud occlude(const PointCloud& cloud, std::uint64_t seed) {
  return occlude_detailed(cloud, seed).cloud;
}

}  // namespace partseg
