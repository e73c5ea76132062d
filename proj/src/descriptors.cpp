#include "partseg/descriptors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "partseg/detail/text.hpp"
#include "partseg/error.hpp"

namespace partseg {

double SpinImage::total() const {
  return std::accumulate(bins.begin(), bins.end(), 0.0);
}

long long PointDocument::total_count() const {
  long long total = 0;
  for (const auto& w : words) total += w.count;
  return total;
}

double global_support_radius(const PointCloud& cloud, std::size_t keypoint) {
  if (keypoint >= cloud.size()) throw InvalidArgument("keypoint index out of range");
  const Point3& p = cloud.points[keypoint];
  double r2 = 0.0;
  for (const auto& x : cloud.points) r2 = std::max(r2, (x - p).squaredNorm());
  return std::sqrt(r2);
}

SpinImage spin_image(const PointCloud& cloud, std::size_t keypoint, int bins_per_side,
                     double radius) {
  if (!cloud.has_normals()) throw InvalidArgument("spin image needs normals");
  if (keypoint >= cloud.size()) throw InvalidArgument("keypoint index out of range");
  if (bins_per_side < 1) throw InvalidArgument("spin image needs at least one bin");
  if (!(radius > 0.0)) throw InvalidArgument("spin image radius must be positive");

  SpinImage img;
  img.bins_per_side = bins_per_side;
  img.support_radius = radius;
  img.keypoint_index = keypoint;
  img.bins.assign(static_cast<std::size_t>(bins_per_side) * bins_per_side, 0.0);

  const Point3& p = cloud.points[keypoint];
  const Point3& m = cloud.normals[keypoint];
  const double n = bins_per_side;
  for (const auto& x : cloud.points) {
    const Point3 d = x - p;
    const double beta = m.dot(d);
    const double alpha = std::sqrt(std::max(0.0, d.squaredNorm() - beta * beta));
    if (alpha > radius || std::abs(beta) > radius) continue;
    const int row = std::clamp(static_cast<int>(std::floor((radius - beta) * n / (2.0 * radius))),
                               0, bins_per_side - 1);
    const int col = std::clamp(static_cast<int>(std::floor(alpha * n / radius)), 0,
                               bins_per_side - 1);
    img.bins[row * bins_per_side + col] += 1.0;
  }
  return img;
}

std::pair<double, double> project_point(const Point3& p, const ReferenceFrame& frame,
                                        ProjectionPlane plane) {
  const Point3 local = frame.to_local(p);
  switch (plane) {
    case ProjectionPlane::XoY: return {local.x(), local.y()};
    case ProjectionPlane::XoZ: return {local.x(), local.z()};
    case ProjectionPlane::YoZ: return {local.y(), local.z()};
  }
  return {local.x(), local.y()};
}

BinIndex bin_index(double alpha, double beta, double length, int bins, double epsilon) {
  if (!(length > 0.0) || bins < 1 || !(epsilon > 0.0)) {
    throw InvalidArgument("bin_index needs positive length, bins and epsilon");
  }
  const double half = length / 2.0;
  if (!(std::abs(alpha) <= half) || !(std::abs(beta) <= half)) {
    throw InvalidArgument("projected point outside the support square");
  }
  const double width = (length + epsilon) / bins;
  return {static_cast<int>(std::floor((alpha + half) / width)),
          static_cast<int>(std::floor((beta + half) / width))};
}

double pinpoint_weight(double distance, double length) {
  const double w = std::max(0.0, (length - distance) / length);
  return w * w;
}

double projection_support_length(const PointCloud& cloud, const ReferenceFrame& frame) {
  double extent = 0.0;
  for (const auto& p : cloud.points) {
    extent = std::max(extent, frame.to_local(p).cwiseAbs().maxCoeff());
  }
  return 2.0 * extent;
}

ProjectionDescriptor pinpoint_descriptor(const PointCloud& cloud, std::size_t keypoint,
                                         const ReferenceFrame& frame, int bins,
                                         double epsilon, double length) {
  if (cloud.empty()) throw InvalidArgument("pinpoint descriptor of an empty cloud");
  if (keypoint >= cloud.size()) throw InvalidArgument("keypoint index out of range");
  if (!(length > 0.0)) throw InvalidArgument("support length must be positive");

  ProjectionDescriptor desc;
  desc.bins_per_side = bins;
  desc.support_length = length;
  desc.epsilon = epsilon;
  for (auto& plane : desc.planes) plane.assign(static_cast<std::size_t>(bins) * bins, 0.0);

  const Point3& key = cloud.points[keypoint];
  for (const auto& p : cloud.points) {
    const double weight = pinpoint_weight((p - key).norm(), length);
    const Point3 local = frame.to_local(p);
    const std::array<std::pair<double, double>, 3> coords{
        std::pair{local.x(), local.y()}, std::pair{local.x(), local.z()},
        std::pair{local.y(), local.z()}};
    for (int plane = 0; plane < 3; ++plane) {
      const auto [r, c] = bin_index(coords[plane].first, coords[plane].second, length, bins,
                                    epsilon);
      desc.planes[plane][r * bins + c] += weight;
    }
  }
  return desc;
}

ProjectionDescriptor pinpoint_descriptor(const PointCloud& cloud, std::size_t keypoint,
                                         const ReferenceFrame& frame, int bins,
                                         double epsilon) {
  return pinpoint_descriptor(cloud, keypoint, frame, bins, epsilon,
                             projection_support_length(cloud, frame));
}

int vocabulary_size(int spin_bins, int projection_bins, bool spin_only) {
  return spin_bins * spin_bins + (spin_only ? 0 : 3 * projection_bins * projection_bins);
}

PointDocument make_document(const SpinImage& spin, const ProjectionDescriptor* projection,
                            double scale) {
  if (!(scale > 0.0)) throw InvalidArgument("document scale must be positive");
  const int spin_words = spin.bins_per_side * spin.bins_per_side;
  if (static_cast<int>(spin.bins.size()) != spin_words) {
    throw InvalidArgument("spin image has mismatched dimensions");
  }
  PointDocument doc;
  doc.vocabulary = spin_words;
  auto emit = [&](int word, double value) {
    const auto count = static_cast<int>(std::lround(scale * value));
    if (count > 0) doc.words.push_back({word, count});
  };
  for (int w = 0; w < spin_words; ++w) emit(w, spin.bins[w]);

  if (projection != nullptr) {
    const int plane_words = projection->bins_per_side * projection->bins_per_side;
    for (const auto& plane : projection->planes) {
      if (static_cast<int>(plane.size()) != plane_words) {
        throw InvalidArgument("projection plane has mismatched dimensions");
      }
    }
    doc.vocabulary += 3 * plane_words;
    for (int plane = 0; plane < 3; ++plane) {
      for (int i = 0; i < plane_words; ++i) {
        emit(spin_words + plane * plane_words + i, projection->planes[plane][i]);
      }
    }
  }
  return doc;
}

PointDocument make_document(const SpinImage& spin, const ProjectionDescriptor& projection,
                            double scale) {
  return make_document(spin, &projection, scale);
}

std::string format_document(std::string_view doc_id, const PointDocument& doc) {
  std::string line(doc_id);
  for (const auto& w : doc.words) {
    line += ' ';
    line += std::to_string(w.word);
    line += ':';
    line += std::to_string(w.count);
  }
  return line;
}

std::pair<std::string, PointDocument> parse_document(std::string_view line, int vocabulary) {
  auto cols = detail::split_ws(line);
  if (cols.empty()) throw ParseError("empty document line");
  PointDocument doc;
  doc.vocabulary = vocabulary;
  for (std::size_t i = 1; i < cols.size(); ++i) {
    const auto colon = cols[i].find(':');
    if (colon == std::string_view::npos) throw ParseError("expected word:count");
    auto word = detail::parse_int<int>(cols[i].substr(0, colon));
    auto count = detail::parse_int<int>(cols[i].substr(colon + 1));
    if (!word || !count || *word < 0 || *word >= vocabulary || *count < 1) {
      throw ParseError("bad word entry '" + std::string(cols[i]) + "'");
    }
    if (!doc.words.empty() && doc.words.back().word >= *word) {
      throw ParseError("word ids must be strictly increasing");
    }
    doc.words.push_back({*word, *count});
  }
  return {std::string(cols[0]), std::move(doc)};
}

}  // namespace partseg
