#include "partseg/synthetic.hpp"

#include <cmath>
#include <functional>
#include <numbers>

#include "partseg/error.hpp"
#include "partseg/random.hpp"

namespace partseg {

namespace {

using std::numbers::pi;

/// A labelled surface patch: area for proportional sampling and a sampler
/// returning one uniformly distributed surface point.
struct Patch {
  PartId part;
  double area;
  std::function<Point3(Rng&)> sample;
};

Patch cylinder_side(PartId part, Point3 base, int axis, double radius, double length) {
  return {part, 2.0 * pi * radius * length, [=](Rng& rng) {
            const double theta = uniform(rng, 0.0, 2.0 * pi);
            const double along = uniform(rng, 0.0, length);
            Point3 p = base;
            p[axis] += along;
            p[(axis + 1) % 3] += radius * std::cos(theta);
            p[(axis + 2) % 3] += radius * std::sin(theta);
            return p;
          }};
}

Patch disk(PartId part, Point3 center, int axis, double radius) {
  return {part, pi * radius * radius, [=](Rng& rng) {
            const double r = radius * std::sqrt(uniform01(rng));
            const double theta = uniform(rng, 0.0, 2.0 * pi);
            Point3 p = center;
            p[(axis + 1) % 3] += r * std::cos(theta);
            p[(axis + 2) % 3] += r * std::sin(theta);
            return p;
          }};
}

/// Surface of an axis-aligned box; `keep` rejects samples (e.g. inside
/// another part).
Patch box(PartId part, Point3 lo, Point3 size, std::function<bool(const Point3&)> keep = {}) {
  const double a = size.x() * size.y();
  const double b = size.x() * size.z();
  const double c = size.y() * size.z();
  return {part, 2.0 * (a + b + c), [=](Rng& rng) {
            while (true) {
              const double pick = uniform(rng, 0.0, a + b + c);
              const double side = uniform01(rng) < 0.5 ? 0.0 : 1.0;
              Point3 p(uniform01(rng), uniform01(rng), uniform01(rng));
              if (pick < a) {
                p.z() = side;
              } else if (pick < a + b) {
                p.y() = side;
              } else {
                p.x() = side;
              }
              Point3 q = lo + p.cwiseProduct(size);
              if (!keep || keep(q)) return q;
            }
          }};
}

/// Tube of a torus lying in the xz-plane around `center`, swept over
/// polar angles [-pi/2, pi/2] (the half with x >= center.x).
Patch half_torus(PartId part, Point3 center, double major, double minor) {
  return {part, pi * major * 2.0 * pi * minor, [=](Rng& rng) {
            while (true) {
              const double theta = uniform(rng, -pi / 2.0, pi / 2.0);
              const double phi = uniform(rng, 0.0, 2.0 * pi);
              // Area element is proportional to (major + minor cos phi).
              if (uniform01(rng) * (major + minor) > major + minor * std::cos(phi)) continue;
              const double ring = major + minor * std::cos(phi);
              return Point3(center.x() + ring * std::cos(theta), center.y() + minor * std::sin(phi),
                            center.z() + ring * std::sin(theta));
            }
          }};
}

std::vector<Patch> mug(Rng& rng) {
  using namespace synthetic_parts;
  const double radius = uniform(rng, 0.28, 0.34);
  const double height = uniform(rng, 1.0, 1.2);
  const double major = uniform(rng, 0.26, 0.32) * height;
  const double minor = uniform(rng, 0.035, 0.045);
  return {cylinder_side(body, Point3(0, 0, 0), 2, radius, height),
          disk(body, Point3(0, 0, 0), 2, radius),
          half_torus(handle, Point3(radius, 0, height / 2.0), major, minor)};
}

std::vector<Patch> table(Rng& rng) {
  using namespace synthetic_parts;
  const double width = uniform(rng, 1.2, 1.6);
  const double depth = uniform(rng, 0.7, 1.0);
  const double height = uniform(rng, 0.7, 0.9);
  const double thickness = 0.06;
  const double leg_side = uniform(rng, 0.05, 0.07);
  const double inset = 0.08;
  std::vector<Patch> out{box(top, Point3(-width / 2, -depth / 2, height - thickness),
                             Point3(width, depth, thickness))};
  for (double sx : {-1.0, 1.0}) {
    for (double sy : {-1.0, 1.0}) {
      const Point3 lo(sx * (width / 2 - inset) - leg_side / 2,
                      sy * (depth / 2 - inset) - leg_side / 2, 0.0);
      out.push_back(box(leg, lo, Point3(leg_side, leg_side, height - thickness),
                        [](const Point3& p) { return p.z() > 1e-9; }));
    }
  }
  return out;
}

std::vector<Patch> airplane(Rng& rng) {
  using namespace synthetic_parts;
  const double length = uniform(rng, 1.6, 2.0);
  const double radius = uniform(rng, 0.1, 0.13);
  const double span = uniform(rng, 1.4, 1.8);
  const double chord = uniform(rng, 0.28, 0.34);
  const double wing_x = uniform(rng, -0.15, 0.05);
  const double x0 = -length / 2.0;
  auto outside_fuselage = [radius](const Point3& p) {
    return p.y() * p.y() + p.z() * p.z() > radius * radius;
  };
  return {cylinder_side(fuselage, Point3(x0, 0, 0), 0, radius, length),
          disk(fuselage, Point3(x0, 0, 0), 0, radius),
          disk(fuselage, Point3(-x0, 0, 0), 0, radius),
          box(wing, Point3(wing_x - chord / 2, -span / 2, -0.015), Point3(chord, span, 0.03),
              outside_fuselage)};
}

PointCloud sample(const std::vector<Patch>& patches, int count, double noise, Rng& rng) {
  double total = 0.0;
  for (const auto& p : patches) total += p.area;
  PointCloud cloud;
  cloud.points.reserve(count);
  cloud.part_labels.reserve(count);
  for (int i = 0; i < count; ++i) {
    double pick = uniform(rng, 0.0, total);
    std::size_t idx = 0;
    while (idx + 1 < patches.size() && pick >= patches[idx].area) pick -= patches[idx++].area;
    Point3 p = patches[idx].sample(rng);
    if (noise > 0.0) p += noise * Point3(normal01(rng), normal01(rng), normal01(rng));
    cloud.points.push_back(p);
    cloud.part_labels.push_back(patches[idx].part);
  }
  return cloud;
}

}  // namespace

Dataset make_synthetic_dataset(const SyntheticOptions& options) {
  using namespace synthetic_parts;
  if (options.objects_per_category < 1 || options.points_per_object < 1) {
    throw InvalidArgument("synthetic dataset needs objects and points");
  }
  Dataset ds;
  Rng rng(options.seed);
  for (const auto& category : options.categories) {
    std::function<std::vector<Patch>(Rng&)> shape;
    if (category == "mug") {
      shape = mug;
      ds.part_names[body] = "body";
      ds.part_names[handle] = "handle";
    } else if (category == "table") {
      shape = table;
      ds.part_names[top] = "top";
      ds.part_names[leg] = "leg";
    } else if (category == "airplane") {
      shape = airplane;
      ds.part_names[fuselage] = "fuselage";
      ds.part_names[wing] = "wing";
    } else {
      throw InvalidArgument("unknown synthetic category '" + category + "'");
    }
    for (int i = 0; i < options.objects_per_category; ++i) {
      LabeledObject obj;
      obj.category = category;
      obj.name = category + "_" + std::to_string(1000 + i).substr(1);
      obj.cloud = sample(shape(rng), options.points_per_object, options.noise, rng);
      obj.cloud.category = category;
      ds.objects.push_back(std::move(obj));
    }
  }
  return ds;
}

}  // namespace partseg
