#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "partseg/dataset.hpp"

namespace partseg {

/// Part ids used by the generated shapes.
namespace synthetic_parts {
inline constexpr PartId body = 0;      // mug
inline constexpr PartId handle = 1;    // mug
inline constexpr PartId top = 2;       // table
inline constexpr PartId leg = 3;       // table
inline constexpr PartId fuselage = 4;  // airplane
inline constexpr PartId wing = 5;      // airplane
}  // namespace synthetic_parts

struct SyntheticOptions {
  int objects_per_category = 30;
  int points_per_object = 1024;
  double noise = 0.002;  // Gaussian jitter, standard deviation
  std::uint64_t seed = 7;
  /// Any of "mug", "table", "airplane".
  std::vector<std::string> categories{"mug", "table", "airplane"};
};

/// Procedural surface samples with known part labels: mugs (body, handle),
/// tables (top, legs) and airplanes (fuselage, wings). Dimensions vary
/// per instance; points are area-uniform on each part.
Dataset make_synthetic_dataset(const SyntheticOptions& options);

}  // namespace partseg
