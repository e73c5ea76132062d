#include "partseg/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "partseg/detail/text.hpp"
#include "partseg/error.hpp"

namespace partseg {

namespace {

struct Binding {
  std::string_view section;
  std::string_view key;
  std::function<bool(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename Member>
Binding real(std::string_view section, std::string_view key, Member member) {
  return {section, key,
          [member](ExperimentConfig& c, std::string_view v) {
            auto d = detail::parse_double(v);
            if (!d) return false;
            std::invoke(member, c) = *d;
            return true;
          },
          [member](const ExperimentConfig& c) {
            return detail::format_double(std::invoke(member, c));
          }};
}

template <typename Int, typename Member>
Binding integer(std::string_view section, std::string_view key, Member member) {
  return {section, key,
          [member](ExperimentConfig& c, std::string_view v) {
            auto i = detail::parse_int<Int>(v);
            if (!i) return false;
            std::invoke(member, c) = *i;
            return true;
          },
          [member](const ExperimentConfig& c) { return std::to_string(std::invoke(member, c)); }};
}

template <typename Member>
Binding boolean(std::string_view section, std::string_view key, Member member) {
  return {section, key,
          [member](ExperimentConfig& c, std::string_view v) {
            if (v == "true") {
              std::invoke(member, c) = true;
            } else if (v == "false") {
              std::invoke(member, c) = false;
            } else {
              return false;
            }
            return true;
          },
          [member](const ExperimentConfig& c) {
            return std::string(std::invoke(member, c) ? "true" : "false");
          }};
}

template <typename Member>
Binding text(std::string_view section, std::string_view key, Member member) {
  return {section, key,
          [member](ExperimentConfig& c, std::string_view v) {
            std::invoke(member, c) = std::string(v);
            return true;
          },
          [member](const ExperimentConfig& c) { return std::invoke(member, c); }};
}

const std::vector<Binding>& bindings() {
  using C = ExperimentConfig;
  static const std::vector<Binding> table{
      integer<std::uint64_t>("", "seed", &C::seed),
      integer<int>("descriptor", "spin_bins", [](auto& c) -> auto& { return c.descriptor.spin_bins; }),
      integer<int>("descriptor", "projection_bins",
                   [](auto& c) -> auto& { return c.descriptor.projection_bins; }),
      real("descriptor", "epsilon_ratio", [](auto& c) -> auto& { return c.descriptor.epsilon_ratio; }),
      real("descriptor", "scale", [](auto& c) -> auto& { return c.descriptor.scale; }),
      real("descriptor", "leaf", [](auto& c) -> auto& { return c.descriptor.leaf; }),
      integer<int>("descriptor", "normal_neighbors",
                   [](auto& c) -> auto& { return c.descriptor.normal_neighbors; }),
      real("descriptor", "spin_radius", [](auto& c) -> auto& { return c.descriptor.spin_radius; }),
      real("hdp", "gamma", [](auto& c) -> auto& { return c.hdp.gamma; }),
      real("hdp", "alpha0", [](auto& c) -> auto& { return c.hdp.alpha0; }),
      real("hdp", "eta", [](auto& c) -> auto& { return c.hdp.eta; }),
      integer<int>("hdp", "topics", [](auto& c) -> auto& { return c.hdp.topics; }),
      integer<int>("hdp", "tables", [](auto& c) -> auto& { return c.hdp.tables; }),
      real("hdp", "kappa", [](auto& c) -> auto& { return c.hdp.kappa; }),
      real("hdp", "tau0", [](auto& c) -> auto& { return c.hdp.tau0; }),
      integer<int>("hdp", "batch_size", [](auto& c) -> auto& { return c.hdp.batch_size; }),
      integer<int>("inference", "max_iterations",
                   [](auto& c) -> auto& { return c.inference.max_iterations; }),
      real("inference", "tolerance", [](auto& c) -> auto& { return c.inference.tolerance; }),
      integer<int>("training", "epochs", [](auto& c) -> auto& { return c.training.epochs; }),
      integer<std::uint64_t>("training", "seed", [](auto& c) -> auto& { return c.training.seed; }),
      integer<int>("training", "teach_passes", &C::teach_passes),
      real("teacher", "threshold", [](auto& c) -> auto& { return c.teacher.threshold; }),
      integer<int>("teacher", "stall_iterations",
                   [](auto& c) -> auto& { return c.teacher.stall_iterations; }),
      integer<int>("teacher", "teach_count", [](auto& c) -> auto& { return c.teacher.teach_count; }),
      integer<int>("teacher", "window_factor",
                   [](auto& c) -> auto& { return c.teacher.window_factor; }),
      integer<std::uint64_t>("teacher", "seed", [](auto& c) -> auto& { return c.teacher.seed; }),
      integer<int>("abl", "max_subset", [](auto& c) -> auto& { return c.abl.max_subset; }),
      real("abl", "min_part_fraction", &C::min_part_fraction),
      text("paths", "dataset_root", [](auto& c) -> auto& { return c.paths.dataset_root; }),
      text("paths", "checkpoint", [](auto& c) -> auto& { return c.paths.checkpoint; }),
      text("paths", "abl_store", [](auto& c) -> auto& { return c.paths.abl_store; }),
      text("paths", "report_dir", [](auto& c) -> auto& { return c.paths.report_dir; }),
      boolean("mode", "spin_only", [](auto& c) -> auto& { return c.descriptor.spin_only; }),
      boolean("mode", "oracle_labels", &C::oracle_labels),
  };
  return table;
}

}  // namespace

void ExperimentConfig::validate() const {
  descriptor.validate();
  hdp.validate();
  teacher.validate();
  if (inference.max_iterations < 1) throw InvalidArgument("inference needs at least one sweep");
  if (!(inference.tolerance >= 0.0)) throw InvalidArgument("inference tolerance must be non-negative");
  if (training.epochs < 1) throw InvalidArgument("training needs at least one epoch");
  if (teach_passes < 1) throw InvalidArgument("teaching needs at least one pass");
  if (abl.max_subset < 1) throw InvalidArgument("abl max_subset must be positive");
  if (!(min_part_fraction >= 0.0 && min_part_fraction <= 1.0)) {
    throw InvalidArgument("min_part_fraction must lie in [0, 1]");
  }
}

void ExperimentConfig::apply_seed(std::uint64_t value) {
  seed = value;
  teacher.seed = value;
  training.seed = value;
}

ExperimentConfig parse_config(std::string_view text, std::string_view source) {
  ExperimentConfig config;
  std::string section;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw ParseError(std::string(source) + ":" + std::to_string(line_no) + ": " + what);
  };
  for (auto raw : detail::split(text, '\n')) {
    ++line_no;
    const auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail("unterminated section header");
      section = std::string(detail::trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail("expected 'key = value'");
    const auto key = detail::trim(line.substr(0, eq));
    const auto value = detail::trim(line.substr(eq + 1));
    bool found = false;
    for (const auto& b : bindings()) {
      if (b.section != section || b.key != key) continue;
      found = true;
      if (!b.set(config, value)) fail("bad value '" + std::string(value) + "' for " + std::string(key));
    }
    if (!found) {
      fail("unknown key '" + std::string(key) + "'" +
           (section.empty() ? std::string() : " in section [" + section + "]"));
    }
  }
  try {
    config.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string(source) + ": " + e.what());
  }
  return config;
}

std::string serialize_config(const ExperimentConfig& config) {
  std::ostringstream out;
  std::string_view section = "";
  for (const auto& b : bindings()) {
    if (b.section != section) {
      section = b.section;
      out << "\n[" << section << "]\n";
    }
    out << b.key << " = " << b.get(config) << '\n';
  }
  return out.str();
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.string());
}

}  // namespace partseg
