// partseg: command-line front end for training, segmentation, open-ended
// evaluation, occlusion and recognition.
//
// Exit codes: 0 ok, 2 I/O or configuration error, 3 unknown object.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "partseg/abl.hpp"
#include "partseg/checkpoint.hpp"
#include "partseg/config.hpp"
#include "partseg/dataset.hpp"
#include "partseg/detail/text.hpp"
#include "partseg/error.hpp"
#include "partseg/pipeline.hpp"
#include "partseg/protocol.hpp"
#include "partseg/synthetic.hpp"

namespace fs = std::filesystem;
using namespace partseg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 2;
constexpr int kExitUnknown = 3;

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  bool spin_only = false;
  bool oracle_labels = false;
  std::string out;
};

ExperimentConfig resolve_config(const GlobalOptions& g) {
  ExperimentConfig config = g.config_path.empty() ? ExperimentConfig{} : load_config(g.config_path);
  if (g.seed) config.apply_seed(*g.seed);
  if (g.spin_only) config.descriptor.spin_only = true;
  if (g.oracle_labels) config.oracle_labels = true;
  config.validate();
  return config;
}

std::string require(const std::string& value, const std::string& what) {
  if (value.empty()) throw InvalidArgument("no " + what + " given");
  return value;
}

std::map<PartId, std::string> part_names_for(const std::string& root) {
  std::map<PartId, std::string> names;
  if (root.empty()) return names;
  const fs::path file = fs::path(root) / "parts.txt";
  if (!fs::exists(file)) return names;
  std::ifstream in(file);
  std::string line;
  while (std::getline(in, line)) {
    auto cols = detail::split_ws(line);
    if (cols.size() != 2) continue;
    if (auto id = detail::parse_int<PartId>(cols[0])) names[*id] = std::string(cols[1]);
  }
  return names;
}

void write_text_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("write failed for " + path.string());
}

int cmd_generate(const GlobalOptions& g, SyntheticOptions options, const std::string& categories) {
  if (g.seed) options.seed = *g.seed;
  if (!categories.empty()) {
    options.categories.clear();
    for (auto c : detail::split(categories, ',')) options.categories.emplace_back(detail::trim(c));
  }
  const Dataset ds = make_synthetic_dataset(options);
  save_dataset(ds, require(g.out, "--out directory"));
  std::cout << "wrote " << ds.objects.size() << " objects with " << ds.parts().size()
            << " parts to " << g.out << '\n';
  return kExitOk;
}

int cmd_train(const GlobalOptions& g, const std::string& dataset_arg, const std::string& abl_out) {
  ExperimentConfig config = resolve_config(g);
  const std::string root =
      dataset_arg.empty() ? require(config.paths.dataset_root, "dataset root") : dataset_arg;
  const std::string checkpoint = g.out.empty() ? require(config.paths.checkpoint, "checkpoint path") : g.out;
  const Dataset ds = load_dataset(root);

  DocumentsByPart docs;
  for (const auto& obj : ds.objects) collect_documents(prepare_object(obj.cloud, config.descriptor), docs);
  PartRegistry registry(config.descriptor.vocabulary(), config.hdp);
  const auto means = train_parts(registry, docs, config.training, config.inference);
  for (std::size_t e = 0; e < means.size(); ++e) {
    std::cout << "epoch " << e + 1 << " mean_elbo " << detail::format_double(means[e]) << '\n';
  }
  save_checkpoint(checkpoint, registry);
  std::cout << "checkpoint " << checkpoint << " parts " << registry.size() << '\n';

  const std::string store = abl_out.empty() ? config.paths.abl_store : abl_out;
  if (!store.empty()) {
    ArgumentationModel abl;
    for (const auto& obj : ds.objects) {
      train(abl, part_symbols(obj.cloud.part_labels, ds, config.min_part_fraction), obj.category,
            config.abl);
    }
    save_arguments(store, abl);
    std::cout << "arguments " << store << " count " << abl.size() << '\n';
  }
  return kExitOk;
}

int cmd_segment(const GlobalOptions& g, const std::string& checkpoint_arg, const std::string& input) {
  ExperimentConfig config = resolve_config(g);
  const std::string checkpoint =
      checkpoint_arg.empty() ? require(config.paths.checkpoint, "checkpoint") : checkpoint_arg;
  const PartRegistry registry = load_checkpoint(checkpoint);
  const PointCloud cloud = load_cloud(input, detect_cloud_format(input));
  const Segmentation seg = segment_object(registry, cloud, config.descriptor, config.inference);

  std::ostringstream out;
  for (std::size_t i = 0; i < seg.labels.size(); ++i) {
    const auto& p = seg.keypoints.points[i];
    out << detail::format_double(p.x()) << ' ' << detail::format_double(p.y()) << ' '
        << detail::format_double(p.z()) << ' ' << seg.labels[i] << '\n';
  }
  if (g.out.empty()) {
    std::cout << out.str();
  } else {
    write_text_file(g.out, out.str());
  }
  return kExitOk;
}

int cmd_openended(const GlobalOptions& g, const std::string& dataset_arg) {
  ExperimentConfig config = resolve_config(g);
  const std::string root =
      dataset_arg.empty() ? require(config.paths.dataset_root, "dataset root") : dataset_arg;
  const std::string report_dir = g.out.empty() ? require(config.paths.report_dir, "report directory") : g.out;
  const Dataset ds = load_dataset(root);
  const auto objects = prepare_protocol_objects(ds, config.descriptor);

  PartRegistry registry(config.descriptor.vocabulary(), config.hdp);
  HdpLearner learner(registry, config.seed, config.inference, config.teach_passes);
  const ProtocolReport report = run_open_ended(objects, config.teacher, learner);

  std::ostringstream text;
  write_report(text, report);
  std::ostringstream csv;
  write_trajectory_csv(csv, report);
  write_text_file(fs::path(report_dir) / "report.txt", text.str());
  write_text_file(fs::path(report_dir) / "trajectory.csv", csv.str());
  std::cout << text.str();
  return kExitOk;
}

int cmd_occlude(const GlobalOptions& g, const std::string& input) {
  const std::uint64_t seed = g.seed.value_or(0);
  const CloudFormat format = detect_cloud_format(input);
  const PointCloud cloud = load_cloud(input, format);
  const Occlusion occ = occlude_detailed(cloud, seed);
  std::ostringstream out;
  write_cloud(out, occ.cloud, format);
  write_text_file(require(g.out, "--out file"), out.str());
  std::cout << "kept " << occ.cloud.size() << " of " << cloud.size() << " points\n";
  return kExitOk;
}

int cmd_recognize(const GlobalOptions& g, const std::string& checkpoint_arg,
                  const std::string& abl_arg, const std::string& dataset_arg,
                  const std::string& input) {
  ExperimentConfig config = resolve_config(g);
  const std::string store = abl_arg.empty() ? require(config.paths.abl_store, "argument store") : abl_arg;
  const ArgumentationModel abl = load_arguments(store);
  const PointCloud cloud = load_cloud(input, detect_cloud_format(input));

  Dataset names;
  names.part_names = part_names_for(dataset_arg.empty() ? config.paths.dataset_root : dataset_arg);
  std::vector<PartId> labels;
  if (config.oracle_labels) {
    if (!cloud.has_labels()) throw InvalidArgument("--oracle-labels needs a labelled input cloud");
    labels = cloud.part_labels;
  } else {
    const std::string checkpoint =
        checkpoint_arg.empty() ? require(config.paths.checkpoint, "checkpoint") : checkpoint_arg;
    const PartRegistry registry = load_checkpoint(checkpoint);
    labels = segment_object(registry, cloud, config.descriptor, config.inference).labels;
  }
  const SymbolSet parts = part_symbols(labels, names, config.min_part_fraction);
  const Explanation explanation = predict(abl, parts);
  std::ostringstream out;
  out << explanation.predicted << '\n' << explain(explanation);
  std::cout << out.str();
  if (!g.out.empty()) write_text_file(g.out, out.str());
  return kExitOk;
}

int cmd_occlusion_eval(const GlobalOptions& g, const std::string& dataset_arg) {
  ExperimentConfig config = resolve_config(g);
  const std::string root =
      dataset_arg.empty() ? require(config.paths.dataset_root, "dataset root") : dataset_arg;
  const Dataset ds = load_dataset(root);
  OcclusionOptions options;
  options.descriptor = config.descriptor;
  options.training = config.training;
  options.inference = config.inference;
  options.abl = config.abl;
  options.oracle_labels = config.oracle_labels;
  options.min_part_fraction = config.min_part_fraction;
  DescriptorConfig spin = config.descriptor;
  spin.spin_only = true;
  PartRegistry registry(spin.vocabulary(), config.hdp);
  ArgumentationModel abl;
  const OcclusionResult r = run_occlusion_experiment(ds, config.seed, registry, abl, options);

  std::ostringstream out;
  out << "train_objects = " << r.train_objects << '\n'
      << "test_objects = " << r.test_objects << '\n'
      << "acc_original = " << detail::format_double(r.acc_original) << '\n'
      << "acc_occluded = " << detail::format_double(r.acc_occluded) << '\n'
      << "baseline_original = " << detail::format_double(r.baseline_original) << '\n'
      << "baseline_occluded = " << detail::format_double(r.baseline_occluded) << '\n';
  std::cout << out.str();
  if (!g.out.empty()) write_text_file(g.out, out.str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Open-ended 3D part segmentation and argumentation-based recognition"};
  app.require_subcommand(1);
  // Global flags may follow the subcommand as well.
  app.fallthrough();

  GlobalOptions g;
  std::uint64_t seed_value = 0;
  app.add_option("--config", g.config_path, "Experiment config file");
  auto* seed_opt = app.add_option("--seed", seed_value, "Global random seed");
  app.add_flag("--spin-only", g.spin_only, "Spin-image documents only");
  app.add_flag("--oracle-labels", g.oracle_labels, "Use ground-truth part labels");
  app.add_option("--out", g.out, "Output file or directory");

  SyntheticOptions synth;
  std::string categories;
  auto* generate = app.add_subcommand("generate", "Write a synthetic annotated dataset");
  generate->add_option("--objects", synth.objects_per_category, "Objects per category");
  generate->add_option("--points", synth.points_per_object, "Points per object");
  generate->add_option("--categories", categories, "Comma-separated subset of mug,table,airplane");

  std::string dataset;
  std::string abl_out;
  auto* train_cmd = app.add_subcommand("train", "Train part models offline from a dataset");
  train_cmd->add_option("--dataset", dataset, "Dataset root");
  train_cmd->add_option("--abl-out", abl_out, "Also write an argument store");

  std::string checkpoint;
  std::string input;
  auto* segment = app.add_subcommand("segment", "Label the keypoints of one cloud");
  segment->add_option("--checkpoint", checkpoint, "Model checkpoint");
  segment->add_option("input", input, "Input cloud")->required();

  auto* openended = app.add_subcommand("openended", "Run the simulated-teacher protocol");
  openended->add_option("--dataset", dataset, "Dataset root");

  auto* occlude_cmd = app.add_subcommand("occlude", "Randomly rotate and cut one cloud");
  occlude_cmd->add_option("input", input, "Input cloud")->required();

  std::string abl_store;
  auto* recognize = app.add_subcommand("recognize", "Recognise and explain one object");
  recognize->add_option("--checkpoint", checkpoint, "Model checkpoint");
  recognize->add_option("--abl", abl_store, "Argument store");
  recognize->add_option("--dataset", dataset, "Dataset root, for part names");
  recognize->add_option("input", input, "Input cloud")->required();

  auto* occlusion_eval = app.add_subcommand("occlusion-eval", "Run the occlusion experiment");
  occlusion_eval->add_option("--dataset", dataset, "Dataset root");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitIo;
  }
  if (seed_opt->count() > 0) g.seed = seed_value;

  try {
    if (*generate) return cmd_generate(g, synth, categories);
    if (*train_cmd) return cmd_train(g, dataset, abl_out);
    if (*segment) return cmd_segment(g, checkpoint, input);
    if (*openended) return cmd_openended(g, dataset);
    if (*occlude_cmd) return cmd_occlude(g, input);
    if (*recognize) return cmd_recognize(g, checkpoint, abl_store, dataset, input);
    if (*occlusion_eval) return cmd_occlusion_eval(g, dataset);
  } catch (const UnknownObject& e) {
    std::cerr << "partseg: " << e.what() << '\n';
    return kExitUnknown;
  } catch (const std::exception& e) {
    std::cerr << "partseg: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitIo;
}
