#include "partseg/protocol.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>

#include "partseg/detail/text.hpp"
#include "partseg/error.hpp"

namespace partseg {

double part_miou(std::span<const PartId> pred, std::span<const PartId> gt,
                 const std::set<PartId>& parts) {
  if (pred.size() != gt.size()) throw InvalidArgument("prediction and ground truth lengths differ");
  if (pred.empty()) throw InvalidArgument("empty label vectors");
  std::map<PartId, std::pair<std::size_t, std::size_t>> counts;  // intersection, union
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool pred_in = parts.count(pred[i]) != 0;
    const bool gt_in = parts.count(gt[i]) != 0;
    if (pred[i] == gt[i]) {
      if (pred_in) {
        ++counts[pred[i]].first;
        ++counts[pred[i]].second;
      }
    } else {
      if (pred_in) ++counts[pred[i]].second;
      if (gt_in) ++counts[gt[i]].second;
    }
  }
  double sum = 0.0;
  std::size_t used = 0;
  for (const auto& [part, c] : counts) {
    if (c.second == 0) continue;
    sum += static_cast<double>(c.first) / static_cast<double>(c.second);
    ++used;
  }
  if (used == 0) throw InvalidArgument("no part occurs in prediction or ground truth");
  return sum / static_cast<double>(used);
}

void TeacherConfig::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0)) throw InvalidArgument("threshold must lie in (0, 1)");
  if (stall_iterations < 1 || teach_count < 1 || window_factor < 1) {
    throw InvalidArgument("teacher counts must be positive");
  }
}

std::string_view to_string(StopReason reason) {
  return reason == StopReason::all_taught ? "all_taught" : "stalled";
}

std::vector<ProtocolObject> prepare_protocol_objects(const Dataset& dataset,
                                                     const DescriptorConfig& config) {
  std::vector<ProtocolObject> out;
  out.reserve(dataset.objects.size());
  for (const auto& obj : dataset.objects) {
    if (!obj.cloud.has_labels()) {
      throw InvalidArgument("object " + obj.category + "/" + obj.name + " lacks part annotations");
    }
    PreparedObject prepared = prepare_object(obj.cloud, config);
    out.push_back({obj.category, std::move(prepared.documents),
                   std::move(prepared.keypoints.part_labels)});
  }
  return out;
}

HdpLearner::HdpLearner(PartRegistry& registry, std::uint64_t seed, InferenceOptions inference,
                       int passes)
    : registry_(registry), seed_(seed), inference_(inference), passes_(passes), rng_(seed) {
  if (passes_ < 1) throw InvalidArgument("learner needs at least one pass");
}

void HdpLearner::add_part(PartId part) { new_part(registry_, part, part_seed(seed_, part)); }

void HdpLearner::train(PartId part, std::span<const PointDocument> documents) {
  if (documents.empty()) return;
  LocalPartModel& model = registry_.model(part);
  const auto batch = static_cast<std::size_t>(registry_.hyper().batch_size);
  std::vector<std::size_t> order(documents.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<PointDocument> minibatch;
  for (int pass = 0; pass < passes_; ++pass) {
    shuffle(std::span(order), rng_);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      minibatch.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + batch); ++i) {
        minibatch.push_back(documents[order[i]]);
      }
      update_minibatch(model, minibatch, inference_, pass == 0);
    }
  }
}

std::vector<PartId> HdpLearner::predict(std::span<const PointDocument> documents) const {
  return predict_parts(registry_, documents, inference_);
}

namespace {

bool contains_part(const ProtocolObject& obj, PartId part) {
  return std::find(obj.labels.begin(), obj.labels.end(), part) != obj.labels.end();
}

std::vector<PointDocument> documents_of(const ProtocolObject& obj, PartId part) {
  std::vector<PointDocument> out;
  for (std::size_t i = 0; i < obj.labels.size(); ++i) {
    if (obj.labels[i] == part) out.push_back(obj.documents[i]);
  }
  return out;
}

struct WindowEntry {
  std::vector<PartId> pred;
  std::vector<PartId> gt;
};

}  // namespace

ProtocolReport run_open_ended(std::span<const ProtocolObject> objects,
                              const TeacherConfig& config, PartLearner& learner) {
  config.validate();
  if (objects.empty()) throw InvalidArgument("open-ended run needs objects");
  for (const auto& obj : objects) {
    if (obj.labels.empty() || obj.labels.size() != obj.documents.size()) {
      throw InvalidArgument("dataset lacks part annotations");
    }
  }

  Rng rng(config.seed);
  std::vector<std::size_t> order(objects.size());
  std::iota(order.begin(), order.end(), 0);
  shuffle(std::span(order), rng);

  std::vector<PartId> part_order;
  for (auto idx : order) {
    for (auto label : objects[idx].labels) {
      if (std::find(part_order.begin(), part_order.end(), label) == part_order.end()) {
        part_order.push_back(label);
      }
    }
  }

  ProtocolReport report;
  std::set<PartId> learned;
  std::vector<bool> taught_with(objects.size(), false);
  std::deque<WindowEntry> window;
  int since_intro = 0;

  auto pick = [&](std::vector<std::size_t>& pool, std::size_t count) {
    count = std::min(count, pool.size());
    for (std::size_t i = 0; i < count; ++i) {
      std::swap(pool[i], pool[i + uniform_index(rng, pool.size() - i)]);
    }
    pool.resize(count);
    return pool;
  };

  auto teach = [&](PartId part) {
    std::vector<std::size_t> fresh;
    std::vector<std::size_t> any;
    for (auto idx : order) {
      if (!contains_part(objects[idx], part)) continue;
      any.push_back(idx);
      if (!taught_with[idx]) fresh.push_back(idx);
    }
    auto& pool = fresh.size() >= static_cast<std::size_t>(config.teach_count) ? fresh : any;
    const auto chosen = pick(pool, static_cast<std::size_t>(config.teach_count));
    learner.add_part(part);
    std::vector<PointDocument> docs;
    for (auto idx : chosen) {
      auto part_docs = documents_of(objects[idx], part);
      docs.insert(docs.end(), part_docs.begin(), part_docs.end());
      taught_with[idx] = true;
    }
    learner.train(part, docs);
    report.stored_instances += static_cast<int>(chosen.size());
    report.teaching_order.push_back(part);
    learned.insert(part);
    window.clear();
    since_intro = 0;
  };

  teach(part_order.front());
  int iteration = 0;
  while (true) {
    std::vector<std::size_t> unseen;
    std::vector<std::size_t> relevant;
    for (auto idx : order) {
      const bool has_learned = std::any_of(objects[idx].labels.begin(), objects[idx].labels.end(),
                                           [&](PartId p) { return learned.count(p) != 0; });
      if (!has_learned) continue;
      relevant.push_back(idx);
      if (!taught_with[idx]) unseen.push_back(idx);
    }
    auto& pool = unseen.empty() ? relevant : unseen;
    const auto& obj = objects[pool[uniform_index(rng, pool.size())]];

    const auto predicted = learner.predict(obj.documents);
    if (predicted.size() != obj.labels.size()) {
      throw InvalidArgument("learner returned a wrong number of labels");
    }
    WindowEntry entry;
    for (std::size_t i = 0; i < obj.labels.size(); ++i) {
      if (learned.count(obj.labels[i]) == 0) continue;
      entry.pred.push_back(predicted[i]);
      entry.gt.push_back(obj.labels[i]);
    }
    const double object_miou = part_miou(entry.pred, entry.gt, learned);
    ++iteration;
    ++since_intro;
    ++report.presentations;

    const std::size_t window_size = static_cast<std::size_t>(config.window_factor) * learned.size();
    window.push_back(entry);
    while (window.size() > window_size) window.pop_front();

    if (object_miou < config.threshold) {
      for (PartId part : learned) {
        if (std::find(entry.gt.begin(), entry.gt.end(), part) == entry.gt.end()) continue;
        learner.train(part, documents_of(obj, part));
      }
      ++report.correction_iterations;
      ++report.stored_instances;
    }

    std::vector<PartId> all_pred;
    std::vector<PartId> all_gt;
    for (const auto& w : window) {
      all_pred.insert(all_pred.end(), w.pred.begin(), w.pred.end());
      all_gt.insert(all_gt.end(), w.gt.begin(), w.gt.end());
    }
    const double window_miou = part_miou(all_pred, all_gt, learned);
    report.trajectory.push_back({iteration, static_cast<int>(learned.size()), window_miou});
    report.final_miou = window_miou;

    if (window.size() >= window_size && window_miou > config.threshold) {
      if (learned.size() == part_order.size()) {
        report.stop_reason = StopReason::all_taught;
        break;
      }
      teach(part_order[learned.size()]);
      continue;
    }
    if (since_intro >= config.stall_iterations) {
      report.stop_reason = StopReason::stalled;
      break;
    }
  }

  report.learned_parts = static_cast<int>(learned.size());
  report.avg_instances_per_part =
      static_cast<double>(report.stored_instances) / static_cast<double>(report.learned_parts);
  return report;
}

void write_report(std::ostream& out, const ProtocolReport& report) {
  using detail::format_double;
  out << "learned_parts = " << report.learned_parts << '\n'
      << "correction_iterations = " << report.correction_iterations << '\n'
      << "presentations = " << report.presentations << '\n'
      << "stored_instances = " << report.stored_instances << '\n'
      << "avg_instances_per_part = " << format_double(report.avg_instances_per_part) << '\n'
      << "final_miou = " << format_double(report.final_miou) << '\n'
      << "stop_reason = " << to_string(report.stop_reason) << '\n';
  out << "teaching_order =";
  for (auto p : report.teaching_order) out << ' ' << p;
  out << '\n';
}

void write_trajectory_csv(std::ostream& out, const ProtocolReport& report) {
  out << "iteration,n_parts,window_miou\n";
  for (const auto& t : report.trajectory) {
    out << t.iteration << ',' << t.parts << ',' << detail::format_double(t.window_miou) << '\n';
  }
}

SymbolSet part_symbols(std::span<const PartId> labels, const Dataset& dataset,
                       double min_fraction) {
  std::map<PartId, std::size_t> counts;
  for (auto l : labels) ++counts[l];
  SymbolSet out;
  if (counts.empty()) return out;
  auto most = counts.begin();
  for (auto it = counts.begin(); it != counts.end(); ++it) {
    if (it->second > most->second) most = it;
    if (static_cast<double>(it->second) >= min_fraction * static_cast<double>(labels.size())) {
      out.insert(dataset.part_name(it->first));
    }
  }
  if (out.empty()) out.insert(dataset.part_name(most->first));
  return out;
}

std::vector<double> global_projection_histogram(const PointCloud& cloud, int bins) {
  const ReferenceFrame frame = pca_frame(cloud);
  const double length = projection_support_length(cloud, frame);
  const double epsilon = 0.015 * length;
  const auto cells = static_cast<std::size_t>(bins) * bins;
  std::vector<double> hist(3 * cells, 0.0);
  for (const auto& p : cloud.points) {
    for (auto plane : kProjectionPlanes) {
      const auto [alpha, beta] = project_point(p, frame, plane);
      const auto [r, c] = bin_index(alpha, beta, length, bins, epsilon);
      hist[static_cast<std::size_t>(plane) * cells + r * bins + c] += 1.0;
    }
  }
  for (auto& h : hist) h /= static_cast<double>(cloud.size());
  return hist;
}

namespace {

std::string nearest_centroid(const std::map<std::string, std::vector<double>>& centroids,
                             const std::vector<double>& hist) {
  std::string best;
  double best_dist = std::numeric_limits<double>::infinity();
  for (const auto& [category, centre] : centroids) {
    double d = 0.0;
    for (std::size_t i = 0; i < hist.size(); ++i) d += (hist[i] - centre[i]) * (hist[i] - centre[i]);
    if (d < best_dist) {
      best_dist = d;
      best = category;
    }
  }
  return best;
}

bool recognised(const ArgumentationModel& abl, const SymbolSet& parts,
                const std::string& category) {
  try {
    return predict(abl, parts).predicted == category;
  } catch (const UnknownObject&) {
    return false;
  }
}

}  // namespace

OcclusionResult run_occlusion_experiment(const Dataset& dataset, std::uint64_t split_seed,
                                         PartRegistry& registry, ArgumentationModel& abl,
                                         const OcclusionOptions& options) {
  if (dataset.objects.size() < 10) throw InvalidArgument("occlusion experiment needs at least 10 objects");
  DescriptorConfig descriptor = options.descriptor;
  descriptor.spin_only = true;
  descriptor.validate();
  if (!options.oracle_labels && registry.vocabulary() != descriptor.vocabulary()) {
    throw InvalidArgument("registry vocabulary does not match spin-only documents");
  }

  std::map<std::string, std::vector<std::size_t>> by_category;
  for (std::size_t i = 0; i < dataset.objects.size(); ++i) {
    by_category[dataset.objects[i].category].push_back(i);
  }
  Rng rng(split_seed);
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;
  for (auto& [category, members] : by_category) {
    shuffle(std::span(members), rng);
    const auto n_test = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::lround(options.test_fraction * members.size())), 1,
        members.size() - 1);
    test_idx.insert(test_idx.end(), members.begin(), members.begin() + n_test);
    train_idx.insert(train_idx.end(), members.begin() + n_test, members.end());
  }

  OcclusionResult result;
  result.train_objects = train_idx.size();
  result.test_objects = test_idx.size();

  // Segmentation training on clean clouds.
  std::vector<PreparedObject> prepared_train;
  if (!options.oracle_labels) {
    DocumentsByPart docs;
    for (auto idx : train_idx) {
      prepared_train.push_back(prepare_object(dataset.objects[idx].cloud, descriptor));
      collect_documents(prepared_train.back(), docs);
    }
    train_parts(registry, docs, options.training, options.inference);
  }

  auto labels_of = [&](const PointCloud& cloud, const PreparedObject* prepared) {
    if (options.oracle_labels) return cloud.part_labels;
    if (prepared != nullptr) return predict_parts(registry, prepared->documents, options.inference);
    return segment_object(registry, cloud, descriptor, options.inference).labels;
  };

  std::map<std::string, std::vector<double>> centroids;
  std::map<std::string, std::size_t> category_count;
  for (std::size_t i = 0; i < train_idx.size(); ++i) {
    const auto& obj = dataset.objects[train_idx[i]];
    const auto labels = labels_of(obj.cloud, prepared_train.empty() ? nullptr : &prepared_train[i]);
    train(abl, part_symbols(labels, dataset, options.min_part_fraction), obj.category, options.abl);

    const auto hist = global_projection_histogram(
        voxel_downsample(obj.cloud, descriptor.leaf), descriptor.projection_bins);
    auto& centre = centroids[obj.category];
    if (centre.empty()) centre.assign(hist.size(), 0.0);
    for (std::size_t k = 0; k < hist.size(); ++k) centre[k] += hist[k];
    ++category_count[obj.category];
  }
  for (auto& [category, centre] : centroids) {
    for (auto& c : centre) c /= static_cast<double>(category_count[category]);
  }

  std::size_t ok_original = 0;
  std::size_t ok_occluded = 0;
  std::size_t base_original = 0;
  std::size_t base_occluded = 0;
  for (std::size_t i = 0; i < test_idx.size(); ++i) {
    const auto& obj = dataset.objects[test_idx[i]];
    const PointCloud occluded = occlude(obj.cloud, part_seed(split_seed, static_cast<PartId>(i)));
    for (const PointCloud* cloud : {&obj.cloud, &occluded}) {
      const bool is_occluded = cloud == &occluded;
      const auto labels = labels_of(*cloud, nullptr);
      const bool ok = recognised(abl, part_symbols(labels, dataset, options.min_part_fraction),
                                 obj.category);
      const auto hist = global_projection_histogram(voxel_downsample(*cloud, descriptor.leaf),
                                                    descriptor.projection_bins);
      const bool base_ok = nearest_centroid(centroids, hist) == obj.category;
      (is_occluded ? ok_occluded : ok_original) += ok ? 1 : 0;
      (is_occluded ? base_occluded : base_original) += base_ok ? 1 : 0;
    }
  }
  const auto n = static_cast<double>(test_idx.size());
  result.acc_original = static_cast<double>(ok_original) / n;
  result.acc_occluded = static_cast<double>(ok_occluded) / n;
  result.baseline_original = static_cast<double>(base_original) / n;
  result.baseline_occluded = static_cast<double>(base_occluded) / n;
  return result;
}

}  // namespace partseg
