#include <doctest.h>

#include "partseg/error.hpp"
#include "partseg/pipeline.hpp"
#include "partseg/protocol.hpp"
#include "partseg/synthetic.hpp"
#include "support.hpp"

using namespace partseg;

namespace {

HdpHyperparams small_hdp() {
  HdpHyperparams h;
  h.eta = 0.1;
  h.topics = 20;
  h.tables = 2;
  return h;
}

}  // namespace

TEST_CASE("descriptor config validation and vocabulary") {
  DescriptorConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.vocabulary() == 139);
  c.spin_only = true;
  CHECK(c.vocabulary() == 64);
  c.leaf = 0.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("prepared objects carry one document per keypoint") {
  SyntheticOptions so;
  so.objects_per_category = 1;
  so.points_per_object = 400;
  const auto ds = make_synthetic_dataset(so);
  DescriptorConfig c;
  for (const auto& obj : ds.objects) {
    const auto p = prepare_object(obj.cloud, c);
    CHECK(p.documents.size() == p.keypoints.size());
    CHECK(p.keypoints.part_labels.size() == p.keypoints.size());
    CHECK(p.keypoints.normals.size() == p.keypoints.size());
    for (const auto& d : p.documents) {
      CHECK(d.vocabulary == c.vocabulary());
      CHECK_FALSE(d.empty());
    }
    const auto again = prepare_object(obj.cloud, c);
    CHECK(again.documents == p.documents);
  }
}

TEST_CASE("segmentation needs a trained registry") {
  PartRegistry reg(DescriptorConfig{}.vocabulary(), small_hdp());
  Rng rng(71);
  CHECK_THROWS_AS(segment_object(reg, test::random_cloud(rng, 100), DescriptorConfig{}),
                  InvalidArgument);
}

TEST_CASE("two-part airplanes are segmented well") {
  SyntheticOptions so;
  so.objects_per_category = 30;
  so.points_per_object = 1024;
  so.categories = {"airplane"};
  const auto ds = make_synthetic_dataset(so);
  DescriptorConfig dc;
  PartRegistry reg(dc.vocabulary(), small_hdp());

  DocumentsByPart docs;
  for (std::size_t i = 0; i < 24; ++i) collect_documents(prepare_object(ds.objects[i].cloud, dc), docs);
  TrainingOptions training;
  training.epochs = 2;
  const auto elbo = train_parts(reg, docs, training);
  REQUIRE(elbo.size() == 2);
  for (std::size_t e = 1; e < elbo.size(); ++e) CHECK(elbo[e] >= elbo[e - 1] - 1e-3 * std::abs(elbo[e - 1]));
  const auto parts = ds.parts();
  CHECK(reg.labels() == std::vector<PartId>(parts.begin(), parts.end()));

  std::vector<PartId> pred;
  std::vector<PartId> gt;
  for (std::size_t i = 24; i < ds.objects.size(); ++i) {
    const auto seg = segment_object(reg, ds.objects[i].cloud, dc);
    const auto prepared = prepare_object(ds.objects[i].cloud, dc);
    CHECK(seg.labels.size() == seg.keypoints.size());
    CHECK(seg.labels == predict_parts(reg, prepared.documents));
    pred.insert(pred.end(), seg.labels.begin(), seg.labels.end());
    gt.insert(gt.end(), prepared.keypoints.part_labels.begin(), prepared.keypoints.part_labels.end());
  }
  const double miou = part_miou(pred, gt, parts);
  MESSAGE("held-out mIoU " << miou);
  CHECK(miou >= 0.9);
}
