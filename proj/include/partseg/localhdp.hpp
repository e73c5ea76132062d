#pragma once

// Per-part hierarchical Dirichlet process topic models, fitted with online
// variational inference over truncated stick-breaking representations.
//
// Every semantic part owns an independent model; topics are shared only by
// the point-documents of that part. A document is classified by fitting its
// local variational parameters under each part model and comparing the
// resulting document-level bounds.

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "partseg/descriptors.hpp"
#include "partseg/pointcloud.hpp"

namespace partseg {

struct HdpHyperparams {
  double gamma = 1.0;   // top-level concentration
  double alpha0 = 1.0;  // document-level concentration
  double eta = 0.01;    // symmetric Dirichlet prior on topics
  int topics = 20;      // top-level truncation K
  int tables = 10;      // document-level truncation, < topics
  double kappa = 0.9;   // learning-rate decay, in (0.5, 1]
  double tau0 = 1.0;    // learning-rate delay
  int batch_size = 16;

  void validate() const;
  friend bool operator==(const HdpHyperparams&, const HdpHyperparams&) = default;
};

struct InferenceOptions {
  int max_iterations = 100;
  /// Stop when a sweep improves the bound by less than tol * max(1, |bound|).
  double tolerance = 1e-6;
  friend bool operator==(const InferenceOptions&, const InferenceOptions&) = default;
};

/// Local (per-document) variational parameters.
struct DocumentParams {
  Eigen::VectorXd a;     // tables - 1, Beta first parameter of pi'
  Eigen::VectorXd b;     // tables - 1, Beta second parameter of pi'
  Eigen::MatrixXd zeta;  // tables x topics, q(c): table -> topic
  Eigen::MatrixXd psi;   // distinct words x tables, q(z): word -> table
};

/// The two halves of the per-document bound. `corpus` holds the global
/// terms that get divided by the part's document count.
struct ElboTerms {
  double document = 0.0;
  double corpus = 0.0;

  double total(double part_documents) const;
};

/// Variational state of one semantic part.
class LocalPartModel {
 public:
  /// Fresh model: lambda = eta + U(0, 0.01 eta) noise, u = 1, v = gamma.
  LocalPartModel(PartId label, int vocabulary, const HdpHyperparams& hyper,
                 std::uint64_t seed);

  /// Rebuilds a model from stored state (checkpoint load).
  LocalPartModel(PartId label, const HdpHyperparams& hyper, Eigen::MatrixXd lambda,
                 Eigen::VectorXd u, Eigen::VectorXd v, std::int64_t t_updates,
                 std::int64_t doc_count);

  PartId label() const { return label_; }
  int vocabulary() const { return static_cast<int>(lambda_.cols()); }
  const HdpHyperparams& hyper() const { return hyper_; }
  const Eigen::MatrixXd& lambda() const { return lambda_; }
  const Eigen::VectorXd& u() const { return u_; }
  const Eigen::VectorXd& v() const { return v_; }
  std::int64_t t_updates() const { return t_updates_; }
  std::int64_t doc_count() const { return doc_count_; }

  /// E[phi_k] = lambda_k / sum(lambda_k), one row per topic.
  Eigen::MatrixXd expected_topics() const;

  /// E[log phi] (topics x vocabulary), cached.
  const Eigen::MatrixXd& expected_log_topics() const { return elog_phi_; }
  /// E[log beta_k] from the top-level sticks (length topics), cached.
  const Eigen::VectorXd& expected_log_weights() const { return elog_beta_; }
  /// E[log p(beta') p(phi)] + H(q(beta')) + H(q(phi)), cached.
  double corpus_bound() const { return corpus_bound_; }

 private:
  friend double update_minibatch(LocalPartModel&, std::span<const PointDocument>,
                                 const InferenceOptions&, bool);

  void refresh();

  PartId label_;
  HdpHyperparams hyper_;
  Eigen::MatrixXd lambda_;
  Eigen::VectorXd u_;
  Eigen::VectorXd v_;
  std::int64_t t_updates_ = 0;
  std::int64_t doc_count_ = 0;

  Eigen::MatrixXd elog_phi_;
  Eigen::VectorXd elog_beta_;
  double corpus_bound_ = 0.0;
};

/// All part models of one experiment, in registration order.
class PartRegistry {
 public:
  PartRegistry(int vocabulary, HdpHyperparams hyper);

  int vocabulary() const { return vocabulary_; }
  const HdpHyperparams& hyper() const { return hyper_; }
  std::size_t size() const { return models_.size(); }
  bool empty() const { return models_.empty(); }
  bool contains(PartId label) const;

  LocalPartModel& model(PartId label);
  const LocalPartModel& model(PartId label) const;
  const std::deque<LocalPartModel>& models() const { return models_; }
  std::vector<PartId> labels() const;

  /// Inserts a stored model; label must be new and shapes must match.
  LocalPartModel& insert(LocalPartModel model);

 private:
  int vocabulary_;
  HdpHyperparams hyper_;
  std::deque<LocalPartModel> models_;  // stable references on insert
};

LocalPartModel& new_part(PartRegistry& registry, PartId label, std::uint64_t seed);

/// E[log] of stick-breaking weights for Beta(a_i, b_i) sticks; the result has
/// one more entry than the inputs (the last stick takes the remainder).
Eigen::VectorXd expected_log_sticks(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Entropy of Beta(a, b).
double beta_entropy(double a, double b);

ElboTerms elbo_terms(const LocalPartModel& model, const PointDocument& doc,
                     const DocumentParams& params);

/// Per-document bound with the corpus terms divided by the part's document
/// count (taken as at least one).
double elbo_document(const LocalPartModel& model, const PointDocument& doc,
                     const DocumentParams& params);

struct InferenceResult {
  DocumentParams params;
  double elbo = 0.0;           // full bound, corpus terms included
  double document_elbo = 0.0;  // bound without corpus terms
  int sweeps = 0;
  std::vector<double> trace;   // full bound after every sweep
};

/// Coordinate ascent on (zeta, psi, a, b) for one document under a fixed
/// model. Deterministic.
InferenceResult infer_document(const LocalPartModel& model, const PointDocument& doc,
                               const InferenceOptions& options = {});

/// One stochastic natural-gradient step on a minibatch of documents that all
/// belong to this part. When `new_documents` is false the documents are a
/// repeat pass and the part's document count is left unchanged. Returns the
/// mean per-document bound measured before the step.
double update_minibatch(LocalPartModel& model, std::span<const PointDocument> docs,
                        const InferenceOptions& options = {}, bool new_documents = true);

/// (tau0 + t)^-kappa
double learning_rate(const HdpHyperparams& hyper, std::int64_t t_updates);

struct PartPrediction {
  PartId label = 0;
  double score = 0.0;
  std::vector<std::pair<PartId, double>> scores;  // registration order
};

/// Arg-max of the document-level bound over all registered parts; ties go to
/// the earliest registered part. Read-only on the registry.
PartPrediction predict_part(const PartRegistry& registry, const PointDocument& doc,
                            const InferenceOptions& options = {});

}  // namespace partseg
