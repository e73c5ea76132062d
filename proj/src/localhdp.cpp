#include "partseg/localhdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <boost/math/special_functions/digamma.hpp>

#include "partseg/error.hpp"

namespace partseg {

namespace {

using boost::math::digamma;

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

/// Row-wise softmax of `logits` in place.
void softmax_rows(Eigen::MatrixXd& logits) {
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double peak = logits.row(r).maxCoeff();
    logits.row(r) = (logits.row(r).array() - peak).exp();
    logits.row(r) /= logits.row(r).sum();
  }
}

/// Counts and expected log topic probabilities restricted to a document's
/// distinct words.
struct DocumentView {
  Eigen::VectorXd counts;  // N
  Eigen::MatrixXd elog;    // K x N
};

DocumentView view(const LocalPartModel& model, const PointDocument& doc) {
  const auto n = static_cast<Eigen::Index>(doc.words.size());
  const auto& elog_phi = model.expected_log_topics();
  DocumentView dv{Eigen::VectorXd(n), Eigen::MatrixXd(elog_phi.rows(), n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& w = doc.words[i];
    if (w.word < 0 || w.word >= model.vocabulary()) {
      throw InvalidArgument("document word id " + std::to_string(w.word) +
                            " outside vocabulary of size " +
                            std::to_string(model.vocabulary()));
    }
    dv.counts[i] = w.count;
    dv.elog.col(i) = elog_phi.col(w.word);
  }
  return dv;
}

void check_shapes(const LocalPartModel& model, const PointDocument& doc,
                  const DocumentParams& p) {
  const auto tables = model.hyper().tables;
  const auto topics = model.hyper().topics;
  const auto words = static_cast<Eigen::Index>(doc.words.size());
  if (p.a.size() != tables - 1 || p.b.size() != tables - 1 || p.zeta.rows() != tables ||
      p.zeta.cols() != topics || p.psi.rows() != words || p.psi.cols() != tables) {
    throw InvalidArgument("document parameters do not match model truncation");
  }
}

double document_terms(const LocalPartModel& model, const DocumentView& dv,
                      const DocumentParams& p) {
  const auto& hyper = model.hyper();
  const Eigen::VectorXd elog_pi = expected_log_sticks(p.a, p.b);
  const Eigen::VectorXd& elog_beta = model.expected_log_weights();

  // sum_n c_n psi_nt E[log phi_k,w_n], laid out topics x tables.
  const Eigen::MatrixXd weighted_psi = p.psi.array().colwise() * dv.counts.array();
  const Eigen::MatrixXd word_stats = dv.elog * weighted_psi;

  double bound = 0.0;
  // E[log p(w | c, z, phi)]
  bound += (p.zeta.transpose().array() * word_stats.array()).sum();
  // E[log p(c | beta')] + H(q(c))
  for (Eigen::Index t = 0; t < p.zeta.rows(); ++t) {
    for (Eigen::Index k = 0; k < p.zeta.cols(); ++k) {
      bound += p.zeta(t, k) * elog_beta[k] - xlogx(p.zeta(t, k));
    }
  }
  // E[log p(z | pi')] + H(q(z))
  for (Eigen::Index n = 0; n < p.psi.rows(); ++n) {
    double row = 0.0;
    for (Eigen::Index t = 0; t < p.psi.cols(); ++t) {
      row += p.psi(n, t) * elog_pi[t] - xlogx(p.psi(n, t));
    }
    bound += dv.counts[n] * row;
  }
  // E[log p(pi' | alpha0)] + H(q(pi'))
  for (Eigen::Index t = 0; t < p.a.size(); ++t) {
    const double elog_rest = digamma(p.b[t]) - digamma(p.a[t] + p.b[t]);
    bound += std::log(hyper.alpha0) + (hyper.alpha0 - 1.0) * elog_rest;
    bound += beta_entropy(p.a[t], p.b[t]);
  }
  return bound;
}

/// a_t = 1 + N_t, b_t = alpha0 + sum_{s>t} N_s with N_t the expected word
/// count at table t.
void update_sticks(const DocumentView& dv, double alpha0, DocumentParams& p) {
  const Eigen::VectorXd table_counts = p.psi.transpose() * dv.counts;
  double tail = 0.0;
  for (Eigen::Index t = p.a.size(); t-- > 0;) {
    tail += table_counts[t + 1];
    p.a[t] = 1.0 + table_counts[t];
    p.b[t] = alpha0 + tail;
  }
}

/// Hard word-to-table start: words are grouped by their most likely topic,
/// and the heaviest groups get the first tables.
DocumentParams initial_params(const LocalPartModel& model, const DocumentView& dv) {
  const auto& hyper = model.hyper();
  const int topics = hyper.topics;
  const int tables = hyper.tables;
  const auto words = dv.counts.size();

  std::vector<int> best_topic(words);
  Eigen::VectorXd mass = Eigen::VectorXd::Zero(topics);
  for (Eigen::Index n = 0; n < words; ++n) {
    Eigen::Index k = 0;
    (dv.elog.col(n) + model.expected_log_weights()).maxCoeff(&k);
    best_topic[n] = static_cast<int>(k);
    mass[k] += dv.counts[n];
  }
  std::vector<int> order(topics);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int x, int y) { return mass[x] > mass[y]; });
  std::vector<int> table_of_topic(topics, tables - 1);
  for (int rank = 0; rank < std::min(tables, topics); ++rank) table_of_topic[order[rank]] = rank;

  DocumentParams p;
  p.zeta = Eigen::MatrixXd::Constant(tables, topics, 1.0 / topics);
  p.psi = Eigen::MatrixXd::Zero(words, tables);
  for (Eigen::Index n = 0; n < words; ++n) p.psi(n, table_of_topic[best_topic[n]]) = 1.0;
  p.a.resize(tables - 1);
  p.b.resize(tables - 1);
  update_sticks(dv, hyper.alpha0, p);
  return p;
}

}  // namespace

void HdpHyperparams::validate() const {
  if (!(gamma > 0.0)) throw InvalidArgument("gamma must be positive");
  if (!(alpha0 > 0.0)) throw InvalidArgument("alpha0 must be positive");
  if (!(eta > 0.0)) throw InvalidArgument("eta must be positive");
  if (tables < 2) throw InvalidArgument("document truncation must be at least 2");
  if (tables >= topics) throw InvalidArgument("document truncation must be below topic truncation");
  if (!(kappa > 0.5 && kappa <= 1.0)) throw InvalidArgument("kappa must lie in (0.5, 1]");
  if (!(tau0 >= 0.0)) throw InvalidArgument("tau0 must be non-negative");
  if (batch_size < 1) throw InvalidArgument("batch size must be positive");
}

double ElboTerms::total(double part_documents) const {
  return document + corpus / std::max(1.0, part_documents);
}

LocalPartModel::LocalPartModel(PartId label, int vocabulary, const HdpHyperparams& hyper,
                               std::uint64_t seed)
    : label_(label), hyper_(hyper) {
  hyper_.validate();
  if (vocabulary < 1) throw InvalidArgument("vocabulary must be non-empty");
  Rng rng(seed);
  lambda_.resize(hyper.topics, vocabulary);
  // Column-major fill order is part of the seeded contract.
  for (Eigen::Index c = 0; c < lambda_.cols(); ++c) {
    for (Eigen::Index r = 0; r < lambda_.rows(); ++r) {
      lambda_(r, c) = hyper.eta + 0.01 * hyper.eta * uniform01(rng);
    }
  }
  u_ = Eigen::VectorXd::Ones(hyper.topics - 1);
  v_ = Eigen::VectorXd::Constant(hyper.topics - 1, hyper.gamma);
  refresh();
}

LocalPartModel::LocalPartModel(PartId label, const HdpHyperparams& hyper,
                               Eigen::MatrixXd lambda, Eigen::VectorXd u, Eigen::VectorXd v,
                               std::int64_t t_updates, std::int64_t doc_count)
    : label_(label),
      hyper_(hyper),
      lambda_(std::move(lambda)),
      u_(std::move(u)),
      v_(std::move(v)),
      t_updates_(t_updates),
      doc_count_(doc_count) {
  hyper_.validate();
  if (lambda_.rows() != hyper_.topics || lambda_.cols() < 1 ||
      u_.size() != hyper_.topics - 1 || v_.size() != hyper_.topics - 1) {
    throw InvalidArgument("stored model shapes do not match its hyperparameters");
  }
  if ((lambda_.array() <= 0.0).any() || (u_.array() <= 0.0).any() ||
      (v_.array() <= 0.0).any()) {
    throw InvalidArgument("stored model has non-positive variational parameters");
  }
  if (t_updates_ < 0 || doc_count_ < 0) throw InvalidArgument("negative model counters");
  refresh();
}

Eigen::MatrixXd LocalPartModel::expected_topics() const {
  const Eigen::VectorXd sums = lambda_.rowwise().sum();
  return lambda_.array().colwise() / sums.array();
}

void LocalPartModel::refresh() {
  const auto topics = lambda_.rows();
  const auto vocab = lambda_.cols();
  elog_phi_.resize(topics, vocab);
  double corpus = 0.0;
  const double eta = hyper_.eta;
  const double log_norm_prior = std::lgamma(vocab * eta) - vocab * std::lgamma(eta);
  for (Eigen::Index k = 0; k < topics; ++k) {
    const double row_sum = lambda_.row(k).sum();
    const double dig_sum = digamma(row_sum);
    double sum_elog = 0.0;
    double entropy = -std::lgamma(row_sum);
    for (Eigen::Index w = 0; w < vocab; ++w) {
      const double lam = lambda_(k, w);
      const double e = digamma(lam) - dig_sum;
      elog_phi_(k, w) = e;
      sum_elog += e;
      entropy += std::lgamma(lam) - (lam - 1.0) * e;
    }
    // E[log p(phi_k)] + H(q(phi_k))
    corpus += log_norm_prior + (eta - 1.0) * sum_elog + entropy;
  }
  elog_beta_ = expected_log_sticks(u_, v_);
  for (Eigen::Index k = 0; k < u_.size(); ++k) {
    const double elog_rest = digamma(v_[k]) - digamma(u_[k] + v_[k]);
    corpus += std::log(hyper_.gamma) + (hyper_.gamma - 1.0) * elog_rest;
    corpus += beta_entropy(u_[k], v_[k]);
  }
  corpus_bound_ = corpus;
}

PartRegistry::PartRegistry(int vocabulary, HdpHyperparams hyper)
    : vocabulary_(vocabulary), hyper_(hyper) {
  hyper_.validate();
  if (vocabulary_ < 1) throw InvalidArgument("vocabulary must be non-empty");
}

bool PartRegistry::contains(PartId label) const {
  return std::any_of(models_.begin(), models_.end(),
                     [&](const auto& m) { return m.label() == label; });
}

LocalPartModel& PartRegistry::model(PartId label) {
  for (auto& m : models_) {
    if (m.label() == label) return m;
  }
  throw InvalidArgument("unknown part " + std::to_string(label));
}

const LocalPartModel& PartRegistry::model(PartId label) const {
  return const_cast<PartRegistry*>(this)->model(label);
}

std::vector<PartId> PartRegistry::labels() const {
  std::vector<PartId> out;
  out.reserve(models_.size());
  for (const auto& m : models_) out.push_back(m.label());
  return out;
}

LocalPartModel& PartRegistry::insert(LocalPartModel model) {
  if (contains(model.label())) {
    throw InvalidArgument("part " + std::to_string(model.label()) + " already registered");
  }
  if (model.vocabulary() != vocabulary_ || model.hyper().topics != hyper_.topics ||
      model.hyper().tables != hyper_.tables) {
    throw InvalidArgument("model shape differs from registry");
  }
  return models_.emplace_back(std::move(model));
}

LocalPartModel& new_part(PartRegistry& registry, PartId label, std::uint64_t seed) {
  if (registry.contains(label)) {
    throw InvalidArgument("part " + std::to_string(label) + " already registered");
  }
  return registry.insert(LocalPartModel(label, registry.vocabulary(), registry.hyper(), seed));
}

Eigen::VectorXd expected_log_sticks(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const auto n = a.size();
  Eigen::VectorXd out(n + 1);
  double rest = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double dig_sum = digamma(a[i] + b[i]);
    out[i] = rest + digamma(a[i]) - dig_sum;
    rest += digamma(b[i]) - dig_sum;
  }
  out[n] = rest;
  return out;
}

double beta_entropy(double a, double b) {
  const double log_beta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  return log_beta - (a - 1.0) * digamma(a) - (b - 1.0) * digamma(b) +
         (a + b - 2.0) * digamma(a + b);
}

ElboTerms elbo_terms(const LocalPartModel& model, const PointDocument& doc,
                     const DocumentParams& params) {
  check_shapes(model, doc, params);
  const DocumentView dv = view(model, doc);
  return {document_terms(model, dv, params), model.corpus_bound()};
}

double elbo_document(const LocalPartModel& model, const PointDocument& doc,
                     const DocumentParams& params) {
  return elbo_terms(model, doc, params).total(static_cast<double>(model.doc_count()));
}

InferenceResult infer_document(const LocalPartModel& model, const PointDocument& doc,
                               const InferenceOptions& options) {
  if (doc.empty()) throw InvalidArgument("cannot infer an empty document");
  const DocumentView dv = view(model, doc);
  const auto& hyper = model.hyper();
  const Eigen::VectorXd& elog_beta = model.expected_log_weights();
  const double corpus = model.corpus_bound() / std::max(1.0, double(model.doc_count()));

  InferenceResult result;
  DocumentParams& p = result.params;
  p = initial_params(model, dv);

  double previous = -std::numeric_limits<double>::infinity();
  double document = 0.0;
  const int max_sweeps = std::max(1, options.max_iterations);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    // q(c): zeta_tk ~ exp(E[log beta_k] + sum_n c_n psi_nt E[log phi_k,w_n])
    const Eigen::MatrixXd weighted_psi = p.psi.array().colwise() * dv.counts.array();
    p.zeta = (dv.elog * weighted_psi).transpose();
    p.zeta.rowwise() += elog_beta.transpose();
    softmax_rows(p.zeta);

    // q(z): psi_nt ~ exp(E[log pi_t] + sum_k zeta_tk E[log phi_k,w_n])
    const Eigen::VectorXd elog_pi = expected_log_sticks(p.a, p.b);
    p.psi = (p.zeta * dv.elog).transpose();
    p.psi.rowwise() += elog_pi.transpose();
    softmax_rows(p.psi);

    // q(pi')
    update_sticks(dv, hyper.alpha0, p);

    document = document_terms(model, dv, p);
    const double bound = document + corpus;
    result.trace.push_back(bound);
    result.sweeps = sweep + 1;
    if (bound - previous < options.tolerance * std::max(1.0, std::abs(bound))) break;
    previous = bound;
  }
  result.document_elbo = document;
  result.elbo = document + corpus;
  return result;
}

double learning_rate(const HdpHyperparams& hyper, std::int64_t t_updates) {
  return std::pow(hyper.tau0 + static_cast<double>(t_updates), -hyper.kappa);
}

double update_minibatch(LocalPartModel& model, std::span<const PointDocument> docs,
                        const InferenceOptions& options, bool new_documents) {
  if (docs.empty()) throw InvalidArgument("empty minibatch");
  const auto& hyper = model.hyper_;
  const auto topics = model.lambda_.rows();
  const auto vocab = model.lambda_.cols();

  Eigen::MatrixXd word_stats = Eigen::MatrixXd::Zero(topics, vocab);
  Eigen::VectorXd table_stats = Eigen::VectorXd::Zero(topics);
  double elbo_sum = 0.0;
  for (const auto& doc : docs) {
    const InferenceResult r = infer_document(model, doc, options);
    elbo_sum += r.elbo;
    const auto& p = r.params;
    table_stats += p.zeta.colwise().sum().transpose();
    // sum_t zeta_tk psi_nt c_n, topics x distinct words
    const Eigen::MatrixXd per_word = p.zeta.transpose() * p.psi.transpose();
    for (std::size_t n = 0; n < doc.words.size(); ++n) {
      word_stats.col(doc.words[n].word) +=
          per_word.col(static_cast<Eigen::Index>(n)) * static_cast<double>(doc.words[n].count);
    }
  }

  const auto batch = static_cast<std::int64_t>(docs.size());
  if (new_documents) model.doc_count_ += batch;
  const double part_docs = static_cast<double>(std::max(model.doc_count_, batch));
  const double scale = part_docs / static_cast<double>(batch);
  const double rho = learning_rate(hyper, model.t_updates_);

  const Eigen::MatrixXd lambda_hat = (scale * word_stats).array() + hyper.eta;
  model.lambda_ = (1.0 - rho) * model.lambda_ + rho * lambda_hat;
  double tail = 0.0;
  for (Eigen::Index k = topics - 1; k-- > 0;) {
    tail += table_stats[k + 1];
    const double u_hat = 1.0 + scale * table_stats[k];
    const double v_hat = hyper.gamma + scale * tail;
    model.u_[k] = (1.0 - rho) * model.u_[k] + rho * u_hat;
    model.v_[k] = (1.0 - rho) * model.v_[k] + rho * v_hat;
  }
  ++model.t_updates_;
  model.refresh();
  return elbo_sum / static_cast<double>(batch);
}

PartPrediction predict_part(const PartRegistry& registry, const PointDocument& doc,
                            const InferenceOptions& options) {
  if (registry.empty()) throw InvalidArgument("no parts registered");
  PartPrediction out;
  out.scores.reserve(registry.size());
  bool first = true;
  for (const auto& model : registry.models()) {
    const double score = infer_document(model, doc, options).document_elbo;
    out.scores.emplace_back(model.label(), score);
    if (first || score > out.score) {
      out.label = model.label();
      out.score = score;
      first = false;
    }
  }
  return out;
}

}  // namespace partseg
