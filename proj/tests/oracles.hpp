#pragma once

// Test-side reference implementations, written independently of the library.

#include <cmath>
#include <set>
#include <utility>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>

#include "partseg/localhdp.hpp"
#include "partseg/random.hpp"

namespace partseg::test {

using boost::math::digamma;

// E[log Beta-variable] and E[log (1 - variable)].
inline std::pair<double, double> beta_logs(double a, double b) {
  return {digamma(a) - digamma(a + b), digamma(b) - digamma(a + b)};
}

// E[log p(x | 1, c)] - E[log q(x | a, b)] for one stick.
inline double stick_kl_term(double concentration, double a, double b) {
  const auto [lx, l1x] = beta_logs(a, b);
  const double log_p = std::lgamma(1.0 + concentration) - std::lgamma(concentration) +
                       (concentration - 1.0) * l1x;
  const double log_q = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + (a - 1.0) * lx +
                       (b - 1.0) * l1x;
  return log_p - log_q;
}

inline std::vector<double> stick_logs(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  std::vector<double> out;
  double rest = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const auto [lx, l1x] = beta_logs(a[i], b[i]);
    out.push_back(rest + lx);
    rest += l1x;
  }
  out.push_back(rest);
  return out;
}

inline double plogp(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

// Token-by-token transcription of the per-document bound: every occurrence of
// a word is its own token with the psi row of its word id.
inline double oracle_bound(const LocalPartModel& m, const PointDocument& doc, const DocumentParams& p) {
  const auto& h = m.hyper();
  const auto& lam = m.lambda();
  const int K = h.topics;
  const int T = h.tables;
  const int V = m.vocabulary();

  std::vector<std::vector<double>> elog_phi(K, std::vector<double>(V));
  double corpus = 0.0;
  for (int k = 0; k < K; ++k) {
    double row = 0.0;
    for (int w = 0; w < V; ++w) row += lam(k, w);
    double log_p = std::lgamma(V * h.eta) - V * std::lgamma(h.eta);
    double log_q = std::lgamma(row);
    for (int w = 0; w < V; ++w) {
      elog_phi[k][w] = digamma(lam(k, w)) - digamma(row);
      log_p += (h.eta - 1.0) * elog_phi[k][w];
      log_q += -std::lgamma(lam(k, w)) + (lam(k, w) - 1.0) * elog_phi[k][w];
    }
    corpus += log_p - log_q;
  }
  for (int k = 0; k + 1 < K; ++k) corpus += stick_kl_term(h.gamma, m.u()[k], m.v()[k]);

  const auto elog_beta = stick_logs(m.u(), m.v());
  const auto elog_pi = stick_logs(p.a, p.b);
  double local = 0.0;
  for (std::size_t n = 0; n < doc.words.size(); ++n) {
    for (int token = 0; token < doc.words[n].count; ++token) {
      const int w = doc.words[n].word;
      for (int t = 0; t < T; ++t) {
        const double z = p.psi(static_cast<Eigen::Index>(n), t);
        local += z * elog_pi[t] - plogp(z);
        for (int k = 0; k < K; ++k) local += p.zeta(t, k) * z * elog_phi[k][w];
      }
    }
  }
  for (int t = 0; t < T; ++t) {
    for (int k = 0; k < K; ++k) local += p.zeta(t, k) * elog_beta[k] - plogp(p.zeta(t, k));
  }
  for (int t = 0; t + 1 < T; ++t) local += stick_kl_term(h.alpha0, p.a[t], p.b[t]);
  return local + corpus / std::max<double>(1.0, static_cast<double>(m.doc_count()));
}

inline Eigen::RowVectorXd random_simplex(Rng& rng, Eigen::Index n) {
  Eigen::RowVectorXd r(n);
  for (Eigen::Index i = 0; i < n; ++i) r[i] = -std::log(1.0 - uniform01(rng));
  return r / r.sum();
}

inline DocumentParams random_params(Rng& rng, const HdpHyperparams& h, Eigen::Index words) {
  DocumentParams p;
  p.a.resize(h.tables - 1);
  p.b.resize(h.tables - 1);
  for (Eigen::Index t = 0; t + 1 < h.tables; ++t) {
    p.a[t] = uniform(rng, 0.05, 20.0);
    p.b[t] = uniform(rng, 0.05, 20.0);
  }
  p.zeta.resize(h.tables, h.topics);
  for (Eigen::Index t = 0; t < h.tables; ++t) p.zeta.row(t) = random_simplex(rng, h.topics);
  p.psi.resize(words, h.tables);
  for (Eigen::Index n = 0; n < words; ++n) p.psi.row(n) = random_simplex(rng, h.tables);
  return p;
}

// Independent set-counting version of the metric.
inline double oracle_miou(const std::vector<PartId>& pred, const std::vector<PartId>& gt,
                   const std::set<PartId>& parts) {
  double sum = 0.0;
  int used = 0;
  for (PartId p : parts) {
    std::set<std::size_t> in_pred;
    std::set<std::size_t> in_gt;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (pred[i] == p) in_pred.insert(i);
      if (gt[i] == p) in_gt.insert(i);
    }
    std::set<std::size_t> both;
    std::set<std::size_t> either = in_pred;
    for (auto i : in_gt) {
      if (in_pred.count(i) != 0) both.insert(i);
      either.insert(i);
    }
    if (either.empty()) continue;
    sum += static_cast<double>(both.size()) / static_cast<double>(either.size());
    ++used;
  }
  return sum / used;
}

}  // namespace partseg::test
