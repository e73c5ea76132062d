#include <cmath>
#include <cstring>
#include <vector>

#include <doctest.h>

#include "partseg/error.hpp"
#include "partseg/localhdp.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace partseg;
using test::oracle_bound;
using test::random_params;

namespace {

HdpHyperparams tiny(int topics, int tables) {
  HdpHyperparams h;
  h.topics = topics;
  h.tables = tables;
  h.eta = 0.5;
  h.batch_size = 4;
  return h;
}

PointDocument doc_of(int vocabulary, std::vector<WordCount> words) {
  PointDocument d;
  d.vocabulary = vocabulary;
  d.words = std::move(words);
  return d;
}

// Trains a model a little so its parameters are not at the prior.
LocalPartModel warmed_model(int vocabulary, const HdpHyperparams& h, std::uint64_t seed,
                            int batches) {
  LocalPartModel m(0, vocabulary, h, seed);
  Rng rng(seed + 1);
  for (int b = 0; b < batches; ++b) {
    std::vector<PointDocument> docs;
    for (int i = 0; i < h.batch_size; ++i) {
      docs.push_back(test::random_document(rng, vocabulary, vocabulary, 4));
    }
    update_minibatch(m, docs);
  }
  return m;
}

std::vector<unsigned char> bytes_of(const LocalPartModel& m) {
  std::vector<unsigned char> out;
  auto append = [&](const double* data, Eigen::Index n) {
    const auto* raw = reinterpret_cast<const unsigned char*>(data);
    out.insert(out.end(), raw, raw + n * sizeof(double));
  };
  append(m.lambda().data(), m.lambda().size());
  append(m.u().data(), m.u().size());
  append(m.v().data(), m.v().size());
  const std::int64_t counters[2] = {m.t_updates(), m.doc_count()};
  const auto* raw = reinterpret_cast<const unsigned char*>(counters);
  out.insert(out.end(), raw, raw + sizeof(counters));
  return out;
}

}  // namespace

TEST_CASE("hyperparameter validation") {
  HdpHyperparams h;
  CHECK_NOTHROW(h.validate());
  h.tables = h.topics;
  CHECK_THROWS_AS(h.validate(), InvalidArgument);
  h = {};
  h.kappa = 0.5;
  CHECK_THROWS_AS(h.validate(), InvalidArgument);
  h = {};
  h.eta = 0.0;
  CHECK_THROWS_AS(h.validate(), InvalidArgument);
  h = {};
  h.batch_size = 0;
  CHECK_THROWS_AS(h.validate(), InvalidArgument);
}

TEST_CASE("new_part registers, rejects duplicates and is seeded") {
  PartRegistry reg(12, tiny(4, 2));
  CHECK(reg.empty());
  const auto& m = new_part(reg, 3, 77);
  CHECK(reg.size() == 1);
  CHECK(m.t_updates() == 0);
  CHECK(m.doc_count() == 0);
  CHECK((m.u().array() == 1.0).all());
  CHECK((m.v().array() == reg.hyper().gamma).all());
  CHECK((m.lambda().array() >= reg.hyper().eta).all());
  CHECK((m.lambda().array() <= 1.01 * reg.hyper().eta).all());
  CHECK_THROWS_AS(new_part(reg, 3, 78), InvalidArgument);

  PartRegistry other(12, tiny(4, 2));
  CHECK(new_part(other, 3, 77).lambda() == m.lambda());
  CHECK(new_part(other, 4, 78).lambda() != m.lambda());
}

TEST_CASE("learning rate starts with full replacement") {
  HdpHyperparams h;
  CHECK(learning_rate(h, 0) == 1.0);
  CHECK(learning_rate(h, 1) == doctest::Approx(std::pow(2.0, -0.9)));
}

TEST_CASE("elbo matches a token-level transcription") {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const int V = 3 + static_cast<int>(uniform_index(rng, 6));
    const int K = 3 + static_cast<int>(uniform_index(rng, 3));
    const int T = 2 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(K - 2)));
    const auto h = tiny(K, T);
    const auto m = warmed_model(V, h, 100 + trial, static_cast<int>(uniform_index(rng, 4)));
    const auto doc = test::random_document(rng, V, V, 5);
    const auto p = random_params(rng, h, static_cast<Eigen::Index>(doc.words.size()));
    const double expected = oracle_bound(m, doc, p);
    CHECK(elbo_document(m, doc, p) == doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("elbo pins") {
  // Frozen from the token-level transcription above.
  const auto h = tiny(3, 2);
  const LocalPartModel m(0, 3, h, 5);
  const auto doc = doc_of(3, {{0, 2}, {2, 1}});
  DocumentParams p;
  p.a = Eigen::VectorXd::Constant(1, 2.0);
  p.b = Eigen::VectorXd::Constant(1, 1.5);
  p.zeta = Eigen::MatrixXd::Constant(2, 3, 1.0 / 3.0);
  p.psi.resize(2, 2);
  p.psi << 1.0, 0.0, 0.25, 0.75;
  CHECK(elbo_document(m, doc, p) == doctest::Approx(-9.000126559322).epsilon(1e-10));
}

TEST_CASE("doubling the part size halves the corpus share") {
  const auto h = tiny(4, 2);
  const auto m = warmed_model(6, h, 9, 3);
  const auto doc = doc_of(6, {{1, 2}, {4, 1}});
  Rng rng(3);
  const auto p = random_params(rng, h, 2);
  const auto terms = elbo_terms(m, doc, p);
  const double n = static_cast<double>(m.doc_count());
  REQUIRE(n >= 1.0);
  CHECK(terms.total(n) - terms.total(2 * n) == doctest::Approx(terms.corpus / (2 * n)));
  CHECK(terms.total(n) == doctest::Approx(elbo_document(m, doc, p)));
}

TEST_CASE("one-hot psi rows carry no entropy") {
  const auto h = tiny(3, 2);
  const LocalPartModel m(0, 4, h, 2);
  const auto doc = doc_of(4, {{0, 1}, {3, 2}});
  DocumentParams p;
  p.a = Eigen::VectorXd::Constant(1, 1.0);
  p.b = Eigen::VectorXd::Constant(1, 1.0);
  p.zeta = Eigen::MatrixXd::Constant(2, 3, 1.0 / 3.0);
  p.psi = Eigen::MatrixXd::Zero(2, 2);
  p.psi(0, 0) = 1.0;
  p.psi(1, 1) = 1.0;
  // With zeta uniform and one-hot psi, the bound minus the psi cross terms
  // equals the bound at a softened psi minus its cross terms plus entropy.
  const double hard = elbo_document(m, doc, p);
  const auto elog_pi = expected_log_sticks(p.a, p.b);
  const auto& elog_phi = m.expected_log_topics();
  auto cross = [&](const Eigen::MatrixXd& psi) {
    double s = 0.0;
    for (Eigen::Index n = 0; n < 2; ++n) {
      const int w = doc.words[n].word;
      for (Eigen::Index t = 0; t < 2; ++t) {
        s += doc.words[n].count * psi(n, t) * (elog_pi[t] + elog_phi.col(w).mean());
      }
    }
    return s;
  };
  auto soft = p;
  soft.psi << 0.5, 0.5, 0.5, 0.5;
  const double entropy = 3.0 * std::log(2.0);
  CHECK(hard - cross(p.psi) == doctest::Approx(elbo_document(m, doc, soft) - cross(soft.psi) - entropy));
}

TEST_CASE("elbo rejects mismatched shapes") {
  const auto h = tiny(3, 2);
  const LocalPartModel m(0, 4, h, 2);
  Rng rng(1);
  auto p = random_params(rng, h, 2);
  CHECK_THROWS_AS(elbo_document(m, doc_of(4, {{0, 1}}), p), InvalidArgument);
  CHECK_THROWS_AS(elbo_document(m, doc_of(4, {{0, 1}, {9, 1}}), p), InvalidArgument);
  p.zeta.resize(2, 2);
  CHECK_THROWS_AS(elbo_document(m, doc_of(4, {{0, 1}, {1, 1}}), p), InvalidArgument);
}

TEST_CASE("each inference sweep matches the oracle and never decreases it") {
  Rng rng(22);
  for (int trial = 0; trial < 30; ++trial) {
    const auto h = tiny(3, 2);
    const auto m = warmed_model(4, h, 300 + trial, 2);
    const auto doc = test::random_document(rng, 4, 3, 3);
    InferenceOptions opts;
    opts.tolerance = 0.0;
    opts.max_iterations = 12;
    const auto full = infer_document(m, doc, opts);
    REQUIRE(full.trace.size() == 12);
    for (int s = 1; s <= 12; ++s) {
      InferenceOptions partial = opts;
      partial.max_iterations = s;
      const auto r = infer_document(m, doc, partial);
      CHECK(r.elbo == full.trace[s - 1]);
      CHECK(oracle_bound(m, doc, r.params) == doctest::Approx(r.elbo).epsilon(1e-10));
      if (s > 1) CHECK(full.trace[s - 1] >= full.trace[s - 2] - 1e-6);
    }
  }
}

TEST_CASE("converged bound beats random feasible parameters") {
  Rng rng(23);
  for (int trial = 0; trial < 5; ++trial) {
    const auto h = tiny(3, 2);
    const auto m = warmed_model(3, h, 500 + trial, 2);
    const auto doc = doc_of(3, {{static_cast<int>(uniform_index(rng, 2)), 1}, {2, 1}});
    const auto r = infer_document(m, doc);
    for (int i = 0; i < 1000; ++i) {
      const auto p = random_params(rng, h, 2);
      CHECK(oracle_bound(m, doc, p) <= r.elbo + 1e-9);
    }
  }
}

TEST_CASE("inference is deterministic and row-stochastic") {
  const auto h = tiny(5, 3);
  const auto m = warmed_model(8, h, 4, 3);
  Rng rng(24);
  for (int trial = 0; trial < 20; ++trial) {
    const auto doc = test::random_document(rng, 8, 6, 4);
    const auto a = infer_document(m, doc);
    const auto b = infer_document(m, doc);
    CHECK(a.elbo == b.elbo);
    CHECK(a.params.psi == b.params.psi);
    CHECK(a.params.zeta.rows() == 3);
    CHECK(a.params.zeta.cols() == 5);
    CHECK(a.params.psi.cols() == 3);
    for (Eigen::Index r = 0; r < a.params.zeta.rows(); ++r) {
      CHECK(a.params.zeta.row(r).sum() == doctest::Approx(1.0).epsilon(1e-9));
    }
    for (Eigen::Index r = 0; r < a.params.psi.rows(); ++r) {
      CHECK(a.params.psi.row(r).sum() == doctest::Approx(1.0).epsilon(1e-9));
    }
    CHECK((a.params.a.array() > 0.0).all());
    CHECK((a.params.b.array() > 0.0).all());
  }
  CHECK_THROWS_AS(infer_document(m, doc_of(8, {})), InvalidArgument);
  CHECK_THROWS_AS(infer_document(m, doc_of(8, {{8, 1}})), InvalidArgument);
}

TEST_CASE("extreme sticks force everything onto the first topic") {
  auto h = tiny(3, 2);
  h.alpha0 = 1e-6;
  Eigen::MatrixXd lambda = Eigen::MatrixXd::Constant(3, 4, 1.0);
  Eigen::VectorXd u = Eigen::VectorXd::Constant(2, 1e6);
  Eigen::VectorXd v = Eigen::VectorXd::Constant(2, 1e-6);
  const LocalPartModel m(0, h, lambda, u, v, 0, 0);
  const auto r = infer_document(m, doc_of(4, {{0, 1}, {2, 3}}));
  for (Eigen::Index t = 0; t < 2; ++t) CHECK(r.params.zeta(t, 0) > 0.999);
  CHECK(r.params.psi(0, 0) == doctest::Approx(1.0));
  CHECK(r.params.psi(1, 0) == doctest::Approx(1.0));
}

TEST_CASE("property: updates keep parameters positive and topics normalised") {
  Rng rng(25);
  for (int trial = 0; trial < 10; ++trial) {
    const int V = 5 + static_cast<int>(uniform_index(rng, 20));
    auto h = tiny(6, 3);
    h.eta = uniform(rng, 0.001, 1.0);
    LocalPartModel m(1, V, h, trial);
    std::int64_t docs = 0;
    for (int b = 0; b < 15; ++b) {
      std::vector<PointDocument> batch;
      const int size = 1 + static_cast<int>(uniform_index(rng, 5));
      for (int i = 0; i < size; ++i) batch.push_back(test::random_document(rng, V, 6, 9));
      const bool fresh = b < 10;
      update_minibatch(m, batch, {}, fresh);
      if (fresh) docs += size;
      CHECK((m.lambda().array() > 0.0).all());
      CHECK((m.u().array() > 0.0).all());
      CHECK((m.v().array() > 0.0).all());
      const auto phi = m.expected_topics();
      for (Eigen::Index k = 0; k < phi.rows(); ++k) {
        CHECK(phi.row(k).sum() == doctest::Approx(1.0).epsilon(1e-9));
      }
    }
    CHECK(m.t_updates() == 15);
    CHECK(m.doc_count() == docs);
  }
}

TEST_CASE("first update replaces lambda with its estimate") {
  const auto h = tiny(3, 2);
  LocalPartModel m(0, 4, h, 1);
  const auto doc = doc_of(4, {{1, 5}});
  update_minibatch(m, std::vector{doc});
  // All five tokens of word 1 are spread over the topics; the other words
  // keep only the prior.
  CHECK(m.lambda().col(1).sum() == doctest::Approx(5.0 + 3 * h.eta));
  for (int w : {0, 2, 3}) CHECK((m.lambda().col(w).array() == h.eta).all());
  CHECK_THROWS_AS(update_minibatch(m, std::span<const PointDocument>{}), InvalidArgument);
}

TEST_CASE("disjoint vocabularies separate the parts") {
  const int V = 20;
  auto h = tiny(6, 3);
  h.eta = 0.01;
  PartRegistry reg(V, h);
  new_part(reg, 0, 1);
  new_part(reg, 1, 2);
  Rng rng(26);
  auto draw = [&](int half) {
    PointDocument d;
    d.vocabulary = V;
    const auto inner = test::random_document(rng, V / 2, 5, 4);
    for (const auto& w : inner.words) d.words.push_back({w.word + half * V / 2, w.count});
    return d;
  };
  for (int step = 0; step < 50; ++step) {
    for (int part = 0; part < 2; ++part) {
      std::vector<PointDocument> batch;
      for (int i = 0; i < h.batch_size; ++i) batch.push_back(draw(part));
      update_minibatch(reg.model(part), batch);
    }
  }
  for (int part = 0; part < 2; ++part) {
    const auto& m = reg.model(part);
    Eigen::Index dominant = 0;
    m.lambda().rowwise().sum().maxCoeff(&dominant);
    const auto phi = m.expected_topics();
    CHECK(phi.row(dominant).segment(part * V / 2, V / 2).sum() > 0.9);
  }
  int correct = 0;
  for (int i = 0; i < 100; ++i) {
    const int part = i % 2;
    correct += predict_part(reg, draw(part)).label == part;
  }
  CHECK(correct == 100);
}

TEST_CASE("updating one part leaves the others bit-identical") {
  auto h = tiny(5, 2);
  PartRegistry reg(10, h);
  new_part(reg, 0, 1);
  new_part(reg, 1, 2);
  new_part(reg, 2, 3);
  Rng rng(27);
  for (int step = 0; step < 10; ++step) {
    const int target = static_cast<int>(uniform_index(rng, 3));
    std::vector<std::vector<unsigned char>> before;
    for (const auto& m : reg.models()) before.push_back(bytes_of(m));
    std::vector<PointDocument> batch;
    for (int i = 0; i < 3; ++i) batch.push_back(test::random_document(rng, 10, 5, 3));
    update_minibatch(reg.model(target), batch);
    for (int part = 0; part < 3; ++part) {
      if (part == target) {
        CHECK(bytes_of(reg.models()[part]) != before[part]);
      } else {
        CHECK(bytes_of(reg.models()[part]) == before[part]);
      }
    }
  }
}

TEST_CASE("prediction") {
  PartRegistry reg(6, tiny(3, 2));
  CHECK_THROWS_AS(predict_part(reg, doc_of(6, {{0, 1}})), InvalidArgument);
  new_part(reg, 7, 1);
  const auto single = predict_part(reg, doc_of(6, {{0, 1}}));
  CHECK(single.label == 7);
  CHECK(single.scores.size() == 1);

  // Two identical models tie; the earlier registration wins.
  const auto& first = reg.model(7);
  reg.insert(LocalPartModel(9, reg.hyper(), first.lambda(), first.u(), first.v(), 0, 0));
  const auto tied = predict_part(reg, doc_of(6, {{2, 3}}));
  CHECK(tied.scores.size() == 2);
  CHECK(tied.scores[0].second == tied.scores[1].second);
  CHECK(tied.label == 7);

  // Prediction ignores the corpus share, so the part size does not matter.
  PartRegistry sized(6, tiny(3, 2));
  sized.insert(LocalPartModel(1, sized.hyper(), first.lambda(), first.u(), first.v(), 0, 1));
  sized.insert(LocalPartModel(2, sized.hyper(), first.lambda(), first.u(), first.v(), 0, 1000));
  const auto fair = predict_part(sized, doc_of(6, {{2, 3}}));
  CHECK(fair.scores[0].second == fair.scores[1].second);
}

TEST_CASE("stored models are validated") {
  const auto h = tiny(3, 2);
  Eigen::MatrixXd lambda = Eigen::MatrixXd::Constant(3, 4, 1.0);
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(2);
  CHECK_NOTHROW(LocalPartModel(0, h, lambda, ones, ones, 0, 0));
  CHECK_THROWS_AS(LocalPartModel(0, h, lambda, Eigen::VectorXd::Ones(3), ones, 0, 0),
                  InvalidArgument);
  lambda(1, 1) = 0.0;
  CHECK_THROWS_AS(LocalPartModel(0, h, lambda, ones, ones, 0, 0), InvalidArgument);
  PartRegistry reg(5, h);
  CHECK_THROWS_AS(reg.insert(LocalPartModel(0, h, Eigen::MatrixXd::Ones(3, 4), ones, ones, 0, 0)),
                  InvalidArgument);
}
