#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "eval_oracles.hpp"
#include "mce/error.hpp"
#include "mce/eval.hpp"
#include "mce/random.hpp"

using namespace mce;
using mce::testing::nmi_oracle;
using mce::testing::p_at_1_oracle;

namespace {

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (auto& x : m.data) x = uniform01(rng) * 2 - 1;
  return m;
}

Matrix two_clouds(Rng& rng, std::size_t per_cloud) {
  Matrix m(2 * per_cloud, 3);
  for (std::size_t i = 0; i < m.rows; ++i) {
    double cx = i < per_cloud ? 10.0 : -10.0;
    m.row(i)[0] = cx + uniform01(rng) - 0.5;
    m.row(i)[1] = uniform01(rng) - 0.5;
    m.row(i)[2] = uniform01(rng) - 0.5;
  }
  return m;
}

// Random orthogonal matrix by Gram-Schmidt.
Matrix random_rotation(Rng& rng, std::size_t d) {
  Matrix q = random_matrix(rng, d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      double dot = 0;
      for (std::size_t k = 0; k < d; ++k) dot += q.row(i)[k] * q.row(j)[k];
      for (std::size_t k = 0; k < d; ++k) q.row(i)[k] -= dot * q.row(j)[k];
    }
    double norm = 0;
    for (double x : q.row(i)) norm += x * x;
    for (auto& x : q.row(i)) x /= std::sqrt(norm);
  }
  return q;
}

Matrix multiply(const Matrix& a, const Matrix& rot) {
  Matrix out(a.rows, rot.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < rot.cols; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < a.cols; ++k) s += a.row(i)[k] * rot.row(k)[j];
      out.row(i)[j] = s;
    }
  }
  return out;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("kmeans separates two clouds") {
  Rng rng(1);
  auto pts = two_clouds(rng, 25);
  KMeansOptions o;
  o.k = 2;
  o.seed = 3;
  auto r = kmeans(pts, o);
  for (std::size_t i = 1; i < 25; ++i) CHECK(r.assignment[i] == r.assignment[0]);
  for (std::size_t i = 26; i < 50; ++i) CHECK(r.assignment[i] == r.assignment[25]);
  CHECK(r.assignment[0] != r.assignment[25]);
}

TEST_CASE("kmeans with one cluster per point has zero inertia") {
  Rng rng(2);
  auto pts = random_matrix(rng, 12, 4);
  KMeansOptions o;
  o.k = 12;
  CHECK(kmeans(pts, o).inertia == doctest::Approx(0.0));
  o.k = 13;
  CHECK_THROWS_AS(kmeans(pts, o), UsageError);
}

TEST_CASE("kmeans is deterministic and kernels agree") {
  Rng rng(3);
  auto pts = l2_normalized(random_matrix(rng, 300, 8));
  KMeansOptions o;
  o.k = 7;
  o.seed = 11;
  auto a = kmeans(pts, o);
  auto b = kmeans(pts, o);
  CHECK(a.assignment == b.assignment);
  o.exec = Exec::serial;
  auto s = kmeans(pts, o);
  CHECK(s.assignment == a.assignment);
  CHECK(s.inertia == a.inertia);
}

TEST_CASE("Lloyd inertia never increases (property)") {
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    std::size_t n = 20 + uniform_index(rng, 200);
    auto pts = l2_normalized(random_matrix(rng, n, 2 + uniform_index(rng, 6)));
    KMeansOptions o;
    o.k = 1 + uniform_index(rng, 10);
    o.restarts = 3;
    o.seed = trial;
    auto r = kmeans(pts, o);
    for (std::size_t i = 1; i < r.inertia_history.size(); ++i) {
      CHECK(r.inertia_history[i] <= r.inertia_history[i - 1] * (1 + 1e-12) + 1e-12);
    }
  }
}

TEST_CASE("empty clusters are re-seeded") {
  // Duplicated points force k-means++ to pick a repeated centroid.
  Matrix pts(6, 1);
  pts.data = {0, 0, 0, 0, 0, 5};
  KMeansOptions o;
  o.k = 3;
  o.restarts = 4;
  auto r = kmeans(pts, o);
  CHECK(r.inertia == doctest::Approx(0.0));
}

TEST_CASE("nmi examples") {
  std::vector<int> t{0, 0, 1, 1, 2, 2};
  CHECK(nmi(t, t) == doctest::Approx(1.0));
  std::vector<int> relabeled{5, 5, 3, 3, 9, 9};
  CHECK(nmi(relabeled, t) == doctest::Approx(1.0));
  std::vector<int> one(6, 0);
  CHECK(nmi(one, t) == 0.0);
  CHECK(nmi(std::vector<int>{0, 0, 1, 1}, std::vector<int>{0, 1, 0, 1}) == doctest::Approx(0.0));
  CHECK(nmi(std::vector<int>{1, 1}, std::vector<int>{2, 2}) == 1.0);
  CHECK_THROWS_AS(nmi(std::vector<int>{1}, std::vector<int>{1, 2}), UsageError);
}

TEST_CASE("nmi matches the contingency oracle, is symmetric and label invariant (property)") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 1 + uniform_index(rng, 12);
    std::vector<int> a(n), b(n);
    for (auto& x : a) x = static_cast<int>(uniform_index(rng, 4));
    for (auto& x : b) x = static_cast<int>(uniform_index(rng, 4));
    double v = nmi(a, b);
    CHECK(v == doctest::Approx(nmi_oracle(a, b)).epsilon(1e-12));
    CHECK(v == doctest::Approx(nmi(b, a)).epsilon(1e-12));
    CHECK(v >= 0);
    CHECK(v <= 1);
    std::vector<int> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = 7 - a[i] * 3;
    CHECK(nmi(perm, b) == doctest::Approx(v).epsilon(1e-12));
  }
}

TEST_CASE("p@1 examples") {
  Matrix two(2, 2);
  two.data = {1, 0, 0, 1};
  CHECK(nns_p_at_1(two, std::vector<std::size_t>{0, 1}, std::vector<int>{3, 3}).p_at_1 == 1.0);

  Matrix groups(6, 2);
  groups.data = {1, 0, 1, 0, 0, 1, 0, 1, -1, -1, -1, -1};
  auto r = nns_p_at_1(groups, std::vector<std::size_t>{0, 1, 2, 3, 4, 5},
                      std::vector<int>{0, 0, 1, 1, 2, 2});
  CHECK(r.p_at_1 == 1.0);
  CHECK(r.eligible == 6);

  // A sits closest to C, so A misses.
  Matrix four(4, 2);
  four.data = {1.0, 0.1, 0.2, 1.0, 1.0, 0.0, -1.0, 0.2};
  std::vector<std::size_t> rows{0, 1, 2, 3};
  std::vector<int> labels{0, 0, 1, 1};
  auto f = nns_p_at_1(four, rows, labels);
  CHECK(f.p_at_1 == p_at_1_oracle(four, rows, labels));
  CHECK(f.hits < 4);

  // Singleton subcategories are not queries but remain candidate neighbours.
  auto s = nns_p_at_1(four, rows, std::vector<int>{0, 0, 1, 2});
  CHECK(s.eligible == 2);
  CHECK_THROWS_AS(nns_p_at_1(four, rows, std::vector<int>{0, 1, 2, 3}), DataError);
}

TEST_CASE("p@1 matches brute force and is rotation/scale invariant (property)") {
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t n = 2 + uniform_index(rng, 11);
    std::size_t d = 1 + uniform_index(rng, 5);
    auto v = random_matrix(rng, n + 2, d);
    std::vector<std::size_t> rows;
    std::vector<int> labels;
    for (std::size_t i = 0; i < n; ++i) {
      rows.push_back(i + 2);
      labels.push_back(static_cast<int>(uniform_index(rng, 3)));
    }
    labels[1] = labels[0];
    auto r = nns_p_at_1(v, rows, labels);
    CHECK(r.p_at_1 == p_at_1_oracle(v, rows, labels));
    CHECK(nns_p_at_1(v, rows, labels, Exec::serial).p_at_1 == r.p_at_1);

    Matrix scaled = v;
    for (auto& x : scaled.data) x *= 3.5;
    CHECK(nns_p_at_1(scaled, rows, labels).p_at_1 == r.p_at_1);
    auto rotated = multiply(v, random_rotation(rng, d));
    CHECK(nns_p_at_1(rotated, rows, labels).p_at_1 == r.p_at_1);
  }
}

TEST_CASE("load_labels restricts to the vocabulary") {
  std::vector<std::string> vocab{"A", "B", "C"};
  std::istringstream in("A\tx\nZ\ty\nC\ty\n");
  auto l = load_labels(in, vocab);
  CHECK(l.rows == std::vector<std::size_t>{0, 2});
  CHECK(l.labels == std::vector<int>{0, 1});
  CHECK(l.dropped == 1);

  std::istringstream empty("");
  CHECK(load_labels(empty, vocab).rows.empty());

  std::istringstream dup_same("A\tx\nA\tx\n");
  CHECK(load_labels(dup_same, vocab).rows.size() == 1);
  std::istringstream conflict("A\tx\nA\ty\n");
  CHECK_THROWS_AS(load_labels(conflict, vocab), ParseError);
  std::istringstream malformed("A\tx\nB\n");
  try {
    load_labels(malformed, vocab);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("evaluate scores collapsed groups perfectly and leaves input alone") {
  Matrix emb(6, 3);
  emb.data = {1, 0, 0, 1, 0, 0, 0, 2, 0, 0, 2, 0, 0, 0, 3, 0, 0, 3};
  const Matrix copy = emb;
  GroundTruth truth;
  truth.clusters.rows = {0, 1, 2, 3, 4, 5};
  truth.clusters.labels = {0, 0, 1, 1, 2, 2};
  truth.clusters.label_names = {"a", "b", "c"};
  truth.neighbors = truth.clusters;
  auto m = evaluate(emb, truth, EvalOptions{});
  CHECK(m.nmi == doctest::Approx(1.0));
  CHECK(m.p_at_1 == 1.0);
  CHECK(m.n_clustered == 6);
  CHECK(m.n_nns_eligible == 6);
  CHECK(emb.data == copy.data);

  GroundTruth none;
  CHECK_THROWS_AS(evaluate(emb, none, EvalOptions{}), DataError);
}

}  // TEST_SUITE
