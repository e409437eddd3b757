#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace mce {

// Dense row-major point set.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
};

Matrix l2_normalized(const Matrix& m);

// Kernels come in a serial reference form and an OpenMP form; both compute
// each item independently so results do not depend on thread count.
enum class Exec { serial, parallel };

struct KMeansOptions {
  std::size_t k = 10;
  int restarts = 10;
  int max_iters = 100;
  double tolerance = 1e-6;  // stop when every centroid moves less than this
  std::uint64_t seed = 1;
  Exec exec = Exec::parallel;
};

struct KMeansResult {
  std::vector<int> assignment;
  Matrix centroids;
  double inertia = 0;
  int iterations = 0;
  std::vector<double> inertia_history;  // after each assignment step of the winning restart
};

/// Best-inertia Lloyd run over `restarts` k-means++ seedings. An empty cluster
/// is re-seeded at the point farthest from its centroid.
KMeansResult kmeans(const Matrix& points, const KMeansOptions& options);

/// Nearest-centroid assignment (ties to the lower index); returns inertia.
double assign_points(const Matrix& points, const Matrix& centroids, std::vector<int>& assignment,
                     std::vector<double>& distance, Exec exec);

/// Normalized mutual information with the sqrt(H(a) H(b)) normalizer.
double nmi(std::span<const int> pred, std::span<const int> truth);

struct NnsResult {
  double p_at_1 = 0;
  std::size_t eligible = 0;
  std::size_t hits = 0;
};

/// Precision@1 of cosine nearest-neighbour search restricted to labeled rows.
/// `labels[i]` is the subcategory of row `rows[i]`; queries are the rows whose
/// subcategory has at least two members; ties go to the lower row index.
NnsResult nns_p_at_1(const Matrix& vectors, std::span<const std::size_t> rows,
                     std::span<const int> labels, Exec exec = Exec::parallel);

struct LabelSet {
  std::vector<std::size_t> rows;  // vocabulary ids, ascending
  std::vector<int> labels;        // dense label ids in first-appearance order
  std::vector<std::string> label_names;
  std::size_t dropped = 0;        // codes absent from the vocabulary
};

struct GroundTruth {
  LabelSet clusters;
  LabelSet neighbors;
};

/// Reads `code<TAB>label` lines restricted to `vocab`. Unknown codes are
/// counted as dropped; a code listed twice with different labels is an error.
LabelSet load_labels(std::istream& in, const std::vector<std::string>& vocab);
GroundTruth load_ground_truth(const std::string& cluster_file, const std::string& neighbor_file,
                              const std::vector<std::string>& vocab);

struct EvalOptions {
  int restarts = 10;
  int max_iters = 100;
  std::uint64_t seed = 1;
  std::size_t k = 0;  // 0: number of distinct cluster labels
  Exec exec = Exec::parallel;
};

struct Metrics {
  double nmi = 0;
  double p_at_1 = 0;
  std::size_t n_clustered = 0;
  std::size_t n_nns_eligible = 0;
  std::size_t dropped = 0;
};

Metrics evaluate(const Matrix& embeddings, const GroundTruth& truth, const EvalOptions& options);
std::string metrics_json(const Metrics& m);

}  // namespace mce
