#include "mce/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>

#include <json.hpp>

#include "mce/error.hpp"
#include "mce/random.hpp"

namespace mce {

namespace {

double sq_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void nearest_centroid(const Matrix& points, const Matrix& centroids, std::size_t i,
                      std::vector<int>& assignment, std::vector<double>& distance) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows; ++c) {
    double d = sq_distance(points.row(i), centroids.row(c));
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  assignment[i] = best;
  distance[i] = best_d;
}

Matrix plus_plus_seed(const Matrix& points, std::size_t k, Rng& rng) {
  Matrix centroids(k, points.cols);
  std::vector<double> d2(points.rows, std::numeric_limits<double>::infinity());
  std::size_t first = uniform_index(rng, points.rows);
  std::copy_n(points.row(first).begin(), points.cols, centroids.row(0).begin());
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0;
    for (std::size_t i = 0; i < points.rows; ++i) {
      d2[i] = std::min(d2[i], sq_distance(points.row(i), centroids.row(c - 1)));
      total += d2[i];
    }
    std::size_t pick = points.rows - 1;
    if (total > 0) {
      double r = uniform01(rng) * total;
      for (std::size_t i = 0; i < points.rows; ++i) {
        r -= d2[i];
        if (r < 0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = uniform_index(rng, points.rows);
    }
    std::copy_n(points.row(pick).begin(), points.cols, centroids.row(c).begin());
  }
  return centroids;
}

KMeansResult lloyd(const Matrix& points, Matrix centroids, const KMeansOptions& opt) {
  const std::size_t k = centroids.rows;
  KMeansResult r;
  r.assignment.assign(points.rows, 0);
  std::vector<double> dist(points.rows);
  std::vector<std::size_t> sizes(k);
  for (int it = 0; it < opt.max_iters; ++it) {
    r.inertia = assign_points(points, centroids, r.assignment, dist, opt.exec);
    r.inertia_history.push_back(r.inertia);
    r.iterations = it + 1;

    Matrix next(k, points.cols);
    std::fill(sizes.begin(), sizes.end(), 0);
    for (std::size_t i = 0; i < points.rows; ++i) {
      auto c = static_cast<std::size_t>(r.assignment[i]);
      ++sizes[c];
      auto dst = next.row(c);
      auto src = points.row(i);
      for (std::size_t j = 0; j < points.cols; ++j) dst[j] += src[j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] == 0) {
        // Re-seed at the point currently farthest from its centroid.
        std::size_t far = static_cast<std::size_t>(
            std::max_element(dist.begin(), dist.end()) - dist.begin());
        std::copy_n(points.row(far).begin(), points.cols, next.row(c).begin());
        dist[far] = 0;
        continue;
      }
      for (auto& x : next.row(c)) x /= static_cast<double>(sizes[c]);
    }
    double shift = 0;
    for (std::size_t c = 0; c < k; ++c) {
      shift = std::max(shift, std::sqrt(sq_distance(next.row(c), centroids.row(c))));
    }
    centroids = std::move(next);
    if (shift < opt.tolerance) {
      r.inertia = assign_points(points, centroids, r.assignment, dist, opt.exec);
      r.inertia_history.push_back(r.inertia);
      break;
    }
  }
  r.centroids = std::move(centroids);
  return r;
}

double entropy(const std::vector<double>& counts, double n) {
  double h = 0;
  for (double c : counts) {
    if (c > 0) h -= (c / n) * std::log(c / n);
  }
  return h;
}

std::vector<int> dense_labels(std::span<const int> labels, std::size_t& n_labels) {
  std::map<int, int> remap;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out[i] = remap.try_emplace(labels[i], static_cast<int>(remap.size())).first->second;
  }
  n_labels = remap.size();
  return out;
}

double cosine(std::span<const double> a, double na, std::span<const double> b, double nb) {
  if (na == 0 || nb == 0) return 0;
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s / (na * nb);
}

}  // namespace

Matrix l2_normalized(const Matrix& m) {
  Matrix out = m;
  for (std::size_t i = 0; i < out.rows; ++i) {
    auto row = out.row(i);
    double norm = 0;
    for (double x : row) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0) {
      for (auto& x : row) x /= norm;
    }
  }
  return out;
}

double assign_points(const Matrix& points, const Matrix& centroids, std::vector<int>& assignment,
                     std::vector<double>& distance, Exec exec) {
  assignment.resize(points.rows);
  distance.resize(points.rows);
  const auto n = static_cast<std::ptrdiff_t>(points.rows);
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      nearest_centroid(points, centroids, static_cast<std::size_t>(i), assignment, distance);
    }
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      nearest_centroid(points, centroids, static_cast<std::size_t>(i), assignment, distance);
    }
  }
  double inertia = 0;
  for (double d : distance) inertia += d;
  return inertia;
}

KMeansResult kmeans(const Matrix& points, const KMeansOptions& options) {
  if (options.k < 1) throw UsageError("k must be >= 1");
  if (options.k > points.rows) {
    throw UsageError("k = " + std::to_string(options.k) + " exceeds " +
                     std::to_string(points.rows) + " points");
  }
  if (options.restarts < 1 || options.max_iters < 1) throw UsageError("invalid k-means budget");
  Rng rng(options.seed);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < options.restarts; ++r) {
    KMeansResult run = lloyd(points, plus_plus_seed(points, options.k, rng), options);
    if (run.inertia < best.inertia) best = std::move(run);
  }
  return best;
}

double nmi(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size()) throw UsageError("nmi: partitions cover different items");
  if (pred.empty()) throw UsageError("nmi: empty partitions");
  std::size_t ka = 0, kb = 0;
  auto a = dense_labels(pred, ka);
  auto b = dense_labels(truth, kb);
  const double n = static_cast<double>(pred.size());
  std::vector<double> joint(ka * kb, 0.0), ca(ka, 0.0), cb(kb, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[static_cast<std::size_t>(a[i]) * kb + static_cast<std::size_t>(b[i])] += 1;
    ca[static_cast<std::size_t>(a[i])] += 1;
    cb[static_cast<std::size_t>(b[i])] += 1;
  }
  const double ha = entropy(ca, n);
  const double hb = entropy(cb, n);
  if (ka == 1 && kb == 1) return 1.0;
  if (ha == 0 || hb == 0) return 0.0;
  double mi = 0;
  for (std::size_t x = 0; x < ka; ++x) {
    for (std::size_t y = 0; y < kb; ++y) {
      double nxy = joint[x * kb + y];
      if (nxy > 0) mi += (nxy / n) * std::log(n * nxy / (ca[x] * cb[y]));
    }
  }
  return std::clamp(mi / std::sqrt(ha * hb), 0.0, 1.0);
}

NnsResult nns_p_at_1(const Matrix& vectors, std::span<const std::size_t> rows,
                     std::span<const int> labels, Exec exec) {
  if (rows.size() != labels.size()) throw UsageError("nns: rows/labels size mismatch");
  if (rows.size() < 2) throw DataError("nns: need at least two labeled codes");
  std::map<int, std::size_t> members;
  for (int l : labels) ++members[l];
  std::vector<double> norms(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double s = 0;
    for (double x : vectors.row(rows[i])) s += x * x;
    norms[i] = std::sqrt(s);
  }

  const auto n = static_cast<std::ptrdiff_t>(rows.size());
  std::vector<signed char> hit(rows.size(), -1);  // -1: not a query
  auto query = [&](std::ptrdiff_t qi) {
    const auto q = static_cast<std::size_t>(qi);
    if (members.at(labels[q]) < 2) return;
    std::size_t best = SIZE_MAX;
    double best_sim = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < rows.size(); ++j) {
      if (j == q) continue;
      double sim = cosine(vectors.row(rows[q]), norms[q], vectors.row(rows[j]), norms[j]);
      if (sim > best_sim || (sim == best_sim && rows[j] < rows[best])) {
        best_sim = sim;
        best = j;
      }
    }
    hit[q] = labels[best] == labels[q] ? 1 : 0;
  };
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < n; ++i) query(i);
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) query(i);
  }

  NnsResult r;
  for (signed char h : hit) {
    if (h < 0) continue;
    ++r.eligible;
    r.hits += static_cast<std::size_t>(h);
  }
  if (r.eligible == 0) throw DataError("nns: no subcategory has two or more members");
  r.p_at_1 = static_cast<double>(r.hits) / static_cast<double>(r.eligible);
  return r;
}

LabelSet load_labels(std::istream& in, const std::vector<std::string>& vocab) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < vocab.size(); ++i) index.emplace(vocab[i], i);

  std::map<std::size_t, int> by_row;
  std::unordered_map<std::string, std::string> seen;
  std::unordered_map<std::string, int> label_id;
  LabelSet out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size() ||
        line.find('\t', tab + 1) != std::string::npos) {
      throw ParseError(lineno, "expected code<TAB>label");
    }
    std::string code = line.substr(0, tab);
    std::string label = line.substr(tab + 1);
    auto [it, inserted] = seen.emplace(code, label);
    if (!inserted) {
      if (it->second != label) {
        throw ParseError(lineno, "code '" + code + "' has conflicting labels '" + it->second +
                                     "' and '" + label + "'");
      }
      continue;
    }
    auto row = index.find(code);
    if (row == index.end()) {
      ++out.dropped;
      continue;
    }
    auto [lit, fresh] = label_id.try_emplace(label, static_cast<int>(out.label_names.size()));
    if (fresh) out.label_names.push_back(label);
    by_row.emplace(row->second, lit->second);
  }
  for (auto [row, label] : by_row) {
    out.rows.push_back(row);
    out.labels.push_back(label);
  }
  return out;
}

GroundTruth load_ground_truth(const std::string& cluster_file, const std::string& neighbor_file,
                              const std::vector<std::string>& vocab) {
  std::ifstream cin_(cluster_file);
  if (!cin_) throw DataError("cannot open cluster label file '" + cluster_file + "'");
  std::ifstream nin(neighbor_file);
  if (!nin) throw DataError("cannot open neighbor label file '" + neighbor_file + "'");
  return GroundTruth{load_labels(cin_, vocab), load_labels(nin, vocab)};
}

Metrics evaluate(const Matrix& embeddings, const GroundTruth& truth, const EvalOptions& options) {
  const auto& cl = truth.clusters;
  if (cl.rows.empty()) throw DataError("no cluster labels match the embedding vocabulary");
  Matrix points(cl.rows.size(), embeddings.cols);
  for (std::size_t i = 0; i < cl.rows.size(); ++i) {
    auto src = embeddings.row(cl.rows[i]);
    std::copy(src.begin(), src.end(), points.row(i).begin());
  }
  points = l2_normalized(points);

  KMeansOptions km;
  km.k = options.k ? options.k : cl.label_names.size();
  km.restarts = options.restarts;
  km.max_iters = options.max_iters;
  km.seed = options.seed;
  km.exec = options.exec;
  auto clusters = kmeans(points, km);

  Metrics m;
  m.nmi = nmi(clusters.assignment, cl.labels);
  m.n_clustered = cl.rows.size();
  auto nn = nns_p_at_1(embeddings, truth.neighbors.rows, truth.neighbors.labels, options.exec);
  m.p_at_1 = nn.p_at_1;
  m.n_nns_eligible = nn.eligible;
  m.dropped = cl.dropped + truth.neighbors.dropped;
  return m;
}

std::string metrics_json(const Metrics& m) {
  nlohmann::ordered_json j;
  j["nmi"] = m.nmi;
  j["p_at_1"] = m.p_at_1;
  j["n_clustered"] = m.n_clustered;
  j["n_nns_eligible"] = m.n_nns_eligible;
  j["dropped"] = m.dropped;
  return j.dump(2) + "\n";
}

}  // namespace mce
