// Copyright 2026 mbss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "post_select.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "common.hpp"
#include "metrics.hpp"

namespace mbss::post {

AffinityResult pearson_affinity(const std::vector<RealMatrix>& candidates) {
  MBSS_CHECK(!candidates.empty(), UsageError, "no candidates");
  const Eigen::Index rows = candidates[0].rows();
  const Eigen::Index cols = candidates[0].cols();
  const auto n = static_cast<Eigen::Index>(candidates[0].size());

  AffinityResult result;
  std::vector<Eigen::VectorXd> centered;
  std::vector<double> norms;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    MBSS_CHECK(candidates[i].rows() == rows && candidates[i].cols() == cols,
               DataError, "candidate shapes differ");
    Eigen::Map<const Eigen::VectorXd> flat(candidates[i].data(), n);
    Eigen::VectorXd v = flat.array() - flat.mean();
    const double norm = v.norm();
    if (norm <= 1e-12 * std::sqrt(static_cast<double>(n))) {
      result.dropped.push_back(i);
      continue;
    }
    centered.push_back(std::move(v));
    norms.push_back(norm);
    result.kept.push_back(i);
  }
  MBSS_CHECK(!result.kept.empty(), DataError,
             "every candidate has zero variance");

  const auto m = static_cast<Eigen::Index>(result.kept.size());
  result.affinity.resize(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    result.affinity(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const double r = centered[i].dot(centered[j]) / (norms[i] * norms[j]);
      result.affinity(i, j) = r;
      result.affinity(j, i) = r;
    }
  }
  return result;
}

void jacobi_eigh(const RealMatrix& sym, Eigen::VectorXd& eigenvalues,
                 RealMatrix& eigenvectors, int max_sweeps) {
  const Eigen::Index n = sym.rows();
  MBSS_CHECK(n >= 1 && sym.cols() == n, UsageError, "matrix must be square");
  MBSS_CHECK((sym - sym.transpose()).cwiseAbs().maxCoeff() <=
                 1e-9 * std::max(1.0, sym.cwiseAbs().maxCoeff()),
             DataError, "matrix must be symmetric");

  RealMatrix a = sym;
  RealMatrix v = RealMatrix::Identity(n, n);
  bool converged = n == 1;
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) <= 1e-13 * std::max(1.0, a.norm())) {
      converged = true;
      break;
    }
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (std::fabs(a(p, q)) <= 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        for (Eigen::Index i = 0; i < n; ++i) {
          const double aip = a(i, p), aiq = a(i, q);
          a(i, p) = c * aip - s * aiq;
          a(i, q) = s * aip + c * aiq;
        }
        for (Eigen::Index i = 0; i < n; ++i) {
          const double api = a(p, i), aqi = a(q, i);
          a(p, i) = c * api - s * aqi;
          a(q, i) = s * api + c * aqi;
        }
        for (Eigen::Index i = 0; i < n; ++i) {
          const double vip = v(i, p), viq = v(i, q);
          v(i, p) = c * vip - s * viq;
          v(i, q) = s * vip + c * viq;
        }
      }
    }
  }
  MBSS_CHECK(converged, NumericError, "Jacobi eigensolver did not converge");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index i, Eigen::Index j) { return a(i, i) < a(j, j); });
  eigenvalues.resize(n);
  eigenvectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    eigenvalues(i) = a(order[static_cast<std::size_t>(i)],
                       order[static_cast<std::size_t>(i)]);
    eigenvectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
  }
}

namespace {

struct KmeansResult {
  std::vector<int> labels;
  double inertia = std::numeric_limits<double>::infinity();
};

KmeansResult kmeans_once(const RealMatrix& points, std::size_t k, Rng& rng) {
  const Eigen::Index n = points.rows();
  const Eigen::Index dim = points.cols();

  // Initial centroids: k distinct random points.
  std::vector<std::size_t> pick(static_cast<std::size_t>(n));
  std::iota(pick.begin(), pick.end(), 0);
  for (std::size_t i = 0; i < k; ++i)
    std::swap(pick[i], pick[i + rng.next_index(pick.size() - i)]);
  RealMatrix centroids(static_cast<Eigen::Index>(k), dim);
  for (std::size_t c = 0; c < k; ++c)
    centroids.row(static_cast<Eigen::Index>(c)) =
        points.row(static_cast<Eigen::Index>(pick[c]));

  KmeansResult result;
  result.labels.assign(static_cast<std::size_t>(n), 0);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (points.row(i) - centroids.row(0)).squaredNorm();
      for (std::size_t c = 1; c < k; ++c) {
        const double d =
            (points.row(i) - centroids.row(static_cast<Eigen::Index>(c)))
                .squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = static_cast<int>(c);
        }
      }
      if (result.labels[static_cast<std::size_t>(i)] != best) {
        result.labels[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    centroids.setZero();
    std::vector<std::size_t> counts(k, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      centroids.row(result.labels[static_cast<std::size_t>(i)]) +=
          points.row(i);
      ++counts[static_cast<std::size_t>(
          result.labels[static_cast<std::size_t>(i)])];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0)
        centroids.row(static_cast<Eigen::Index>(c)) /=
            static_cast<double>(counts[c]);
      else
        // Re-seed an empty cluster on a random point.
        centroids.row(static_cast<Eigen::Index>(c)) =
            points.row(static_cast<Eigen::Index>(rng.next_index(
                static_cast<std::uint64_t>(n))));
    }
    if (!changed && iter > 0) break;
  }

  result.inertia = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    result.inertia +=
        (points.row(i) - centroids.row(result.labels[static_cast<std::size_t>(i)]))
            .squaredNorm();
  return result;
}

}  // namespace

std::vector<int> spectral_cluster(const RealMatrix& affinity, std::size_t k,
                                  std::uint64_t seed) {
  const Eigen::Index n = affinity.rows();
  MBSS_CHECK(n >= 1 && affinity.cols() == n, UsageError,
             "affinity must be square");
  MBSS_CHECK(k >= 1 && static_cast<Eigen::Index>(k) <= n, UsageError,
             "cluster count out of range");
  MBSS_CHECK((affinity - affinity.transpose()).cwiseAbs().maxCoeff() <= 1e-9,
             DataError, "affinity must be symmetric");

  // Shift correlations from [-1,1] to nonnegative weights.
  RealMatrix a = ((affinity.array() + 1.0) / 2.0).matrix();

  Eigen::VectorXd deg = a.rowwise().sum();
  Eigen::VectorXd inv_sqrt(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    MBSS_CHECK(deg(i) > 0.0, NumericError, "isolated node in affinity graph");
    inv_sqrt(i) = 1.0 / std::sqrt(deg(i));
  }
  RealMatrix lap = -a;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) lap(i, j) *= inv_sqrt(i) * inv_sqrt(j);
  lap.diagonal().array() += 1.0;
  // Enforce exact symmetry against rounding.
  lap = ((lap + lap.transpose()) / 2.0).eval();

  Eigen::VectorXd evals;
  RealMatrix evecs;
  jacobi_eigh(lap, evals, evecs);

  RealMatrix embedding = evecs.leftCols(static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double norm = embedding.row(i).norm();
    if (norm > 1e-12) embedding.row(i) /= norm;
  }

  Rng rng(seed);
  KmeansResult best;
  for (int restart = 0; restart < 20; ++restart) {
    const KmeansResult r = kmeans_once(embedding, k, rng);
    if (r.inertia < best.inertia) best = r;
  }
  return best.labels;
}

double quality_score(const RealMatrix& magnitude) {
  MBSS_CHECK(magnitude.size() > 0, UsageError, "empty candidate");
  const Eigen::ArrayXXd values = magnitude.array().abs();
  const double mean = values.mean();
  if (mean <= 0.0) return 0.0;  // silent candidate: worst quality
  const double var = (values - mean).square().sum() /
                     static_cast<double>(values.size());
  return std::sqrt(var) / mean;
}

std::vector<std::size_t> select_outputs(std::size_t num_candidates,
                                        std::size_t num_speakers,
                                        const std::vector<double>& scores,
                                        const std::vector<int>& labels) {
  MBSS_CHECK(scores.size() == num_candidates && labels.size() == num_candidates,
             UsageError, "scores/labels size mismatch");
  MBSS_CHECK(num_speakers >= 1 && num_speakers <= num_candidates, UsageError,
             "cannot select more outputs than candidates");

  int max_label = 0;
  for (int l : labels) max_label = std::max(max_label, l);

  struct Cluster {
    std::size_t best_member = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    bool present = false;
  };
  std::vector<Cluster> clusters(static_cast<std::size_t>(max_label) + 1);
  for (std::size_t i = 0; i < num_candidates; ++i) {
    auto& cl = clusters[static_cast<std::size_t>(labels[i])];
    cl.present = true;
    if (scores[i] > cl.best_score) {
      cl.best_score = scores[i];
      cl.best_member = i;
    }
  }

  // The cluster whose best member scores lowest is the artifact cluster.
  std::size_t artifact = clusters.size();
  double worst_best = std::numeric_limits<double>::infinity();
  std::size_t num_present = 0;
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    if (!clusters[c].present) continue;
    ++num_present;
    if (clusters[c].best_score < worst_best) {
      worst_best = clusters[c].best_score;
      artifact = c;
    }
  }

  std::vector<std::size_t> chosen;
  std::vector<bool> used(num_candidates, false);
  if (num_present > 1) {
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      if (!clusters[c].present || c == artifact) continue;
      if (chosen.size() == num_speakers) break;
      chosen.push_back(clusters[c].best_member);
      used[clusters[c].best_member] = true;
    }
  }

  // Degenerate clustering: pad with the best-scoring unselected candidates.
  while (chosen.size() < num_speakers) {
    std::size_t best = num_candidates;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < num_candidates; ++i) {
      if (used[i]) continue;
      if (scores[i] > best_score) {
        best_score = scores[i];
        best = i;
      }
    }
    chosen.push_back(best);
    used[best] = true;
  }
  return chosen;
}

std::vector<std::size_t> oracle_select(
    const std::vector<std::vector<double>>& candidate_waveforms,
    const std::vector<std::vector<double>>& references) {
  MBSS_CHECK(!references.empty(), UsageError, "oracle selection needs references");
  MBSS_CHECK(candidate_waveforms.size() >= references.size(), UsageError,
             "fewer candidates than references");
  const std::size_t n = candidate_waveforms.size();
  const std::size_t C = references.size();

  RealMatrix sdr(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(C));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < C; ++c)
      sdr(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          eval::filtered_sdr(candidate_waveforms[i], references[c]);

  std::vector<std::size_t> chosen(C, n);
  std::vector<bool> ref_done(C, false), cand_used(n, false);
  for (std::size_t round = 0; round < C; ++round) {
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_c = 0, best_i = 0;
    for (std::size_t c = 0; c < C; ++c) {
      if (ref_done[c]) continue;
      for (std::size_t i = 0; i < n; ++i) {
        if (cand_used[i]) continue;
        if (sdr(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) >
            best) {
          best = sdr(static_cast<Eigen::Index>(i),
                     static_cast<Eigen::Index>(c));
          best_c = c;
          best_i = i;
        }
      }
    }
    chosen[best_c] = best_i;
    ref_done[best_c] = true;
    cand_used[best_i] = true;
  }
  return chosen;
}

}  // namespace mbss::post
