// Copyright 2026 mbss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "common.hpp"
#include "metrics.hpp"
#include "post_select.hpp"

using namespace mbss;
using namespace mbss::post;
using mbss::dsp::RealMatrix;

namespace {

RealMatrix random_candidate(Rng& rng, Eigen::Index rows = 6,
                            Eigen::Index cols = 8) {
  RealMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = std::fabs(rng.normal());
  return m;
}

// Fraction of nodes whose labels agree with the planted partition under the
// best label permutation.
double label_agreement(const std::vector<int>& labels,
                       const std::vector<int>& planted, int k) {
  std::vector<int> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  double best = 0.0;
  do {
    std::size_t agree = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (perm[static_cast<std::size_t>(labels[i])] == planted[i]) ++agree;
    best = std::max(best, static_cast<double>(agree) / labels.size());
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

RealMatrix planted_affinity(Rng& rng, const std::vector<int>& planted,
                            double in = 0.9, double out = 0.1,
                            double noise = 0.05) {
  const auto n = static_cast<Eigen::Index>(planted.size());
  RealMatrix a(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    a(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double base = planted[static_cast<std::size_t>(i)] ==
                                  planted[static_cast<std::size_t>(j)]
                              ? in
                              : out;
      const double v = base + rng.uniform(-noise, noise);
      a(i, j) = v;
      a(j, i) = v;
    }
  }
  return a;
}

}  // namespace

TEST_CASE("identical candidates correlate at 1, mirrored at -1") {
  Rng rng(1);
  const RealMatrix a = random_candidate(rng);
  const RealMatrix b = a;
  const double mean = a.mean();
  // Negation around the mean flips the correlation sign.
  const RealMatrix c = (2.0 * mean - a.array()).matrix();

  const auto res = pearson_affinity({a, b, c});
  CHECK(res.affinity(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(res.affinity(0, 2) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(res.affinity(1, 2) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("pearson affinity matches the covariance-formula oracle") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<RealMatrix> cands{random_candidate(rng), random_candidate(rng),
                                  random_candidate(rng)};
    const auto res = pearson_affinity(cands);
    for (int i = 0; i < 3; ++i) {
      CHECK(res.affinity(i, i) == doctest::Approx(1.0).epsilon(1e-12));
      for (int j = 0; j < 3; ++j) {
        // direct covariance formula
        const auto n = static_cast<double>(cands[i].size());
        double mi = 0.0, mj = 0.0;
        for (Eigen::Index a = 0; a < cands[i].size(); ++a) {
          mi += cands[i].data()[a];
          mj += cands[j].data()[a];
        }
        mi /= n;
        mj /= n;
        double cov = 0.0, vi = 0.0, vj = 0.0;
        for (Eigen::Index a = 0; a < cands[i].size(); ++a) {
          const double di = cands[i].data()[a] - mi;
          const double dj = cands[j].data()[a] - mj;
          cov += di * dj;
          vi += di * di;
          vj += dj * dj;
        }
        const double expected = cov / std::sqrt(vi * vj);
        CHECK(std::fabs(res.affinity(i, j) - expected) <= 1e-12);
        CHECK(std::fabs(res.affinity(i, j) - res.affinity(j, i)) <= 1e-15);
      }
    }
  }
}

TEST_CASE("zero-variance candidates are dropped with their rows") {
  Rng rng(5);
  const RealMatrix a = random_candidate(rng);
  const RealMatrix flat = RealMatrix::Constant(a.rows(), a.cols(), 0.7);
  const RealMatrix b = random_candidate(rng);
  const auto res = pearson_affinity({a, flat, b});
  CHECK(res.kept == std::vector<std::size_t>{0, 2});
  CHECK(res.dropped == std::vector<std::size_t>{1});
  CHECK(res.affinity.rows() == 2);
}

TEST_CASE("jacobi eigensolver agrees with Eigen on random symmetric matrices") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 3 + static_cast<Eigen::Index>(rng.next_index(13));
    RealMatrix a(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i; j < n; ++j) {
        a(i, j) = rng.normal();
        a(j, i) = a(i, j);
      }
    Eigen::VectorXd evals;
    RealMatrix evecs;
    jacobi_eigh(a, evals, evecs);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(a);
    for (Eigen::Index i = 0; i < n; ++i)
      CHECK(evals(i) == doctest::Approx(ref.eigenvalues()(i)).epsilon(1e-10));
    // Residual check: A v = lambda v.
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::VectorXd r = a * evecs.col(i) - evals(i) * evecs.col(i);
      CHECK(r.norm() <= 1e-9 * std::max(1.0, std::fabs(evals(i))));
    }
  }
}

TEST_CASE("perfect block affinity is recovered exactly") {
  std::vector<int> planted(12);
  for (std::size_t i = 0; i < 12; ++i) planted[i] = static_cast<int>(i / 4);
  RealMatrix a(12, 12);
  for (Eigen::Index i = 0; i < 12; ++i)
    for (Eigen::Index j = 0; j < 12; ++j)
      a(i, j) = planted[static_cast<std::size_t>(i)] ==
                        planted[static_cast<std::size_t>(j)]
                    ? 1.0
                    : 0.0;
  const auto labels = spectral_cluster(a, 3, 17);
  CHECK(label_agreement(labels, planted, 3) == doctest::Approx(1.0));
}

TEST_CASE("cluster labels follow a candidate permutation") {
  Rng rng(11);
  std::vector<int> planted(12);
  for (std::size_t i = 0; i < 12; ++i) planted[i] = static_cast<int>(i % 3);
  const RealMatrix a = planted_affinity(rng, planted);

  // Reverse the candidate order.
  const Eigen::Index n = a.rows();
  RealMatrix b(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) b(i, j) = a(n - 1 - i, n - 1 - j);

  const auto la = spectral_cluster(a, 3, 23);
  const auto lb = spectral_cluster(b, 3, 23);
  std::vector<int> lb_reversed(lb.rbegin(), lb.rend());
  // Same partition up to relabeling.
  std::vector<int> planted_from_a(la.begin(), la.end());
  CHECK(label_agreement(lb_reversed, planted_from_a, 3) ==
        doctest::Approx(1.0));
}

TEST_CASE("noisy planted partition is recovered on at least 95% of nodes") {
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    std::vector<int> planted(36);
    for (std::size_t i = 0; i < 36; ++i) planted[i] = static_cast<int>(i / 12);
    const RealMatrix a = planted_affinity(rng, planted);
    const auto labels = spectral_cluster(a, 3, seed * 31 + 7);
    total += label_agreement(labels, planted, 3);
  }
  CHECK(total / 100.0 >= 0.95);
}

TEST_CASE("clustering is invariant to positive affine affinity transforms") {
  Rng rng(13);
  std::vector<int> planted(12);
  for (std::size_t i = 0; i < 12; ++i) planted[i] = static_cast<int>(i / 4);
  RealMatrix a = planted_affinity(rng, planted);
  // 0.4 a + 0.2 keeps correlations within [-1, 1].
  RealMatrix scaled = (0.4 * a.array() + 0.2).matrix();

  const auto la = spectral_cluster(a, 3, 5);
  const auto lb = spectral_cluster(scaled, 3, 5);
  std::vector<int> ref(la.begin(), la.end());
  CHECK(label_agreement(lb, ref, 3) >= 0.99);
}

TEST_CASE("quality score: sentinel, scale invariance, noise ordering") {
  // Constant magnitude has zero spread: degenerate, scored 0.
  CHECK(quality_score(RealMatrix::Constant(5, 5, 0.8)) == 0.0);
  CHECK(quality_score(RealMatrix::Zero(5, 5)) == 0.0);

  // Sparse tone burst beats the same burst drowned in noise.
  Rng rng(17);
  RealMatrix clean = RealMatrix::Zero(10, 16);
  for (Eigen::Index t = 3; t < 7; ++t) clean(t, 5) = 1.0;
  RealMatrix noisy = clean;
  for (Eigen::Index i = 0; i < noisy.rows(); ++i)
    for (Eigen::Index j = 0; j < noisy.cols(); ++j)
      noisy(i, j) += 0.4 + 0.1 * std::fabs(rng.normal());
  CHECK(quality_score(clean) > quality_score(noisy));

  // Scaling leaves the score unchanged.
  const double s1 = quality_score(clean);
  const double s2 = quality_score((7.5 * clean.array()).matrix());
  CHECK(s1 == doctest::Approx(s2).epsilon(1e-12));
}

TEST_CASE("artifact cluster is discarded") {
  // Three clusters; cluster 2 holds only near-zero-score members.
  const std::vector<int> labels{0, 0, 1, 1, 2, 2};
  const std::vector<double> scores{2.0, 1.5, 1.8, 2.2, 0.01, 0.02};
  const auto chosen = select_outputs(6, 2, scores, labels);
  REQUIRE(chosen.size() == 2);
  CHECK(std::find(chosen.begin(), chosen.end(), 0) != chosen.end());
  CHECK(std::find(chosen.begin(), chosen.end(), 3) != chosen.end());
}

TEST_CASE("select_outputs always returns the requested count") {
  // Degenerate clustering: everything in one cluster.
  const std::vector<int> labels{0, 0, 0, 0};
  const std::vector<double> scores{1.0, 1.0, 1.0, 1.0};
  const auto chosen = select_outputs(4, 2, scores, labels);
  CHECK(chosen.size() == 2);
  CHECK(chosen[0] != chosen[1]);
}

TEST_CASE("planted two-speaker scenario selects the planted candidates") {
  // Candidates: two clean speakers, two mixed copies, two junk outputs.
  Rng rng(19);
  RealMatrix spk_a = RealMatrix::Zero(12, 16);
  RealMatrix spk_b = RealMatrix::Zero(12, 16);
  for (Eigen::Index t = 0; t < 12; ++t) {
    spk_a(t, 2 + (t % 3)) = 1.0 + 0.1 * rng.normal();
    spk_b(t, 10 + (t % 4)) = 1.0 + 0.1 * rng.normal();
  }
  std::vector<RealMatrix> cands;
  cands.push_back(spk_a);
  cands.push_back((spk_a.array() * 0.9 + 0.02).matrix());
  cands.push_back(spk_b);
  cands.push_back((spk_b.array() * 0.8 + 0.02).matrix());
  RealMatrix junk = RealMatrix::Constant(12, 16, 0.3);
  for (Eigen::Index i = 0; i < junk.size(); ++i)
    junk.data()[i] += 0.05 * std::fabs(rng.normal());
  cands.push_back(junk);
  cands.push_back((junk.array() * 1.1).matrix());

  const auto aff = pearson_affinity(cands);
  REQUIRE(aff.kept.size() == 6);
  const auto labels = spectral_cluster(aff.affinity, 3, 29);
  std::vector<double> scores;
  for (const auto& c : cands) scores.push_back(quality_score(c));

  const auto chosen = select_outputs(6, 2, scores, labels);
  REQUIRE(chosen.size() == 2);
  // One candidate from each speaker family, no junk.
  auto family = [](std::size_t idx) { return idx / 2; };
  CHECK(family(chosen[0]) != family(chosen[1]));
  CHECK(family(chosen[0]) != 2);
  CHECK(family(chosen[1]) != 2);
}

TEST_CASE("oracle selection finds exact copies and respects exclusivity") {
  Rng rng(23);
  std::vector<double> ref_a(500), ref_b(500);
  for (std::size_t i = 0; i < 500; ++i) {
    ref_a[i] = rng.normal();
    ref_b[i] = rng.normal();
  }
  std::vector<std::vector<double>> cands;
  for (int lvl = 0; lvl < 2; ++lvl) {
    std::vector<double> na = ref_a, nb = ref_b;
    for (std::size_t i = 0; i < 500; ++i) {
      na[i] += (lvl + 1) * 0.4 * rng.normal();
      nb[i] += (lvl + 1) * 0.4 * rng.normal();
    }
    cands.push_back(na);
    cands.push_back(nb);
  }
  cands.push_back(ref_a);  // exact copies at indices 4, 5
  cands.push_back(ref_b);

  const auto chosen = oracle_select(cands, {ref_a, ref_b});
  CHECK(chosen == std::vector<std::size_t>{4, 5});
}

TEST_CASE("oracle selection with one reference is the global argmax") {
  Rng rng(29);
  std::vector<double> ref(300);
  for (double& v : ref) v = rng.normal();
  std::vector<std::vector<double>> cands;
  for (int lvl = 3; lvl >= 1; --lvl) {
    std::vector<double> c = ref;
    for (double& v : c) v += 0.3 * lvl * rng.normal();
    cands.push_back(c);
  }
  const auto chosen = oracle_select(cands, {ref});
  CHECK(chosen == std::vector<std::size_t>{2});
}

TEST_CASE("greedy oracle selection matches exhaustive matching here") {
  // Six candidates built around two references with clear specialization.
  Rng rng(31);
  std::vector<double> ref_a(400), ref_b(400);
  for (std::size_t i = 0; i < 400; ++i) {
    ref_a[i] = rng.normal();
    ref_b[i] = rng.normal();
  }
  std::vector<std::vector<double>> cands;
  for (int j = 0; j < 3; ++j) {
    std::vector<double> ca = ref_a, cb = ref_b;
    for (std::size_t i = 0; i < 400; ++i) {
      ca[i] += 0.2 * (j + 1) * rng.normal();
      cb[i] += 0.25 * (j + 1) * rng.normal();
    }
    cands.push_back(ca);
    cands.push_back(cb);
  }

  const auto chosen = oracle_select(cands, {ref_a, ref_b});
  const double greedy_total = mbss::eval::sdr(cands[chosen[0]], ref_a) +
                              mbss::eval::sdr(cands[chosen[1]], ref_b);

  double best_total = -1e300;
  for (std::size_t i = 0; i < cands.size(); ++i)
    for (std::size_t j = 0; j < cands.size(); ++j) {
      if (i == j) continue;
      best_total = std::max(best_total, mbss::eval::sdr(cands[i], ref_a) +
                                            mbss::eval::sdr(cands[j], ref_b));
    }
  CHECK(greedy_total == doctest::Approx(best_total).epsilon(1e-12));
}
