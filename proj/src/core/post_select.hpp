// Copyright 2026 mbss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef MBSS_CORE_POST_SELECT_HPP
#define MBSS_CORE_POST_SELECT_HPP

#include <cstdint>
#include <vector>

#include "stft.hpp"

namespace mbss::post {

using dsp::RealMatrix;

struct AffinityResult {
  RealMatrix affinity;                  // symmetric, unit diagonal
  std::vector<std::size_t> kept;        // candidate indices that survived
  std::vector<std::size_t> dropped;     // zero-variance candidates
};

// Pearson correlation between flattened candidate magnitudes. Zero-variance
// candidates are dropped (their rows/columns removed) and reported.
AffinityResult pearson_affinity(const std::vector<RealMatrix>& candidates);

// Symmetric eigensolve by cyclic Jacobi rotations; eigenvalues ascending.
// Throws NumericError if off-diagonals survive max_sweeps sweeps.
void jacobi_eigh(const RealMatrix& sym, Eigen::VectorXd& eigenvalues,
                 RealMatrix& eigenvectors, int max_sweeps = 100);

// Normalized spectral clustering into k groups: shift affinity to [0,1],
// symmetric-normalized Laplacian, k smallest eigenvectors, row-normalize,
// seeded k-means with 20 restarts.
std::vector<int> spectral_cluster(const RealMatrix& affinity, std::size_t k,
                                  std::uint64_t seed);

// Spread of the magnitude-spectrogram values relative to their mean
// (std/mean). Sparse, speech-like candidates score high; flat or silent
// candidates score near zero (degenerate candidates exactly zero).
double quality_score(const RealMatrix& magnitude);

// Pick one output per cluster by quality score after discarding the cluster
// whose best member scores lowest; pad with the best unselected candidates
// when clustering is degenerate. Returns exactly num_speakers indices.
std::vector<std::size_t> select_outputs(std::size_t num_candidates,
                                        std::size_t num_speakers,
                                        const std::vector<double>& scores,
                                        const std::vector<int>& labels);

// Oracle selection: per reference, the candidate with the highest SDR;
// candidates serve at most one reference (greedy by descending best SDR).
std::vector<std::size_t> oracle_select(
    const std::vector<std::vector<double>>& candidate_waveforms,
    const std::vector<std::vector<double>>& references);

}  // namespace mbss::post

#endif  // MBSS_CORE_POST_SELECT_HPP
