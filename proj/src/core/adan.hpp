// Copyright 2026 mbss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef MBSS_CORE_ADAN_HPP
#define MBSS_CORE_ADAN_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "network.hpp"
#include "stft.hpp"

namespace mbss::adan {

// Hyperparameters of the embedding model. The anchor matrix H (N x K) is
// stored at the tail of the flat parameter vector and trained jointly with
// the network.
struct ModelHyper {
  std::size_t embedding_dim = 20;        // K
  std::size_t num_anchors = 6;           // N
  std::vector<std::size_t> layer_units = {64, 64};
  bool recurrent = true;
  std::size_t num_bins = 129;            // F of the front-end STFT
  std::size_t num_salient = 2;           // G: speakers targeted per beam
  double log_floor = 1e-8;
};

class EmbeddingModel {
 public:
  EmbeddingModel(ModelHyper hyper, std::uint64_t init_seed);

  const ModelHyper& hyper() const { return hyper_; }
  const Network& network() const { return net_; }
  std::uint64_t init_seed() const { return init_seed_; }

  std::size_t num_params() const { return params_.size(); }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  std::size_t anchor_offset() const { return net_.num_params(); }
  // N x K view of the anchors inside the parameter vector.
  RealMatrix anchors() const;

  std::size_t num_outputs() const { return hyper_.num_salient + 1; }  // E

  std::string config_hash;

 private:
  ModelHyper hyper_;
  Network net_;
  std::vector<double> params_;
  std::uint64_t init_seed_;
};

// Normalized log-magnitude input features for one beam spectrogram.
RealMatrix make_features(const dsp::ComplexSpectrogram& spec,
                         double log_floor = 1e-8);

// Embeddings for all T*F bins, flattened row i = t*F + f, K columns. Every
// coordinate lies in (-1, 1).
RealMatrix embed(const EmbeddingModel& model, const RealMatrix& features);

// W_{c,i} = softmax over c of sum_k H_{c,k} V_{i,k}. Rows of the result are
// bins (TF), columns the anchor/source axis.
RealMatrix presegment(const RealMatrix& anchor_subset, const RealMatrix& V);

// A_{c,k} = sum_i V_{i,k} W_{i,c} / sum_i W_{i,c}.
RealMatrix attractors(const RealMatrix& V, const RealMatrix& W);

// Max pairwise dot product within the attractor set.
double in_set_similarity(const RealMatrix& A);

struct AttractorSelection {
  std::size_t subset_index = 0;              // into enumerate_subsets order
  std::vector<std::size_t> anchor_indices;   // the chosen anchors
  RealMatrix weights;                        // TF x E
  RealMatrix attractors;                     // E x K
};

// Subsets of size count out of n, lexicographic.
std::vector<std::vector<std::size_t>> enumerate_subsets(std::size_t n,
                                                        std::size_t count);

// Evaluate every anchor subset of the given size and keep the one with the
// minimum in-set similarity; ties break toward the lower subset index.
AttractorSelection select_attractor_set(const EmbeddingModel& model,
                                        const RealMatrix& V,
                                        std::size_t set_size);

// M = softmax over the source axis of V A^T; rows sum to one.
RealMatrix masks(const RealMatrix& A, const RealMatrix& V);

struct PitResult {
  double loss = 0.0;
  // Per output: reference index, or -1 for the residual slot.
  std::vector<int> assignment;
};

// Minimum squared error over: G-subsets of the E outputs, G-subsets of the C
// references, and all bijections between them. The one leftover output is
// scored against max(0, mixture - sum of the chosen references).
PitResult pit_loss(const std::vector<Eigen::VectorXd>& outputs,
                   const std::vector<Eigen::VectorXd>& references,
                   const Eigen::VectorXd& mixture_magnitude, std::size_t G);

// One training example: a single beam of one mixture.
struct TrainItem {
  RealMatrix features;                  // T x F normalized log magnitude
  Eigen::VectorXd mixture_magnitude;    // TF
  std::vector<Eigen::VectorXd> reference_magnitudes;  // C entries of TF
};

// Loss of the full pipeline for one item; discrete selections are free.
double adan_loss(const EmbeddingModel& model, const TrainItem& item);

// Loss plus dLoss/dparams (accumulated into grad, which must have
// model.num_params() entries). Discrete selections are fixed at the values
// taken during this forward pass.
double adan_loss_and_grad(const EmbeddingModel& model, const TrainItem& item,
                          std::vector<double>& grad);

struct TrainConfig {
  std::size_t steps = 2000;
  double step_size = 0.02;
  std::size_t batch_size = 4;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
};

// Plain gradient descent with global-norm clipping. Throws NumericError and
// leaves the model untouched when a step produces a non-finite loss.
double train_step(EmbeddingModel& model,
                  const std::vector<const TrainItem*>& batch,
                  const TrainConfig& cfg);

// Full loop over a dataset; returns per-step losses.
std::vector<double> train(EmbeddingModel& model,
                          const std::vector<TrainItem>& items,
                          const TrainConfig& cfg);

struct SeparatedBeam {
  std::vector<RealMatrix> magnitudes;        // E entries of T x F
  std::vector<std::vector<double>> waveforms;  // E entries
  RealMatrix mask;                           // TF x E
};

// Run the model on one beam spectrogram: E = G+1 masks, magnitudes and
// waveforms resynthesized with the beam's phase. G defaults to min(C, 2).
SeparatedBeam separate_beam(const EmbeddingModel& model,
                            const dsp::ComplexSpectrogram& beam_spec,
                            std::size_t num_speakers, std::size_t G = 0);

void save_checkpoint(const std::string& path, const EmbeddingModel& model);
EmbeddingModel load_checkpoint(const std::string& path);

}  // namespace mbss::adan

#endif  // MBSS_CORE_ADAN_HPP
