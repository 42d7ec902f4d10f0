// Copyright 2026 mbss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef MBSS_CORE_NETWORK_HPP
#define MBSS_CORE_NETWORK_HPP

#include <cstddef>
#include <vector>

#include "common.hpp"
#include "stft.hpp"

namespace mbss::adan {

using dsp::RealMatrix;

// Sequence network: a stack of bidirectional tanh recurrent layers (or plain
// tanh layers when recurrence is off) followed by a linear projection with a
// tanh squashing to the embedding coordinates. Parameters live in one flat
// vector owned by the caller; backpropagation is implemented here directly.
struct NetworkSpec {
  std::size_t input_dim = 0;   // features per frame (F)
  std::size_t output_dim = 0;  // embedding values per frame (F*K)
  std::vector<std::size_t> layer_units = {64, 64};
  bool recurrent = true;
};

class Network {
 public:
  explicit Network(NetworkSpec spec);

  const NetworkSpec& spec() const { return spec_; }
  std::size_t num_params() const { return total_params_; }

  // Uniform init scaled by fan-in; biases zero.
  void init_params(double* params, Rng& rng) const;

  struct Cache {
    std::vector<RealMatrix> layer_inputs;          // per layer: T x in
    std::vector<std::array<RealMatrix, 2>> hidden; // per layer: fwd/bwd T x h
    RealMatrix last;                               // T x d_last
    RealMatrix out;                                // T x output_dim, post-tanh
  };

  // Forward pass; returns T x output_dim, each entry in (-1, 1).
  RealMatrix forward(const RealMatrix& features, const double* params,
                     Cache* cache) const;

  // Accumulates dLoss/dparams for the given dLoss/doutput into grad.
  void backward(const RealMatrix& d_out, const Cache& cache,
                const double* params, double* grad) const;

 private:
  struct LayerOffsets {
    std::size_t in_dim = 0, units = 0;
    // Per direction: Wx (units x in), Wh (units x units, recurrent only), b.
    std::size_t wx[2] = {0, 0}, wh[2] = {0, 0}, b[2] = {0, 0};
  };

  NetworkSpec spec_;
  std::vector<LayerOffsets> layers_;
  std::size_t wo_ = 0, bo_ = 0;  // output projection
  std::size_t last_dim_ = 0;
  std::size_t total_params_ = 0;
};

}  // namespace mbss::adan

#endif  // MBSS_CORE_NETWORK_HPP
