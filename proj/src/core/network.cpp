// Copyright 2026 mbss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "network.hpp"

#include <array>
#include <cmath>

namespace mbss::adan {

namespace {

using ConstMap = Eigen::Map<const RealMatrix>;
using MutMap = Eigen::Map<RealMatrix>;

ConstMap mat(const double* base, std::size_t off, std::size_t rows,
             std::size_t cols) {
  return ConstMap(base + off, static_cast<Eigen::Index>(rows),
                  static_cast<Eigen::Index>(cols));
}

MutMap mat(double* base, std::size_t off, std::size_t rows, std::size_t cols) {
  return MutMap(base + off, static_cast<Eigen::Index>(rows),
                static_cast<Eigen::Index>(cols));
}

}  // namespace

Network::Network(NetworkSpec spec) : spec_(std::move(spec)) {
  MBSS_CHECK(spec_.input_dim > 0 && spec_.output_dim > 0, UsageError,
             "network needs positive dimensions");
  MBSS_CHECK(!spec_.layer_units.empty(), UsageError,
             "network needs at least one hidden layer");

  std::size_t off = 0;
  std::size_t in_dim = spec_.input_dim;
  const int dirs = spec_.recurrent ? 2 : 1;
  for (std::size_t units : spec_.layer_units) {
    MBSS_CHECK(units > 0, UsageError, "layer width must be positive");
    LayerOffsets lo;
    lo.in_dim = in_dim;
    lo.units = units;
    for (int d = 0; d < dirs; ++d) {
      lo.wx[d] = off;
      off += units * in_dim;
      if (spec_.recurrent) {
        lo.wh[d] = off;
        off += units * units;
      }
      lo.b[d] = off;
      off += units;
    }
    layers_.push_back(lo);
    in_dim = spec_.recurrent ? 2 * units : units;
  }
  last_dim_ = in_dim;
  wo_ = off;
  off += spec_.output_dim * last_dim_;
  bo_ = off;
  off += spec_.output_dim;
  total_params_ = off;
}

void Network::init_params(double* params, Rng& rng) const {
  const int dirs = spec_.recurrent ? 2 : 1;
  for (const auto& lo : layers_) {
    const double sx = 1.0 / std::sqrt(static_cast<double>(lo.in_dim));
    const double sh = 1.0 / std::sqrt(static_cast<double>(lo.units));
    for (int d = 0; d < dirs; ++d) {
      for (std::size_t i = 0; i < lo.units * lo.in_dim; ++i)
        params[lo.wx[d] + i] = rng.uniform(-sx, sx);
      if (spec_.recurrent)
        for (std::size_t i = 0; i < lo.units * lo.units; ++i)
          params[lo.wh[d] + i] = rng.uniform(-sh, sh);
      for (std::size_t i = 0; i < lo.units; ++i) params[lo.b[d] + i] = 0.0;
    }
  }
  const double so = 1.0 / std::sqrt(static_cast<double>(last_dim_));
  for (std::size_t i = 0; i < spec_.output_dim * last_dim_; ++i)
    params[wo_ + i] = rng.uniform(-so, so);
  for (std::size_t i = 0; i < spec_.output_dim; ++i) params[bo_ + i] = 0.0;
}

RealMatrix Network::forward(const RealMatrix& features, const double* params,
                            Cache* cache) const {
  MBSS_CHECK(static_cast<std::size_t>(features.cols()) == spec_.input_dim,
             DataError, "feature dimension does not match the network");
  const Eigen::Index T = features.rows();
  MBSS_CHECK(T >= 1, DataError, "empty feature sequence");

  Cache local;
  Cache& c = cache ? *cache : local;
  c.layer_inputs.clear();
  c.hidden.clear();

  RealMatrix in = features;
  const int dirs = spec_.recurrent ? 2 : 1;
  for (const auto& lo : layers_) {
    c.layer_inputs.push_back(in);
    std::array<RealMatrix, 2> hs;
    for (int d = 0; d < dirs; ++d) {
      const auto Wx = mat(params, lo.wx[d], lo.units, lo.in_dim);
      const auto b = mat(params, lo.b[d], 1, lo.units);
      RealMatrix pre = in * Wx.transpose();
      pre.rowwise() += b.row(0);

      RealMatrix h(T, static_cast<Eigen::Index>(lo.units));
      if (spec_.recurrent) {
        const auto Wh = mat(params, lo.wh[d], lo.units, lo.units);
        Eigen::RowVectorXd prev = Eigen::RowVectorXd::Zero(
            static_cast<Eigen::Index>(lo.units));
        for (Eigen::Index step = 0; step < T; ++step) {
          const Eigen::Index t = d == 0 ? step : T - 1 - step;
          prev = (pre.row(t) + prev * Wh.transpose()).array().tanh();
          h.row(t) = prev;
        }
      } else {
        h = pre.array().tanh();
      }
      hs[d] = std::move(h);
    }
    c.hidden.push_back(hs);

    if (spec_.recurrent) {
      RealMatrix cat(T, static_cast<Eigen::Index>(2 * lo.units));
      cat.leftCols(static_cast<Eigen::Index>(lo.units)) = c.hidden.back()[0];
      cat.rightCols(static_cast<Eigen::Index>(lo.units)) = c.hidden.back()[1];
      in = std::move(cat);
    } else {
      in = c.hidden.back()[0];
    }
  }
  c.last = in;

  const auto Wo = mat(params, wo_, spec_.output_dim, last_dim_);
  const auto bo = mat(params, bo_, 1, spec_.output_dim);
  RealMatrix out = c.last * Wo.transpose();
  out.rowwise() += bo.row(0);
  out = out.array().tanh();
  c.out = out;
  return out;
}

void Network::backward(const RealMatrix& d_out, const Cache& cache,
                       const double* params, double* grad) const {
  const Eigen::Index T = d_out.rows();
  MBSS_CHECK(cache.out.rows() == T, UsageError, "cache/output shape mismatch");

  // Output projection with tanh squashing.
  const RealMatrix dU =
      d_out.array() * (1.0 - cache.out.array() * cache.out.array());
  {
    auto dWo = mat(grad, wo_, spec_.output_dim, last_dim_);
    auto dbo = mat(grad, bo_, 1, spec_.output_dim);
    dWo += dU.transpose() * cache.last;
    dbo.row(0) += dU.colwise().sum();
  }
  const auto Wo = mat(params, wo_, spec_.output_dim, last_dim_);
  RealMatrix d_in = dU * Wo;

  const int dirs = spec_.recurrent ? 2 : 1;
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const auto& lo = layers_[li];
    const RealMatrix& in = cache.layer_inputs[li];
    RealMatrix d_lower = RealMatrix::Zero(T, in.cols());

    for (int d = 0; d < dirs; ++d) {
      const RealMatrix& h = cache.hidden[li][d];
      RealMatrix d_h(T, h.cols());
      if (spec_.recurrent) {
        d_h = d == 0 ? d_in.leftCols(h.cols()) : d_in.rightCols(h.cols());
      } else {
        d_h = d_in;
      }

      RealMatrix dA(T, h.cols());
      if (spec_.recurrent) {
        const auto Wh = mat(params, lo.wh[d], lo.units, lo.units);
        Eigen::RowVectorXd carry =
            Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(lo.units));
        for (Eigen::Index step = 0; step < T; ++step) {
          // Walk opposite to the forward recursion of this direction.
          const Eigen::Index t = d == 0 ? T - 1 - step : step;
          const Eigen::RowVectorXd total = d_h.row(t) + carry;
          const Eigen::ArrayXd hrow = h.row(t).transpose().array();
          dA.row(t) =
              (total.transpose().array() * (1.0 - hrow * hrow)).transpose();
          carry = dA.row(t) * Wh;
        }
        auto dWh = mat(grad, lo.wh[d], lo.units, lo.units);
        // dWh = sum_t dA_t^T h_{t-1} (in the direction's own time order).
        RealMatrix h_prev = RealMatrix::Zero(T, h.cols());
        if (d == 0) {
          if (T > 1) h_prev.bottomRows(T - 1) = h.topRows(T - 1);
        } else {
          if (T > 1) h_prev.topRows(T - 1) = h.bottomRows(T - 1);
        }
        dWh += dA.transpose() * h_prev;
      } else {
        dA = d_h.array() * (1.0 - h.array() * h.array());
      }

      auto dWx = mat(grad, lo.wx[d], lo.units, lo.in_dim);
      auto db = mat(grad, lo.b[d], 1, lo.units);
      dWx += dA.transpose() * in;
      db.row(0) += dA.colwise().sum();

      const auto Wx = mat(params, lo.wx[d], lo.units, lo.in_dim);
      d_lower += dA * Wx;
    }
    d_in = std::move(d_lower);
  }
}

}  // namespace mbss::adan
