// Copyright 2026 mbss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "adan.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

namespace mbss::adan {

namespace {

constexpr char kModelMagic[8] = {'M', 'B', 'S', 'S', 'M', 'D', 'L', '1'};

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const char* what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError(std::string("checkpoint truncated at ") + what);
  return v;
}

// Row-wise softmax, numerically stabilized.
RealMatrix row_softmax(const RealMatrix& logits) {
  RealMatrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    Eigen::ArrayXd e = (logits.row(i).array() - mx).exp();
    out.row(i) = (e / e.sum()).transpose();
  }
  return out;
}

// dLogits for y = row_softmax(logits) given dY.
RealMatrix row_softmax_backward(const RealMatrix& y, const RealMatrix& dy) {
  RealMatrix dl(y.rows(), y.cols());
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const double dot = y.row(i).dot(dy.row(i));
    dl.row(i) = y.row(i).array() * (dy.row(i).array() - dot);
  }
  return dl;
}

NetworkSpec network_spec_for(const ModelHyper& hyper) {
  NetworkSpec spec;
  spec.input_dim = hyper.num_bins;
  spec.output_dim = hyper.num_bins * hyper.embedding_dim;
  spec.layer_units = hyper.layer_units;
  spec.recurrent = hyper.recurrent;
  return spec;
}

// TF x K view of a T x (F*K) network output.
Eigen::Map<const RealMatrix> as_bins(const RealMatrix& out, std::size_t F,
                                     std::size_t K) {
  return {out.data(), out.rows() * static_cast<Eigen::Index>(F),
          static_cast<Eigen::Index>(K)};
}

struct PitTables {
  // err(e, c) and, per reference subset, the residual error of each output.
  RealMatrix err;
  std::vector<std::vector<std::size_t>> ref_subsets;
  std::vector<Eigen::VectorXd> residuals;
  RealMatrix err_res;  // E x |ref_subsets|
};

PitTables pit_tables(const std::vector<Eigen::VectorXd>& outputs,
                     const std::vector<Eigen::VectorXd>& references,
                     const Eigen::VectorXd& mixture_magnitude, std::size_t G) {
  const std::size_t E = outputs.size();
  const std::size_t C = references.size();
  PitTables t;
  t.err.resize(static_cast<Eigen::Index>(E), static_cast<Eigen::Index>(C));
  for (std::size_t e = 0; e < E; ++e)
    for (std::size_t c = 0; c < C; ++c)
      t.err(e, c) = (references[c] - outputs[e]).squaredNorm();

  t.ref_subsets = enumerate_subsets(C, G);
  t.err_res.resize(static_cast<Eigen::Index>(E),
                   static_cast<Eigen::Index>(t.ref_subsets.size()));
  for (std::size_t s = 0; s < t.ref_subsets.size(); ++s) {
    Eigen::VectorXd res = mixture_magnitude;
    for (std::size_t c : t.ref_subsets[s]) res -= references[c];
    res = res.cwiseMax(0.0);
    for (std::size_t e = 0; e < E; ++e)
      t.err_res(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(s)) =
          (res - outputs[e]).squaredNorm();
    t.residuals.push_back(std::move(res));
  }
  return t;
}

}  // namespace

EmbeddingModel::EmbeddingModel(ModelHyper hyper, std::uint64_t init_seed)
    : hyper_(std::move(hyper)),
      net_(network_spec_for(hyper_)),
      init_seed_(init_seed) {
  MBSS_CHECK(hyper_.embedding_dim >= 2, UsageError, "embedding dim must be >= 2");
  MBSS_CHECK(hyper_.num_salient >= 1, UsageError, "G must be >= 1");
  MBSS_CHECK(hyper_.num_anchors >= num_outputs(), UsageError,
             "need at least E = G+1 anchors");
  params_.assign(net_.num_params() +
                     hyper_.num_anchors * hyper_.embedding_dim,
                 0.0);
  Rng rng(init_seed);
  net_.init_params(params_.data(), rng);
  // Anchor initialization: uniform in (-0.5, 0.5).
  for (std::size_t i = anchor_offset(); i < params_.size(); ++i)
    params_[i] = rng.uniform(-0.5, 0.5);
}

RealMatrix EmbeddingModel::anchors() const {
  return Eigen::Map<const RealMatrix>(
      params_.data() + anchor_offset(),
      static_cast<Eigen::Index>(hyper_.num_anchors),
      static_cast<Eigen::Index>(hyper_.embedding_dim));
}

RealMatrix make_features(const dsp::ComplexSpectrogram& spec,
                         double log_floor) {
  RealMatrix feat = dsp::log_magnitude(spec, log_floor);
  const double mean = feat.mean();
  const double var =
      (feat.array() - mean).square().sum() / static_cast<double>(feat.size());
  const double sd = std::sqrt(std::max(var, 1e-12));
  feat = (feat.array() - mean) / sd;
  return feat;
}

RealMatrix embed(const EmbeddingModel& model, const RealMatrix& features) {
  MBSS_CHECK(features.allFinite(), DataError, "non-finite features");
  const RealMatrix out =
      model.network().forward(features, model.params().data(), nullptr);
  return as_bins(out, model.hyper().num_bins, model.hyper().embedding_dim);
}

RealMatrix presegment(const RealMatrix& anchor_subset, const RealMatrix& V) {
  MBSS_CHECK(anchor_subset.rows() >= 2, UsageError,
             "presegment needs >= 2 anchors");
  MBSS_CHECK(anchor_subset.cols() == V.cols(), DataError,
             "anchor/embedding dimension mismatch");
  return row_softmax(V * anchor_subset.transpose());
}

RealMatrix attractors(const RealMatrix& V, const RealMatrix& W) {
  MBSS_CHECK(V.rows() == W.rows(), DataError, "embedding/weight shape mismatch");
  const Eigen::RowVectorXd totals = W.colwise().sum();
  for (Eigen::Index c = 0; c < totals.size(); ++c)
    MBSS_CHECK(totals(c) > 0.0, NumericError,
               "degenerate pre-segmentation: zero total weight for a source");
  RealMatrix A = W.transpose() * V;
  A.array().colwise() /= totals.transpose().array();
  return A;
}

double in_set_similarity(const RealMatrix& A) {
  double best = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = i + 1; j < A.rows(); ++j)
      best = std::max(best, A.row(i).dot(A.row(j)));
  return best;
}

std::vector<std::vector<std::size_t>> enumerate_subsets(std::size_t n,
                                                        std::size_t count) {
  MBSS_CHECK(count >= 1 && count <= n, UsageError, "bad subset size");
  std::vector<std::vector<std::size_t>> subsets;
  std::vector<std::size_t> cur(count);
  std::iota(cur.begin(), cur.end(), 0);
  while (true) {
    subsets.push_back(cur);
    // Advance the lexicographic combination.
    std::size_t i = count;
    while (i-- > 0) {
      if (cur[i] != i + n - count) {
        ++cur[i];
        for (std::size_t j = i + 1; j < count; ++j) cur[j] = cur[j - 1] + 1;
        break;
      }
      if (i == 0) return subsets;
    }
  }
}

AttractorSelection select_attractor_set(const EmbeddingModel& model,
                                        const RealMatrix& V,
                                        std::size_t set_size) {
  const RealMatrix H = model.anchors();
  const auto subsets =
      enumerate_subsets(static_cast<std::size_t>(H.rows()), set_size);

  AttractorSelection best;
  double best_sim = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < subsets.size(); ++p) {
    RealMatrix Hp(static_cast<Eigen::Index>(set_size), H.cols());
    for (std::size_t c = 0; c < set_size; ++c)
      Hp.row(static_cast<Eigen::Index>(c)) =
          H.row(static_cast<Eigen::Index>(subsets[p][c]));
    const RealMatrix W = presegment(Hp, V);
    const RealMatrix A = attractors(V, W);
    const double sim = in_set_similarity(A);
    if (sim < best_sim) {
      best_sim = sim;
      best.subset_index = p;
      best.anchor_indices = subsets[p];
      best.weights = W;
      best.attractors = A;
    }
  }
  return best;
}

RealMatrix masks(const RealMatrix& A, const RealMatrix& V) {
  MBSS_CHECK(A.cols() == V.cols(), DataError,
             "attractor/embedding dimension mismatch");
  return row_softmax(V * A.transpose());
}

PitResult pit_loss(const std::vector<Eigen::VectorXd>& outputs,
                   const std::vector<Eigen::VectorXd>& references,
                   const Eigen::VectorXd& mixture_magnitude, std::size_t G) {
  const std::size_t E = outputs.size();
  const std::size_t C = references.size();
  MBSS_CHECK(E == G + 1, UsageError, "expected E = G + 1 outputs");
  MBSS_CHECK(C >= G && G >= 1, UsageError, "need at least G references");

  const PitTables t = pit_tables(outputs, references, mixture_magnitude, G);
  const auto out_subsets = enumerate_subsets(E, G);

  PitResult best;
  best.loss = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> perm(G);
  for (const auto& outs : out_subsets) {
    // The one output not in `outs` takes the residual slot.
    std::size_t leftover = 0;
    {
      std::vector<bool> used(E, false);
      for (std::size_t e : outs) used[e] = true;
      for (std::size_t e = 0; e < E; ++e)
        if (!used[e]) leftover = e;
    }
    for (std::size_t s = 0; s < t.ref_subsets.size(); ++s) {
      const double res_err = t.err_res(static_cast<Eigen::Index>(leftover),
                                       static_cast<Eigen::Index>(s));
      std::iota(perm.begin(), perm.end(), 0);
      do {
        double loss = res_err;
        for (std::size_t i = 0; i < G; ++i)
          loss += t.err(static_cast<Eigen::Index>(outs[i]),
                        static_cast<Eigen::Index>(t.ref_subsets[s][perm[i]]));
        if (loss < best.loss) {
          best.loss = loss;
          best.assignment.assign(E, -1);
          for (std::size_t i = 0; i < G; ++i)
            best.assignment[outs[i]] =
                static_cast<int>(t.ref_subsets[s][perm[i]]);
        }
      } while (std::next_permutation(perm.begin(), perm.end()));
    }
  }
  return best;
}

namespace {

struct ForwardState {
  Network::Cache net_cache;
  RealMatrix V;          // TF x K
  AttractorSelection selection;
  RealMatrix M;          // TF x E
  std::vector<Eigen::VectorXd> outputs;  // E masked magnitudes
  PitResult pit;
};

ForwardState adan_forward(const EmbeddingModel& model, const TrainItem& item,
                          bool keep_cache) {
  const auto& hyper = model.hyper();
  MBSS_CHECK(!item.reference_magnitudes.empty(), UsageError,
             "training item has no references");
  const std::size_t C = item.reference_magnitudes.size();
  const std::size_t G = std::min<std::size_t>(hyper.num_salient, C);
  const std::size_t E = G + 1;

  ForwardState st;
  const RealMatrix out = model.network().forward(
      item.features, model.params().data(), keep_cache ? &st.net_cache : nullptr);
  st.V = as_bins(out, hyper.num_bins, hyper.embedding_dim);
  const Eigen::Index TF = st.V.rows();
  MBSS_CHECK(item.mixture_magnitude.size() == TF, DataError,
             "mixture magnitude size mismatch");

  st.selection = select_attractor_set(model, st.V, E);
  st.M = masks(st.selection.attractors, st.V);

  st.outputs.reserve(E);
  for (std::size_t e = 0; e < E; ++e)
    st.outputs.push_back(item.mixture_magnitude.array() *
                         st.M.col(static_cast<Eigen::Index>(e)).array());
  st.pit = pit_loss(st.outputs, item.reference_magnitudes,
                    item.mixture_magnitude, G);
  return st;
}

}  // namespace

double adan_loss(const EmbeddingModel& model, const TrainItem& item) {
  return adan_forward(model, item, false).pit.loss;
}

double adan_loss_and_grad(const EmbeddingModel& model, const TrainItem& item,
                          std::vector<double>& grad) {
  MBSS_CHECK(grad.size() == model.num_params(), UsageError,
             "gradient buffer size mismatch");
  const auto& hyper = model.hyper();
  ForwardState st = adan_forward(model, item, true);

  const Eigen::Index TF = st.V.rows();
  const Eigen::Index E = st.M.cols();
  const std::size_t C = item.reference_magnitudes.size();
  const std::size_t G = std::min<std::size_t>(hyper.num_salient, C);

  // Assigned target per output column (reference or residual).
  RealMatrix target(TF, E);
  for (Eigen::Index e = 0; e < E; ++e) {
    if (st.pit.assignment[static_cast<std::size_t>(e)] >= 0) {
      target.col(e) = item.reference_magnitudes[static_cast<std::size_t>(
          st.pit.assignment[static_cast<std::size_t>(e)])];
    } else {
      Eigen::VectorXd res = item.mixture_magnitude;
      for (std::size_t c = 0; c < C; ++c) {
        bool chosen = false;
        for (Eigen::Index e2 = 0; e2 < E; ++e2)
          if (st.pit.assignment[static_cast<std::size_t>(e2)] ==
              static_cast<int>(c))
            chosen = true;
        if (chosen) res -= item.reference_magnitudes[c];
      }
      (void)G;
      target.col(e) = res.cwiseMax(0.0);
    }
  }

  // L = sum_e,i (X_i M_ie - target_ie)^2.
  RealMatrix dO(TF, E);
  for (Eigen::Index e = 0; e < E; ++e)
    dO.col(e) = 2.0 * (st.outputs[static_cast<std::size_t>(e)] - target.col(e));
  RealMatrix dM = dO.array().colwise() * item.mixture_magnitude.array();

  // Mask softmax and attractor similarity chain.
  const RealMatrix dQ = row_softmax_backward(st.M, dM);
  RealMatrix dA = dQ.transpose() * st.V;       // E x K
  RealMatrix dV = dQ * st.selection.attractors;  // TF x K

  // Attractors A = diag(1/omega) W^T V.
  const RealMatrix& W = st.selection.weights;
  const Eigen::RowVectorXd omega = W.colwise().sum();
  RealMatrix dN = dA;
  dN.array().colwise() /= omega.transpose().array();
  Eigen::VectorXd d_omega(E);
  for (Eigen::Index e = 0; e < E; ++e)
    d_omega(e) = -dA.row(e).dot(st.selection.attractors.row(e)) / omega(e);

  RealMatrix dW = st.V * dN.transpose();  // TF x E
  dW.array().rowwise() += d_omega.transpose().array();
  dV += W * dN;

  // Pre-segmentation softmax; logits Z = V Hsel^T.
  const RealMatrix dZ = row_softmax_backward(W, dW);
  RealMatrix Hsel(E, static_cast<Eigen::Index>(hyper.embedding_dim));
  const RealMatrix H = model.anchors();
  for (Eigen::Index e = 0; e < E; ++e)
    Hsel.row(e) = H.row(
        static_cast<Eigen::Index>(st.selection.anchor_indices[static_cast<std::size_t>(e)]));
  dV += dZ * Hsel;
  const RealMatrix dHsel = dZ.transpose() * st.V;  // E x K

  // Scatter anchor gradients.
  {
    Eigen::Map<RealMatrix> dH(grad.data() + model.anchor_offset(),
                              static_cast<Eigen::Index>(hyper.num_anchors),
                              static_cast<Eigen::Index>(hyper.embedding_dim));
    for (Eigen::Index e = 0; e < E; ++e)
      dH.row(static_cast<Eigen::Index>(
          st.selection.anchor_indices[static_cast<std::size_t>(e)])) +=
          dHsel.row(e);
  }

  // Reshape TF x K gradient back to T x (F*K) and run network backward.
  const Eigen::Map<const RealMatrix> d_out(
      dV.data(), item.features.rows(),
      static_cast<Eigen::Index>(hyper.num_bins * hyper.embedding_dim));
  model.network().backward(d_out, st.net_cache, model.params().data(),
                           grad.data());
  return st.pit.loss;
}

double train_step(EmbeddingModel& model,
                  const std::vector<const TrainItem*>& batch,
                  const TrainConfig& cfg) {
  MBSS_CHECK(!batch.empty(), UsageError, "empty training batch");
  std::vector<double> grad(model.num_params(), 0.0);
  double loss = 0.0;
  for (const TrainItem* item : batch)
    loss += adan_loss_and_grad(model, *item, grad);
  loss /= static_cast<double>(batch.size());
  MBSS_CHECK(std::isfinite(loss), NumericError,
             "training diverged: non-finite loss, step rejected");

  const double inv = 1.0 / static_cast<double>(batch.size());
  double sq = 0.0;
  for (double& g : grad) {
    g *= inv;
    sq += g * g;
  }
  MBSS_CHECK(std::isfinite(sq), NumericError,
             "training diverged: non-finite gradient, step rejected");
  double scale = cfg.step_size;
  const double norm = std::sqrt(sq);
  if (norm > cfg.clip_norm && norm > 0.0) scale *= cfg.clip_norm / norm;

  auto& params = model.params();
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= scale * grad[i];
  return loss;
}

std::vector<double> train(EmbeddingModel& model,
                          const std::vector<TrainItem>& items,
                          const TrainConfig& cfg) {
  MBSS_CHECK(!items.empty(), UsageError, "no training items");
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();

  std::vector<double> losses;
  losses.reserve(cfg.steps);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    std::vector<const TrainItem*> batch;
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      if (cursor == order.size()) {
        // Fisher-Yates reshuffle per epoch.
        for (std::size_t i = order.size(); i > 1; --i)
          std::swap(order[i - 1], order[rng.next_index(i)]);
        cursor = 0;
      }
      batch.push_back(&items[order[cursor++]]);
    }
    losses.push_back(train_step(model, batch, cfg));
  }
  return losses;
}

SeparatedBeam separate_beam(const EmbeddingModel& model,
                            const dsp::ComplexSpectrogram& beam_spec,
                            std::size_t num_speakers, std::size_t G) {
  MBSS_CHECK(num_speakers >= 2, UsageError, "separation needs >= 2 speakers");
  if (G == 0) G = std::min<std::size_t>(num_speakers, model.hyper().num_salient);
  const std::size_t E = G + 1;
  const std::size_t F = model.hyper().num_bins;
  MBSS_CHECK(beam_spec.num_bins() == F, DataError,
             "spectrogram bin count does not match the model");

  const RealMatrix features = make_features(beam_spec, model.hyper().log_floor);
  const RealMatrix V = embed(model, features);
  const AttractorSelection sel = select_attractor_set(model, V, E);
  const RealMatrix M = masks(sel.attractors, V);

  const Eigen::Index T = beam_spec.bins.rows();
  SeparatedBeam out;
  out.mask = M;
  for (std::size_t e = 0; e < E; ++e) {
    dsp::ComplexSpectrogram masked = beam_spec;
    RealMatrix mag(T, static_cast<Eigen::Index>(F));
    for (Eigen::Index t = 0; t < T; ++t)
      for (Eigen::Index f = 0; f < static_cast<Eigen::Index>(F); ++f) {
        const double m = M(t * static_cast<Eigen::Index>(F) + f,
                           static_cast<Eigen::Index>(e));
        masked.bins(t, f) *= m;
        mag(t, f) = std::abs(masked.bins(t, f));
      }
    out.magnitudes.push_back(std::move(mag));
    out.waveforms.push_back(dsp::istft(masked));
  }
  return out;
}

void save_checkpoint(const std::string& path, const EmbeddingModel& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  MBSS_CHECK(out.good(), DataError, "cannot write checkpoint " + path);
  out.write(kModelMagic, sizeof(kModelMagic));

  const auto hash_len = static_cast<std::uint32_t>(model.config_hash.size());
  write_pod(out, hash_len);
  out.write(model.config_hash.data(), hash_len);

  const auto& h = model.hyper();
  write_pod(out, static_cast<std::uint32_t>(h.embedding_dim));
  write_pod(out, static_cast<std::uint32_t>(h.num_anchors));
  write_pod(out, static_cast<std::uint32_t>(h.num_bins));
  write_pod(out, static_cast<std::uint32_t>(h.num_salient));
  write_pod(out, static_cast<std::uint8_t>(h.recurrent ? 1 : 0));
  write_pod(out, h.log_floor);
  write_pod(out, static_cast<std::uint32_t>(h.layer_units.size()));
  for (std::size_t u : h.layer_units)
    write_pod(out, static_cast<std::uint32_t>(u));
  write_pod(out, model.init_seed());

  write_pod(out, static_cast<std::uint64_t>(model.num_params()));
  out.write(reinterpret_cast<const char*>(model.params().data()),
            static_cast<std::streamsize>(model.num_params() * sizeof(double)));
  MBSS_CHECK(out.good(), DataError, "write failed for checkpoint " + path);
}

EmbeddingModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  MBSS_CHECK(in.good(), DataError, "cannot open checkpoint " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  MBSS_CHECK(in && std::equal(magic, magic + 8, kModelMagic), DataError,
             "not a model checkpoint: " + path);

  const auto hash_len = read_pod<std::uint32_t>(in, "hash length");
  MBSS_CHECK(hash_len <= 64, DataError, "checkpoint hash field too long");
  std::string hash(hash_len, '\0');
  in.read(hash.data(), hash_len);

  ModelHyper h;
  h.embedding_dim = read_pod<std::uint32_t>(in, "embedding dim");
  h.num_anchors = read_pod<std::uint32_t>(in, "anchor count");
  h.num_bins = read_pod<std::uint32_t>(in, "bin count");
  h.num_salient = read_pod<std::uint32_t>(in, "salient count");
  h.recurrent = read_pod<std::uint8_t>(in, "recurrent flag") != 0;
  h.log_floor = read_pod<double>(in, "log floor");
  const auto num_layers = read_pod<std::uint32_t>(in, "layer count");
  MBSS_CHECK(num_layers >= 1 && num_layers <= 64, DataError,
             "implausible layer count");
  h.layer_units.clear();
  for (std::uint32_t i = 0; i < num_layers; ++i)
    h.layer_units.push_back(read_pod<std::uint32_t>(in, "layer width"));
  const auto seed = read_pod<std::uint64_t>(in, "seed");

  EmbeddingModel model(h, seed);
  model.config_hash = hash;
  const auto count = read_pod<std::uint64_t>(in, "parameter count");
  MBSS_CHECK(count == model.num_params(), DataError,
             "checkpoint parameter count mismatch");
  in.read(reinterpret_cast<char*>(model.params().data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  MBSS_CHECK(in.good(), DataError, "checkpoint truncated at parameters");
  return model;
}

}  // namespace mbss::adan
