// Copyright 2026 mbss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mbss::eval {

namespace {

double clamp_db(double ratio) {
  if (!(ratio > 0.0)) return -kSdrCapDb;
  return std::clamp(10.0 * std::log10(ratio), -kSdrCapDb, kSdrCapDb);
}

std::pair<std::vector<double>, std::vector<double>> common_prefix(
    const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = std::min(a.size(), b.size());
  return {{a.begin(), a.begin() + n}, {b.begin(), b.begin() + n}};
}

}  // namespace

double sdr(const std::vector<double>& estimate,
           const std::vector<double>& reference) {
  const auto [e, r] = common_prefix(estimate, reference);
  MBSS_CHECK(!r.empty(), UsageError, "empty signals");
  double rr = 0.0, er = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    rr += r[i] * r[i];
    er += e[i] * r[i];
  }
  MBSS_CHECK(rr > 0.0, UsageError, "zero reference signal");

  const double alpha = er / rr;
  const double target_energy = alpha * alpha * rr;
  double residual = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double d = e[i] - alpha * r[i];
    residual += d * d;
  }
  if (residual <= 0.0) return kSdrCapDb;
  return clamp_db(target_energy / residual);
}

double filtered_sdr(const std::vector<double>& estimate,
                    const std::vector<double>& reference,
                    std::size_t filter_window) {
  const auto [e, r] = common_prefix(estimate, reference);
  MBSS_CHECK(!r.empty(), UsageError, "empty signals");
  double rr = 0.0;
  for (double v : r) rr += v * v;
  MBSS_CHECK(rr > 0.0, UsageError, "zero reference signal");

  // Pick the largest window that still leaves enough frames to identify the
  // per-bin gains; the fit is vacuous on a single frame. Short inputs fall
  // back to the scalar projection.
  std::size_t window = 0;
  for (std::size_t w = 64; w <= filter_window; w *= 2) {
    if (e.size() < w) break;
    const std::size_t frames = (e.size() - w) / (w / 4) + 1;
    if (frames >= 8) window = w;
  }
  if (window == 0) return sdr(e, r);

  const dsp::StftConfig cfg{window, window / 4, dsp::Window::hann};
  const auto E = dsp::stft(e, cfg, 8000);
  const auto R = dsp::stft(r, cfg, 8000);

  double target = 0.0, distortion = 0.0;
  for (Eigen::Index f = 0; f < E.bins.cols(); ++f) {
    std::complex<double> num = 0.0;
    double den = 0.0;
    for (Eigen::Index t = 0; t < E.bins.rows(); ++t) {
      num += E.bins(t, f) * std::conj(R.bins(t, f));
      den += std::norm(R.bins(t, f));
    }
    const std::complex<double> gain = den > 1e-300 ? num / den : 0.0;
    for (Eigen::Index t = 0; t < E.bins.rows(); ++t) {
      const std::complex<double> s = gain * R.bins(t, f);
      target += std::norm(s);
      distortion += std::norm(E.bins(t, f) - s);
    }
  }
  if (distortion <= 0.0) return kSdrCapDb;
  return clamp_db(target / distortion);
}

SdrReport evaluate_mixture(const std::vector<std::vector<double>>& outputs,
                           const std::vector<std::vector<double>>& references,
                           const std::vector<double>& mixture_ref_channel) {
  MBSS_CHECK(outputs.size() == references.size(), DataError,
             "output/reference count mismatch");
  SdrReport report;
  for (std::size_t c = 0; c < references.size(); ++c) {
    SpeakerSdr s;
    s.input_db = filtered_sdr(mixture_ref_channel, references[c]);
    s.output_db = filtered_sdr(outputs[c], references[c]);
    s.improvement_db = s.output_db - s.input_db;
    report.speakers.push_back(s);
  }
  double sum = 0.0;
  for (const auto& s : report.speakers) {
    sum += s.improvement_db;
    report.ranked_improvements_db.push_back(s.improvement_db);
  }
  report.mean_improvement_db = sum / static_cast<double>(report.speakers.size());
  std::sort(report.ranked_improvements_db.begin(),
            report.ranked_improvements_db.end(), std::greater<double>());
  return report;
}

std::vector<dsp::RealMatrix> irm_masks(
    const std::vector<dsp::ComplexSpectrogram>& reference_specs,
    double denom_floor) {
  MBSS_CHECK(!reference_specs.empty(), UsageError, "no reference spectra");
  const Eigen::Index T = reference_specs[0].bins.rows();
  const Eigen::Index F = reference_specs[0].bins.cols();

  dsp::RealMatrix denom = dsp::RealMatrix::Zero(T, F);
  std::vector<dsp::RealMatrix> masks;
  for (const auto& ref : reference_specs) {
    MBSS_CHECK(ref.bins.rows() == T && ref.bins.cols() == F, DataError,
               "reference spectrogram shape mismatch");
    masks.push_back(ref.bins.cwiseAbs());
    denom += masks.back();
  }
  denom = denom.cwiseMax(denom_floor);
  for (auto& m : masks) m.array() /= denom.array();
  return masks;
}

std::vector<std::vector<double>> irm_baseline(
    const dsp::ComplexSpectrogram& mixture_spec,
    const std::vector<dsp::ComplexSpectrogram>& reference_specs,
    double denom_floor) {
  const auto masks = irm_masks(reference_specs, denom_floor);
  MBSS_CHECK(masks[0].rows() == mixture_spec.bins.rows() &&
                 masks[0].cols() == mixture_spec.bins.cols(),
             DataError, "mixture spectrogram shape mismatch");
  std::vector<std::vector<double>> outputs;
  for (const auto& mask : masks) {
    dsp::ComplexSpectrogram masked = mixture_spec;
    masked.bins.array() *= mask.array();
    outputs.push_back(dsp::istft(masked));
  }
  return outputs;
}

std::vector<std::size_t> mbbf_oracle(
    const std::vector<std::vector<double>>& beam_waveforms,
    const std::vector<std::vector<double>>& references) {
  MBSS_CHECK(!beam_waveforms.empty(), UsageError, "no beams");
  std::vector<std::size_t> chosen;
  for (const auto& ref : references) {
    std::size_t best = 0;
    double best_sdr = -1e300;
    for (std::size_t b = 0; b < beam_waveforms.size(); ++b) {
      const double s = filtered_sdr(beam_waveforms[b], ref);
      if (s > best_sdr) {
        best_sdr = s;
        best = b;
      }
    }
    chosen.push_back(best);
  }
  return chosen;
}

std::vector<std::vector<double>> mbirm_baseline(
    const std::vector<dsp::ComplexSpectrogram>& beam_specs,
    const std::vector<std::vector<dsp::ComplexSpectrogram>>& per_source_beam_specs,
    const std::vector<std::size_t>& chosen_beams) {
  const std::size_t C = per_source_beam_specs.size();
  MBSS_CHECK(chosen_beams.size() == C, UsageError, "beam choice count mismatch");

  std::vector<std::vector<double>> outputs;
  for (std::size_t c = 0; c < C; ++c) {
    const std::size_t b = chosen_beams[c];
    MBSS_CHECK(b < beam_specs.size(), UsageError, "beam index out of range");
    std::vector<dsp::ComplexSpectrogram> refs_at_beam;
    refs_at_beam.reserve(C);
    for (std::size_t c2 = 0; c2 < C; ++c2)
      refs_at_beam.push_back(per_source_beam_specs[c2][b]);
    outputs.push_back(std::move(irm_baseline(beam_specs[b], refs_at_beam)[c]));
  }
  return outputs;
}

bf::CVec mvdr_weights(const bf::CMat& noise_cov, const bf::CVec& steering,
                      double loading_scale) {
  const Eigen::Index M = steering.size();
  MBSS_CHECK(noise_cov.rows() == M && noise_cov.cols() == M, UsageError,
             "covariance shape mismatch");
  bf::CMat R = noise_cov;
  const double load =
      loading_scale * std::max(R.trace().real(), 1e-12) / static_cast<double>(M);
  R.diagonal().array() += load;

  Eigen::LDLT<bf::CMat> solver(R);
  MBSS_CHECK(solver.info() == Eigen::Success, NumericError,
             "singular noise covariance after loading");
  const bf::CVec rinv_d = solver.solve(steering);
  const std::complex<double> denom = steering.adjoint() * rinv_d;
  MBSS_CHECK(std::abs(denom) > 1e-300, NumericError,
             "degenerate MVDR denominator");
  return rinv_d / denom;
}

std::vector<std::vector<double>> oracle_mvdr(
    const dsp::MultichannelWave& mixture,
    const std::vector<dsp::MultichannelWave>& source_images,
    const std::vector<Vec3>& source_directions, const ArrayGeometry& geometry,
    const dsp::StftConfig& cfg) {
  const std::size_t C = source_images.size();
  MBSS_CHECK(source_directions.size() == C, UsageError,
             "direction count mismatch");
  MBSS_CHECK(mixture.num_channels() == geometry.num_mics(), DataError,
             "mixture channel count mismatch");
  const std::size_t M = geometry.num_mics();

  std::vector<dsp::ComplexSpectrogram> mix_specs;
  for (const auto& ch : mixture.samples)
    mix_specs.push_back(dsp::stft(ch, cfg, mixture.sample_rate));
  const Eigen::Index T = mix_specs[0].bins.rows();
  const Eigen::Index F = mix_specs[0].bins.cols();

  std::vector<std::vector<double>> outputs;
  for (std::size_t c = 0; c < C; ++c) {
    // Interference-only multichannel signal: the other speakers' images.
    dsp::MultichannelWave interference(M, mixture.length(),
                                       mixture.sample_rate);
    for (std::size_t c2 = 0; c2 < C; ++c2) {
      if (c2 == c) continue;
      for (std::size_t m = 0; m < M; ++m)
        for (std::size_t i = 0; i < mixture.length(); ++i)
          interference.samples[m][i] += source_images[c2].samples[m][i];
    }
    std::vector<dsp::ComplexSpectrogram> noise_specs;
    for (const auto& ch : interference.samples)
      noise_specs.push_back(dsp::stft(ch, cfg, mixture.sample_rate));

    dsp::ComplexSpectrogram out;
    out.frame_len = cfg.frame_len;
    out.hop = cfg.hop;
    out.window = cfg.window;
    out.sample_rate = mixture.sample_rate;
    out.bins.setZero(T, F);

    for (Eigen::Index f = 0; f < F; ++f) {
      bf::CMat R = bf::CMat::Zero(static_cast<Eigen::Index>(M),
                                  static_cast<Eigen::Index>(M));
      for (Eigen::Index t = 0; t < T; ++t) {
        bf::CVec x(static_cast<Eigen::Index>(M));
        for (std::size_t m = 0; m < M; ++m)
          x(static_cast<Eigen::Index>(m)) = noise_specs[m].bins(t, f);
        R += x * x.adjoint();
      }
      R /= static_cast<double>(T);

      const double hz = mix_specs[0].bin_hz(static_cast<std::size_t>(f));
      const bf::CVec d = bf::steering_vector(geometry, source_directions[c], hz);
      const bf::CVec w = mvdr_weights(R, d);
      for (Eigen::Index t = 0; t < T; ++t) {
        std::complex<double> acc = 0.0;
        for (std::size_t m = 0; m < M; ++m)
          acc += std::conj(w(static_cast<Eigen::Index>(m))) *
                 mix_specs[m].bins(t, f);
        out.bins(t, f) = acc;
      }
    }
    outputs.push_back(dsp::istft(out));
  }
  return outputs;
}

}  // namespace mbss::eval
