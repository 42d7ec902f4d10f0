// Copyright 2026 mbss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "beamformer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>

namespace mbss::bf {

namespace {

constexpr char kBankMagic[8] = {'M', 'B', 'S', 'S', 'B', 'N', 'K', '1'};

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const char* what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError(std::string("bank file truncated at ") + what);
  return v;
}

}  // namespace

CVec steering_vector(const ArrayGeometry& geometry, const Vec3& arrival_unit,
                     double freq_hz, double speed_of_sound) {
  MBSS_CHECK(freq_hz >= 0.0, UsageError, "frequency must be >= 0");
  CVec d(geometry.num_mics());
  const Vec3 u = arrival_unit.normalized();
  for (std::size_t m = 0; m < geometry.num_mics(); ++m) {
    const double tau = -u.dot(geometry.mic_positions[m]) / speed_of_sound;
    const double phase = -2.0 * kPi * freq_hz * tau;
    d(static_cast<Eigen::Index>(m)) = std::polar(1.0, phase);
  }
  return d;
}

CVec steering_vector(const ArrayGeometry& geometry, double azimuth_deg,
                     double freq_hz, double speed_of_sound) {
  return steering_vector(geometry, azimuth_unit(azimuth_deg), freq_hz,
                         speed_of_sound);
}

SecondOrderTarget SecondOrderTarget::from_nulls(double null_a_deg,
                                                double null_b_deg) {
  const double ca = std::cos(null_a_deg * kPi / 180.0);
  const double cb = std::cos(null_b_deg * kPi / 180.0);
  const double norm = (1.0 - ca) * (1.0 - cb);
  MBSS_CHECK(std::fabs(norm) > 1e-9, UsageError,
             "target null at the look direction");
  SecondOrderTarget t;
  t.null_a_deg = null_a_deg;
  t.null_b_deg = null_b_deg;
  const double k = 1.0 / norm;
  t.a2 = k;
  t.a1 = -k * (ca + cb);
  t.a0 = k * ca * cb;
  return t;
}

double SecondOrderTarget::response(double angle_from_look_deg) const {
  const double c = std::cos(angle_from_look_deg * kPi / 180.0);
  return a0 + a1 * c + a2 * c * c;
}

std::vector<double> BeamDesignParams::default_freq_grid(double lo_hz,
                                                        double hi_hz,
                                                        std::size_t count) {
  MBSS_CHECK(lo_hz > 0.0 && hi_hz > lo_hz && count >= 2, UsageError,
             "bad frequency grid");
  std::vector<double> grid(count);
  const double ratio = std::log(hi_hz / lo_hz);
  for (std::size_t i = 0; i < count; ++i)
    grid[i] = lo_hz * std::exp(ratio * i / (count - 1));
  return grid;
}

CMat design_beam(const ArrayGeometry& geometry, double look_azimuth_deg,
                 const BeamDesignParams& params) {
  geometry.validate();
  MBSS_CHECK(!params.freq_grid_hz.empty(), UsageError, "empty frequency grid");
  const auto M = static_cast<Eigen::Index>(geometry.num_mics());
  const std::size_t num_angles =
      static_cast<std::size_t>(std::lround(360.0 / params.angle_step_deg));
  const double wng_floor = std::pow(10.0, params.wng_floor_db / 10.0);

  CMat weights(static_cast<Eigen::Index>(params.freq_grid_hz.size()), M);
  for (std::size_t fi = 0; fi < params.freq_grid_hz.size(); ++fi) {
    const double f = params.freq_grid_hz[fi];

    // D: M x A steering matrix on the fitting grid, t: target response.
    CMat D(M, static_cast<Eigen::Index>(num_angles));
    Eigen::VectorXd t(static_cast<Eigen::Index>(num_angles));
    for (std::size_t a = 0; a < num_angles; ++a) {
      const double theta = a * params.angle_step_deg;
      D.col(static_cast<Eigen::Index>(a)) =
          steering_vector(geometry, theta, f, params.speed_of_sound);
      t(static_cast<Eigen::Index>(a)) =
          params.target.response(theta - look_azimuth_deg);
    }
    const CVec d_look =
        steering_vector(geometry, look_azimuth_deg, f, params.speed_of_sound);

    const CMat DDh = D * D.adjoint();
    const CVec Dt = D * t.cast<std::complex<double>>();
    const double trace = DDh.trace().real();

    // Increase diagonal loading until the white-noise gain floor holds.
    // The distortionless constraint is kept exact by the KKT solve.
    double lambda = 1e-8 * trace / static_cast<double>(M);
    CVec w;
    bool ok = false;
    for (int iter = 0; iter < 60; ++iter) {
      CMat B = DDh;
      B.diagonal().array() += lambda;
      Eigen::LDLT<CMat> solver(B);
      if (solver.info() != Eigen::Success) {
        lambda *= 10.0;
        continue;
      }
      const CVec Binv_Dt = solver.solve(Dt);
      const CVec Binv_dl = solver.solve(d_look);
      const std::complex<double> denom = d_look.adjoint() * Binv_dl;
      if (std::abs(denom) < 1e-16) {
        lambda *= 10.0;
        continue;
      }
      const std::complex<double> mu =
          ((d_look.adjoint() * Binv_Dt)(0) - 1.0) / denom;
      w = Binv_Dt - mu * Binv_dl;
      const double wng = 1.0 / w.squaredNorm();
      if (wng >= wng_floor) {
        ok = true;
        break;
      }
      lambda *= 4.0;
    }
    MBSS_CHECK(ok, NumericError,
               "beam design failed to reach the white-noise-gain floor");
    weights.row(static_cast<Eigen::Index>(fi)) = w.transpose();
  }
  return weights;
}

BeamformerBank design_bank(const ArrayGeometry& geometry,
                           const BeamDesignParams& params,
                           std::size_t num_beams) {
  MBSS_CHECK(num_beams >= 2, UsageError, "bank needs >= 2 beams");
  BeamformerBank bank;
  bank.geometry = geometry;
  bank.freq_grid_hz = params.freq_grid_hz;
  bank.target = params.target;
  bank.wng_floor_db = params.wng_floor_db;
  for (std::size_t b = 0; b < num_beams; ++b) {
    const double look = 360.0 * b / num_beams;
    bank.look_azimuths_deg.push_back(look);
    bank.weights.push_back(design_beam(geometry, look, params));
  }
  return bank;
}

std::vector<double> beampattern(const BeamformerBank& bank,
                                std::size_t beam_index, double freq_hz,
                                const std::vector<double>& angle_grid_deg) {
  MBSS_CHECK(beam_index < bank.num_beams(), UsageError, "bad beam index");
  // Nearest design frequency.
  std::size_t fi = 0;
  for (std::size_t i = 1; i < bank.freq_grid_hz.size(); ++i)
    if (std::fabs(bank.freq_grid_hz[i] - freq_hz) <
        std::fabs(bank.freq_grid_hz[fi] - freq_hz))
      fi = i;
  const CVec w =
      bank.weights[beam_index].row(static_cast<Eigen::Index>(fi)).transpose();

  std::vector<double> gains_db;
  gains_db.reserve(angle_grid_deg.size());
  for (double theta : angle_grid_deg) {
    const CVec d =
        steering_vector(bank.geometry, theta, bank.freq_grid_hz[fi]);
    const double mag = std::abs((w.adjoint() * d)(0));
    gains_db.push_back(std::max(-80.0, 20.0 * std::log10(std::max(mag, 1e-30))));
  }
  return gains_db;
}

dsp::ComplexSpectrogram apply_beam(
    const BeamformerBank& bank, std::size_t beam_index,
    const std::vector<dsp::ComplexSpectrogram>& channel_specs) {
  MBSS_CHECK(beam_index < bank.num_beams(), UsageError, "bad beam index");
  MBSS_CHECK(channel_specs.size() == bank.num_mics(), DataError,
             "channel count does not match the bank");

  const auto& first = channel_specs.front();
  dsp::ComplexSpectrogram out;
  out.frame_len = first.frame_len;
  out.hop = first.hop;
  out.window = first.window;
  out.sample_rate = first.sample_rate;
  out.bins.setZero(first.bins.rows(), first.bins.cols());

  // Map each STFT bin onto the nearest design frequency once.
  const std::size_t F = first.num_bins();
  std::vector<std::size_t> nearest(F, 0);
  for (std::size_t f = 0; f < F; ++f) {
    const double hz = first.bin_hz(f);
    std::size_t best = 0;
    for (std::size_t i = 1; i < bank.freq_grid_hz.size(); ++i)
      if (std::fabs(bank.freq_grid_hz[i] - hz) <
          std::fabs(bank.freq_grid_hz[best] - hz))
        best = i;
    nearest[f] = best;
  }

  const CMat& w = bank.weights[beam_index];
  for (std::size_t m = 0; m < bank.num_mics(); ++m) {
    const auto& spec = channel_specs[m];
    MBSS_CHECK(spec.bins.rows() == first.bins.rows() &&
                   spec.bins.cols() == first.bins.cols(),
               DataError, "channel spectrogram shapes differ");
    for (std::size_t f = 0; f < F; ++f) {
      const std::complex<double> coeff = std::conj(
          w(static_cast<Eigen::Index>(nearest[f]), static_cast<Eigen::Index>(m)));
      out.bins.col(static_cast<Eigen::Index>(f)) +=
          coeff * spec.bins.col(static_cast<Eigen::Index>(f));
    }
  }
  return out;
}

std::vector<dsp::ComplexSpectrogram> apply_bank(
    const BeamformerBank& bank, const dsp::MultichannelWave& mixture,
    const dsp::StftConfig& cfg) {
  MBSS_CHECK(mixture.num_channels() == bank.num_mics(), DataError,
             "mixture channel count does not match the bank");
  std::vector<dsp::ComplexSpectrogram> channel_specs;
  channel_specs.reserve(mixture.num_channels());
  for (const auto& ch : mixture.samples)
    channel_specs.push_back(dsp::stft(ch, cfg, mixture.sample_rate));

  std::vector<dsp::ComplexSpectrogram> beams;
  beams.reserve(bank.num_beams());
  for (std::size_t b = 0; b < bank.num_beams(); ++b)
    beams.push_back(apply_beam(bank, b, channel_specs));
  return beams;
}

void save_bank(const std::string& path, const BeamformerBank& bank) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  MBSS_CHECK(out.good(), DataError, "cannot write bank file " + path);
  out.write(kBankMagic, sizeof(kBankMagic));

  const std::uint32_t hash_len =
      static_cast<std::uint32_t>(bank.config_hash.size());
  write_pod(out, hash_len);
  out.write(bank.config_hash.data(), hash_len);

  write_pod(out, static_cast<std::uint32_t>(bank.num_mics()));
  for (const auto& p : bank.geometry.mic_positions) {
    write_pod(out, p.x);
    write_pod(out, p.y);
    write_pod(out, p.z);
  }
  write_pod(out, static_cast<std::uint32_t>(bank.freq_grid_hz.size()));
  for (double f : bank.freq_grid_hz) write_pod(out, f);

  write_pod(out, bank.target.a0);
  write_pod(out, bank.target.a1);
  write_pod(out, bank.target.a2);
  write_pod(out, bank.target.null_a_deg);
  write_pod(out, bank.target.null_b_deg);
  write_pod(out, bank.wng_floor_db);

  write_pod(out, static_cast<std::uint32_t>(bank.num_beams()));
  for (std::size_t b = 0; b < bank.num_beams(); ++b) {
    write_pod(out, bank.look_azimuths_deg[b]);
    const CMat& w = bank.weights[b];
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        write_pod(out, w(i, j).real());
        write_pod(out, w(i, j).imag());
      }
  }
  MBSS_CHECK(out.good(), DataError, "write failed for bank file " + path);
}

BeamformerBank load_bank(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  MBSS_CHECK(in.good(), DataError, "cannot open bank file " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  MBSS_CHECK(in && std::equal(magic, magic + 8, kBankMagic), DataError,
             "not a beamformer bank file: " + path);

  BeamformerBank bank;
  const auto hash_len = read_pod<std::uint32_t>(in, "hash length");
  MBSS_CHECK(hash_len <= 64, DataError, "bank hash field too long");
  bank.config_hash.resize(hash_len);
  in.read(bank.config_hash.data(), hash_len);

  const auto M = read_pod<std::uint32_t>(in, "mic count");
  MBSS_CHECK(M >= 1 && M <= 1024, DataError, "implausible mic count");
  bank.geometry.mic_positions.resize(M);
  for (auto& p : bank.geometry.mic_positions) {
    p.x = read_pod<double>(in, "mic x");
    p.y = read_pod<double>(in, "mic y");
    p.z = read_pod<double>(in, "mic z");
  }
  const auto F = read_pod<std::uint32_t>(in, "frequency count");
  MBSS_CHECK(F >= 1 && F <= 65536, DataError, "implausible frequency count");
  bank.freq_grid_hz.resize(F);
  for (double& f : bank.freq_grid_hz) f = read_pod<double>(in, "frequency");

  bank.target.a0 = read_pod<double>(in, "target a0");
  bank.target.a1 = read_pod<double>(in, "target a1");
  bank.target.a2 = read_pod<double>(in, "target a2");
  bank.target.null_a_deg = read_pod<double>(in, "target null a");
  bank.target.null_b_deg = read_pod<double>(in, "target null b");
  bank.wng_floor_db = read_pod<double>(in, "wng floor");

  const auto B = read_pod<std::uint32_t>(in, "beam count");
  MBSS_CHECK(B >= 1 && B <= 4096, DataError, "implausible beam count");
  for (std::uint32_t b = 0; b < B; ++b) {
    bank.look_azimuths_deg.push_back(read_pod<double>(in, "look azimuth"));
    CMat w(F, M);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        const double re = read_pod<double>(in, "weight re");
        const double im = read_pod<double>(in, "weight im");
        w(i, j) = {re, im};
      }
    bank.weights.push_back(std::move(w));
  }
  return bank;
}

}  // namespace mbss::bf
