#include "cpmamba/channel/channel.hpp"

#include <cmath>
#include <numbers>

#include "cpmamba/errors.hpp"

namespace cpmamba::channel {

namespace {

constexpr double kPi = std::numbers::pi;

}  // namespace

void ArrayGeometry::validate() const {
  if (n_h < 1) throw ConfigError("geometry.n_h must be >= 1");
  if (n_v < 1) throw ConfigError("geometry.n_v must be >= 1");
  if (!(d_x > 0.0)) throw ConfigError("geometry.d_x must be > 0");
  if (!(d_z > 0.0)) throw ConfigError("geometry.d_z must be > 0");
}

double ChannelConfig::subcarrier_hz(std::size_t k) const {
  return carrier_hz + (static_cast<double>(k) - static_cast<double>(subcarriers) / 2.0) * subcarrier_spacing_hz;
}

void ChannelConfig::validate() const {
  if (!(carrier_hz > 0.0)) throw ConfigError("carrier_hz must be > 0");
  if (subcarriers == 0 || subcarriers % 2 != 0) throw ConfigError("subcarriers must be even and > 0");
  if (!(subcarrier_spacing_hz > 0.0)) throw ConfigError("subcarrier_spacing_hz must be > 0");
  if (paths < 1) throw ConfigError("paths must be >= 1");
  if (!(speed_kmh >= 0.0)) throw ConfigError("speed_kmh must be >= 0");
  if (!(sample_interval_s > 0.0)) throw ConfigError("sample_interval_s must be > 0");
  if (!(delay_min_s >= 0.0) || !(delay_max_s >= delay_min_s)) throw ConfigError("delay window must satisfy 0 <= delay_min_s <= delay_max_s");
  if (!(rms_delay_s > 0.0)) throw ConfigError("rms_delay_s must be > 0");
  if (!(rician_k >= 0.0)) throw ConfigError("rician_k must be >= 0");
  geometry.validate();
}

ArrayGeometry half_wavelength_upa(std::size_t n_h, std::size_t n_v, double carrier_hz) {
  const double half = kSpeedOfLight / carrier_hz / 2.0;
  return ArrayGeometry{n_h, n_v, half, half};
}

double MultipathParams::total_mean_power() const {
  double s = 0.0;
  for (const auto& p : paths) s += p.mean_power;
  return s;
}

std::vector<cd> steering_vector(const ArrayGeometry& geom, double azimuth, double elevation, double wavelength) {
  const double k0 = 2.0 * kPi / wavelength;
  const double sx = geom.d_x * std::sin(elevation) * std::cos(azimuth);
  const double sz = geom.d_z * std::sin(elevation) * std::sin(azimuth);
  std::vector<cd> a(geom.antennas());
  for (std::size_t h = 0; h < geom.n_h; ++h) {
    for (std::size_t v = 0; v < geom.n_v; ++v) {
      const double phase = k0 * (static_cast<double>(h) * sx + static_cast<double>(v) * sz);
      a[h * geom.n_v + v] = std::polar(1.0, phase);
    }
  }
  return a;
}

double doppler_shift(double speed_mps, double wavelength, double velocity_angle) {
  return speed_mps / wavelength * std::cos(velocity_angle);
}

MultipathParams sample_paths(const ChannelConfig& cfg, num::Rng& rng) {
  cfg.validate();
  const std::size_t m = cfg.paths;
  const bool los = cfg.los;
  MultipathParams out;
  out.paths.resize(m);

  for (std::size_t l = 0; l < m; ++l) {
    auto& p = out.paths[l];
    p.delay_s = (los && l == 0) ? cfg.delay_min_s : rng.uniform(cfg.delay_min_s, cfg.delay_max_s);
    p.azimuth = rng.uniform(-kPi, kPi);
    p.elevation = rng.uniform(0.0, kPi);
    p.velocity_angle = rng.uniform(-kPi, kPi);
    p.doppler_hz = doppler_shift(cfg.speed_mps(), cfg.wavelength(), p.velocity_angle);
  }

  // Exponential power-delay profile over the scattered paths.
  const std::size_t first_scattered = los ? 1 : 0;
  double scattered_share = 1.0;
  if (los) {
    const double los_share = m == 1 ? 1.0 : cfg.rician_k / (cfg.rician_k + 1.0);
    out.paths[0].mean_power = los_share;
    scattered_share = 1.0 - los_share;
  }
  double profile_sum = 0.0;
  for (std::size_t l = first_scattered; l < m; ++l) {
    out.paths[l].mean_power = std::exp(-(out.paths[l].delay_s - cfg.delay_min_s) / cfg.rms_delay_s);
    profile_sum += out.paths[l].mean_power;
  }
  for (std::size_t l = first_scattered; l < m; ++l) out.paths[l].mean_power *= scattered_share / profile_sum;

  for (std::size_t l = 0; l < m; ++l) {
    auto& p = out.paths[l];
    if (los && l == 0) {
      p.gain = std::polar(std::sqrt(p.mean_power), rng.uniform(-kPi, kPi));
    } else {
      const double re = rng.normal();
      const double im = rng.normal();
      p.gain = std::sqrt(p.mean_power / 2.0) * cd(re, im);
    }
  }
  return out;
}

std::vector<cd> csi_frame(const MultipathParams& paths, const ChannelConfig& cfg, double t) {
  const std::size_t n_t = cfg.geometry.antennas();
  const std::size_t k_total = cfg.subcarriers;
  const double lambda = cfg.wavelength();
  std::vector<cd> frame(n_t * k_total, cd(0.0, 0.0));
  for (const auto& p : paths.paths) {
    const auto a = steering_vector(cfg.geometry, p.azimuth, p.elevation, lambda);
    for (std::size_t k = 0; k < k_total; ++k) {
      const double phase = 2.0 * kPi * (p.doppler_hz * t - p.delay_s * cfg.subcarrier_hz(k));
      const cd coeff = p.gain * std::polar(1.0, phase);
      for (std::size_t n = 0; n < n_t; ++n) frame[n * k_total + k] += coeff * a[n];
    }
  }
  return frame;
}

CsiSequence generate_sequence(const ChannelConfig& cfg, num::Rng& rng, std::size_t frames) {
  if (frames < 1) throw ConfigError("generate_sequence: frame count must be >= 1");
  const auto paths = sample_paths(cfg, rng);
  CsiSequence seq;
  seq.frames = frames;
  seq.antennas = cfg.geometry.antennas();
  seq.subcarriers = cfg.subcarriers;
  seq.config = cfg;
  seq.speed_kmh = cfg.speed_kmh;
  seq.values.reserve(frames * seq.antennas * seq.subcarriers);
  for (std::size_t i = 0; i < frames; ++i) {
    const auto frame = csi_frame(paths, cfg, static_cast<double>(i) * cfg.sample_interval_s);
    seq.values.insert(seq.values.end(), frame.begin(), frame.end());
  }
  return seq;
}

void add_awgn_inplace(std::vector<cd>& values, std::optional<double> snr_db, num::Rng& rng) {
  if (!snr_db.has_value() || std::isinf(*snr_db)) return;
  if (values.empty()) return;
  double power = 0.0;
  for (const auto& v : values) power += std::norm(v);
  power /= static_cast<double>(values.size());
  const double noise_power = power / std::pow(10.0, *snr_db / 10.0);
  const double sigma = std::sqrt(noise_power / 2.0);
  for (auto& v : values) {
    const double re = rng.normal();
    const double im = rng.normal();
    v += cd(sigma * re, sigma * im);
  }
}

CsiSequence add_awgn(const CsiSequence& seq, std::optional<double> snr_db, num::Rng& rng) {
  CsiSequence out = seq;
  add_awgn_inplace(out.values, snr_db, rng);
  return out;
}

}  // namespace cpmamba::channel
