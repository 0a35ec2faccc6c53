#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <vector>

#include "cpmamba/numerics/rng.hpp"

namespace cpmamba::channel {

using cd = std::complex<double>;

inline constexpr double kSpeedOfLight = 2.99792458e8;  // m/s

inline double kmh_to_mps(double kmh) { return kmh / 3.6; }

// Uniform planar array, N_h columns along x and N_v rows along z.
struct ArrayGeometry {
  std::size_t n_h = 2;
  std::size_t n_v = 2;
  double d_x = kSpeedOfLight / 2.4e9 / 2.0;  // meters, half wavelength at 2.4 GHz
  double d_z = kSpeedOfLight / 2.4e9 / 2.0;

  std::size_t antennas() const { return n_h * n_v; }
  void validate() const;
};

struct ChannelConfig {
  double carrier_hz = 2.4e9;
  std::size_t subcarriers = 16;  // K_total, lower half uplink, upper half downlink
  double subcarrier_spacing_hz = 180e3;
  std::size_t paths = 6;
  double speed_kmh = 60.0;
  double sample_interval_s = 5e-4;
  ArrayGeometry geometry;
  double delay_min_s = 0.0;
  double delay_max_s = 1e-6;
  double rms_delay_s = 300e-9;
  bool los = false;
  double rician_k = 10.0;  // linear power ratio LoS : scattered

  double wavelength() const { return kSpeedOfLight / carrier_hz; }
  double speed_mps() const { return kmh_to_mps(speed_kmh); }
  // Center frequency of subcarrier k, centered on the carrier.
  double subcarrier_hz(std::size_t k) const;
  void validate() const;
};

// Half-wavelength spaced UPA for the given carrier.
ArrayGeometry half_wavelength_upa(std::size_t n_h, std::size_t n_v, double carrier_hz);

struct Path {
  cd gain;                      // complex amplitude, constant over a sequence
  double mean_power = 0.0;      // E|gain|^2 under the power-delay profile
  double delay_s = 0.0;
  double velocity_angle = 0.0;  // angle between UE velocity and arrival direction
  double doppler_hz = 0.0;
  double azimuth = 0.0;         // [-pi, pi]
  double elevation = 0.0;       // [0, pi]
};

struct MultipathParams {
  std::vector<Path> paths;
  double total_mean_power() const;
};

// Complex frames laid out [t][antenna][subcarrier].
struct CsiSequence {
  std::size_t frames = 0;
  std::size_t antennas = 0;
  std::size_t subcarriers = 0;
  std::vector<cd> values;
  ChannelConfig config;
  double speed_kmh = 0.0;
  std::uint64_t seed = 0;

  cd& at(std::size_t t, std::size_t a, std::size_t k) { return values[(t * antennas + a) * subcarriers + k]; }
  const cd& at(std::size_t t, std::size_t a, std::size_t k) const {
    return values[(t * antennas + a) * subcarriers + k];
  }
};

// a_h(theta, phi) kron a_v(theta, phi); every entry has unit modulus.
std::vector<cd> steering_vector(const ArrayGeometry& geom, double azimuth, double elevation, double wavelength);

double doppler_shift(double speed_mps, double wavelength, double velocity_angle);

MultipathParams sample_paths(const ChannelConfig& cfg, num::Rng& rng);

// H_t as an [antennas x subcarriers] row-major matrix.
std::vector<cd> csi_frame(const MultipathParams& paths, const ChannelConfig& cfg, double t);

// Paths drawn once; frames at t = 0, dt, ..., (T-1) dt.
CsiSequence generate_sequence(const ChannelConfig& cfg, num::Rng& rng, std::size_t frames);

// Adds circular complex Gaussian noise with power mean|H|^2 / 10^(snr/10).
// std::nullopt (infinite SNR) returns the input unchanged.
CsiSequence add_awgn(const CsiSequence& seq, std::optional<double> snr_db, num::Rng& rng);

// Same rule on a raw complex buffer, in place.
void add_awgn_inplace(std::vector<cd>& values, std::optional<double> snr_db, num::Rng& rng);

}  // namespace cpmamba::channel
