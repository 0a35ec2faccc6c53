#include "cpmamba/channel/dataset.hpp"

#include "cpmamba/binary_io.hpp"
#include "cpmamba/errors.hpp"
#include "cpmamba/parallel.hpp"

namespace cpmamba::channel {

Split split_from_string(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw ConfigError("unknown split '" + std::string(name) + "' (expected train, val or test)");
}

std::string to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

std::size_t DatasetConfig::samples(Split split) const {
  switch (split) {
    case Split::train: return train_samples;
    case Split::val: return val_samples;
    case Split::test: return test_per_speed * test_speed_points;
  }
  return 0;
}

void DatasetConfig::validate() const {
  channel.validate();
  if (history < 1) throw ConfigError("history must be >= 1");
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  if (!(speed_min_kmh >= 0.0) || !(speed_max_kmh >= speed_min_kmh)) {
    throw ConfigError("speed range must satisfy 0 <= speed_min_kmh <= speed_max_kmh");
  }
  if (test_speed_points < 1) throw ConfigError("test_speed_points must be >= 1");
}

DatasetConfig desk_dataset_preset() { return DatasetConfig{}; }

DatasetConfig paper_dataset_preset() {
  DatasetConfig cfg;
  cfg.channel.subcarriers = 96;
  cfg.channel.subcarrier_spacing_hz = 17.28e6 / 96.0;
  cfg.channel.geometry = half_wavelength_upa(4, 8, cfg.channel.carrier_hz);
  cfg.channel.paths = 20;
  cfg.train_samples = 8000;
  cfg.val_samples = 1000;
  cfg.test_per_speed = 1000;
  return cfg;
}

std::vector<double> speed_grid(double lo, double hi, std::size_t points) {
  if (points == 0) return {};
  if (points == 1) return {lo};
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i) {
    grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  return grid;
}

CsiSequence CsiDataset::sequence(std::size_t i) const {
  CsiSequence seq;
  seq.frames = frames;
  seq.antennas = antennas;
  seq.subcarriers = subcarriers;
  const auto s = sample(i);
  seq.values.assign(s.begin(), s.end());
  seq.speed_kmh = speeds_kmh[i];
  return seq;
}

CsiDataset CsiDataset::select(std::span<const std::size_t> indices) const {
  CsiDataset out;
  out.frames = frames;
  out.antennas = antennas;
  out.subcarriers = subcarriers;
  out.carrier_hz = carrier_hz;
  out.sample_interval_s = sample_interval_s;
  out.values.reserve(indices.size() * sample_stride());
  for (std::size_t i : indices) {
    if (i >= samples()) throw ConfigError("dataset select: index " + std::to_string(i) + " out of range");
    out.speeds_kmh.push_back(speeds_kmh[i]);
    const auto s = sample(i);
    out.values.insert(out.values.end(), s.begin(), s.end());
  }
  return out;
}

CsiDataset build_dataset(const DatasetConfig& cfg, Split split, std::uint64_t seed) {
  cfg.validate();
  const std::size_t n = cfg.samples(split);
  CsiDataset ds;
  ds.frames = static_cast<std::uint32_t>(cfg.frames());
  ds.antennas = static_cast<std::uint32_t>(cfg.channel.geometry.antennas());
  ds.subcarriers = static_cast<std::uint32_t>(cfg.channel.subcarriers);
  ds.carrier_hz = cfg.channel.carrier_hz;
  ds.sample_interval_s = cfg.channel.sample_interval_s;
  ds.speeds_kmh.resize(n);
  ds.values.resize(n * ds.sample_stride());
  const auto grid = speed_grid(cfg.speed_min_kmh, cfg.speed_max_kmh, cfg.test_speed_points);

  parallel_for(n, [&](std::size_t i) {
    auto rng = num::Rng::derive(seed, {static_cast<std::uint64_t>(split), i});
    ChannelConfig ch = cfg.channel;
    ch.speed_kmh = split == Split::test ? grid[i / cfg.test_per_speed]
                                        : rng.uniform(cfg.speed_min_kmh, cfg.speed_max_kmh);
    const auto seq = generate_sequence(ch, rng, cfg.frames());
    ds.speeds_kmh[i] = ch.speed_kmh;
    std::copy(seq.values.begin(), seq.values.end(), ds.values.begin() + static_cast<std::ptrdiff_t>(i * ds.sample_stride()));
  });
  return ds;
}

std::string encode_csid(const CsiDataset& ds) {
  io::ByteWriter w;
  w.bytes("CSID");
  w.u32(kCsidVersion);
  w.u32(static_cast<std::uint32_t>(ds.samples()));
  w.u32(ds.frames);
  w.u32(ds.antennas);
  w.u32(ds.subcarriers);
  w.f64(ds.carrier_hz);
  w.f64(ds.sample_interval_s);
  w.f64s(ds.speeds_kmh);
  w.buffer().reserve(w.buffer().size() + ds.values.size() * 16);
  for (const auto& v : ds.values) {
    w.f64(v.real());
    w.f64(v.imag());
  }
  return std::move(w.buffer());
}

CsiDataset decode_csid(std::string_view bytes, const std::string& context) {
  io::ByteReader r(bytes, context);
  if (r.bytes(4) != "CSID") throw IoError(context + ": not a CSID file (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kCsidVersion) throw IoError(context + ": unsupported CSID version " + std::to_string(version));
  CsiDataset ds;
  const std::uint32_t samples = r.u32();
  ds.frames = r.u32();
  ds.antennas = r.u32();
  ds.subcarriers = r.u32();
  ds.carrier_hz = r.f64();
  ds.sample_interval_s = r.f64();
  const std::size_t expected = static_cast<std::size_t>(samples) * 8 + static_cast<std::size_t>(samples) * ds.sample_stride() * 16;
  if (r.remaining() != expected) {
    throw IoError(context + ": expected " + std::to_string(expected) + " payload bytes, found " +
                  std::to_string(r.remaining()));
  }
  ds.speeds_kmh.resize(samples);
  for (auto& s : ds.speeds_kmh) s = r.f64();
  ds.values.resize(static_cast<std::size_t>(samples) * ds.sample_stride());
  for (auto& v : ds.values) {
    const double re = r.f64();
    const double im = r.f64();
    v = cd(re, im);
  }
  return ds;
}

void write_csid(const std::string& path, const CsiDataset& ds) { io::write_file_atomic(path, encode_csid(ds)); }

CsiDataset read_csid(const std::string& path) { return decode_csid(io::read_file(path), path); }

}  // namespace cpmamba::channel
