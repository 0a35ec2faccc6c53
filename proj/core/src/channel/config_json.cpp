#include "cpmamba/channel/config_json.hpp"

#include "cpmamba/json_fields.hpp"

namespace cpmamba::channel {

using nlohmann::json;
using json_fields::read;

json to_json(const ChannelConfig& c) {
  return json{{"carrier_hz", c.carrier_hz},
              {"subcarriers", c.subcarriers},
              {"subcarrier_spacing_hz", c.subcarrier_spacing_hz},
              {"paths", c.paths},
              {"speed_kmh", c.speed_kmh},
              {"sample_interval_s", c.sample_interval_s},
              {"geometry", {{"n_h", c.geometry.n_h}, {"n_v", c.geometry.n_v}, {"d_x", c.geometry.d_x}, {"d_z", c.geometry.d_z}}},
              {"delay_min_s", c.delay_min_s},
              {"delay_max_s", c.delay_max_s},
              {"rms_delay_s", c.rms_delay_s},
              {"los", c.los},
              {"rician_k", c.rician_k}};
}

json to_json(const DatasetConfig& d) {
  return json{{"channel", to_json(d.channel)},
              {"history", d.history},
              {"horizon", d.horizon},
              {"train_samples", d.train_samples},
              {"val_samples", d.val_samples},
              {"test_per_speed", d.test_per_speed},
              {"speed_min_kmh", d.speed_min_kmh},
              {"speed_max_kmh", d.speed_max_kmh},
              {"test_speed_points", d.test_speed_points}};
}

ChannelConfig channel_config_from_json(const json& j, const ChannelConfig* base, const std::string& prefix) {
  json_fields::reject_unknown(j, prefix,
                              {"carrier_hz", "subcarriers", "subcarrier_spacing_hz", "paths", "speed_kmh",
                               "sample_interval_s", "geometry", "delay_min_s", "delay_max_s", "rms_delay_s", "los",
                               "rician_k"});
  ChannelConfig c = base ? *base : ChannelConfig{};
  const bool req = base == nullptr;
  read(j, prefix, "carrier_hz", c.carrier_hz, req);
  read(j, prefix, "subcarriers", c.subcarriers, req);
  read(j, prefix, "subcarrier_spacing_hz", c.subcarrier_spacing_hz, req);
  read(j, prefix, "paths", c.paths, req);
  // Dataset generation overrides the speed per sample, so it is never required.
  read(j, prefix, "speed_kmh", c.speed_kmh, false);
  read(j, prefix, "sample_interval_s", c.sample_interval_s, req);
  read(j, prefix, "delay_min_s", c.delay_min_s, req);
  read(j, prefix, "delay_max_s", c.delay_max_s, req);
  read(j, prefix, "rms_delay_s", c.rms_delay_s, req);
  read(j, prefix, "los", c.los, req);
  read(j, prefix, "rician_k", c.rician_k, req);
  const std::string gp = prefix + ".geometry";
  if (auto it = j.find("geometry"); it != j.end()) {
    json_fields::reject_unknown(*it, gp, {"n_h", "n_v", "d_x", "d_z"});
    read(*it, gp, "n_h", c.geometry.n_h, req);
    read(*it, gp, "n_v", c.geometry.n_v, req);
    read(*it, gp, "d_x", c.geometry.d_x, req);
    read(*it, gp, "d_z", c.geometry.d_z, req);
  } else if (req) {
    throw ConfigError("missing config field '" + gp + "'");
  }
  c.validate();
  return c;
}

DatasetConfig dataset_config_from_json(const json& j, const DatasetConfig* base) {
  json_fields::reject_unknown(j, "",
                              {"channel", "history", "horizon", "train_samples", "val_samples", "test_per_speed",
                               "speed_min_kmh", "speed_max_kmh", "test_speed_points"});
  DatasetConfig d = base ? *base : DatasetConfig{};
  const bool req = base == nullptr;
  if (auto it = j.find("channel"); it != j.end()) {
    d.channel = channel_config_from_json(*it, base ? &base->channel : nullptr, "channel");
  } else if (req) {
    throw ConfigError("missing config field 'channel'");
  }
  read(j, "", "history", d.history, req);
  read(j, "", "horizon", d.horizon, req);
  read(j, "", "train_samples", d.train_samples, req);
  read(j, "", "val_samples", d.val_samples, req);
  read(j, "", "test_per_speed", d.test_per_speed, req);
  read(j, "", "speed_min_kmh", d.speed_min_kmh, req);
  read(j, "", "speed_max_kmh", d.speed_max_kmh, req);
  read(j, "", "test_speed_points", d.test_speed_points, req);
  d.validate();
  return d;
}

}  // namespace cpmamba::channel
