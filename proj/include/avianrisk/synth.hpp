#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace avianrisk::synth {

// Rectangular lake in plain lat/lon bounds.
struct LakeRect {
  double lat_lo = 0.0, lat_hi = 0.0;
  double lon_lo = 0.0, lon_hi = 0.0;
};

struct SynthConfig {
  std::uint64_t seed = 0;
  int n_individuals = 60;
  int n_species = 4;
  int days = 240;
  int fix_interval_hours = 6; // nominal spacing, jittered per fix
  int jitter_minutes = 120;   // uniform in [-jitter, +jitter]

  // Admin lattice: rows * cols rectangular level-1 units, row 0 at the
  // southern edge. Total extent stays under 30 degrees on each axis so
  // planar movement intuition roughly holds.
  int lattice_rows = 4;
  int lattice_cols = 6;
  double unit_lat_deg = 6.0;
  double unit_lon_deg = 4.0;
  double origin_lat = 30.0;
  double origin_lon = 0.0;
  std::vector<LakeRect> lakes; // empty = two default lakes on the flyways

  std::string start_date = "2020-03-01";
  int stagger_days = 30; // individual start offsets spread uniformly

  // Outbreak signal. Units in risk_units (empty = the whole top row) carry
  // window-level event probability p_hot for tracks ending there, everything
  // else p_cold. p_hot == p_cold produces the no-signal control.
  std::vector<std::string> risk_units;
  double p_hot = 0.8;
  double p_cold = 0.05;

  void validate() const; // throws InputError
};

struct SynthSummary {
  std::size_t n_fixes = 0;
  std::size_t n_events = 0;
  std::size_t n_units = 0;
  std::string telemetry_path;
  std::string outbreaks_path;
  std::string layers_dir;
  std::string manifest_path;
};

std::string unit_id(int row, int col);

// The control configuration: identical in every respect except that the
// risk units lose their elevated event rate.
SynthConfig null_config(SynthConfig cfg);

// Writes telemetry.csv, outbreaks.csv, layers/{land,lakes,admin}.geojson and
// manifest.json under out_dir (created if needed). Deterministic per config:
// the same seed yields byte-identical files, and changing only p_hot/p_cold
// changes outbreaks.csv and manifest.json but never the telemetry.
SynthSummary generate(const SynthConfig& cfg, const std::string& out_dir);

} // namespace avianrisk::synth
