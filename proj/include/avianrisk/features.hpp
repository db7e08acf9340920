#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "avianrisk/data.hpp"
#include "avianrisk/geo.hpp"

// Turns integrated fixes into model-ready samples: 12-hour resampled step
// grids, 30-day windows with T x 14 step features, an 18-dim context vector,
// masks, endpoint labels, and leakage-safe cohort splits.

namespace avianrisk::features {

constexpr int kContDims = 11; // x_cont columns 0..10 are continuous
constexpr int kStepDims = 14;
constexpr int kCtxDims = 18;

struct WindowConfig {
  int step_hours = 12;
  int window_days = 30;
  int T = 60;
  int stride_days = 30;
  int match_tolerance_hours = 6;
  int label_horizon_days = 14;
  int ctx_lookback_days = 90;

  void validate() const; // throws InputError on inconsistent values
};

struct ResampledStep {
  std::int64_t grid_time = 0; // seconds, regular 12-h spacing
  bool observed = false;
  // Payload below is meaningful only when observed.
  geo::GeoPoint point;
  std::int64_t fix_time = 0;
  geo::TerrainClass terrain = geo::TerrainClass::ocean;
  std::optional<std::string> admin_unit_id;
  geo::CellId cell;
};

struct StepSeries {
  std::string individual_id;
  std::string species;
  std::vector<ResampledStep> steps;
};

struct Endpoint {
  geo::GeoPoint point;
  std::int64_t date = 0; // UTC date of the endpoint fix, days since epoch
  std::optional<std::string> unit;
  geo::CellId cell;
};

struct CohortKey {
  int species_id = 0;
  std::string destination; // endpoint admin unit, or cell string when absent
  std::string year_week;   // ISO week of the endpoint date, "2021-W07"

  bool operator==(const CohortKey&) const = default;
  std::string str() const;
};

struct Window {
  std::string individual_id;
  std::string species;
  int species_id = 0;
  std::vector<std::array<double, kStepDims>> x_cont; // T rows
  std::vector<geo::CellId> cells;                    // T, value 0 = sentinel
  std::array<double, kCtxDims> ctx{};
  std::vector<std::uint8_t> pad_mask; // 1 = padded slot
  std::vector<std::uint8_t> obs_mask; // 1 = backed by a real fix
  int label = 0;
  Endpoint endpoint;
  CohortKey cohort;
  std::string split; // "", "train", "val", "test"
  bool normalized = false;
};

// Regular step grid for one individual's sorted fixes: anchored at the first
// fix truncated to the hour, each slot takes the nearest fix within the
// tolerance (ties to the earlier fix).
StepSeries resample(const std::vector<data::IntegratedFix>& fixes,
                    const WindowConfig& cfg);

struct WindowSpan {
  std::size_t start = 0;  // step index
  std::size_t n_real = 0; // steps before right-padding (<= T)
};

// Non-overlapping T-step segments; the final partial segment is kept and
// padded. Segments with no observed step are dropped.
std::vector<WindowSpan> make_windows(const StepSeries& series,
                                     const WindowConfig& cfg);

// Assembles features, masks, endpoint, and ctx for one span. Label, cohort,
// species id, and split are filled by the caller.
Window build_window(const StepSeries& series, const WindowSpan& span,
                    const WindowConfig& cfg, const geo::GeoConfig& geo_cfg);

// Events indexed for the endpoint label rule: admin-unit match when the
// endpoint has a unit, cell match otherwise.
struct EventIndex {
  std::unordered_map<std::string, std::vector<std::int64_t>> by_unit;
  std::unordered_map<std::uint64_t, std::vector<std::int64_t>> by_cell;

  static EventIndex build(const std::vector<data::OutbreakEvent>& events,
                          const geo::GeoConfig& geo_cfg);
};

int label_window(const Endpoint& endpoint, const EventIndex& events,
                 const WindowConfig& cfg);

// Stable hash of (cohort, seed) mapped to [0, 1); the basis of the split.
double cohort_unit_interval(const CohortKey& key, std::uint64_t seed);

std::string split_of(const CohortKey& key, const std::array<double, 3>& ratios,
                     std::uint64_t seed);

void assign_splits(std::vector<Window>& windows,
                   const std::array<double, 3>& ratios, std::uint64_t seed);

struct FeatureStats {
  std::array<double, kContDims> cont_mean{};
  std::array<double, kContDims> cont_std{};
  std::array<double, kCtxDims> ctx_mean{};
  std::array<double, kCtxDims> ctx_std{};
};

// Means and stds from the train split only; observed step rows only for the
// continuous columns. Stds floored at 1e-6.
FeatureStats fit_stats(const std::vector<Window>& train_windows);

// Z-scores continuous columns and ctx in place, then re-zeroes masked rows.
// Refuses to run twice on the same window.
void apply_stats(Window& w, const FeatureStats& stats);

std::string stats_to_json(const FeatureStats& stats);
FeatureStats stats_from_json(const std::string& text);
void write_stats(const FeatureStats& stats, const std::string& path);
FeatureStats read_stats(const std::string& path);

// Newline-delimited JSON window store.
void write_windows(const std::vector<Window>& windows, const std::string& path);
std::vector<Window> read_windows(const std::string& path);

struct FeaturizeResult {
  std::vector<Window> windows;
  std::vector<std::string> species_vocab; // sorted unique species names
};

// Full pipeline over an integrated table: per-individual resampling and
// windowing, labeling, species ids, cohort keys.
FeaturizeResult featurize(const std::vector<data::IntegratedFix>& fixes,
                          const std::vector<data::OutbreakEvent>& events,
                          const geo::GeoConfig& geo_cfg,
                          const WindowConfig& cfg);

} // namespace avianrisk::features
