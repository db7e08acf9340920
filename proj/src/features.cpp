#include "avianrisk/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "avianrisk/error.hpp"
#include "avianrisk/hexgrid.hpp"
#include "avianrisk/rng.hpp"
#include "avianrisk/timeutil.hpp"

namespace avianrisk::features {
namespace {

using timeutil::kSecsPerDay;
using timeutil::kSecsPerHour;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::pair<double, double> cyclic(double value, double period) {
  const double a = kTwoPi * value / period;
  return {std::sin(a), std::cos(a)};
}

double frac_hour(std::int64_t secs) {
  return timeutil::second_of_day(secs) / 3600.0;
}

int doy_of(std::int64_t secs) {
  return timeutil::day_of_year(timeutil::day_of_timestamp(secs));
}

} // namespace

void WindowConfig::validate() const {
  const auto fail = [](const std::string& msg) { throw InputError("window config: " + msg); };
  if (step_hours <= 0) fail("step_hours must be positive");
  if (window_days <= 0) fail("window_days must be positive");
  if (stride_days <= 0) fail("stride_days must be positive");
  if (label_horizon_days < 0) fail("label_horizon_days must be nonnegative");
  if (ctx_lookback_days <= 0) fail("ctx_lookback_days must be positive");
  if ((window_days * 24) % step_hours != 0)
    fail("window_days*24 must be divisible by step_hours");
  if (T != window_days * 24 / step_hours)
    fail("T must equal window_days*24/step_hours");
  if ((stride_days * 24) % step_hours != 0)
    fail("stride_days*24 must be divisible by step_hours");
  if (match_tolerance_hours < 0 || 2 * match_tolerance_hours > step_hours)
    fail("match_tolerance_hours must lie in [0, step_hours/2]");
}

StepSeries resample(const std::vector<data::IntegratedFix>& fixes,
                    const WindowConfig& cfg) {
  StepSeries series;
  if (fixes.empty()) return series;
  series.individual_id = fixes.front().fix.individual_id;
  series.species = fixes.front().fix.species;

  const std::int64_t step_secs = cfg.step_hours * kSecsPerHour;
  const std::int64_t tol_secs = cfg.match_tolerance_hours * kSecsPerHour;
  const std::int64_t t_first = fixes.front().fix.timestamp;
  const std::int64_t t_last = fixes.back().fix.timestamp;
  const std::int64_t anchor = t_first - timeutil::floor_mod(t_first, kSecsPerHour);

  // Grid long enough that its final slot reaches the last fix.
  const std::int64_t span = t_last - anchor;
  const std::int64_t n_steps = (span + step_secs - 1) / step_secs + 1;

  series.steps.resize(static_cast<std::size_t>(n_steps));
  for (std::int64_t k = 0; k < n_steps; ++k) {
    ResampledStep& step = series.steps[static_cast<std::size_t>(k)];
    step.grid_time = anchor + k * step_secs;

    // Nearest fix by |timestamp - grid_time|; the earlier fix wins ties.
    const auto it = std::lower_bound(
        fixes.begin(), fixes.end(), step.grid_time,
        [](const data::IntegratedFix& f, std::int64_t t) {
          return f.fix.timestamp < t;
        });
    const data::IntegratedFix* best = nullptr;
    std::int64_t best_dist = tol_secs + 1;
    if (it != fixes.begin()) {
      const auto& prev = *(it - 1);
      const std::int64_t d = step.grid_time - prev.fix.timestamp;
      if (d <= tol_secs) {
        best = &prev;
        best_dist = d;
      }
    }
    if (it != fixes.end()) {
      const std::int64_t d = it->fix.timestamp - step.grid_time;
      if (d <= tol_secs && d < best_dist) best = &*it;
    }
    if (best) {
      step.observed = true;
      step.point = best->fix.point;
      step.fix_time = best->fix.timestamp;
      step.terrain = best->terrain;
      step.admin_unit_id = best->admin_unit_id;
      step.cell = best->cell;
    }
  }
  return series;
}

std::vector<WindowSpan> make_windows(const StepSeries& series,
                                     const WindowConfig& cfg) {
  std::vector<WindowSpan> spans;
  const std::size_t n = series.steps.size();
  const std::size_t stride =
      static_cast<std::size_t>(cfg.stride_days) * 24 / cfg.step_hours;
  for (std::size_t start = 0; start < n; start += stride) {
    const std::size_t n_real = std::min<std::size_t>(cfg.T, n - start);
    bool any_observed = false;
    for (std::size_t i = start; i < start + n_real; ++i)
      if (series.steps[i].observed) {
        any_observed = true;
        break;
      }
    if (any_observed) spans.push_back({start, n_real});
  }
  return spans;
}

Window build_window(const StepSeries& series, const WindowSpan& span,
                    const WindowConfig& cfg, const geo::GeoConfig& geo_cfg) {
  Window w;
  w.individual_id = series.individual_id;
  w.species = series.species;
  const std::size_t T = static_cast<std::size_t>(cfg.T);
  w.x_cont.assign(T, {});
  w.cells.assign(T, geo::CellId{0});
  w.pad_mask.assign(T, 0);
  w.obs_mask.assign(T, 0);

  const ResampledStep* prev = nullptr;
  std::size_t endpoint_idx = span.start;
  for (std::size_t t = 0; t < T; ++t) {
    if (t >= span.n_real) {
      w.pad_mask[t] = 1;
      continue;
    }
    const ResampledStep& step = series.steps[span.start + t];
    if (!step.observed) continue;
    w.obs_mask[t] = 1;
    w.cells[t] = step.cell;
    endpoint_idx = span.start + t;

    auto& row = w.x_cont[t];
    const auto xyz = geo::to_unit_sphere(step.point);
    row[0] = xyz[0];
    row[1] = xyz[1];
    row[2] = xyz[2];

    if (prev) {
      const double dt_h = (step.fix_time - prev->fix_time) / 3600.0;
      if (dt_h > 0.0) {
        const double d = geo::haversine_km(prev->point, step.point, geo_cfg);
        row[3] = d;
        row[4] = geo::step_speed(d, dt_h);
        if (const auto b = geo::bearing_sin_cos(prev->point, step.point)) {
          row[5] = b->first;
          row[6] = b->second;
        }
      }
    }

    const auto [sh, ch] = cyclic(frac_hour(step.fix_time), 24.0);
    row[7] = sh;
    row[8] = ch;
    const auto [sd, cd] = cyclic(doy_of(step.fix_time), 365.25);
    row[9] = sd;
    row[10] = cd;

    row[11] = step.terrain == geo::TerrainClass::land ? 1.0 : 0.0;
    row[12] = step.terrain == geo::TerrainClass::lake ? 1.0 : 0.0;
    row[13] = step.terrain == geo::TerrainClass::ocean ? 1.0 : 0.0;
    prev = &step;
  }

  const ResampledStep& end_step = series.steps[endpoint_idx];
  w.endpoint.point = end_step.point;
  w.endpoint.date = timeutil::day_of_timestamp(end_step.fix_time);
  w.endpoint.unit = end_step.admin_unit_id;
  w.endpoint.cell = end_step.cell;

  // Context vector over the lookback history ending at the endpoint step.
  const std::int64_t horizon_start =
      end_step.grid_time - std::int64_t{cfg.ctx_lookback_days} * kSecsPerDay;
  std::vector<const ResampledStep*> hist;
  std::size_t grid_total = 0;
  for (std::size_t i = 0; i <= endpoint_idx; ++i) {
    const ResampledStep& s = series.steps[i];
    if (s.grid_time <= horizon_start) continue;
    ++grid_total;
    if (s.observed) hist.push_back(&s);
  }

  auto& ctx = w.ctx;
  if (!hist.empty()) {
    double cum = 0.0;
    std::set<std::uint64_t> cells;
    std::vector<double> speeds;
    double n_land = 0, n_lake = 0, n_ocean = 0;
    for (std::size_t i = 0; i < hist.size(); ++i) {
      cells.insert(hist[i]->cell.value);
      switch (hist[i]->terrain) {
        case geo::TerrainClass::land: n_land += 1; break;
        case geo::TerrainClass::lake: n_lake += 1; break;
        case geo::TerrainClass::ocean: n_ocean += 1; break;
      }
      if (i == 0) continue;
      const double d = geo::haversine_km(hist[i - 1]->point, hist[i]->point,
                                         geo_cfg);
      cum += d;
      const double dt_h = (hist[i]->fix_time - hist[i - 1]->fix_time) / 3600.0;
      if (dt_h > 0.0) speeds.push_back(d / dt_h);
    }
    const double net =
        geo::haversine_km(hist.front()->point, hist.back()->point, geo_cfg);
    ctx[0] = cum;
    ctx[1] = net;
    ctx[2] = std::clamp(cum / std::max(net, 1.0), 1.0, 50.0);
    ctx[3] = static_cast<double>(cells.size());
    if (!speeds.empty()) {
      double sum = 0.0, max_v = 0.0;
      for (const double v : speeds) {
        sum += v;
        max_v = std::max(max_v, v);
      }
      const double mean = sum / static_cast<double>(speeds.size());
      double var = 0.0;
      for (const double v : speeds) var += (v - mean) * (v - mean);
      var /= static_cast<double>(speeds.size());
      ctx[4] = mean;
      ctx[5] = max_v;
      ctx[6] = std::sqrt(var);
    }
    ctx[7] = static_cast<double>(hist.size()) / static_cast<double>(grid_total);
    ctx[8] = (hist.back()->fix_time - hist.front()->fix_time) /
             static_cast<double>(kSecsPerDay);
    const auto [s9, c9] = cyclic(doy_of(hist.front()->fix_time), 365.25);
    ctx[9] = s9;
    ctx[10] = c9;
    const auto [s11, c11] = cyclic(doy_of(end_step.fix_time), 365.25);
    ctx[11] = s11;
    ctx[12] = c11;
    const auto [s13, c13] = cyclic(frac_hour(end_step.fix_time), 24.0);
    ctx[13] = s13;
    ctx[14] = c13;
    const double n_obs = static_cast<double>(hist.size());
    ctx[15] = n_land / n_obs;
    ctx[16] = n_lake / n_obs;
    ctx[17] = n_ocean / n_obs;
  }
  return w;
}

EventIndex EventIndex::build(const std::vector<data::OutbreakEvent>& events,
                             const geo::GeoConfig& geo_cfg) {
  EventIndex idx;
  for (const auto& ev : events) {
    if (ev.admin_unit_id) idx.by_unit[*ev.admin_unit_id].push_back(ev.report_date);
    if (ev.point)
      idx.by_cell[geo::geocell(*ev.point, geo_cfg).value].push_back(
          ev.report_date);
  }
  for (auto& [unit, dates] : idx.by_unit) std::sort(dates.begin(), dates.end());
  for (auto& [cell, dates] : idx.by_cell) std::sort(dates.begin(), dates.end());
  return idx;
}

namespace {

bool any_date_in(const std::vector<std::int64_t>& sorted_dates,
                 std::int64_t lo, std::int64_t hi) {
  const auto it = std::lower_bound(sorted_dates.begin(), sorted_dates.end(), lo);
  return it != sorted_dates.end() && *it <= hi;
}

} // namespace

int label_window(const Endpoint& endpoint, const EventIndex& events,
                 const WindowConfig& cfg) {
  const std::int64_t lo = endpoint.date;
  const std::int64_t hi = endpoint.date + cfg.label_horizon_days;
  if (endpoint.unit) {
    const auto it = events.by_unit.find(*endpoint.unit);
    return it != events.by_unit.end() && any_date_in(it->second, lo, hi) ? 1 : 0;
  }
  const auto it = events.by_cell.find(endpoint.cell.value);
  return it != events.by_cell.end() && any_date_in(it->second, lo, hi) ? 1 : 0;
}

std::string CohortKey::str() const {
  return std::to_string(species_id) + "|" + destination + "|" + year_week;
}

double cohort_unit_interval(const CohortKey& key, std::uint64_t seed) {
  const std::uint64_t h = rng::mix(rng::fnv1a(key.str()), seed);
  return rng::to_unit_interval(h);
}

std::string split_of(const CohortKey& key, const std::array<double, 3>& ratios,
                     std::uint64_t seed) {
  const double u = cohort_unit_interval(key, seed);
  if (u < ratios[0]) return "train";
  if (u < ratios[0] + ratios[1]) return "val";
  return "test";
}

void assign_splits(std::vector<Window>& windows,
                   const std::array<double, 3>& ratios, std::uint64_t seed) {
  for (auto& w : windows) w.split = split_of(w.cohort, ratios, seed);
}

FeatureStats fit_stats(const std::vector<Window>& train_windows) {
  if (train_windows.empty())
    throw InputError("cannot fit feature statistics on an empty train split");

  FeatureStats stats;
  std::array<double, kContDims> sum{}, sumsq{};
  double n_rows = 0.0;
  std::array<double, kCtxDims> csum{}, csumsq{};
  for (const auto& w : train_windows) {
    for (std::size_t t = 0; t < w.obs_mask.size(); ++t) {
      if (!w.obs_mask[t]) continue;
      n_rows += 1.0;
      for (int c = 0; c < kContDims; ++c) {
        sum[c] += w.x_cont[t][c];
        sumsq[c] += w.x_cont[t][c] * w.x_cont[t][c];
      }
    }
    for (int c = 0; c < kCtxDims; ++c) {
      csum[c] += w.ctx[c];
      csumsq[c] += w.ctx[c] * w.ctx[c];
    }
  }
  if (n_rows == 0.0)
    throw InputError("train split has no observed steps");

  const double n_win = static_cast<double>(train_windows.size());
  for (int c = 0; c < kContDims; ++c) {
    stats.cont_mean[c] = sum[c] / n_rows;
    const double var = sumsq[c] / n_rows - stats.cont_mean[c] * stats.cont_mean[c];
    stats.cont_std[c] = std::max(std::sqrt(std::max(var, 0.0)), 1e-6);
  }
  for (int c = 0; c < kCtxDims; ++c) {
    stats.ctx_mean[c] = csum[c] / n_win;
    const double var = csumsq[c] / n_win - stats.ctx_mean[c] * stats.ctx_mean[c];
    stats.ctx_std[c] = std::max(std::sqrt(std::max(var, 0.0)), 1e-6);
  }
  return stats;
}

void apply_stats(Window& w, const FeatureStats& stats) {
  if (w.normalized)
    throw InputError("window is already normalized");
  for (std::size_t t = 0; t < w.x_cont.size(); ++t) {
    for (int c = 0; c < kContDims; ++c)
      w.x_cont[t][c] = (w.x_cont[t][c] - stats.cont_mean[c]) / stats.cont_std[c];
    if (!w.obs_mask[t]) w.x_cont[t].fill(0.0);
  }
  for (int c = 0; c < kCtxDims; ++c)
    w.ctx[c] = (w.ctx[c] - stats.ctx_mean[c]) / stats.ctx_std[c];
  w.normalized = true;
}

namespace {

constexpr int kStatsSchemaVersion = 1;

nlohmann::ordered_json stats_json(const FeatureStats& s) {
  nlohmann::ordered_json j;
  j["schema_version"] = kStatsSchemaVersion;
  j["cont_mean"] = s.cont_mean;
  j["cont_std"] = s.cont_std;
  j["ctx_mean"] = s.ctx_mean;
  j["ctx_std"] = s.ctx_std;
  return j;
}

template <std::size_t N>
void load_array(const nlohmann::json& j, const char* key,
                std::array<double, N>& out) {
  const auto& arr = j.at(key);
  if (!arr.is_array() || arr.size() != N)
    throw InputError(std::string("feature stats: bad ") + key);
  for (std::size_t i = 0; i < N; ++i) out[i] = arr[i].get<double>();
}

} // namespace

std::string stats_to_json(const FeatureStats& stats) {
  return stats_json(stats).dump(2);
}

FeatureStats stats_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("feature stats: invalid JSON: ") + e.what());
  }
  if (j.value("schema_version", -1) != kStatsSchemaVersion)
    throw InputError("feature stats: unsupported schema_version");
  FeatureStats s;
  load_array(j, "cont_mean", s.cont_mean);
  load_array(j, "cont_std", s.cont_std);
  load_array(j, "ctx_mean", s.ctx_mean);
  load_array(j, "ctx_std", s.ctx_std);
  return s;
}

void write_stats(const FeatureStats& stats, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError(path + ": cannot open file for writing");
  out << stats_to_json(stats) << '\n';
  out.close();
  if (out.fail()) throw InputError(path + ": write failed");
}

FeatureStats read_stats(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(path + ": cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return stats_from_json(buf.str());
}

namespace {

nlohmann::ordered_json window_to_json(const Window& w) {
  nlohmann::ordered_json j;
  j["individual_id"] = w.individual_id;
  j["species"] = w.species;
  j["species_id"] = w.species_id;
  nlohmann::ordered_json ep;
  ep["lat"] = w.endpoint.point.lat_deg;
  ep["lon"] = w.endpoint.point.lon_deg;
  ep["date"] = timeutil::format_date(w.endpoint.date);
  if (w.endpoint.unit) ep["unit"] = *w.endpoint.unit;
  else ep["unit"] = nullptr;
  ep["cell"] = hexgrid::cell_to_string(w.endpoint.cell.value);
  j["endpoint"] = std::move(ep);
  j["label"] = w.label;
  nlohmann::ordered_json co;
  co["species_id"] = w.cohort.species_id;
  co["destination"] = w.cohort.destination;
  co["year_week"] = w.cohort.year_week;
  j["cohort"] = std::move(co);
  j["split"] = w.split;
  j["x_cont"] = w.x_cont;
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (const auto& c : w.cells)
    cells.push_back(c.value ? hexgrid::cell_to_string(c.value) : "-");
  j["cells"] = std::move(cells);
  j["ctx"] = w.ctx;
  j["pad_mask"] = w.pad_mask;
  j["obs_mask"] = w.obs_mask;
  return j;
}

Window window_from_json(const nlohmann::json& j, const std::string& where) {
  try {
    Window w;
    w.individual_id = j.at("individual_id").get<std::string>();
    w.species = j.at("species").get<std::string>();
    w.species_id = j.at("species_id").get<int>();
    const auto& ep = j.at("endpoint");
    w.endpoint.point =
        geo::normalize({ep.at("lat").get<double>(), ep.at("lon").get<double>()});
    const auto date = timeutil::parse_date(ep.at("date").get<std::string>());
    if (!date) throw InputError("bad endpoint date");
    w.endpoint.date = *date;
    if (!ep.at("unit").is_null())
      w.endpoint.unit = ep.at("unit").get<std::string>();
    w.endpoint.cell = {hexgrid::cell_from_string(ep.at("cell").get<std::string>())};
    w.label = j.at("label").get<int>();
    const auto& co = j.at("cohort");
    w.cohort.species_id = co.at("species_id").get<int>();
    w.cohort.destination = co.at("destination").get<std::string>();
    w.cohort.year_week = co.at("year_week").get<std::string>();
    w.split = j.at("split").get<std::string>();

    const auto& xc = j.at("x_cont");
    const std::size_t T = xc.size();
    w.x_cont.assign(T, {});
    for (std::size_t t = 0; t < T; ++t) {
      if (xc[t].size() != kStepDims)
        throw InputError("x_cont row has wrong width");
      for (int c = 0; c < kStepDims; ++c)
        w.x_cont[t][c] = xc[t][c].get<double>();
    }
    const auto& cells = j.at("cells");
    if (cells.size() != T) throw InputError("cells length mismatch");
    w.cells.assign(T, geo::CellId{0});
    for (std::size_t t = 0; t < T; ++t) {
      const std::string s = cells[t].get<std::string>();
      if (s != "-") w.cells[t] = {hexgrid::cell_from_string(s)};
    }
    const auto& ctx = j.at("ctx");
    if (ctx.size() != kCtxDims) throw InputError("ctx length mismatch");
    for (int c = 0; c < kCtxDims; ++c) w.ctx[c] = ctx[c].get<double>();
    const auto& pm = j.at("pad_mask");
    const auto& om = j.at("obs_mask");
    if (pm.size() != T || om.size() != T)
      throw InputError("mask length mismatch");
    w.pad_mask.assign(T, 0);
    w.obs_mask.assign(T, 0);
    for (std::size_t t = 0; t < T; ++t) {
      w.pad_mask[t] = pm[t].get<int>() ? 1 : 0;
      w.obs_mask[t] = om[t].get<int>() ? 1 : 0;
    }
    return w;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(where + ": malformed window record: " + e.what());
  }
}

} // namespace

void write_windows(const std::vector<Window>& windows,
                   const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError(path + ": cannot open file for writing");
  for (const auto& w : windows) out << window_to_json(w).dump() << '\n';
  out.close();
  if (out.fail()) throw InputError(path + ": write failed");
}

std::vector<Window> read_windows(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(path + ": cannot open file");
  std::vector<Window> windows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw InputError(path + ":" + std::to_string(line_no) +
                       ": invalid JSON: " + e.what());
    }
    windows.push_back(
        window_from_json(j, path + ":" + std::to_string(line_no)));
  }
  return windows;
}

FeaturizeResult featurize(const std::vector<data::IntegratedFix>& fixes,
                          const std::vector<data::OutbreakEvent>& events,
                          const geo::GeoConfig& geo_cfg,
                          const WindowConfig& cfg) {
  cfg.validate();
  FeaturizeResult result;

  std::set<std::string> species_set;
  for (const auto& f : fixes) species_set.insert(f.fix.species);
  result.species_vocab.assign(species_set.begin(), species_set.end());
  std::unordered_map<std::string, int> species_id;
  for (std::size_t i = 0; i < result.species_vocab.size(); ++i)
    species_id[result.species_vocab[i]] = static_cast<int>(i);

  const EventIndex event_index = EventIndex::build(events, geo_cfg);

  std::size_t begin = 0;
  while (begin < fixes.size()) {
    std::size_t end = begin + 1;
    while (end < fixes.size() &&
           fixes[end].fix.individual_id == fixes[begin].fix.individual_id)
      ++end;
    const std::vector<data::IntegratedFix> individual(fixes.begin() + begin,
                                                      fixes.begin() + end);
    const StepSeries series = resample(individual, cfg);
    for (const WindowSpan& span : make_windows(series, cfg)) {
      Window w = build_window(series, span, cfg, geo_cfg);
      w.species_id = species_id.at(w.species);
      w.label = label_window(w.endpoint, event_index, cfg);
      w.cohort.species_id = w.species_id;
      w.cohort.destination =
          w.endpoint.unit ? *w.endpoint.unit
                          : hexgrid::cell_to_string(w.endpoint.cell.value);
      const auto iw = timeutil::iso_week(w.endpoint.date);
      char buf[16];
      std::snprintf(buf, sizeof buf, "%04d-W%02d", iw.year, iw.week);
      w.cohort.year_week = buf;
      result.windows.push_back(std::move(w));
    }
    begin = end;
  }
  return result;
}

} // namespace avianrisk::features
