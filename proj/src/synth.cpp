#include "avianrisk/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <tuple>

#include <json.hpp>

#include "avianrisk/csvio.hpp"
#include "avianrisk/error.hpp"
#include "avianrisk/rng.hpp"
#include "avianrisk/timeutil.hpp"

namespace avianrisk::synth {
namespace {

// Migration calendar (day of year): birds head north from kNorthboundDoy,
// are settled on the northern grounds by kArrivalDoy, and turn south at
// kSouthboundDoy. The outbreak wave covers the back fraction of the northern
// residence period.
constexpr int kNorthboundDoy = 75;
constexpr int kArrivalDoy = 110;
constexpr int kSouthboundDoy = 285;
constexpr double kWaveFraction = 0.75;

// Correlated-random-walk tuning, degrees per nominal step.
constexpr double kMigrationSpeed = 0.38;
constexpr double kHomingRadius = 1.0;
constexpr double kHomingGain = 0.15;
constexpr double kVelocityMemory = 0.6;
constexpr double kStepNoise = 0.055;
constexpr double kSpawnSpread = 0.4;
constexpr double kEdgeMargin = 0.15;

double round6(double x) { return std::round(x * 1e6) / 1e6; }

struct Rect {
  double lat_lo, lat_hi, lon_lo, lon_hi;
};

// Window-level probabilities -> per-week rate. A 15-day label horizon always
// touches exactly three ISO weeks, so a window-level probability p needs a
// weekly rate q with (1-q)^3 = 1-p.
double weekly_rate(double p) { return 1.0 - std::cbrt(1.0 - p); }

struct SignalPlan {
  double p_on = 0.0;   // window-level, risk unit inside the wave
  double p_off = 0.0;  // window-level, risk unit outside the wave
  double q_on = 0.0, q_off = 0.0, q_cold = 0.0;
  int wave_start_doy = 0, wave_end_doy = 0;
};

// The per-week rate in risk units alternates between a high in-wave level and
// a low off-wave level whose duty-cycle average equals p_hot over the
// northern residence period, which is when windows actually end there. When
// the split is infeasible (p_hot close to p_cold, including the null
// control's p_hot == p_cold) the schedule is flat.
SignalPlan plan_signal(double p_hot, double p_cold) {
  SignalPlan plan;
  plan.p_on = 1.0 - std::pow(1.0 - p_hot, 6.0);
  plan.p_off = (p_hot - kWaveFraction * plan.p_on) / (1.0 - kWaveFraction);
  if (plan.p_off < 0.0 || p_hot <= p_cold) {
    plan.p_on = p_hot;
    plan.p_off = p_hot;
  }
  plan.q_on = weekly_rate(plan.p_on);
  plan.q_off = weekly_rate(plan.p_off);
  plan.q_cold = weekly_rate(p_cold);
  const int residence = kSouthboundDoy - kArrivalDoy;
  plan.wave_start_doy =
      kSouthboundDoy - static_cast<int>(std::lround(kWaveFraction * residence));
  plan.wave_end_doy = kSouthboundDoy;
  return plan;
}

nlohmann::ordered_json polygon_feature(const Rect& r,
                                       nlohmann::ordered_json properties) {
  nlohmann::ordered_json ring = nlohmann::ordered_json::array();
  ring.push_back({r.lon_lo, r.lat_lo});
  ring.push_back({r.lon_hi, r.lat_lo});
  ring.push_back({r.lon_hi, r.lat_hi});
  ring.push_back({r.lon_lo, r.lat_hi});
  ring.push_back({r.lon_lo, r.lat_lo});
  nlohmann::ordered_json feature;
  feature["type"] = "Feature";
  feature["properties"] = std::move(properties);
  feature["geometry"] = {{"type", "Polygon"},
                         {"coordinates", nlohmann::ordered_json::array({ring})}};
  return feature;
}

void write_collection(const std::string& path,
                      nlohmann::ordered_json features) {
  nlohmann::ordered_json doc;
  doc["type"] = "FeatureCollection";
  doc["features"] = std::move(features);
  std::ofstream out(path);
  if (!out) throw InputError(path + ": cannot open file for writing");
  out << doc.dump(2) << '\n';
  out.close();
  if (out.fail()) throw InputError(path + ": write failed");
}

} // namespace

std::string unit_id(int row, int col) {
  return "U" + std::to_string(row) + "_" + std::to_string(col);
}

SynthConfig null_config(SynthConfig cfg) {
  cfg.p_hot = cfg.p_cold;
  return cfg;
}

void SynthConfig::validate() const {
  const auto fail = [](const std::string& msg) {
    throw InputError("synth config: " + msg);
  };
  if (n_individuals < 1 || n_individuals > 999)
    fail("n_individuals must be in [1, 999]");
  if (n_species < 1 || n_species > 99) fail("n_species must be in [1, 99]");
  if (days < 31) fail("days must cover at least one full window (31)");
  if (fix_interval_hours < 1 || 24 % fix_interval_hours != 0)
    fail("fix_interval_hours must divide 24");
  if (jitter_minutes < 0 || 2 * jitter_minutes >= fix_interval_hours * 60)
    fail("jitter must stay below half the fix interval");
  if (lattice_rows < 2 || lattice_cols < 1) fail("lattice needs at least 2x1 units");
  if (!(unit_lat_deg > 0.0) || !(unit_lon_deg > 0.0))
    fail("unit extents must be positive");
  if (lattice_rows * unit_lat_deg > 30.0 || lattice_cols * unit_lon_deg > 30.0)
    fail("lattice extent must stay within 30 degrees per axis");
  if (origin_lat < -60.0 || origin_lat + lattice_rows * unit_lat_deg > 84.0)
    fail("lattice latitude range out of bounds");
  if (!(p_cold >= 0.0 && p_cold <= p_hot && p_hot <= 1.0))
    fail("need 0 <= p_cold <= p_hot <= 1");
  if (stagger_days < 0) fail("stagger_days must be non-negative");
  if (!timeutil::parse_date(start_date))
    fail("start_date \"" + start_date + "\" is not a YYYY-MM-DD date");
  for (const auto& u : risk_units) {
    bool found = false;
    for (int r = 0; r < lattice_rows && !found; ++r)
      for (int c = 0; c < lattice_cols && !found; ++c)
        found = u == unit_id(r, c);
    if (!found) fail("unknown risk unit \"" + u + "\"");
  }
}

SynthSummary generate(const SynthConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "layers");

  const double lat_top = cfg.origin_lat + cfg.lattice_rows * cfg.unit_lat_deg;
  const double lon_right = cfg.origin_lon + cfg.lattice_cols * cfg.unit_lon_deg;
  const auto unit_rect = [&](int row, int col) {
    return Rect{cfg.origin_lat + row * cfg.unit_lat_deg,
                cfg.origin_lat + (row + 1) * cfg.unit_lat_deg,
                cfg.origin_lon + col * cfg.unit_lon_deg,
                cfg.origin_lon + (col + 1) * cfg.unit_lon_deg};
  };

  std::vector<std::string> risk = cfg.risk_units;
  if (risk.empty())
    for (int c = 0; c < cfg.lattice_cols; ++c)
      risk.push_back(unit_id(cfg.lattice_rows - 1, c));
  const auto is_risk = [&](const std::string& u) {
    return std::find(risk.begin(), risk.end(), u) != risk.end();
  };

  std::vector<LakeRect> lakes = cfg.lakes;
  if (lakes.empty() && cfg.lattice_rows >= 3) {
    // Two stop-over lakes on the central flyways, scaled into the lattice.
    const double mid_lat = cfg.origin_lat + 0.42 * (lat_top - cfg.origin_lat);
    const double hi_lat = cfg.origin_lat + 0.58 * (lat_top - cfg.origin_lat);
    const double w = cfg.unit_lon_deg * 0.5;
    const double lon_a = cfg.origin_lon + 1.75 * cfg.unit_lon_deg;
    const double lon_b =
        cfg.origin_lon + (cfg.lattice_cols - 2.25) * cfg.unit_lon_deg;
    lakes.push_back({mid_lat, mid_lat + cfg.unit_lat_deg * 0.33, lon_a, lon_a + w});
    lakes.push_back({hi_lat, hi_lat + cfg.unit_lat_deg * 0.33, lon_b, lon_b + w});
  }

  // Layer files.
  {
    nlohmann::ordered_json land = nlohmann::ordered_json::array();
    land.push_back(polygon_feature(
        {cfg.origin_lat - 1.0, lat_top + 1.0, cfg.origin_lon - 1.0,
         lon_right + 1.0},
        nlohmann::ordered_json::object({{"name", "mainland"}})));
    write_collection((fs::path(out_dir) / "layers" / "land.geojson").string(),
                     std::move(land));

    nlohmann::ordered_json lake_features = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < lakes.size(); ++i)
      lake_features.push_back(polygon_feature(
          {lakes[i].lat_lo, lakes[i].lat_hi, lakes[i].lon_lo, lakes[i].lon_hi},
          nlohmann::ordered_json::object(
              {{"name", "lake_" + std::to_string(i)}})));
    write_collection((fs::path(out_dir) / "layers" / "lakes.geojson").string(),
                     std::move(lake_features));

    nlohmann::ordered_json admin = nlohmann::ordered_json::array();
    for (int r = 0; r < cfg.lattice_rows; ++r)
      for (int c = 0; c < cfg.lattice_cols; ++c)
        admin.push_back(polygon_feature(
            unit_rect(r, c), nlohmann::ordered_json::object(
                                 {{"unit_id", unit_id(r, c)}, {"level", 1}})));
    write_collection((fs::path(out_dir) / "layers" / "admin.geojson").string(),
                     std::move(admin));
  }

  const std::int64_t base_day = *timeutil::parse_date(cfg.start_date);
  const std::uint64_t seed_move = rng::mix(cfg.seed, 0xb1d5ULL);
  const std::uint64_t seed_events = rng::mix(cfg.seed, 0xe7e47ULL);

  // Telemetry: one correlated random walk per bird between its species'
  // southern and northern anchors.
  SynthSummary summary;
  summary.n_units =
      static_cast<std::size_t>(cfg.lattice_rows) * cfg.lattice_cols;
  const std::string telemetry_path =
      (fs::path(out_dir) / "telemetry.csv").string();
  {
    csvio::Writer out(telemetry_path);
    out.write_row({"individual_id", "species", "timestamp", "lat", "lon"});
    const int steps_per_day = 24 / cfg.fix_interval_hours;
    const int n_steps = cfg.days * steps_per_day;
    const int usable_cols = std::max(1, cfg.lattice_cols - 2);

    for (int i = 0; i < cfg.n_individuals; ++i) {
      const int s = i % cfg.n_species;
      char id_buf[16], sp_buf[16];
      std::snprintf(id_buf, sizeof id_buf, "bird_%03d", i);
      std::snprintf(sp_buf, sizeof sp_buf, "species_%02d", s);

      const int col = 1 + s % usable_cols;
      const double anchor_lon =
          cfg.origin_lon + (col + 0.5) * cfg.unit_lon_deg;
      const double south_lat = cfg.origin_lat + 0.5 * cfg.unit_lat_deg;
      const double north_lat =
          cfg.origin_lat + (cfg.lattice_rows - 0.5) * cfg.unit_lat_deg;

      rng::Rng rng(rng::mix(seed_move, static_cast<std::uint64_t>(i)));
      const int offset_days =
          cfg.stagger_days > 0
              ? static_cast<int>(rng.below(
                    static_cast<std::uint64_t>(cfg.stagger_days)))
              : 0;
      const std::int64_t start_sec =
          (base_day + offset_days) * timeutil::kSecsPerDay;

      double lat = south_lat + kSpawnSpread * rng.normal();
      double lon = anchor_lon + kSpawnSpread * rng.normal();
      double vlat = 0.0, vlon = 0.0;

      for (int k = 0; k < n_steps; ++k) {
        const std::int64_t nominal =
            start_sec + static_cast<std::int64_t>(k) *
                            cfg.fix_interval_hours * timeutil::kSecsPerHour;
        const int jitter =
            cfg.jitter_minutes > 0
                ? static_cast<int>(rng.below(
                      static_cast<std::uint64_t>(2 * cfg.jitter_minutes + 1))) -
                      cfg.jitter_minutes
                : 0;
        const std::int64_t when = nominal + std::int64_t{60} * jitter;

        const int doy =
            timeutil::day_of_year(when / timeutil::kSecsPerDay);
        const bool northward = doy >= kNorthboundDoy && doy < kSouthboundDoy;
        const double goal_lat = northward ? north_lat : south_lat;
        const double goal_lon = anchor_lon;

        const double dlat = goal_lat - lat;
        const double dlon = goal_lon - lon;
        const double dist = std::sqrt(dlat * dlat + dlon * dlon);
        double want_lat, want_lon;
        if (dist > kHomingRadius) {
          want_lat = dlat / dist * kMigrationSpeed;
          want_lon = dlon / dist * kMigrationSpeed;
        } else {
          want_lat = dlat * kHomingGain;
          want_lon = dlon * kHomingGain;
        }
        vlat = kVelocityMemory * vlat + (1.0 - kVelocityMemory) * want_lat +
               kStepNoise * rng.normal();
        vlon = kVelocityMemory * vlon + (1.0 - kVelocityMemory) * want_lon +
               kStepNoise * rng.normal();
        lat += vlat;
        lon += vlon;
        const double lat_lo = cfg.origin_lat + kEdgeMargin;
        const double lat_hi = lat_top - kEdgeMargin;
        const double lon_lo = cfg.origin_lon + kEdgeMargin;
        const double lon_hi = lon_right - kEdgeMargin;
        if (lat < lat_lo || lat > lat_hi) {
          lat = std::clamp(lat, lat_lo, lat_hi);
          vlat = 0.0;
        }
        if (lon < lon_lo || lon > lon_hi) {
          lon = std::clamp(lon, lon_lo, lon_hi);
          vlon = 0.0;
        }

        out.write_row({id_buf, sp_buf, timeutil::format_timestamp(when),
                       csvio::format_double(round6(lat)),
                       csvio::format_double(round6(lon))});
        ++summary.n_fixes;
      }
    }
    out.close();
  }

  // Outbreak events, one Bernoulli draw per (unit, ISO week). Each pair gets
  // its own sub-stream so the outcome never depends on iteration order, and
  // the telemetry stream above is untouched by the rates.
  const SignalPlan plan = plan_signal(cfg.p_hot, cfg.p_cold);
  const std::string outbreaks_path =
      (fs::path(out_dir) / "outbreaks.csv").string();
  nlohmann::ordered_json unit_weeks = nlohmann::ordered_json::array();
  {
    csvio::Writer out(outbreaks_path);
    out.write_row({"event_id", "disease", "admin_unit_id", "lat", "lon",
                   "report_date"});

    // Hits are buffered and sorted by report date before ids are assigned,
    // so EV numbering follows the calendar rather than the scan order.
    struct PendingEvent {
      std::int64_t date;
      std::string unit;
      double lat, lon;
      std::size_t manifest_idx;
    };
    std::vector<PendingEvent> pending;

    const std::int64_t span_end =
        base_day + cfg.stagger_days + cfg.days + 21;
    std::int64_t monday = base_day - (timeutil::weekday(base_day) - 1);
    for (; monday <= span_end; monday += 7) {
      const int week_doy = timeutil::day_of_year(monday + 3);
      const auto week_tag = timeutil::iso_week(monday);
      char week_buf[16];
      std::snprintf(week_buf, sizeof week_buf, "%04d-W%02d", week_tag.year,
                    week_tag.week);
      for (int r = 0; r < cfg.lattice_rows; ++r) {
        for (int c = 0; c < cfg.lattice_cols; ++c) {
          const std::string uid = unit_id(r, c);
          double q = plan.q_cold;
          if (is_risk(uid))
            q = (week_doy >= plan.wave_start_doy &&
                 week_doy <= plan.wave_end_doy)
                    ? plan.q_on
                    : plan.q_off;

          rng::Rng draw(rng::mix(seed_events, rng::fnv1a(uid),
                                 static_cast<std::uint64_t>(monday)));
          const bool hit = draw.uniform() < q;
          const int day_in_week = static_cast<int>(draw.below(7));
          const Rect rect = unit_rect(r, c);
          const double inset_lat = 0.05 * (rect.lat_hi - rect.lat_lo);
          const double inset_lon = 0.05 * (rect.lon_hi - rect.lon_lo);
          const double ev_lat = round6(
              draw.uniform(rect.lat_lo + inset_lat, rect.lat_hi - inset_lat));
          const double ev_lon = round6(
              draw.uniform(rect.lon_lo + inset_lon, rect.lon_hi - inset_lon));

          nlohmann::ordered_json row;
          row["unit"] = uid;
          row["week"] = week_buf;
          row["q"] = q;
          row["event"] = nullptr;
          unit_weeks.push_back(std::move(row));
          if (hit)
            pending.push_back({monday + day_in_week, uid, ev_lat, ev_lon,
                               unit_weeks.size() - 1});
        }
      }
    }

    std::sort(pending.begin(), pending.end(),
              [](const PendingEvent& a, const PendingEvent& b) {
                return std::tie(a.date, a.unit) < std::tie(b.date, b.unit);
              });
    int event_counter = 0;
    for (const auto& ev : pending) {
      char ev_buf[16];
      std::snprintf(ev_buf, sizeof ev_buf, "EV-%05d", event_counter++);
      out.write_row({ev_buf, "H5N1", ev.unit, csvio::format_double(ev.lat),
                     csvio::format_double(ev.lon),
                     timeutil::format_date(ev.date)});
      unit_weeks[ev.manifest_idx]["event"] = ev_buf;
      ++summary.n_events;
    }
    out.close();
  }

  // Ground-truth manifest for test assertions.
  {
    nlohmann::ordered_json m;
    m["seed"] = cfg.seed;
    m["n_individuals"] = cfg.n_individuals;
    m["n_species"] = cfg.n_species;
    m["days"] = cfg.days;
    m["fix_interval_hours"] = cfg.fix_interval_hours;
    m["jitter_minutes"] = cfg.jitter_minutes;
    m["lattice_rows"] = cfg.lattice_rows;
    m["lattice_cols"] = cfg.lattice_cols;
    m["start_date"] = cfg.start_date;
    m["stagger_days"] = cfg.stagger_days;
    m["p_hot"] = cfg.p_hot;
    m["p_cold"] = cfg.p_cold;
    m["risk_units"] = risk;
    m["window_p_in_wave"] = plan.p_on;
    m["window_p_off_wave"] = plan.p_off;
    m["wave_start_doy"] = plan.wave_start_doy;
    m["wave_end_doy"] = plan.wave_end_doy;
    m["weekly_q_in_wave"] = plan.q_on;
    m["weekly_q_off_wave"] = plan.q_off;
    m["weekly_q_cold"] = plan.q_cold;
    m["n_fixes"] = summary.n_fixes;
    m["n_events"] = summary.n_events;
    m["unit_weeks"] = std::move(unit_weeks);
    const std::string path = (fs::path(out_dir) / "manifest.json").string();
    std::ofstream out(path);
    if (!out) throw InputError(path + ": cannot open file for writing");
    out << m.dump(2) << '\n';
    out.close();
    if (out.fail()) throw InputError(path + ": write failed");
    summary.manifest_path = path;
  }

  summary.telemetry_path = telemetry_path;
  summary.outbreaks_path = outbreaks_path;
  summary.layers_dir = (fs::path(out_dir) / "layers").string();
  return summary;
}

} // namespace avianrisk::synth
