#include "avianrisk/data.hpp"

#include <algorithm>
#include <charconv>
#include <unordered_map>
#include <unordered_set>

#include "avianrisk/csvio.hpp"
#include "avianrisk/error.hpp"
#include "avianrisk/hexgrid.hpp"
#include "avianrisk/timeutil.hpp"

namespace avianrisk::data {
namespace {

[[noreturn]] void row_error(const std::string& path, std::size_t line,
                            const std::string& what) {
  throw InputError(path + ":" + std::to_string(line) + ": " + what);
}

std::optional<double> parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    return std::nullopt;
  return v;
}

void require_header(const csvio::Table& table,
                    const std::vector<std::string>& expected,
                    const std::string& path) {
  if (table.header != expected) {
    std::string want;
    for (std::size_t i = 0; i < expected.size(); ++i)
      want += (i ? "," : "") + expected[i];
    throw InputError(path + ": expected header \"" + want + "\"");
  }
}

} // namespace

TelemetryResult read_telemetry(const std::string& path) {
  const csvio::Table table = csvio::read_file(path);
  require_header(table, {"individual_id", "species", "timestamp", "lat", "lon"},
                 path);

  TelemetryResult result;
  result.fixes.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    if (row.fields.size() != 5)
      row_error(path, row.line, "expected 5 fields, got " +
                                    std::to_string(row.fields.size()));
    FixRecord rec;
    rec.individual_id = row.fields[0];
    rec.species = row.fields[1];
    if (rec.individual_id.empty()) row_error(path, row.line, "empty individual_id");
    if (rec.species.empty()) row_error(path, row.line, "empty species");
    const auto ts = timeutil::parse_timestamp(row.fields[2]);
    if (!ts)
      row_error(path, row.line, "bad timestamp \"" + row.fields[2] + "\"");
    rec.timestamp = *ts;
    const auto lat = parse_double(row.fields[3]);
    const auto lon = parse_double(row.fields[4]);
    if (!lat || !lon) row_error(path, row.line, "bad coordinate");
    try {
      rec.point = geo::normalize({*lat, *lon});
    } catch (const InputError& e) {
      row_error(path, row.line, e.what());
    }
    result.fixes.push_back(std::move(rec));
  }

  std::stable_sort(result.fixes.begin(), result.fixes.end(),
                   [](const FixRecord& a, const FixRecord& b) {
                     if (a.individual_id != b.individual_id)
                       return a.individual_id < b.individual_id;
                     return a.timestamp < b.timestamp;
                   });

  // Keep the first row of each duplicate (individual, timestamp) run; the
  // stable sort preserved input order inside runs.
  std::vector<FixRecord> deduped;
  deduped.reserve(result.fixes.size());
  for (auto& rec : result.fixes) {
    if (!deduped.empty() &&
        deduped.back().individual_id == rec.individual_id &&
        deduped.back().timestamp == rec.timestamp) {
      ++result.duplicates_dropped;
      continue;
    }
    deduped.push_back(std::move(rec));
  }
  result.fixes = std::move(deduped);
  return result;
}

std::vector<OutbreakEvent> read_outbreaks(const std::string& path,
                                          const geo::GeoLayers& layers) {
  const csvio::Table table = csvio::read_file(path);
  require_header(
      table, {"event_id", "disease", "admin_unit_id", "lat", "lon", "report_date"},
      path);

  std::vector<OutbreakEvent> events;
  events.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    if (row.fields.size() != 6)
      row_error(path, row.line, "expected 6 fields, got " +
                                    std::to_string(row.fields.size()));
    OutbreakEvent ev;
    ev.event_id = row.fields[0];
    ev.disease = row.fields[1];
    if (!row.fields[2].empty()) ev.admin_unit_id = row.fields[2];

    const bool has_lat = !row.fields[3].empty();
    const bool has_lon = !row.fields[4].empty();
    if (has_lat != has_lon)
      row_error(path, row.line, "lat/lon must be both present or both empty");
    if (has_lat) {
      const auto lat = parse_double(row.fields[3]);
      const auto lon = parse_double(row.fields[4]);
      if (!lat || !lon) row_error(path, row.line, "bad coordinate");
      try {
        ev.point = geo::normalize({*lat, *lon});
      } catch (const InputError& e) {
        row_error(path, row.line, e.what());
      }
    }
    if (!ev.admin_unit_id && !ev.point)
      row_error(path, row.line,
                "event has neither an admin unit nor coordinates");

    const auto date = timeutil::parse_date(row.fields[5]);
    if (!date)
      row_error(path, row.line, "bad report_date \"" + row.fields[5] + "\"");
    ev.report_date = *date;

    // Locate point-only events so the date join can use their unit.
    if (!ev.admin_unit_id && ev.point)
      ev.admin_unit_id = geo::assign_admin_unit(*ev.point, layers);

    events.push_back(std::move(ev));
  }
  return events;
}

std::vector<IntegratedFix> integrate(const std::vector<FixRecord>& fixes,
                                     const std::vector<OutbreakEvent>& events,
                                     const geo::GeoLayers& layers,
                                     const geo::GeoConfig& geo_cfg,
                                     const IntegrateConfig& cfg) {
  // Per-unit sorted date index makes the +/- window check a binary search.
  std::unordered_map<std::string, std::vector<std::int64_t>> unit_dates;
  for (const auto& ev : events)
    if (ev.admin_unit_id) unit_dates[*ev.admin_unit_id].push_back(ev.report_date);
  for (auto& [unit, dates] : unit_dates) std::sort(dates.begin(), dates.end());

  std::vector<IntegratedFix> out;
  out.reserve(fixes.size());
  for (const auto& fix : fixes) {
    IntegratedFix row;
    row.fix = fix;
    row.terrain = geo::classify_terrain(fix.point, layers);
    row.admin_unit_id = geo::assign_admin_unit(fix.point, layers);
    row.cell = geo::geocell(fix.point, geo_cfg);
    if (row.admin_unit_id) {
      const auto it = unit_dates.find(*row.admin_unit_id);
      if (it != unit_dates.end()) {
        const std::int64_t day = timeutil::day_of_timestamp(fix.timestamp);
        const auto lo = std::lower_bound(it->second.begin(), it->second.end(),
                                         day - cfg.window_days);
        row.contemporaneous_event =
            lo != it->second.end() && *lo <= day + cfg.window_days;
      }
    }
    out.push_back(std::move(row));
  }
  return out;
}

void write_integrated(const std::vector<IntegratedFix>& rows,
                      const std::string& path) {
  csvio::Writer w(path);
  w.write_row({"individual_id", "species", "timestamp", "lat", "lon", "terrain",
               "admin_unit_id", "cell", "contemporaneous_event"});
  for (const auto& row : rows) {
    w.write_row({row.fix.individual_id, row.fix.species,
                 timeutil::format_timestamp(row.fix.timestamp),
                 csvio::format_double(row.fix.point.lat_deg),
                 csvio::format_double(row.fix.point.lon_deg),
                 geo::terrain_name(row.terrain),
                 row.admin_unit_id.value_or(""),
                 hexgrid::cell_to_string(row.cell.value),
                 row.contemporaneous_event ? "1" : "0"});
  }
  w.close();
}

} // namespace avianrisk::data
