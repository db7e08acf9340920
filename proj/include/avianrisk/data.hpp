#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "avianrisk/geo.hpp"

// Ingestion and joining of the three source tables: telemetry fixes, outbreak
// events, and polygon layers, producing the integrated disease-movement table.

namespace avianrisk::data {

struct FixRecord {
  std::string individual_id;
  std::string species;
  std::int64_t timestamp = 0; // UTC seconds
  geo::GeoPoint point;
};

struct OutbreakEvent {
  std::string event_id;
  std::string disease;
  std::optional<std::string> admin_unit_id;
  std::optional<geo::GeoPoint> point;
  std::int64_t report_date = 0; // days since epoch
};

struct IntegratedFix {
  FixRecord fix;
  geo::TerrainClass terrain = geo::TerrainClass::ocean;
  std::optional<std::string> admin_unit_id;
  geo::CellId cell;
  bool contemporaneous_event = false;
};

struct TelemetryResult {
  std::vector<FixRecord> fixes; // sorted by individual, then time
  std::size_t duplicates_dropped = 0;
};

// CSV header: individual_id,species,timestamp,lat,lon. Rows are validated,
// deduplicated on (individual_id, timestamp) keeping the first occurrence,
// and sorted. Malformed rows raise InputError naming the line.
TelemetryResult read_telemetry(const std::string& path);

struct IntegrateConfig {
  int window_days = 14; // |report_date - fix date| <= window_days
};

// CSV header: event_id,disease,admin_unit_id,lat,lon,report_date. Events with
// only coordinates get their unit via point-in-polygon; events with neither a
// unit nor a point are rejected.
std::vector<OutbreakEvent> read_outbreaks(const std::string& path,
                                          const geo::GeoLayers& layers);

// Annotates every fix with terrain, admin unit, hex cell, and whether any
// event shares the unit within +/- window_days of the fix date.
std::vector<IntegratedFix> integrate(const std::vector<FixRecord>& fixes,
                                     const std::vector<OutbreakEvent>& events,
                                     const geo::GeoLayers& layers,
                                     const geo::GeoConfig& geo_cfg,
                                     const IntegrateConfig& cfg = {});

// Columns: individual_id,species,timestamp,lat,lon,terrain,admin_unit_id,
// cell,contemporaneous_event. Missing unit is an empty field.
void write_integrated(const std::vector<IntegratedFix>& rows,
                      const std::string& path);

} // namespace avianrisk::data
