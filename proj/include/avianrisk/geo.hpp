#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

// Geodesic and geospatial primitives: sphere mapping, great-circle distance,
// bearing, hex-cell indexing, polygon containment, terrain and admin lookup.
// Everything here is a pure function over immutable inputs.

namespace avianrisk::geo {

struct GeoPoint {
  double lat_deg = 0.0; // [-90, 90]
  double lon_deg = 0.0; // (-180, 180]

  bool operator==(const GeoPoint&) const = default;
};

// Wraps longitude into (-180, 180]; throws InputError when |lat| > 90.
GeoPoint normalize(GeoPoint p);

struct GeoConfig {
  double earth_radius_km = 6371.0088; // IUGG mean radius
  int cell_resolution = 4;
};

struct CellId {
  std::uint64_t value = 0;

  auto operator<=>(const CellId&) const = default;
};

enum class TerrainClass { land, lake, ocean };

const char* terrain_name(TerrainClass t);
std::optional<TerrainClass> terrain_from_name(std::string_view name);

// A closed ring: first vertex equals the last, at least 4 vertices.
using Ring = std::vector<GeoPoint>;

struct Polygon {
  Ring outer;
  std::vector<Ring> holes;
};

struct AdminPolygon {
  std::string unit_id;
  int level = 1;
  Polygon polygon;
};

struct GeoLayers {
  std::vector<Polygon> land;
  std::vector<Polygon> lakes;
  std::vector<AdminPolygon> admin; // kept sorted by unit_id
};

std::array<double, 3> to_unit_sphere(const GeoPoint& p);

double haversine_km(const GeoPoint& a, const GeoPoint& b, const GeoConfig& cfg);

// Throws InputError when dt_hours <= 0.
double step_speed(double d_km, double dt_hours);

// Initial great-circle bearing from a to b, clockwise from north, as
// (sin, cos). Empty when the points coincide after normalization; the
// caller decides what to substitute.
std::optional<std::pair<double, double>> bearing_sin_cos(const GeoPoint& a,
                                                         const GeoPoint& b);

CellId geocell(const GeoPoint& p, const GeoConfig& cfg);

// Even-odd (ray casting) containment; points inside a hole are outside.
bool point_in_polygon(const GeoPoint& p, const Polygon& poly);

// Lake polygons sit on top of land, so lake wins; anything else is ocean.
TerrainClass classify_terrain(const GeoPoint& p, const GeoLayers& layers);

// First containing level-1 unit in unit_id order (so overlaps resolve to the
// smallest id); empty over open ocean.
std::optional<std::string> assign_admin_unit(const GeoPoint& p,
                                             const GeoLayers& layers);

// Reads land.geojson, lakes.geojson, admin.geojson from a directory.
// Admin features must carry properties unit_id (string) and level (integer).
GeoLayers load_layers(const std::string& dir);

Polygon validate_polygon(Polygon poly);

} // namespace avianrisk::geo
