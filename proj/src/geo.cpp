#include "avianrisk/geo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "avianrisk/error.hpp"
#include "avianrisk/hexgrid.hpp"

namespace avianrisk::geo {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

bool in_ring(double lon, double lat, const Ring& ring) {
  // Classic even-odd crossing count over ring edges. The closing edge is
  // degenerate (first vertex repeated) and contributes nothing.
  bool inside = false;
  for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
    const double xi = ring[i].lon_deg, yi = ring[i].lat_deg;
    const double xj = ring[j].lon_deg, yj = ring[j].lat_deg;
    if ((yi > lat) != (yj > lat) &&
        lon < (xj - xi) * (lat - yi) / (yj - yi) + xi)
      inside = !inside;
  }
  return inside;
}

void check_ring(const Ring& ring) {
  if (ring.size() < 4)
    throw InputError("polygon ring has fewer than 4 vertices");
  if (!(ring.front() == ring.back()))
    throw InputError("polygon ring is not closed");
}

Ring ring_from_geojson(const nlohmann::json& coords) {
  Ring ring;
  ring.reserve(coords.size());
  for (const auto& v : coords) {
    if (!v.is_array() || v.size() < 2)
      throw InputError("GeoJSON ring vertex is not a [lon, lat] pair");
    ring.push_back(normalize({v[1].get<double>(), v[0].get<double>()}));
  }
  check_ring(ring);
  return ring;
}

Polygon polygon_from_geojson(const nlohmann::json& coords) {
  Polygon poly;
  if (coords.empty()) throw InputError("GeoJSON polygon has no rings");
  poly.outer = ring_from_geojson(coords[0]);
  for (std::size_t i = 1; i < coords.size(); ++i)
    poly.holes.push_back(ring_from_geojson(coords[i]));
  return poly;
}

// Flattens Polygon and MultiPolygon geometries into a polygon list.
std::vector<Polygon> polygons_from_feature(const nlohmann::json& geometry) {
  std::vector<Polygon> out;
  const std::string type = geometry.at("type").get<std::string>();
  const auto& coords = geometry.at("coordinates");
  if (type == "Polygon") {
    out.push_back(polygon_from_geojson(coords));
  } else if (type == "MultiPolygon") {
    for (const auto& p : coords) out.push_back(polygon_from_geojson(p));
  } else {
    throw InputError("unsupported GeoJSON geometry type: " + type);
  }
  return out;
}

nlohmann::json read_feature_collection(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path + ": cannot open file");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path + ": invalid JSON: " + e.what());
  }
  if (j.value("type", "") != "FeatureCollection")
    throw InputError(path + ": expected a GeoJSON FeatureCollection");
  return j;
}

} // namespace

GeoPoint normalize(GeoPoint p) {
  if (!(p.lat_deg >= -90.0 && p.lat_deg <= 90.0))
    throw InputError("latitude out of range [-90, 90]: " +
                     std::to_string(p.lat_deg));
  double lon = std::fmod(p.lon_deg, 360.0);
  if (lon <= -180.0) lon += 360.0;
  else if (lon > 180.0) lon -= 360.0;
  p.lon_deg = lon;
  return p;
}

const char* terrain_name(TerrainClass t) {
  switch (t) {
    case TerrainClass::land: return "land";
    case TerrainClass::lake: return "lake";
    case TerrainClass::ocean: return "ocean";
  }
  return "?";
}

std::optional<TerrainClass> terrain_from_name(std::string_view name) {
  if (name == "land") return TerrainClass::land;
  if (name == "lake") return TerrainClass::lake;
  if (name == "ocean") return TerrainClass::ocean;
  return std::nullopt;
}

std::array<double, 3> to_unit_sphere(const GeoPoint& p) {
  const GeoPoint q = normalize(p);
  const double lat = q.lat_deg * kDegToRad;
  const double lon = q.lon_deg * kDegToRad;
  const double clat = std::cos(lat);
  return {clat * std::cos(lon), clat * std::sin(lon), std::sin(lat)};
}

double haversine_km(const GeoPoint& a, const GeoPoint& b,
                    const GeoConfig& cfg) {
  const GeoPoint pa = normalize(a), pb = normalize(b);
  const double la = pa.lat_deg * kDegToRad, lb = pb.lat_deg * kDegToRad;
  const double dlat = lb - la;
  const double dlon = (pb.lon_deg - pa.lon_deg) * kDegToRad;
  const double sa = std::sin(dlat / 2.0);
  const double so = std::sin(dlon / 2.0);
  const double h = sa * sa + std::cos(la) * std::cos(lb) * so * so;
  return 2.0 * cfg.earth_radius_km * std::asin(std::min(1.0, std::sqrt(h)));
}

double step_speed(double d_km, double dt_hours) {
  if (!(dt_hours > 0.0))
    throw InputError("step interval must be positive, got " +
                     std::to_string(dt_hours) + " h");
  return d_km / dt_hours;
}

std::optional<std::pair<double, double>> bearing_sin_cos(const GeoPoint& a,
                                                         const GeoPoint& b) {
  const GeoPoint pa = normalize(a), pb = normalize(b);
  if (pa == pb) return std::nullopt;
  const double la = pa.lat_deg * kDegToRad, lb = pb.lat_deg * kDegToRad;
  const double dlon = (pb.lon_deg - pa.lon_deg) * kDegToRad;
  const double y = std::sin(dlon) * std::cos(lb);
  const double x = std::cos(la) * std::sin(lb) -
                   std::sin(la) * std::cos(lb) * std::cos(dlon);
  const double theta = std::atan2(y, x);
  return std::make_pair(std::sin(theta), std::cos(theta));
}

CellId geocell(const GeoPoint& p, const GeoConfig& cfg) {
  const GeoPoint q = normalize(p);
  return {hexgrid::lat_lng_to_cell(q.lat_deg, q.lon_deg, cfg.cell_resolution)};
}

bool point_in_polygon(const GeoPoint& p, const Polygon& poly) {
  check_ring(poly.outer);
  const GeoPoint q = normalize(p);
  if (!in_ring(q.lon_deg, q.lat_deg, poly.outer)) return false;
  for (const auto& hole : poly.holes) {
    check_ring(hole);
    if (in_ring(q.lon_deg, q.lat_deg, hole)) return false;
  }
  return true;
}

TerrainClass classify_terrain(const GeoPoint& p, const GeoLayers& layers) {
  for (const auto& lake : layers.lakes)
    if (point_in_polygon(p, lake)) return TerrainClass::lake;
  for (const auto& land : layers.land)
    if (point_in_polygon(p, land)) return TerrainClass::land;
  return TerrainClass::ocean;
}

std::optional<std::string> assign_admin_unit(const GeoPoint& p,
                                             const GeoLayers& layers) {
  for (const auto& unit : layers.admin) {
    if (unit.level != 1) continue;
    if (point_in_polygon(p, unit.polygon)) return unit.unit_id;
  }
  return std::nullopt;
}

Polygon validate_polygon(Polygon poly) {
  check_ring(poly.outer);
  for (const auto& hole : poly.holes) check_ring(hole);
  return poly;
}

GeoLayers load_layers(const std::string& dir) {
  GeoLayers layers;

  const auto load_plain = [](const std::string& path) {
    std::vector<Polygon> out;
    const nlohmann::json j = read_feature_collection(path);
    for (const auto& f : j.at("features")) {
      auto polys = polygons_from_feature(f.at("geometry"));
      out.insert(out.end(), std::make_move_iterator(polys.begin()),
                 std::make_move_iterator(polys.end()));
    }
    return out;
  };

  layers.land = load_plain(dir + "/land.geojson");
  layers.lakes = load_plain(dir + "/lakes.geojson");

  const std::string admin_path = dir + "/admin.geojson";
  const nlohmann::json j = read_feature_collection(admin_path);
  for (const auto& f : j.at("features")) {
    const auto& props = f.at("properties");
    if (!props.contains("unit_id") || !props["unit_id"].is_string())
      throw InputError(admin_path + ": admin feature missing string unit_id");
    if (!props.contains("level") || !props["level"].is_number_integer())
      throw InputError(admin_path + ": admin feature missing integer level");
    for (auto& poly : polygons_from_feature(f.at("geometry")))
      layers.admin.push_back({props["unit_id"].get<std::string>(),
                              props["level"].get<int>(), std::move(poly)});
  }
  std::sort(layers.admin.begin(), layers.admin.end(),
            [](const AdminPolygon& a, const AdminPolygon& b) {
              return a.unit_id < b.unit_id;
            });
  return layers;
}

} // namespace avianrisk::geo
