#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numbers>
#include <set>

#include "avianrisk/error.hpp"
#include "avianrisk/features.hpp"
#include "avianrisk/hexgrid.hpp"
#include "avianrisk/timeutil.hpp"

using namespace avianrisk;
using features::Window;
using features::WindowConfig;

namespace {

constexpr std::int64_t kHour = 3600;

// Two-day windows of four 12-hour steps keep the fixtures small while
// exercising the same slot arithmetic as the production shape.
WindowConfig tiny_config() {
  WindowConfig cfg;
  cfg.step_hours = 12;
  cfg.window_days = 2;
  cfg.T = 4;
  cfg.stride_days = 2;
  cfg.match_tolerance_hours = 6;
  cfg.label_horizon_days = 14;
  cfg.ctx_lookback_days = 90;
  return cfg;
}

data::IntegratedFix fix_at(std::int64_t t, double lat, double lon,
                           const char* unit = "UA",
                           geo::TerrainClass terrain = geo::TerrainClass::land) {
  data::IntegratedFix f;
  f.fix = {"b1", "teal", t, {lat, lon}};
  f.terrain = terrain;
  if (unit) f.admin_unit_id = unit;
  f.cell = geo::geocell({lat, lon}, geo::GeoConfig{});
  return f;
}

} // namespace

TEST_CASE("window config validation") {
  CHECK_NOTHROW(WindowConfig{}.validate());
  WindowConfig bad = tiny_config();
  bad.T = 5;
  CHECK_THROWS_AS(bad.validate(), InputError);
  bad = tiny_config();
  bad.match_tolerance_hours = 7; // more than half the step
  CHECK_THROWS_AS(bad.validate(), InputError);
  bad = tiny_config();
  bad.step_hours = 5; // 48 h not divisible by 5
  bad.T = 10;
  CHECK_THROWS_AS(bad.validate(), InputError);
  bad = tiny_config();
  bad.stride_days = 0;
  CHECK_THROWS_AS(bad.validate(), InputError);
}

TEST_CASE("resample anchors at the first fix truncated to the hour") {
  const auto cfg = tiny_config();
  const std::int64_t base = *timeutil::parse_timestamp("2021-05-01T05:30:10Z");
  const auto series = features::resample({fix_at(base, 10.0, 10.0)}, cfg);
  REQUIRE(series.steps.size() >= 1);
  CHECK(series.steps[0].grid_time ==
        *timeutil::parse_timestamp("2021-05-01T05:00:00Z"));
  CHECK(series.steps[0].observed);
  CHECK(series.steps[0].fix_time == base);
  CHECK(series.individual_id == "b1");
  CHECK(series.species == "teal");
}

TEST_CASE("resample picks the nearest fix and breaks ties toward the past") {
  const auto cfg = tiny_config();
  const std::int64_t t0 = *timeutil::parse_timestamp("2021-05-01T00:00:00Z");
  // Slots fall at 00:00, 12:00, 24:00. The 12:00 slot sees fixes at 06:00
  // and 18:00, both exactly at the 6 h tolerance: the earlier one must win.
  const std::vector<data::IntegratedFix> fixes = {
      fix_at(t0, 10.0, 10.0),
      fix_at(t0 + 6 * kHour, 11.0, 10.0),
      fix_at(t0 + 18 * kHour, 12.0, 10.0),
  };
  const auto series = features::resample(fixes, cfg);
  REQUIRE(series.steps.size() == 3);
  CHECK(series.steps[0].fix_time == t0);
  CHECK(series.steps[1].observed);
  CHECK(series.steps[1].fix_time == t0 + 6 * kHour);
  CHECK(series.steps[1].point.lat_deg == doctest::Approx(11.0));
  CHECK(series.steps[2].observed);
  CHECK(series.steps[2].fix_time == t0 + 18 * kHour);
}

TEST_CASE("resample leaves out-of-tolerance slots unobserved") {
  const auto cfg = tiny_config();
  const std::int64_t t0 = *timeutil::parse_timestamp("2021-05-01T00:00:00Z");
  const std::vector<data::IntegratedFix> fixes = {
      fix_at(t0, 10.0, 10.0),
      fix_at(t0 + 48 * kHour, 12.0, 10.0),
  };
  const auto series = features::resample(fixes, cfg);
  REQUIRE(series.steps.size() == 5);
  CHECK(series.steps[0].observed);
  CHECK(!series.steps[1].observed);
  CHECK(!series.steps[2].observed);
  CHECK(!series.steps[3].observed);
  CHECK(series.steps[4].observed);
  CHECK(series.steps[4].grid_time == t0 + 48 * kHour);
  // A fix 6h01m away from every slot matches nothing.
  const auto lonely = features::resample(
      {fix_at(t0, 10.0, 10.0), fix_at(t0 + 12 * kHour + 6 * kHour + 60, 11.0, 10.0)},
      cfg);
  CHECK(!lonely.steps[1].observed);
}

TEST_CASE("window tiling covers the series and keeps the padded tail") {
  const auto cfg = tiny_config();
  const std::int64_t t0 = *timeutil::parse_timestamp("2021-05-01T00:00:00Z");
  std::vector<data::IntegratedFix> fixes;
  for (int k = 0; k < 10; ++k)
    fixes.push_back(fix_at(t0 + k * 12 * kHour, 10.0 + 0.1 * k, 10.0));
  const auto series = features::resample(fixes, cfg);
  REQUIRE(series.steps.size() == 10);
  const auto spans = features::make_windows(series, cfg);
  REQUIRE(spans.size() == 3);
  CHECK(spans[0].start == 0);
  CHECK(spans[0].n_real == 4);
  CHECK(spans[1].start == 4);
  CHECK(spans[1].n_real == 4);
  CHECK(spans[2].start == 8);
  CHECK(spans[2].n_real == 2); // padded tail
}

TEST_CASE("window tiling drops segments with no observed step") {
  const auto cfg = tiny_config();
  const std::int64_t t0 = *timeutil::parse_timestamp("2021-05-01T00:00:00Z");
  // Observations only in the first and third tile; the middle tile is a
  // tracking gap.
  std::vector<data::IntegratedFix> fixes;
  fixes.push_back(fix_at(t0, 10.0, 10.0));
  fixes.push_back(fix_at(t0 + 9 * 12 * kHour, 12.0, 10.0));
  const auto series = features::resample(fixes, cfg);
  REQUIRE(series.steps.size() == 10);
  const auto spans = features::make_windows(series, cfg);
  REQUIRE(spans.size() == 2);
  CHECK(spans[0].start == 0);
  CHECK(spans[1].start == 8);
}

TEST_CASE("window assembly: masks, movement features, endpoint") {
  const auto cfg = tiny_config();
  const geo::GeoConfig gcfg;
  const std::int64_t t0 = *timeutil::parse_timestamp("2021-06-10T06:00:00Z");
  // Steps: observed, observed, gap, observed; then one padded slot in a
  // 4-step window over the first tile of a 5-step series.
  std::vector<data::IntegratedFix> fixes = {
      fix_at(t0, 50.0, 10.0, "UA", geo::TerrainClass::land),
      fix_at(t0 + 12 * kHour, 50.5, 10.5, "UB", geo::TerrainClass::lake),
      fix_at(t0 + 36 * kHour, 51.5, 11.5, nullptr, geo::TerrainClass::ocean),
  };
  const auto series = features::resample(fixes, cfg);
  REQUIRE(series.steps.size() == 4);
  const auto w = features::build_window(series, {0, 4}, cfg, gcfg);

  CHECK(w.obs_mask == std::vector<std::uint8_t>{1, 1, 0, 1});
  CHECK(w.pad_mask == std::vector<std::uint8_t>{0, 0, 0, 0});
  CHECK(w.cells[2].value == 0); // sentinel at the gap

  // First observed step carries no movement features.
  CHECK(w.x_cont[0][3] == 0.0);
  CHECK(w.x_cont[0][4] == 0.0);
  const auto sphere = geo::to_unit_sphere({50.0, 10.0});
  CHECK(w.x_cont[0][0] == doctest::Approx(sphere[0]));
  CHECK(w.x_cont[0][1] == doctest::Approx(sphere[1]));
  CHECK(w.x_cont[0][2] == doctest::Approx(sphere[2]));

  // Second step: distance and speed against direct recomputation.
  const double d01 = geo::haversine_km({50.0, 10.0}, {50.5, 10.5}, gcfg);
  CHECK(w.x_cont[1][3] == doctest::Approx(d01));
  CHECK(w.x_cont[1][4] == doctest::Approx(d01 / 12.0));
  const auto b01 = geo::bearing_sin_cos({50.0, 10.0}, {50.5, 10.5});
  REQUIRE(b01.has_value());
  CHECK(w.x_cont[1][5] == doctest::Approx(b01->first));
  CHECK(w.x_cont[1][6] == doctest::Approx(b01->second));

  // The step after a gap measures from the previous observation, 24 h back.
  const double d13 = geo::haversine_km({50.5, 10.5}, {51.5, 11.5}, gcfg);
  CHECK(w.x_cont[3][3] == doctest::Approx(d13));
  CHECK(w.x_cont[3][4] == doctest::Approx(d13 / 24.0));

  // Time-of-day encoding: 06:00 is a quarter turn.
  CHECK(w.x_cont[0][7] == doctest::Approx(1.0));
  CHECK(w.x_cont[0][8] == doctest::Approx(0.0).scale(1.0));
  const double doy_angle =
      2.0 * std::numbers::pi *
      timeutil::day_of_year(timeutil::day_of_timestamp(t0)) / 365.25;
  CHECK(w.x_cont[0][9] == doctest::Approx(std::sin(doy_angle)));
  CHECK(w.x_cont[0][10] == doctest::Approx(std::cos(doy_angle)));

  // Terrain one-hots.
  CHECK(w.x_cont[0][11] == 1.0);
  CHECK(w.x_cont[1][12] == 1.0);
  CHECK(w.x_cont[3][13] == 1.0);
  CHECK(w.x_cont[2][11] + w.x_cont[2][12] + w.x_cont[2][13] == 0.0);

  // Endpoint is the last observed step.
  CHECK(w.endpoint.date == timeutil::day_of_timestamp(t0 + 36 * kHour));
  CHECK(!w.endpoint.unit.has_value());
  CHECK(w.endpoint.cell.value ==
        geo::geocell({51.5, 11.5}, gcfg).value);
  CHECK(w.endpoint.point.lat_deg == doctest::Approx(51.5));
}

TEST_CASE("padded slots are masked and empty") {
  const auto cfg = tiny_config();
  const std::int64_t t0 = *timeutil::parse_timestamp("2021-06-10T00:00:00Z");
  const auto series = features::resample({fix_at(t0, 40.0, 5.0)}, cfg);
  const auto w = features::build_window(series, {0, 1}, cfg, geo::GeoConfig{});
  CHECK(w.pad_mask == std::vector<std::uint8_t>{0, 1, 1, 1});
  CHECK(w.obs_mask == std::vector<std::uint8_t>{1, 0, 0, 0});
  for (std::size_t t = 1; t < 4; ++t) {
    CHECK(w.cells[t].value == 0);
    for (int c = 0; c < features::kStepDims; ++c) CHECK(w.x_cont[t][c] == 0.0);
  }
}

TEST_CASE("context vector: totals, fractions, and the lookback boundary") {
  auto cfg = tiny_config();
  const geo::GeoConfig gcfg;
  const std::int64_t t0 = *timeutil::parse_timestamp("2021-06-10T00:00:00Z");
  std::vector<data::IntegratedFix> fixes = {
      fix_at(t0, 50.0, 10.0, "UA", geo::TerrainClass::land),
      fix_at(t0 + 12 * kHour, 50.5, 10.5, "UA", geo::TerrainClass::lake),
      fix_at(t0 + 24 * kHour, 51.0, 11.0, "UA", geo::TerrainClass::land),
      fix_at(t0 + 36 * kHour, 51.5, 11.5, "UA", geo::TerrainClass::land),
  };
  const auto series = features::resample(fixes, cfg);
  const auto w = features::build_window(series, {0, 4}, cfg, gcfg);

  const double leg1 = geo::haversine_km({50.0, 10.0}, {50.5, 10.5}, gcfg);
  const double leg2 = geo::haversine_km({50.5, 10.5}, {51.0, 11.0}, gcfg);
  const double leg3 = geo::haversine_km({51.0, 11.0}, {51.5, 11.5}, gcfg);
  const double net = geo::haversine_km({50.0, 10.0}, {51.5, 11.5}, gcfg);
  CHECK(w.ctx[0] == doctest::Approx(leg1 + leg2 + leg3));
  CHECK(w.ctx[1] == doctest::Approx(net));
  CHECK(w.ctx[2] == doctest::Approx(
                        std::clamp((leg1 + leg2 + leg3) / net, 1.0, 50.0)));
  CHECK(w.ctx[7] == doctest::Approx(1.0));   // fully observed
  CHECK(w.ctx[8] == doctest::Approx(1.5));   // 36 h of history
  CHECK(w.ctx[15] == doctest::Approx(0.75)); // land fraction
  CHECK(w.ctx[16] == doctest::Approx(0.25));
  CHECK(w.ctx[17] == doctest::Approx(0.0));
  const double mean_speed = (leg1 / 12.0 + leg2 / 12.0 + leg3 / 12.0) / 3.0;
  CHECK(w.ctx[4] == doctest::Approx(mean_speed));
  CHECK(w.ctx[5] ==
        doctest::Approx(std::max({leg1 / 12.0, leg2 / 12.0, leg3 / 12.0})));

  // A one-day lookback keeps only steps strictly newer than endpoint-24h:
  // the grid slots at +24h and +36h.
  auto short_cfg = cfg;
  short_cfg.ctx_lookback_days = 1;
  const auto w2 = features::build_window(series, {0, 4}, short_cfg, gcfg);
  CHECK(w2.ctx[0] == doctest::Approx(leg3));
  CHECK(w2.ctx[8] == doctest::Approx(0.5));
}

TEST_CASE("label rule: unit match within the horizon") {
  const auto cfg = tiny_config(); // horizon 14 days
  features::Endpoint ep;
  ep.point = {50.0, 10.0};
  ep.date = *timeutil::parse_date("2021-06-01");
  ep.unit = "UA";
  ep.cell = geo::geocell(ep.point, geo::GeoConfig{});

  const auto make_index = [](const std::string& unit, const char* date) {
    data::OutbreakEvent ev;
    ev.event_id = "E1";
    ev.disease = "H5N1";
    ev.admin_unit_id = unit;
    ev.report_date = *timeutil::parse_date(date);
    return features::EventIndex::build({ev}, geo::GeoConfig{});
  };
  CHECK(features::label_window(ep, make_index("UA", "2021-06-01"), cfg) == 1);
  CHECK(features::label_window(ep, make_index("UA", "2021-06-15"), cfg) == 1);
  CHECK(features::label_window(ep, make_index("UA", "2021-06-16"), cfg) == 0);
  CHECK(features::label_window(ep, make_index("UA", "2021-05-31"), cfg) == 0);
  CHECK(features::label_window(ep, make_index("UB", "2021-06-05"), cfg) == 0);
}

TEST_CASE("label rule: cell match when the endpoint has no admin unit") {
  const auto cfg = tiny_config();
  const geo::GeoConfig gcfg;
  features::Endpoint ep;
  ep.point = {55.0, 4.0}; // somewhere at sea
  ep.date = *timeutil::parse_date("2021-06-01");
  ep.cell = geo::geocell(ep.point, gcfg);

  data::OutbreakEvent near;
  near.event_id = "E1";
  near.disease = "H5N1";
  near.point = geo::GeoPoint{55.0, 4.0};
  near.report_date = ep.date + 3;
  data::OutbreakEvent far = near;
  far.event_id = "E2";
  far.point = geo::GeoPoint{45.0, -20.0};

  CHECK(features::label_window(ep, features::EventIndex::build({near}, gcfg),
                               cfg) == 1);
  CHECK(features::label_window(ep, features::EventIndex::build({far}, gcfg),
                               cfg) == 0);
  // With a unit present, a cell-only event no longer matches.
  ep.unit = "UA";
  CHECK(features::label_window(ep, features::EventIndex::build({near}, gcfg),
                               cfg) == 0);
}

TEST_CASE("split assignment is deterministic and cohort-pure") {
  std::vector<Window> windows;
  for (int i = 0; i < 200; ++i) {
    Window w;
    w.cohort = {i % 40, "U" + std::to_string(i % 8), "2021-W2" + std::to_string(i % 5)};
    windows.push_back(w);
  }
  features::assign_splits(windows, {0.7, 0.15, 0.15}, 42);
  std::map<std::string, std::string> seen;
  for (const auto& w : windows) {
    const auto key = w.cohort.str();
    const auto it = seen.find(key);
    if (it == seen.end()) seen[key] = w.split;
    else CHECK(it->second == w.split); // same cohort, same split
  }
  auto again = windows;
  for (auto& w : again) w.split.clear();
  features::assign_splits(again, {0.7, 0.15, 0.15}, 42);
  for (std::size_t i = 0; i < windows.size(); ++i)
    CHECK(windows[i].split == again[i].split);
  // A different seed shuffles cohorts around.
  features::assign_splits(again, {0.7, 0.15, 0.15}, 43);
  std::size_t moved = 0;
  for (std::size_t i = 0; i < windows.size(); ++i)
    moved += windows[i].split != again[i].split;
  CHECK(moved > 0);
}

TEST_CASE("split fractions track the requested ratios") {
  std::size_t n_train = 0, n_val = 0, n_test = 0;
  const std::size_t n = 20000;
  for (std::size_t i = 0; i < n; ++i) {
    features::CohortKey key{static_cast<int>(i % 97),
                            "U" + std::to_string(i / 97),
                            "2021-W07"};
    const auto s = features::split_of(key, {0.7, 0.15, 0.15}, 7);
    if (s == "train") ++n_train;
    else if (s == "val") ++n_val;
    else ++n_test;
  }
  CHECK(std::abs(n_train / double(n) - 0.70) < 0.02);
  CHECK(std::abs(n_val / double(n) - 0.15) < 0.02);
  CHECK(std::abs(n_test / double(n) - 0.15) < 0.02);
  // Degenerate ratios pin every cohort to one split.
  features::CohortKey key{1, "U1", "2021-W01"};
  CHECK(features::split_of(key, {1.0, 0.0, 0.0}, 3) == "train");
}

TEST_CASE("feature statistics: fit, apply, and the double-apply guard") {
  const auto cfg = tiny_config();
  const geo::GeoConfig gcfg;
  const std::int64_t t0 = *timeutil::parse_timestamp("2021-06-10T00:00:00Z");
  std::vector<data::IntegratedFix> fixes;
  for (int k = 0; k < 8; ++k)
    fixes.push_back(fix_at(t0 + k * 12 * kHour, 45.0 + 0.3 * k, 8.0 + 0.2 * k));
  const auto series = features::resample(fixes, cfg);
  std::vector<Window> windows;
  for (const auto& span : features::make_windows(series, cfg))
    windows.push_back(features::build_window(series, span, cfg, gcfg));
  REQUIRE(windows.size() == 2);

  const auto stats = features::fit_stats(windows);
  // Hand-recomputed mean of one continuous column over observed rows.
  double sum = 0.0;
  std::size_t rows = 0;
  for (const auto& w : windows)
    for (std::size_t t = 0; t < w.x_cont.size(); ++t)
      if (w.obs_mask[t]) {
        sum += w.x_cont[t][3];
        ++rows;
      }
  CHECK(stats.cont_mean[3] == doctest::Approx(sum / rows));
  for (int c = 0; c < features::kContDims; ++c)
    CHECK(stats.cont_std[c] >= 1e-6);

  auto w = windows[0];
  features::apply_stats(w, stats);
  CHECK(w.normalized);
  CHECK(w.x_cont[1][3] == doctest::Approx(
            (windows[0].x_cont[1][3] - stats.cont_mean[3]) / stats.cont_std[3]));
  CHECK(w.ctx[0] == doctest::Approx(
            (windows[0].ctx[0] - stats.ctx_mean[0]) / stats.ctx_std[0]));
  CHECK_THROWS_AS(features::apply_stats(w, stats), InputError);

  // A constant column gets the floored std, not a division blow-up.
  auto padded = windows[1];
  features::apply_stats(padded, stats);
  for (std::size_t t = 0; t < padded.x_cont.size(); ++t)
    if (!padded.obs_mask[t])
      for (int c = 0; c < features::kStepDims; ++c)
        CHECK(padded.x_cont[t][c] == 0.0); // masked rows stay zero
}

TEST_CASE("feature statistics serialize exactly") {
  features::FeatureStats s;
  for (int c = 0; c < features::kContDims; ++c) {
    s.cont_mean[c] = 0.1 * c - 0.37;
    s.cont_std[c] = 1.0 + 0.01 * c;
  }
  for (int c = 0; c < features::kCtxDims; ++c) {
    s.ctx_mean[c] = std::sqrt(2.0) * c;
    s.ctx_std[c] = 1e-6 + c;
  }
  const auto back = features::stats_from_json(features::stats_to_json(s));
  CHECK(back.cont_mean == s.cont_mean);
  CHECK(back.cont_std == s.cont_std);
  CHECK(back.ctx_mean == s.ctx_mean);
  CHECK(back.ctx_std == s.ctx_std);
  CHECK_THROWS_AS(features::stats_from_json("{}"), InputError);
  CHECK_THROWS_AS(features::stats_from_json("not json"), InputError);

  namespace fs = std::filesystem;
  const auto path = (fs::temp_directory_path() / "avianrisk_stats.json").string();
  features::write_stats(s, path);
  const auto loaded = features::read_stats(path);
  CHECK(loaded.ctx_mean == s.ctx_mean);
  fs::remove(path);
}

TEST_CASE("featurize end to end with labels, vocab, and cohorts") {
  const auto cfg = tiny_config();
  const geo::GeoConfig gcfg;
  const std::int64_t t0 = *timeutil::parse_timestamp("2021-06-01T00:00:00Z");

  std::vector<data::IntegratedFix> fixes;
  for (int k = 0; k < 4; ++k) {
    auto f = fix_at(t0 + k * 12 * kHour, 50.0 + 0.1 * k, 10.0, "UA");
    fixes.push_back(f);
  }
  for (int k = 0; k < 4; ++k) {
    auto f = fix_at(t0 + k * 12 * kHour, 30.0, -15.0, "UB");
    f.fix.individual_id = "b2";
    f.fix.species = "goose";
    f.cell = geo::geocell({30.0, -15.0}, gcfg);
    fixes.push_back(f);
  }

  data::OutbreakEvent ev;
  ev.event_id = "E1";
  ev.disease = "H5N1";
  ev.admin_unit_id = "UA";
  ev.report_date = timeutil::day_of_timestamp(t0) + 5;

  const auto result = features::featurize(fixes, {ev}, gcfg, cfg);
  CHECK(result.species_vocab == std::vector<std::string>{"goose", "teal"});
  REQUIRE(result.windows.size() == 2);
  for (const auto& w : result.windows) {
    if (w.individual_id == "b1") {
      CHECK(w.species == "teal");
      CHECK(w.species_id == 1);
      CHECK(w.label == 1);
      CHECK(w.cohort.destination == "UA");
    } else {
      CHECK(w.species == "goose");
      CHECK(w.species_id == 0);
      CHECK(w.label == 0);
      CHECK(w.cohort.destination == "UB");
    }
    CHECK(w.cohort.species_id == w.species_id);
    const auto iw = timeutil::iso_week(w.endpoint.date);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-W%02d", iw.year, iw.week);
    CHECK(w.cohort.year_week == buf);
  }
}

TEST_CASE("window store round-trips byte-for-byte values") {
  const auto cfg = tiny_config();
  const geo::GeoConfig gcfg;
  const std::int64_t t0 = *timeutil::parse_timestamp("2021-06-01T03:17:29Z");
  std::vector<data::IntegratedFix> fixes;
  for (int k = 0; k < 6; ++k)
    fixes.push_back(fix_at(t0 + k * 12 * kHour, 50.0 + 0.37 * k,
                           10.0 - 0.21 * k, k % 2 ? "UA" : nullptr,
                           k % 3 ? geo::TerrainClass::land
                                 : geo::TerrainClass::ocean));
  auto result = features::featurize(fixes, {}, gcfg, cfg);
  REQUIRE(!result.windows.empty());
  features::assign_splits(result.windows, {0.7, 0.15, 0.15}, 9);

  namespace fs = std::filesystem;
  const auto path = (fs::temp_directory_path() / "avianrisk_windows.ndjson").string();
  features::write_windows(result.windows, path);
  const auto back = features::read_windows(path);
  REQUIRE(back.size() == result.windows.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    const auto& a = result.windows[i];
    const auto& b = back[i];
    CHECK(a.individual_id == b.individual_id);
    CHECK(a.species == b.species);
    CHECK(a.species_id == b.species_id);
    CHECK(a.label == b.label);
    CHECK(a.split == b.split);
    CHECK(a.cohort == b.cohort);
    CHECK(a.endpoint.date == b.endpoint.date);
    CHECK(a.endpoint.unit == b.endpoint.unit);
    CHECK(a.endpoint.cell == b.endpoint.cell);
    CHECK(a.x_cont == b.x_cont); // doubles survive exactly
    CHECK(a.cells == b.cells);
    CHECK(a.ctx == b.ctx);
    CHECK(a.pad_mask == b.pad_mask);
    CHECK(a.obs_mask == b.obs_mask);
  }
  fs::remove(path);

  CHECK_THROWS_AS(features::read_windows("/nonexistent/windows.ndjson"),
                  InputError);
}
