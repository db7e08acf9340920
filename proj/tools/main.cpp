#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "avianrisk/csvio.hpp"
#include "avianrisk/data.hpp"
#include "avianrisk/error.hpp"
#include "avianrisk/features.hpp"
#include "avianrisk/geo.hpp"
#include "avianrisk/hexgrid.hpp"
#include "avianrisk/metrics.hpp"
#include "avianrisk/model.hpp"
#include "avianrisk/synth.hpp"
#include "avianrisk/train.hpp"

namespace {

using namespace avianrisk;
namespace fs = std::filesystem;

struct RunConfig {
  geo::GeoConfig geo;
  features::WindowConfig window;
  model::ModelConfig model;
  train::TrainConfig train;
};

template <typename T>
void read_key(const nlohmann::json& value, const char* section,
              const std::string& key, T& out) {
  try {
    out = value.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw InputError("config: bad value for key \"" + key + "\" in section \"" +
                     section + "\"");
  }
}

void unknown_key(const char* section, const std::string& key) {
  throw InputError("config: unknown key \"" + key + "\" in section \"" +
                   section + "\"");
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path + ": cannot open config file");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
  if (!doc.is_object()) throw InputError(path + ": config must be a JSON object");

  RunConfig rc;
  for (const auto& [section, body] : doc.items()) {
    if (!body.is_object())
      throw InputError("config: section \"" + section + "\" must be an object");
    if (section == "geo") {
      for (const auto& [k, v] : body.items()) {
        if (k == "earth_radius_km") read_key(v, "geo", k, rc.geo.earth_radius_km);
        else if (k == "cell_resolution") read_key(v, "geo", k, rc.geo.cell_resolution);
        else unknown_key("geo", k);
      }
    } else if (section == "window") {
      auto& w = rc.window;
      for (const auto& [k, v] : body.items()) {
        if (k == "step_hours") read_key(v, "window", k, w.step_hours);
        else if (k == "window_days") read_key(v, "window", k, w.window_days);
        else if (k == "T") read_key(v, "window", k, w.T);
        else if (k == "stride_days") read_key(v, "window", k, w.stride_days);
        else if (k == "match_tolerance_hours") read_key(v, "window", k, w.match_tolerance_hours);
        else if (k == "label_horizon_days") read_key(v, "window", k, w.label_horizon_days);
        else if (k == "ctx_lookback_days") read_key(v, "window", k, w.ctx_lookback_days);
        else unknown_key("window", k);
      }
    } else if (section == "model") {
      auto& m = rc.model;
      for (const auto& [k, v] : body.items()) {
        if (k == "d_model") read_key(v, "model", k, m.d_model);
        else if (k == "n_layers") read_key(v, "model", k, m.n_layers);
        else if (k == "n_heads") read_key(v, "model", k, m.n_heads);
        else if (k == "d_ff") read_key(v, "model", k, m.d_ff);
        else if (k == "dropout_p") read_key(v, "model", k, m.dropout_p);
        else if (k == "T_max") read_key(v, "model", k, m.T_max);
        else if (k == "d_cell") read_key(v, "model", k, m.d_cell);
        else if (k == "aux_head_enabled") read_key(v, "model", k, m.aux_head_enabled);
        else if (k == "seed") read_key(v, "model", k, m.seed);
        else unknown_key("model", k);
      }
    } else if (section == "train") {
      auto& t = rc.train;
      for (const auto& [k, v] : body.items()) {
        if (k == "epochs") read_key(v, "train", k, t.epochs);
        else if (k == "batch_size") read_key(v, "train", k, t.batch_size);
        else if (k == "lr") read_key(v, "train", k, t.lr);
        else if (k == "weight_decay") read_key(v, "train", k, t.weight_decay);
        else if (k == "beta1") read_key(v, "train", k, t.beta1);
        else if (k == "beta2") read_key(v, "train", k, t.beta2);
        else if (k == "eps") read_key(v, "train", k, t.eps);
        else if (k == "clip_norm") read_key(v, "train", k, t.clip_norm);
        else if (k == "pos_oversample_weight") read_key(v, "train", k, t.pos_oversample_weight);
        else if (k == "seed") read_key(v, "train", k, t.seed);
        else unknown_key("train", k);
      }
    } else {
      throw InputError("config: unknown section \"" + section + "\"");
    }
  }
  rc.window.validate();
  rc.train.validate();
  if (rc.geo.cell_resolution < 0 || rc.geo.cell_resolution > 15)
    throw InputError("config: bad value for key \"cell_resolution\" in "
                     "section \"geo\"");
  return rc;
}

std::array<double, 3> parse_ratios(const std::string& text) {
  std::array<double, 3> r{};
  std::stringstream ss(text);
  std::string part;
  int i = 0;
  while (std::getline(ss, part, ',')) {
    if (i >= 3) throw InputError("--ratios needs exactly three numbers");
    try {
      std::size_t used = 0;
      r[i] = std::stod(part, &used);
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw InputError("--ratios: \"" + part + "\" is not a number");
    }
    if (r[i] < 0.0) throw InputError("--ratios must be non-negative");
    ++i;
  }
  if (i != 3) throw InputError("--ratios needs exactly three numbers");
  const double sum = r[0] + r[1] + r[2];
  if (std::abs(sum - 1.0) > 1e-9)
    throw InputError("--ratios must sum to 1 (got " +
                     csvio::format_double(sum) + ")");
  return r;
}

// Shared by eval and predict: map species names through the checkpoint
// vocabulary and normalize features with the stored stats.
void prepare_for_model(std::vector<features::Window>& windows,
                       const model::Checkpoint& ckpt) {
  for (auto& w : windows) {
    const auto it = std::find(ckpt.species_vocab.begin(),
                              ckpt.species_vocab.end(), w.species);
    if (it == ckpt.species_vocab.end())
      throw InputError("species \"" + w.species +
                       "\" is not in the checkpoint vocabulary");
    w.species_id = static_cast<int>(it - ckpt.species_vocab.begin());
    features::apply_stats(w, ckpt.stats);
  }
}

std::string metric_or_dash(const std::optional<double>& v) {
  return v ? csvio::format_double(*v) : std::string("-");
}

int run(int argc, char** argv) {
  CLI::App app{"avianrisk: telemetry-to-risk pipeline "
               "(synthesize, featurize, split, train, evaluate, predict)"};
  app.require_subcommand(1);

  // ---- synth ----------------------------------------------------------
  auto* cmd_synth = app.add_subcommand(
      "synth", "Generate a synthetic telemetry/outbreak dataset");
  std::string synth_out;
  synth::SynthConfig synth_cfg;
  bool synth_null = false, synth_force = false;
  cmd_synth->add_option("--out", synth_out, "Output directory")->required();
  cmd_synth->add_option("--seed", synth_cfg.seed, "Generator seed");
  cmd_synth->add_flag("--null", synth_null,
                      "No-signal control: risk units lose their elevated rate");
  cmd_synth->add_flag("--force", synth_force,
                      "Overwrite an existing non-empty output directory");
  cmd_synth->add_option("--individuals", synth_cfg.n_individuals,
                        "Number of tracked individuals");
  cmd_synth->add_option("--species", synth_cfg.n_species, "Number of species");
  cmd_synth->add_option("--days", synth_cfg.days, "Days of tracking per individual");
  cmd_synth->add_option("--stagger-days", synth_cfg.stagger_days,
                        "Spread of individual start dates");
  cmd_synth->add_option("--start-date", synth_cfg.start_date,
                        "First possible track start (YYYY-MM-DD)");
  cmd_synth->add_option("--p-hot", synth_cfg.p_hot,
                        "Window-level event probability in risk units");
  cmd_synth->add_option("--p-cold", synth_cfg.p_cold,
                        "Window-level event probability elsewhere");
  cmd_synth->callback([&] {
    if (synth_null) synth_cfg = synth::null_config(synth_cfg);
    if (fs::exists(synth_out) && !fs::is_empty(synth_out) && !synth_force)
      throw InputError(synth_out +
                       ": output directory exists and is not empty "
                       "(pass --force to overwrite)");
    const auto s = synth::generate(synth_cfg, synth_out);
    std::printf("fixes=%zu events=%zu units=%zu out=%s\n", s.n_fixes,
                s.n_events, s.n_units, synth_out.c_str());
  });

  // ---- featurize ------------------------------------------------------
  auto* cmd_feat = app.add_subcommand(
      "featurize", "Integrate raw inputs and build labeled windows");
  std::string ft_telemetry, ft_outbreaks, ft_layers, ft_config, ft_out,
      ft_integrated;
  cmd_feat->add_option("--telemetry", ft_telemetry, "Telemetry CSV")->required();
  cmd_feat->add_option("--outbreaks", ft_outbreaks, "Outbreak CSV")->required();
  cmd_feat->add_option("--layers", ft_layers,
                       "Directory with land/lakes/admin GeoJSON")->required();
  cmd_feat->add_option("--config", ft_config,
                       "Run config JSON (defaults when omitted)");
  cmd_feat->add_option("--out", ft_out, "Window store (NDJSON)")->required();
  cmd_feat->add_option("--integrated-out", ft_integrated,
                       "Integrated fix table (default <out>.integrated.csv)");
  cmd_feat->callback([&] {
    const RunConfig rc =
        ft_config.empty() ? RunConfig{} : load_run_config(ft_config);
    const geo::GeoLayers layers = geo::load_layers(ft_layers);
    const data::TelemetryResult tel = data::read_telemetry(ft_telemetry);
    const auto events = data::read_outbreaks(ft_outbreaks, layers);
    const auto integrated =
        data::integrate(tel.fixes, events, layers, rc.geo);
    data::write_integrated(integrated, ft_integrated.empty()
                                           ? ft_out + ".integrated.csv"
                                           : ft_integrated);
    auto result = features::featurize(integrated, events, rc.geo, rc.window);
    features::write_windows(result.windows, ft_out);

    std::size_t positives = 0;
    std::set<std::string> individuals;
    for (const auto& w : result.windows) {
      positives += w.label ? 1 : 0;
      individuals.insert(w.individual_id);
    }
    std::printf("windows=%zu positives=%zu individuals=%zu species=%zu\n",
                result.windows.size(), positives, individuals.size(),
                result.species_vocab.size());
  });

  // ---- split ----------------------------------------------------------
  auto* cmd_split = app.add_subcommand(
      "split", "Partition a window store into leakage-safe cohort splits");
  std::string sp_in, sp_out, sp_ratios = "0.7,0.15,0.15";
  std::uint64_t sp_seed = 0;
  cmd_split->add_option("--in", sp_in, "Window store (NDJSON)")->required();
  cmd_split->add_option("--out", sp_out, "Output directory")->required();
  cmd_split->add_option("--seed", sp_seed, "Split seed");
  cmd_split->add_option("--ratios", sp_ratios, "train,val,test fractions");
  cmd_split->callback([&] {
    const auto ratios = parse_ratios(sp_ratios);
    auto windows = features::read_windows(sp_in);
    features::assign_splits(windows, ratios, sp_seed);
    fs::create_directories(sp_out);
    for (const char* split : {"train", "val", "test"}) {
      std::vector<features::Window> part;
      std::set<std::string> cohorts;
      for (const auto& w : windows)
        if (w.split == split) {
          part.push_back(w);
          cohorts.insert(w.cohort.str());
        }
      features::write_windows(part,
                              (fs::path(sp_out) / (std::string(split) + ".ndjson"))
                                  .string());
      std::printf("%s: windows=%zu cohorts=%zu\n", split, part.size(),
                  cohorts.size());
    }
  });

  // ---- train ----------------------------------------------------------
  auto* cmd_train = app.add_subcommand("train", "Fit the risk model");
  std::string tr_train, tr_val, tr_config, tr_out, tr_history, tr_stats;
  cmd_train->add_option("--train", tr_train, "Train window store")->required();
  cmd_train->add_option("--val", tr_val, "Validation window store")->required();
  cmd_train->add_option("--config", tr_config,
                        "Run config JSON (defaults when omitted)");
  cmd_train->add_option("--out", tr_out, "Checkpoint path")->required();
  cmd_train->add_option("--history", tr_history,
                        "Loss history CSV (default <out>.history.csv)");
  cmd_train->add_option("--stats", tr_stats,
                        "Feature stats sidecar (default <out>.stats.json)");
  cmd_train->callback([&] {
    const RunConfig rc =
        tr_config.empty() ? RunConfig{} : load_run_config(tr_config);
    auto train_windows = features::read_windows(tr_train);
    auto val_windows = features::read_windows(tr_val);
    if (train_windows.empty()) throw InputError(tr_train + ": no windows");
    if (val_windows.empty()) throw InputError(tr_val + ": no windows");

    const auto stats = features::fit_stats(train_windows);
    for (auto& w : train_windows) features::apply_stats(w, stats);
    for (auto& w : val_windows) features::apply_stats(w, stats);

    int max_id = 0;
    for (const auto& w : train_windows) max_id = std::max(max_id, w.species_id);
    for (const auto& w : val_windows) max_id = std::max(max_id, w.species_id);
    std::vector<std::string> vocab(static_cast<std::size_t>(max_id) + 1);
    const auto note_species = [&](const features::Window& w) {
      auto& slot = vocab[static_cast<std::size_t>(w.species_id)];
      if (slot.empty()) slot = w.species;
      else if (slot != w.species)
        throw InputError("window store maps species id " +
                         std::to_string(w.species_id) +
                         " to both \"" + slot + "\" and \"" + w.species + "\"");
    };
    for (const auto& w : train_windows) note_species(w);
    for (const auto& w : val_windows) note_species(w);

    const auto result = train::fit(
        train_windows, val_windows, rc.model, rc.train, stats, vocab, tr_out,
        [&](const model::EpochRecord& e) {
          std::printf("epoch %d/%d train_loss=%.6f val_loss=%.6f "
                      "val_acc=%.4f val_auc=%.4f val_ap=%.4f\n",
                      e.epoch, rc.train.epochs, e.train_loss, e.val_loss,
                      e.val_acc, e.val_auc, e.val_ap);
          std::fflush(stdout);
        });
    train::write_history_csv(result.history,
                             tr_history.empty() ? tr_out + ".history.csv"
                                                : tr_history);
    features::write_stats(stats,
                          tr_stats.empty() ? tr_out + ".stats.json" : tr_stats);
    std::printf("best_epoch=%d val_ap=%.6f threshold=%.6f checkpoint=%s\n",
                result.best.best_epoch, result.best.val_ap,
                result.best.threshold, tr_out.c_str());
  });

  // ---- eval -----------------------------------------------------------
  auto* cmd_eval = app.add_subcommand(
      "eval", "Score a window store and report metrics");
  std::string ev_ckpt, ev_test, ev_out, ev_group;
  std::optional<double> ev_threshold;
  cmd_eval->add_option("--ckpt", ev_ckpt, "Checkpoint")->required();
  cmd_eval->add_option("--test", ev_test, "Window store to evaluate")->required();
  cmd_eval->add_option("--out", ev_out, "Report CSV")->required();
  cmd_eval->add_option("--group-by", ev_group,
                       "Per-group breakdown: species or region")
      ->check(CLI::IsMember({"species", "region"}));
  cmd_eval->add_option("--threshold", ev_threshold,
                       "Override the stored decision threshold");
  cmd_eval->callback([&] {
    const auto ckpt = model::load_checkpoint(ev_ckpt);
    auto windows = features::read_windows(ev_test);
    if (windows.empty()) throw InputError(ev_test + ": no windows to evaluate");
    prepare_for_model(windows, ckpt);

    const auto scores = train::score_windows(windows, ckpt);
    std::vector<int> labels(windows.size());
    for (std::size_t i = 0; i < windows.size(); ++i) labels[i] = windows[i].label;
    const double threshold = ev_threshold.value_or(ckpt.threshold);
    const auto report = metrics::evaluate(scores, labels, threshold);

    if (!ev_group.empty()) {
      std::vector<std::string> groups(windows.size());
      for (std::size_t i = 0; i < windows.size(); ++i) {
        const auto& w = windows[i];
        groups[i] = ev_group == "species"
                        ? w.species
                        : (w.endpoint.unit
                               ? *w.endpoint.unit
                               : hexgrid::cell_to_string(w.endpoint.cell.value));
      }
      const auto rows = metrics::breakdown(groups, scores, labels, threshold);
      metrics::write_breakdown_csv(
          rows, report, ev_group == "species" ? "Species" : "Region", ev_out);
    } else {
      metrics::write_report_csv(report, ev_out);
    }
    std::printf("n=%zu n_pos=%zu accuracy=%s auc=%s ap=%s f1=%s threshold=%s\n",
                report.n, report.n_pos,
                csvio::format_double(report.accuracy).c_str(),
                metric_or_dash(report.auc).c_str(),
                metric_or_dash(report.ap).c_str(),
                csvio::format_double(report.f1).c_str(),
                csvio::format_double(threshold).c_str());
  });

  // ---- predict --------------------------------------------------------
  auto* cmd_predict = app.add_subcommand(
      "predict", "Emit per-window scores and decisions");
  std::string pr_ckpt, pr_windows, pr_out;
  cmd_predict->add_option("--ckpt", pr_ckpt, "Checkpoint")->required();
  cmd_predict->add_option("--windows", pr_windows, "Window store")->required();
  cmd_predict->add_option("--out", pr_out, "Predictions CSV")->required();
  cmd_predict->callback([&] {
    const auto ckpt = model::load_checkpoint(pr_ckpt);
    auto windows = features::read_windows(pr_windows);
    prepare_for_model(windows, ckpt);
    const auto scores = train::score_windows(windows, ckpt);

    csvio::Writer out(pr_out);
    out.write_row({"window", "score", "decision"});
    for (std::size_t i = 0; i < scores.size(); ++i)
      out.write_row({std::to_string(i), csvio::format_double(scores[i]),
                     scores[i] >= ckpt.threshold ? "1" : "0"});
    out.close();
    std::printf("predictions=%zu threshold=%s\n", scores.size(),
                csvio::format_double(ckpt.threshold).c_str());
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const avianrisk::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const avianrisk::RuntimeFailure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
