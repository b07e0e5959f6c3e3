#include "ensemblecast/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ensemblecast/config.hpp"
#include "ensemblecast/ensemble.hpp"
#include "ensemblecast/errors.hpp"
#include "ensemblecast/presets.hpp"
#include "ensemblecast/verify.hpp"
#include "ensemblecast/version.hpp"

namespace ecast {

namespace {

namespace fs = std::filesystem;

int env_threads() {
  const char* s = std::getenv("ENSEMBLECAST_THREADS");
  if (s == nullptr || *s == '\0') return 1;
  int v = 0;
  const char* e = s + std::strlen(s);
  const auto res = std::from_chars(s, e, v);
  if (res.ec != std::errc() || res.ptr != e || v < 1)
    throw Error(Errc::invalid_argument,
                std::string("ENSEMBLECAST_THREADS must be a positive integer, got '") + s +
                    "'");
  return v;
}

bool parse_grid_dims(const std::string& s, int& lat, int& lon) {
  const std::size_t x = s.find('x');
  if (x == std::string::npos) return false;
  const char* b = s.data();
  auto r1 = std::from_chars(b, b + x, lat);
  auto r2 = std::from_chars(b + x + 1, b + s.size(), lon);
  return r1.ec == std::errc() && r1.ptr == b + x && r2.ec == std::errc() &&
         r2.ptr == b + s.size() && lat > 0 && lon > 0;
}

void ensure_parent(const fs::path& p) {
  const fs::path dir = p.parent_path();
  if (!dir.empty()) fs::create_directories(dir);
}

/// <out>.manifest beside the outputs: toolkit version, the resolved command
/// line, the written files, and a config echo that parse_config reads back.
void write_manifest(const fs::path& beside, const std::string& command,
                    const std::vector<std::string>& outputs, const std::string& body) {
  const fs::path path = beside.string() + ".manifest";
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw Error(Errc::truncated_file, "cannot open " + path.string() + " for writing");
  os << "# ensemblecast " << kVersion << "\n";
  os << "# " << command << "\n";
  for (const std::string& o : outputs) os << "# wrote " << o << "\n";
  if (!body.empty()) os << "\n" << body;
  os.flush();
  if (!os) throw Error(Errc::truncated_file, "short write to " + path.string());
}

/// Per-start output path: the plain --out for a single start, otherwise
/// <stem>_day<DDDD><ext>.
fs::path start_path(const fs::path& out, int starts, int day) {
  if (starts == 1) return out;
  char buf[16];
  std::snprintf(buf, sizeof buf, "_day%04d", day);
  fs::path p = out;
  p.replace_extension();
  p += buf;
  p += out.extension();
  return p;
}

TimeSeries load_or_synth(const ExperimentConfig& cfg) {
  if (!cfg.data.path.empty()) return load_series(cfg.data.path);
  cfg.require("data");
  auto grid =
      std::make_shared<GridSpec>(make_synthetic_grid(cfg.data.grid_lat, cfg.data.grid_lon));
  return make_synthetic_dataset(std::move(grid), cfg.data.days, cfg.data.seed);
}

std::unique_ptr<Stepper> make_stepper(const StepperCfg& sc, GridPtr grid) {
  if (sc.kind == "persistence") return make_persistence();
  if (sc.kind == "linear") return make_linear_stencil();
  auto mesh = std::make_shared<HierMesh>(build_hier_mesh(*grid, sc.levels));
  return make_graph_stepper(std::move(grid), std::move(mesh), sc.width, sc.proc_layers,
                            sc.seed);
}

// --- synth ------------------------------------------------------------------

struct SynthOpts {
  std::string out;
  std::string config;
  int days = 120;
  std::string grid = "32x32";
  std::uint64_t seed = 0;
  CLI::Option* days_opt = nullptr;
  CLI::Option* grid_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
};

int cmd_synth(const SynthOpts& o) {
  DataCfg d;
  if (!o.config.empty()) {
    const ExperimentConfig cfg = parse_config(o.config);
    cfg.require("data");
    if (!cfg.data.path.empty())
      throw Error(Errc::invalid_argument,
                  "config [data] points at a file; synth generates data");
    d = cfg.data;
  }
  if (o.days_opt->count() > 0) d.days = o.days;
  if (o.grid_opt->count() > 0) parse_grid_dims(o.grid, d.grid_lat, d.grid_lon);
  if (o.seed_opt->count() > 0) d.seed = o.seed;

  auto grid = std::make_shared<GridSpec>(make_synthetic_grid(d.grid_lat, d.grid_lon));
  const TimeSeries series = make_synthetic_dataset(std::move(grid), d.days, d.seed);
  ensure_parent(o.out);
  save_series(series, o.out);

  std::ostringstream cmd;
  cmd << "ecast synth --out " << o.out << " --days " << d.days << " --grid " << d.grid_lat
      << "x" << d.grid_lon << " --seed " << d.seed;
  std::ostringstream body;
  body << "[data]\ndays = " << d.days << "\ngrid = " << d.grid_lat << "x" << d.grid_lon
       << "\nseed = " << d.seed << "\n";
  write_manifest(o.out, cmd.str(), {}, body.str());
  std::cout << "wrote " << o.out << " (" << d.days << " days, " << d.grid_lat << "x"
            << d.grid_lon << " grid, " << series.vars.size() << " variables)\n";
  return 0;
}

// --- stats ------------------------------------------------------------------

struct StatsOpts {
  std::string config;
  std::string data;
};

int cmd_stats(const StatsOpts& o) {
  ExperimentConfig cfg = parse_config(o.config);
  cfg.require("split");
  if (!o.data.empty()) {
    cfg.data.path = o.data;
    cfg.present.insert("data");
  }
  const TimeSeries series = load_or_synth(cfg);
  const DatasetSplit split{cfg.split.train, cfg.split.val, cfg.split.test};
  const NormStats stats = compute_norm_stats(series, split);

  const GridSpec& g = *series.grid;
  std::cout << "grid: " << g.n_lat() << "x" << g.n_lon() << " (" << g.n_sea() << "/"
            << g.n_cells() << " sea cells)\n";
  std::cout << "days: " << series.n_time() << " (epoch day " << series.epoch_day << ")\n";
  std::cout << "split: train [" << split.train.begin << ", " << split.train.end << "), val ["
            << split.val.begin << ", " << split.val.end << "), test [" << split.test.begin
            << ", " << split.test.end << ")\n";
  for (Var v : series.vars) {
    const VarStats& st = stats.of(v);
    std::cout << var_name(v) << ": state " << st.state_mean << " +- " << st.state_std_raw();
    if (st.has_diff) std::cout << ", diff " << st.diff_mean << " +- " << st.diff_std_raw();
    std::cout << " [" << var_units(v) << "]\n";
  }
  return 0;
}

// --- train ------------------------------------------------------------------

struct TrainOpts {
  std::string config;
  std::string data;
  std::string out;
  std::uint64_t seed = 0;
};

int cmd_train(const TrainOpts& o) {
  ExperimentConfig cfg = parse_config(o.config);
  cfg.require("split");
  cfg.require("stepper");
  cfg.require("train");
  if (!o.data.empty()) {
    cfg.data.path = o.data;
    cfg.present.insert("data");
  }
  const TimeSeries series = load_or_synth(cfg);
  const DatasetSplit split{cfg.split.train, cfg.split.val, cfg.split.test};
  split.validate(series.n_time());
  const NormStats stats = compute_norm_stats(series, split);

  const std::unique_ptr<Stepper> proto = make_stepper(cfg.stepper, series.grid);
  const TrainResult result = train(*proto, series, split, stats, cfg.train, o.seed);

  const fs::path out =
      o.out.empty() ? fs::path(cfg.output.directory) / "model.omp1" : fs::path(o.out);
  ensure_parent(out);
  save_model(*result.stepper, stats, out);

  const double rmse_model = one_step_rmse(*result.stepper, series, stats, split.val);
  const double rmse_persist = one_step_rmse(*make_persistence(), series, stats, split.val);
  std::cout << "trained " << cfg.stepper.kind << " stepper: loss " << result.initial_loss
            << " -> " << result.final_loss << " over " << result.epoch_losses.size()
            << " epochs\n";
  std::cout << "val one-step rmse: " << rmse_model << " (persistence " << rmse_persist
            << ")\n";
  std::cout << "wrote " << out.string() << "\n";

  std::ostringstream cmd;
  cmd << "ecast train --config " << o.config << " --out " << out.string() << " --seed "
      << o.seed;
  write_manifest(out, cmd.str(), {}, config_text(cfg));
  return 0;
}

// --- forecast ---------------------------------------------------------------

struct ForecastOpts {
  std::string model;
  std::string data;
  std::string out;
  int start_day = 1;
  int starts = 1;
  int stride = 1;
  int horizon = 15;
};

int cmd_forecast(const ForecastOpts& o) {
  const TimeSeries series = load_series(o.data);
  const LoadedModel lm = load_model(o.model, series.grid);

  ensure_parent(o.out);
  std::vector<std::string> written;
  for (int s = 0; s < o.starts; ++s) {
    const int day = o.start_day + s * o.stride;
    const Trajectory traj =
        rollout_from_series(*lm.stepper, lm.stats, series, day, o.horizon);
    const fs::path p = start_path(o.out, o.starts, day);
    save_ofs1(trajectory_stack(traj, series.epoch_day + day + 1), p);
    std::cout << "wrote " << p.string() << " (" << o.horizon << " leads from day " << day
              << ")\n";
    written.push_back(p.string());
  }

  std::ostringstream cmd;
  cmd << "ecast forecast --model " << o.model << " --data " << o.data << " --start-day "
      << o.start_day << " --starts " << o.starts << " --stride " << o.stride << " --horizon "
      << o.horizon << " --out " << o.out;
  write_manifest(o.out, cmd.str(), written, "");
  return 0;
}

// --- ensemble ---------------------------------------------------------------

struct EnsembleOpts {
  std::string model;
  std::string data;
  std::string out;
  std::string preset;
  std::string config;
  int start_day = 1;
  int starts = 1;
  int stride = 1;
  int horizon = 15;
  int members = 5;
  std::uint64_t seed = 0;
  bool split_files = false;
  CLI::Option* horizon_opt = nullptr;
  CLI::Option* members_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
};

int cmd_ensemble(const EnsembleOpts& o) {
  EnsembleConfig ec;
  ec.members = 5;
  ec.horizon = 15;
  if (!o.config.empty()) {
    const ExperimentConfig cfg = parse_config(o.config);
    cfg.require("noise");
    ec.noise = cfg.noise;
    if (cfg.has("ensemble")) {
      ec.members = cfg.ensemble.members;
      ec.horizon = cfg.ensemble.horizon;
      ec.base_seed = cfg.ensemble.base_seed;
    }
  } else {
    ec.noise = noise_preset(o.preset);
  }
  if (o.members_opt->count() > 0) ec.members = o.members;
  if (o.horizon_opt->count() > 0) ec.horizon = o.horizon;
  if (o.seed_opt->count() > 0) ec.base_seed = o.seed;

  const TimeSeries series = load_series(o.data);
  const LoadedModel lm = load_model(o.model, series.grid);
  const int threads = env_threads();

  ensure_parent(o.out);
  std::vector<std::string> written;
  for (int s = 0; s < o.starts; ++s) {
    const int day = o.start_day + s * o.stride;
    const EnsembleForecast f =
        run_ensemble_from_series(*lm.stepper, lm.stats, series, day, ec, threads);
    const fs::path p = start_path(o.out, o.starts, day);
    if (o.split_files) {
      for (const fs::path& q : save_ensemble_split(f, p)) written.push_back(q.string());
    } else {
      save_ensemble(f, p);
      written.push_back(p.string());
    }
    std::cout << "wrote " << (o.split_files ? p.stem().string() + "_*" : p.string()) << " ("
              << ec.members << " members, " << ec.horizon << " leads from day " << day
              << ")\n";
  }

  std::ostringstream cmd;
  cmd << "ecast ensemble --model " << o.model << " --data " << o.data;
  if (!o.config.empty())
    cmd << " --config " << o.config;
  else
    cmd << " --preset " << o.preset;
  cmd << " --start-day " << o.start_day << " --starts " << o.starts << " --stride "
      << o.stride << " --horizon " << ec.horizon << " --members " << ec.members << " --seed "
      << ec.base_seed;
  if (o.split_files) cmd << " --split-files";
  cmd << " --out " << o.out;
  std::ostringstream body;
  body << "[ensemble]\nmembers = " << ec.members << "\nhorizon = " << ec.horizon
       << "\nbase_seed = " << ec.base_seed << "\n\n"
       << noise_section_text(ec.noise);
  write_manifest(o.out, cmd.str(), written, body.str());
  return 0;
}

// --- verify -----------------------------------------------------------------

struct VerifyCmdOpts {
  std::vector<std::string> forecasts;
  std::string data;
  std::string out;
  std::vector<int> leads;
  int max_lead = 0;
  bool lat_weighted = false;
  bool ssr_corrected = false;
  bool gnuplot = false;
};

/// Pooled deterministic scores; the probabilistic columns have no meaning for
/// a single trajectory and are reported as nan with members = 1.
MetricSeries verify_deterministic(const std::vector<Ofs1Stack>& stacks,
                                  const TimeSeries& truth, const VerifyOptions& opt) {
  std::vector<std::vector<RmseBias>> per;
  std::size_t horizon = std::numeric_limits<std::size_t>::max();
  for (const Ofs1Stack& s : stacks) {
    per.push_back(rmse_and_bias(trajectory_from_stack(s, truth.epoch_day), truth,
                                opt.lat_weighted));
    horizon = std::min(horizon, per.back().size());
  }
  if (opt.max_lead > 0) horizon = std::min(horizon, static_cast<std::size_t>(opt.max_lead));

  const double nan = std::numeric_limits<double>::quiet_NaN();
  MetricSeries out;
  out.members = 1;
  out.start_days = static_cast<int>(stacks.size());
  for (std::size_t lead = 1; lead <= horizon; ++lead) {
    double mse = 0.0, bias = 0.0;
    for (const auto& rb : per) {
      mse += rb[lead - 1].rmse * rb[lead - 1].rmse;
      bias += rb[lead - 1].bias;
    }
    mse /= static_cast<double>(per.size());
    bias /= static_cast<double>(per.size());
    LeadMetrics lm;
    lm.lead = static_cast<int>(lead);
    lm.crps = lm.crps_skill = lm.crps_spread = lm.spread = lm.ssr = nan;
    lm.rmse = std::sqrt(mse);
    lm.bias = bias;
    lm.rmse_debiased = std::sqrt(std::max(0.0, mse - bias * bias));
    out.leads.push_back(lm);
  }
  return out;
}

void filter_leads(MetricSeries& ms, const std::vector<int>& wanted) {
  std::vector<LeadMetrics> kept;
  kept.reserve(wanted.size());
  for (int lead : wanted) {
    const auto it = std::find_if(ms.leads.begin(), ms.leads.end(),
                                 [lead](const LeadMetrics& lm) { return lm.lead == lead; });
    if (it == ms.leads.end())
      throw Error(Errc::lead_mismatch, "no metrics at lead " + std::to_string(lead));
    kept.push_back(*it);
  }
  ms.leads = std::move(kept);
}

void write_gnuplot(const fs::path& csv) {
  const fs::path path = csv.string() + ".gp";
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw Error(Errc::truncated_file, "cannot open " + path.string() + " for writing");
  os << "set datafile separator ','\n"
     << "set xlabel 'lead (days)'\n"
     << "set ylabel 'K'\n"
     << "set key left top\n"
     << "plot '" << csv.filename().string() << "' using 1:6 with linespoints title 'rmse', \\\n"
     << "     '' using 1:8 with linespoints title 'rmse debiased', \\\n"
     << "     '' using 1:5 with linespoints title 'spread', \\\n"
     << "     '' using 1:2 with linespoints title 'crps'\n";
  os.flush();
  if (!os) throw Error(Errc::truncated_file, "short write to " + path.string());
}

int cmd_verify(const VerifyCmdOpts& o) {
  const TimeSeries truth = load_series(o.data);
  std::vector<Ofs1Stack> stacks;
  stacks.reserve(o.forecasts.size());
  for (const std::string& p : o.forecasts) stacks.push_back(load_ofs1(p));

  const bool is_ensemble = stacks.front().var_index("mean") >= 0;
  for (const Ofs1Stack& s : stacks)
    if ((s.var_index("mean") >= 0) != is_ensemble)
      throw Error(Errc::invalid_argument,
                  "cannot mix ensemble and deterministic forecast files");

  VerifyOptions opt;
  opt.lat_weighted = o.lat_weighted;
  opt.ssr_corrected = o.ssr_corrected;
  opt.max_lead = o.max_lead;

  MetricSeries ms;
  if (is_ensemble) {
    std::vector<EnsembleForecast> forecasts;
    forecasts.reserve(stacks.size());
    for (const Ofs1Stack& s : stacks)
      forecasts.push_back(ensemble_from_stack(s, truth.epoch_day));
    ms = verify_ensemble(forecasts, truth, opt);
  } else {
    ms = verify_deterministic(stacks, truth, opt);
  }
  if (!o.leads.empty()) filter_leads(ms, o.leads);
  for (const std::string& w : ms.warnings) std::cerr << "ecast: warning: " << w << "\n";

  if (o.out.empty()) {
    write_metrics_csv(ms, std::cout);
    return 0;
  }
  ensure_parent(o.out);
  write_metrics_csv(ms, fs::path(o.out));
  std::vector<std::string> written{o.out};
  if (o.gnuplot) {
    write_gnuplot(o.out);
    written.push_back(o.out + ".gp");
  }

  std::ostringstream cmd;
  cmd << "ecast verify";
  for (const std::string& p : o.forecasts) cmd << " " << p;
  cmd << " --data " << o.data;
  if (o.lat_weighted) cmd << " --lat-weighted";
  if (o.ssr_corrected) cmd << " --ssr-corrected";
  if (o.max_lead > 0) cmd << " --max-lead " << o.max_lead;
  if (!o.leads.empty()) {
    cmd << " --leads ";
    for (std::size_t i = 0; i < o.leads.size(); ++i) cmd << (i ? "," : "") << o.leads[i];
  }
  if (o.gnuplot) cmd << " --gnuplot";
  cmd << " --out " << o.out;
  write_manifest(o.out, cmd.str(), written, "");
  std::cout << "wrote " << o.out << " (" << ms.leads.size() << " leads, " << ms.members
            << " members, " << ms.start_days << " start days)\n";
  return 0;
}

// --- report -----------------------------------------------------------------

struct ReportOpts {
  std::vector<std::string> csvs;
  std::vector<int> leads;
  std::string out;
};

int cmd_report(const ReportOpts& o) {
  const MetricSeries ref = read_metrics_csv(fs::path(o.csvs.front()));
  std::vector<MetricSeries> candidates;
  std::vector<std::string> names;
  for (std::size_t i = 1; i < o.csvs.size(); ++i) {
    candidates.push_back(read_metrics_csv(fs::path(o.csvs[i])));
    names.push_back(fs::path(o.csvs[i]).stem().string());
  }
  std::vector<int> leads = o.leads;
  if (leads.empty())
    for (const LeadMetrics& lm : ref.leads) leads.push_back(lm.lead);

  const std::string table = format_rmse_increase(ref, candidates, names, leads);

  // Wide layout on stdout: one row per candidate, one column per lead.
  std::vector<std::string> rows;
  {
    std::istringstream is(table);
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line))
      if (!line.empty()) rows.push_back(line);
  }
  std::size_t name_w = 9;
  for (const std::string& n : names) name_w = std::max(name_w, n.size());
  std::cout << "rmse increase vs " << fs::path(o.csvs.front()).stem().string() << " (%)\n";
  std::cout << std::string(name_w, ' ');
  for (int lead : leads) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%10s", ("lead " + std::to_string(lead)).c_str());
    std::cout << buf;
  }
  std::cout << "\n";
  for (std::size_t i = 0; i < names.size(); ++i) {
    std::cout << names[i] << std::string(name_w - names[i].size(), ' ');
    for (std::size_t j = 0; j < leads.size(); ++j) {
      const std::string& row = rows.at(i * leads.size() + j);
      char buf[16];
      std::snprintf(buf, sizeof buf, "%10s", row.substr(row.rfind(',') + 1).c_str());
      std::cout << buf;
    }
    std::cout << "\n";
  }

  if (!o.out.empty()) {
    ensure_parent(o.out);
    std::ofstream os(o.out, std::ios::binary);
    if (!os) throw Error(Errc::truncated_file, "cannot open " + o.out + " for writing");
    os << table;
    os.flush();
    if (!os) throw Error(Errc::truncated_file, "short write to " + o.out);
    std::ostringstream cmd;
    cmd << "ecast report";
    for (const std::string& p : o.csvs) cmd << " " << p;
    cmd << " --leads ";
    for (std::size_t i = 0; i < leads.size(); ++i) cmd << (i ? "," : "") << leads[i];
    cmd << " --out " << o.out;
    write_manifest(o.out, cmd.str(), {o.out}, "");
    std::cout << "wrote " << o.out << "\n";
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"ensemble sea-surface-temperature forecasting toolkit", "ecast"};
  app.set_version_flag("--version", std::string("ensemblecast ") + kVersion);
  app.require_subcommand(1);

  const auto grid_check = CLI::Validator(
      [](std::string& s) -> std::string {
        int lat = 0, lon = 0;
        if (!parse_grid_dims(s, lat, lon)) return "expected LATxLON, got '" + s + "'";
        return {};
      },
      "LATxLON");

  SynthOpts synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset (OFS1)");
  synth_cmd->add_option("--out", synth.out, "output OFS1 path")->required();
  synth_cmd->add_option("--config", synth.config, "experiment config supplying [data]");
  synth.days_opt = synth_cmd->add_option("--days", synth.days, "series length in days");
  synth.grid_opt =
      synth_cmd->add_option("--grid", synth.grid, "grid dims LATxLON")->check(grid_check);
  synth.seed_opt = synth_cmd->add_option("--seed", synth.seed, "generator seed");

  StatsOpts stats;
  CLI::App* stats_cmd =
      app.add_subcommand("stats", "dataset summary and normalization statistics");
  stats_cmd->add_option("--config", stats.config, "experiment config")->required();
  stats_cmd->add_option("--data", stats.data, "OFS1 dataset overriding [data]");

  TrainOpts train;
  CLI::App* train_cmd = app.add_subcommand("train", "train a stepper, write an OMP1 model");
  train_cmd->add_option("--config", train.config, "experiment config")->required();
  train_cmd->add_option("--data", train.data, "OFS1 dataset overriding [data]");
  train_cmd->add_option("--out", train.out,
                        "model path (default <output.directory>/model.omp1)");
  train_cmd->add_option("--seed", train.seed, "training shuffle seed");

  ForecastOpts fc;
  CLI::App* fc_cmd =
      app.add_subcommand("forecast", "deterministic autoregressive forecast");
  fc_cmd->add_option("--model", fc.model, "OMP1 model path")->required();
  fc_cmd->add_option("--data", fc.data, "OFS1 dataset with the initial states")->required();
  fc_cmd->add_option("--out", fc.out, "output OFS1 path")->required();
  fc_cmd->add_option("--start-day", fc.start_day, "day index of the last known state")
      ->required();
  fc_cmd->add_option("--starts", fc.starts, "number of start days")
      ->check(CLI::PositiveNumber);
  fc_cmd->add_option("--stride", fc.stride, "spacing between start days")
      ->check(CLI::PositiveNumber);
  fc_cmd->add_option("--horizon", fc.horizon, "forecast horizon in days")
      ->check(CLI::PositiveNumber);

  EnsembleOpts ens;
  CLI::App* ens_cmd =
      app.add_subcommand("ensemble", "perturbed-initial-state ensemble forecast");
  ens_cmd->add_option("--model", ens.model, "OMP1 model path")->required();
  ens_cmd->add_option("--data", ens.data, "OFS1 dataset with the initial states")
      ->required();
  ens_cmd->add_option("--out", ens.out, "output OFS1 path")->required();
  ens_cmd->add_option("--start-day", ens.start_day, "day index of the last known state")
      ->required();
  ens_cmd->add_option("--starts", ens.starts, "number of start days")
      ->check(CLI::PositiveNumber);
  ens_cmd->add_option("--stride", ens.stride, "spacing between start days")
      ->check(CLI::PositiveNumber);
  ens.horizon_opt = ens_cmd->add_option("--horizon", ens.horizon, "forecast horizon in days")
                        ->check(CLI::PositiveNumber);
  ens.members_opt =
      ens_cmd->add_option("--members", ens.members, "ensemble size")->check(CLI::PositiveNumber);
  ens.seed_opt = ens_cmd->add_option("--seed", ens.seed, "ensemble base seed");
  CLI::Option* preset_opt =
      ens_cmd->add_option("--preset", ens.preset, "named noise configuration")
          ->check(CLI::IsMember(preset_names()));
  CLI::Option* ens_cfg_opt =
      ens_cmd->add_option("--config", ens.config, "experiment config supplying [noise]");
  preset_opt->excludes(ens_cfg_opt);
  ens_cmd->add_flag("--split-files", ens.split_files,
                    "one OFS1 per member plus one for the mean");

  VerifyCmdOpts ver;
  CLI::App* ver_cmd = app.add_subcommand("verify", "score forecasts against observations");
  ver_cmd->add_option("forecasts", ver.forecasts, "forecast OFS1 files")
      ->required()
      ->expected(-1);
  ver_cmd->add_option("--data", ver.data, "truth OFS1 dataset")->required();
  ver_cmd->add_option("--out", ver.out, "metrics CSV path (default stdout)");
  ver_cmd->add_option("--leads", ver.leads, "comma-separated leads to report")
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  ver_cmd->add_option("--max-lead", ver.max_lead, "clamp the scored horizon")
      ->check(CLI::NonNegativeNumber);
  ver_cmd->add_flag("--lat-weighted", ver.lat_weighted, "cos-latitude cell weights");
  ver_cmd->add_flag("--ssr-corrected", ver.ssr_corrected,
                    "apply the sqrt((M+1)/M) spread-skill correction");
  ver_cmd->add_flag("--gnuplot", ver.gnuplot, "also emit a gnuplot script");

  ReportOpts rep;
  CLI::App* rep_cmd =
      app.add_subcommand("report", "rmse-increase table from metric CSVs");
  rep_cmd->add_option("csvs", rep.csvs, "reference CSV then candidate CSVs")
      ->required()
      ->expected(-2);
  rep_cmd->add_option("--leads", rep.leads, "comma-separated leads to report")
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  rep_cmd->add_option("--out", rep.out, "write the long-form CSV here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    std::cout << "ensemblecast " << kVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "ecast: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (synth_cmd->parsed()) return cmd_synth(synth);
    if (stats_cmd->parsed()) return cmd_stats(stats);
    if (train_cmd->parsed()) return cmd_train(train);
    if (fc_cmd->parsed()) return cmd_forecast(fc);
    if (ens_cmd->parsed()) {
      if (ens.config.empty() && ens.preset.empty()) {
        std::cerr << "ecast: ensemble needs --preset or --config with a [noise] section\n";
        return 2;
      }
      return cmd_ensemble(ens);
    }
    if (ver_cmd->parsed()) return cmd_verify(ver);
    if (rep_cmd->parsed()) return cmd_report(rep);
  } catch (const std::exception& e) {
    std::cerr << "ecast: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace ecast
