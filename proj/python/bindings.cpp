#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <memory>
#include <sstream>
#include <utility>

#include "ensemblecast/ensemble.hpp"
#include "ensemblecast/mesh.hpp"
#include "ensemblecast/presets.hpp"
#include "ensemblecast/train.hpp"
#include "ensemblecast/verify.hpp"
#include "ensemblecast/version.hpp"

namespace py = pybind11;
using namespace ecast;

namespace {

Var var_of(const std::string& name) {
  const auto v = var_from_name(name);
  if (!v) fail(Errc::unknown_variable, name);
  return *v;
}

py::array_t<float> array2(const float* src, int n_lat, int n_lon) {
  py::array_t<float> out({n_lat, n_lon});
  std::memcpy(out.mutable_data(), src, sizeof(float) * out.size());
  return out;
}

py::array_t<double> array_from_noise(const NoiseField& f) {
  std::vector<py::ssize_t> dims(f.shape.begin(), f.shape.end());
  py::array_t<double> out(dims);
  std::memcpy(out.mutable_data(), f.values.data(), sizeof(double) * f.values.size());
  return out;
}

std::pair<int, int> as_pair(const DayRange& r) { return {r.begin, r.end}; }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "ensemble sea-surface-temperature forecasting toolkit";
  m.attr("__version__") = kVersion;

  py::register_exception<Error>(m, "Error");

  py::class_<GridSpec, std::shared_ptr<GridSpec>>(m, "GridSpec")
      .def_property_readonly("n_lat", &GridSpec::n_lat)
      .def_property_readonly("n_lon", &GridSpec::n_lon)
      .def_property_readonly("n_sea", &GridSpec::n_sea)
      .def_property_readonly("lats",
                             [](const GridSpec& g) { return py::array_t<double>(
                                   static_cast<py::ssize_t>(g.lats.size()), g.lats.data()); })
      .def_property_readonly("lons",
                             [](const GridSpec& g) { return py::array_t<double>(
                                   static_cast<py::ssize_t>(g.lons.size()), g.lons.data()); })
      .def_property_readonly("sea_mask",
                             [](const GridSpec& g) {
                               py::array_t<std::uint8_t> out({g.n_lat(), g.n_lon()});
                               std::memcpy(out.mutable_data(), g.sea_mask.data(),
                                           g.sea_mask.size());
                               return out;
                             })
      .def("__repr__", [](const GridSpec& g) {
        std::ostringstream os;
        os << "GridSpec(" << g.n_lat() << "x" << g.n_lon() << ", " << g.n_sea() << " sea)";
        return os.str();
      });

  m.def("make_synthetic_grid",
        [](int n_lat, int n_lon) {
          return std::make_shared<GridSpec>(make_synthetic_grid(n_lat, n_lon));
        },
        py::arg("n_lat"), py::arg("n_lon"));
  m.def("make_uniform_grid",
        [](int n_lat, int n_lon, double lat0, double lat1, double lon0, double lon1) {
          return std::make_shared<GridSpec>(
              make_uniform_grid(n_lat, n_lon, lat0, lat1, lon0, lon1));
        },
        py::arg("n_lat"), py::arg("n_lon"), py::arg("lat0"), py::arg("lat1"), py::arg("lon0"),
        py::arg("lon1"));

  py::class_<TimeSeries>(m, "TimeSeries")
      .def_property_readonly(
          "grid", [](const TimeSeries& s) { return std::const_pointer_cast<GridSpec>(s.grid); })
      .def_property_readonly("n_time", &TimeSeries::n_time)
      .def_readwrite("epoch_day", &TimeSeries::epoch_day)
      .def_property_readonly("vars",
                             [](const TimeSeries& s) {
                               std::vector<std::string> names;
                               for (Var v : s.vars) names.emplace_back(var_name(v));
                               return names;
                             })
      .def("field",
           [](const TimeSeries& s, int t, const std::string& var) {
             if (t < 0 || t >= s.n_time()) fail(Errc::invalid_argument, "day index out of range");
             const int vi = s.var_index(var_of(var));
             if (vi < 0) fail(Errc::unknown_variable, var + " not in series");
             return array2(s.frame_at(t, vi), s.grid->n_lat(), s.grid->n_lon());
           },
           py::arg("t"), py::arg("var") = "sst",
           "One (n_lat, n_lon) frame; land cells are NaN (bathymetry: 0).")
      .def("to_numpy",
           [](const TimeSeries& s) {
             py::array_t<float> out({s.n_time(), static_cast<int>(s.vars.size()),
                                     s.grid->n_lat(), s.grid->n_lon()});
             std::memcpy(out.mutable_data(), s.data.data(), sizeof(float) * s.data.size());
             return out;
           },
           "Copy of the full (time, var, lat, lon) stack.")
      .def("save", [](const TimeSeries& s, const std::string& path) { save_series(s, path); },
           py::arg("path"))
      .def("__repr__", [](const TimeSeries& s) {
        std::ostringstream os;
        os << "TimeSeries(" << s.n_time() << " days, " << s.vars.size() << " vars, "
           << s.grid->n_lat() << "x" << s.grid->n_lon() << ")";
        return os.str();
      });

  m.def("make_synthetic_dataset",
        [](GridPtr grid, int n_days, std::uint64_t seed) {
          return make_synthetic_dataset(std::move(grid), n_days, seed);
        },
        py::arg("grid"), py::arg("n_days"), py::arg("seed"));
  m.def("load_series", [](const std::string& path) { return load_series(path); },
        py::arg("path"));

  py::class_<DatasetSplit>(m, "DatasetSplit")
      .def(py::init([](std::pair<int, int> train, std::pair<int, int> val,
                       std::pair<int, int> test) {
             return DatasetSplit{{train.first, train.second},
                                 {val.first, val.second},
                                 {test.first, test.second}};
           }),
           py::arg("train"), py::arg("val"), py::arg("test"))
      .def_property_readonly("train", [](const DatasetSplit& s) { return as_pair(s.train); })
      .def_property_readonly("val", [](const DatasetSplit& s) { return as_pair(s.val); })
      .def_property_readonly("test", [](const DatasetSplit& s) { return as_pair(s.test); })
      .def("validate", &DatasetSplit::validate, py::arg("n_time"));

  py::class_<VarStats>(m, "VarStats")
      .def_readonly("state_mean", &VarStats::state_mean)
      .def_readonly("diff_mean", &VarStats::diff_mean)
      .def_readonly("has_diff", &VarStats::has_diff)
      .def_property_readonly("state_std", &VarStats::state_std)
      .def_property_readonly("diff_std", &VarStats::diff_std);

  py::class_<NormStats>(m, "NormStats")
      .def("of", [](const NormStats& st, const std::string& var) { return st.of(var_of(var)); },
           py::arg("var"))
      .def("__contains__",
           [](const NormStats& st, const std::string& var) { return st.has(var_of(var)); });

  m.def("compute_norm_stats", &compute_norm_stats, py::arg("series"), py::arg("split"));

  py::class_<Stepper>(m, "Stepper")
      .def_property_readonly("kind", &Stepper::kind)
      .def_property_readonly("n_params", &Stepper::n_params);

  m.def("make_persistence", &make_persistence);
  m.def("make_linear_stencil", &make_linear_stencil);
  m.def("make_graph_stepper",
        [](GridPtr grid, const std::vector<int>& levels, int width, int proc_layers,
           std::uint64_t seed) {
          auto mesh = std::make_shared<HierMesh>(build_hier_mesh(*grid, levels));
          return make_graph_stepper(std::move(grid), std::move(mesh), width, proc_layers, seed);
        },
        py::arg("grid"), py::arg("levels"), py::arg("width") = 16, py::arg("proc_layers") = 2,
        py::arg("seed") = 0);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("lr", &TrainConfig::lr)
      .def_readwrite("warmup_epochs", &TrainConfig::warmup_epochs)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("rollout_steps", &TrainConfig::rollout_steps)
      .def_readwrite("beta1", &TrainConfig::beta1)
      .def_readwrite("beta2", &TrainConfig::beta2)
      .def_readwrite("weight_decay", &TrainConfig::weight_decay)
      .def_readwrite("adam_eps", &TrainConfig::adam_eps);

  py::class_<TrainResult>(m, "TrainResult")
      .def_property_readonly(
          "stepper", [](TrainResult& r) { return r.stepper.get(); },
          py::return_value_policy::reference_internal)
      .def_readonly("initial_loss", &TrainResult::initial_loss)
      .def_readonly("final_loss", &TrainResult::final_loss)
      .def_readonly("epoch_losses", &TrainResult::epoch_losses);

  m.def("train", &train, py::arg("params0"), py::arg("series"), py::arg("split"),
        py::arg("stats"), py::arg("config"), py::arg("seed"),
        py::call_guard<py::gil_scoped_release>());
  m.def("one_step_rmse",
        [](const Stepper& stepper, const TimeSeries& series, const NormStats& stats,
           std::pair<int, int> range) {
          return one_step_rmse(stepper, series, stats, DayRange{range.first, range.second});
        },
        py::arg("stepper"), py::arg("series"), py::arg("stats"), py::arg("range"),
        py::call_guard<py::gil_scoped_release>());
  m.def("gradient_check",
        [](Stepper& stepper, const TimeSeries& series, const NormStats& stats, int t0,
           int horizon, double epsilon) {
          return gradient_check(stepper, series, stats, t0, horizon, epsilon);
        },
        py::arg("stepper"), py::arg("series"), py::arg("stats"), py::arg("t0"),
        py::arg("horizon") = 1, py::arg("epsilon") = 1e-5,
        py::call_guard<py::gil_scoped_release>());

  py::class_<Trajectory>(m, "Trajectory")
      .def_property_readonly(
          "grid", [](const Trajectory& t) { return std::const_pointer_cast<GridSpec>(t.grid); })
      .def_readonly("start_day", &Trajectory::start_day)
      .def_property_readonly("horizon", &Trajectory::horizon)
      .def("state",
           [](const Trajectory& t, int lead) {
             if (lead < 1 || lead > t.horizon())
               fail(Errc::lead_out_of_range, "lead " + std::to_string(lead));
             return array2(t.states[lead - 1].data(), t.grid->n_lat(), t.grid->n_lon());
           },
           py::arg("lead"), "Forecast state at a 1-based lead, shape (n_lat, n_lon).")
      .def("to_numpy", [](const Trajectory& t) {
        py::array_t<float> out({t.horizon(), t.grid->n_lat(), t.grid->n_lon()});
        float* dst = out.mutable_data();
        const std::size_t n = t.grid->n_cells();
        for (int l = 0; l < t.horizon(); ++l, dst += n)
          std::memcpy(dst, t.states[l].data(), sizeof(float) * n);
        return out;
      });

  m.def("rollout_from_series", &rollout_from_series, py::arg("stepper"), py::arg("stats"),
        py::arg("series"), py::arg("start_day"), py::arg("horizon"),
        py::call_guard<py::gil_scoped_release>());
  m.def("observed_trajectory", &observed_trajectory, py::arg("series"), py::arg("start_day"),
        py::arg("horizon"));

  py::class_<GaussianCfg>(m, "GaussianCfg")
      .def(py::init([](double mu, double sigma) { return GaussianCfg{mu, sigma}; }),
           py::arg("mu") = 0.0, py::arg("sigma") = 0.0)
      .def_readwrite("mu", &GaussianCfg::mu)
      .def_readwrite("sigma", &GaussianCfg::sigma);

  py::class_<PerlinCfg>(m, "PerlinCfg")
      .def(py::init([](std::array<int, 3> res, std::array<bool, 3> tileable,
                       std::array<int, 3> shape) {
             PerlinCfg cfg;
             cfg.res = res;
             cfg.tileable = tileable;
             cfg.shape = shape;
             return cfg;
           }),
           py::arg("res"), py::arg("tileable") = std::array<bool, 3>{false, false, false},
           py::arg("shape") = std::array<int, 3>{0, 0, 0})
      .def_readwrite("res", &PerlinCfg::res)
      .def_readwrite("tileable", &PerlinCfg::tileable)
      .def_readwrite("shape", &PerlinCfg::shape);

  py::class_<FractalPerlinCfg>(m, "FractalPerlinCfg")
      .def(py::init([](std::array<int, 2> res, std::array<bool, 2> tileable, int octaves,
                       double persistence, int lacunarity, double alpha,
                       std::array<int, 2> shape) {
             FractalPerlinCfg cfg;
             cfg.res = res;
             cfg.tileable = tileable;
             cfg.octaves = octaves;
             cfg.persistence = persistence;
             cfg.lacunarity = lacunarity;
             cfg.alpha = alpha;
             cfg.shape = shape;
             return cfg;
           }),
           py::arg("res"), py::arg("tileable") = std::array<bool, 2>{false, false},
           py::arg("octaves") = 1, py::arg("persistence") = 0.5, py::arg("lacunarity") = 2,
           py::arg("alpha") = 1.0, py::arg("shape") = std::array<int, 2>{0, 0})
      .def_readwrite("res", &FractalPerlinCfg::res)
      .def_readwrite("tileable", &FractalPerlinCfg::tileable)
      .def_readwrite("octaves", &FractalPerlinCfg::octaves)
      .def_readwrite("persistence", &FractalPerlinCfg::persistence)
      .def_readwrite("lacunarity", &FractalPerlinCfg::lacunarity)
      .def_readwrite("alpha", &FractalPerlinCfg::alpha)
      .def_readwrite("shape", &FractalPerlinCfg::shape);

  m.def("gaussian_field",
        [](const std::vector<int>& shape, double mu, double sigma, std::uint64_t seed) {
          return array_from_noise(gaussian_field(shape, mu, sigma, seed));
        },
        py::arg("shape"), py::arg("mu"), py::arg("sigma"), py::arg("seed"));
  m.def("perlin_field2",
        [](std::array<int, 2> shape, std::array<int, 2> res, std::array<bool, 2> tileable,
           std::uint64_t seed) {
          return array_from_noise(perlin_field2(shape, res, tileable, seed));
        },
        py::arg("shape"), py::arg("res"),
        py::arg("tileable") = std::array<bool, 2>{false, false}, py::arg("seed") = 0);
  m.def("perlin_field3",
        [](std::array<int, 3> shape, std::array<int, 3> res, std::array<bool, 3> tileable,
           std::uint64_t seed) {
          return array_from_noise(perlin_field3(shape, res, tileable, seed));
        },
        py::arg("shape"), py::arg("res"),
        py::arg("tileable") = std::array<bool, 3>{false, false, false}, py::arg("seed") = 0);
  m.def("fractal_perlin_field",
        [](std::array<int, 2> shape, const FractalPerlinCfg& cfg, std::uint64_t seed) {
          return array_from_noise(fractal_perlin_field(shape, cfg, seed));
        },
        py::arg("shape"), py::arg("config"), py::arg("seed") = 0);

  m.def("noise_preset", &noise_preset, py::arg("name"));
  m.def("preset_names", &preset_names);
  m.def("preset_config_text", &preset_config_text, py::arg("name"));

  py::class_<EnsembleConfig>(m, "EnsembleConfig")
      .def(py::init([](int members, int horizon, std::uint64_t base_seed, NoiseConfig noise) {
             EnsembleConfig cfg;
             cfg.members = members;
             cfg.horizon = horizon;
             cfg.base_seed = base_seed;
             cfg.noise = std::move(noise);
             return cfg;
           }),
           py::arg("members") = 5, py::arg("horizon") = 1, py::arg("base_seed") = 0,
           py::arg("noise") = NoiseConfig{GaussianCfg{}})
      .def_readwrite("members", &EnsembleConfig::members)
      .def_readwrite("horizon", &EnsembleConfig::horizon)
      .def_readwrite("base_seed", &EnsembleConfig::base_seed)
      .def_readwrite("noise", &EnsembleConfig::noise)
      .def("validate", &EnsembleConfig::validate);

  py::class_<EnsembleForecast>(m, "EnsembleForecast")
      .def_readonly("config", &EnsembleForecast::config)
      .def_readonly("start_day", &EnsembleForecast::start_day)
      .def_readonly("epoch_day", &EnsembleForecast::epoch_day)
      .def_property_readonly("n_members", &EnsembleForecast::n_members)
      .def_property_readonly(
          "mean", [](EnsembleForecast& f) -> Trajectory& { return f.mean; },
          py::return_value_policy::reference_internal)
      .def("member",
           [](EnsembleForecast& f, int m) -> Trajectory& {
             if (m < 0 || m >= f.n_members())
               fail(Errc::invalid_argument, "member index out of range");
             return f.members[static_cast<std::size_t>(m)];
           },
           py::arg("m"), py::return_value_policy::reference_internal);

  m.def("run_ensemble_from_series", &run_ensemble_from_series, py::arg("stepper"),
        py::arg("stats"), py::arg("series"), py::arg("start_day"), py::arg("config"),
        py::arg("threads") = 1, py::call_guard<py::gil_scoped_release>());

  py::class_<LeadMetrics>(m, "LeadMetrics")
      .def_readonly("lead", &LeadMetrics::lead)
      .def_readonly("crps", &LeadMetrics::crps)
      .def_readonly("crps_skill", &LeadMetrics::crps_skill)
      .def_readonly("crps_spread", &LeadMetrics::crps_spread)
      .def_readonly("spread", &LeadMetrics::spread)
      .def_readonly("rmse", &LeadMetrics::rmse)
      .def_readonly("bias", &LeadMetrics::bias)
      .def_readonly("rmse_debiased", &LeadMetrics::rmse_debiased)
      .def_readonly("ssr", &LeadMetrics::ssr);

  py::class_<MetricSeries>(m, "MetricSeries")
      .def_readonly("variable", &MetricSeries::variable)
      .def_readonly("members", &MetricSeries::members)
      .def_readonly("start_days", &MetricSeries::start_days)
      .def_readonly("leads", &MetricSeries::leads)
      .def_readonly("warnings", &MetricSeries::warnings)
      .def("to_csv",
           [](const MetricSeries& s) {
             std::ostringstream os;
             write_metrics_csv(s, os);
             return os.str();
           })
      .def("write_csv",
           [](const MetricSeries& s, const std::string& path) { write_metrics_csv(s, path); },
           py::arg("path"));

  m.def("verify_ensemble",
        [](const std::vector<EnsembleForecast>& ensembles, const TimeSeries& truth,
           bool lat_weighted, bool ssr_corrected, int max_lead) {
          VerifyOptions opt;
          opt.lat_weighted = lat_weighted;
          opt.ssr_corrected = ssr_corrected;
          opt.max_lead = max_lead;
          return verify_ensemble(ensembles, truth, opt);
        },
        py::arg("ensembles"), py::arg("truth"), py::arg("lat_weighted") = false,
        py::arg("ssr_corrected") = false, py::arg("max_lead") = 0);

  py::class_<RmseBias>(m, "RmseBias")
      .def_readonly("rmse", &RmseBias::rmse)
      .def_readonly("bias", &RmseBias::bias)
      .def_readonly("rmse_debiased", &RmseBias::rmse_debiased);

  m.def("rmse_and_bias", &rmse_and_bias, py::arg("pred"), py::arg("truth"),
        py::arg("lat_weighted") = false);
  m.def("read_metrics_csv",
        [](const std::string& path) { return read_metrics_csv(std::filesystem::path(path)); },
        py::arg("path"));

  py::class_<LoadedModel>(m, "LoadedModel")
      .def_property_readonly(
          "stepper", [](LoadedModel& lm) { return lm.stepper.get(); },
          py::return_value_policy::reference_internal)
      .def_readonly("stats", &LoadedModel::stats);

  m.def("save_model",
        [](const Stepper& stepper, const NormStats& stats, const std::string& path) {
          save_model(stepper, stats, path);
        },
        py::arg("stepper"), py::arg("stats"), py::arg("path"));
  m.def("load_model",
        [](const std::string& path, GridPtr grid) { return load_model(path, std::move(grid)); },
        py::arg("path"), py::arg("grid"));

  m.def("save_ensemble",
        [](const EnsembleForecast& fc, const std::string& path) { save_ensemble(fc, path); },
        py::arg("forecast"), py::arg("path"));
  m.def("load_ensemble",
        [](const std::string& path, std::int64_t truth_epoch_day) {
          return ensemble_from_stack(load_ofs1(path), truth_epoch_day);
        },
        py::arg("path"), py::arg("truth_epoch_day"));
  m.def("save_forecast",
        [](const Trajectory& traj, std::int64_t lead1_epoch_day, const std::string& path) {
          save_ofs1(trajectory_stack(traj, lead1_epoch_day), path);
        },
        py::arg("trajectory"), py::arg("lead1_epoch_day"), py::arg("path"));
  m.def("load_forecast",
        [](const std::string& path, std::int64_t truth_epoch_day) {
          return trajectory_from_stack(load_ofs1(path), truth_epoch_day);
        },
        py::arg("path"), py::arg("truth_epoch_day"));
}
