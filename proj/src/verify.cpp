#include "ensemblecast/verify.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "ensemblecast/errors.hpp"

namespace ecast {

namespace {

constexpr double kDegToRad = 0.017453292519943295;

/// Normalized weights over sea cells, indexed by sea ordinal.
std::vector<double> sea_weights(const GridSpec& grid, bool lat_weighted) {
  const auto sea = grid.sea_cells();
  std::vector<double> w(sea.size(), 1.0);
  if (lat_weighted) {
    for (std::size_t k = 0; k < sea.size(); ++k)
      w[k] = std::cos(grid.lats[sea[k] / grid.lons.size()] * kDegToRad);
  }
  double total = 0.0;
  for (double v : w) total += v;
  for (double& v : w) v /= total;
  return w;
}

int truth_var_index(const TimeSeries& truth) {
  const int i_sst = truth.var_index(Var::sst);
  if (i_sst < 0) throw Error(Errc::unknown_variable, "truth series has no sst variable");
  return i_sst;
}

void check_truth_covers(const TimeSeries& truth, int start_day, int lead) {
  const int day = start_day + lead;
  if (day < 0 || day >= truth.n_time())
    throw Error(Errc::lead_out_of_range,
                "truth does not cover start day " + std::to_string(start_day) + " + lead " +
                    std::to_string(lead));
}

std::string fmt_shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

MetricSeries verify_ensemble(const std::vector<EnsembleForecast>& ensembles,
                             const TimeSeries& truth, const VerifyOptions& opt) {
  if (ensembles.empty())
    throw Error(Errc::invalid_argument, "verification needs at least one start day");
  const GridPtr grid = ensembles.front().mean.grid;
  const int n_members = ensembles.front().n_members();
  if (n_members < 2)
    throw Error(Errc::single_member, "probabilistic verification needs >= 2 members");
  if (!grid->same_as(*truth.grid))
    throw Error(Errc::grid_mismatch, "forecast and truth grids differ");

  int horizon = ensembles.front().mean.horizon();
  for (const EnsembleForecast& f : ensembles) {
    if (f.n_members() != n_members)
      throw Error(Errc::invalid_argument, "start days disagree on the member count");
    if (!f.mean.grid->same_as(*grid))
      throw Error(Errc::grid_mismatch, "start days disagree on the grid");
    horizon = std::min(horizon, f.mean.horizon());
  }
  if (opt.max_lead > 0) horizon = std::min(horizon, opt.max_lead);
  if (horizon < 1) throw Error(Errc::invalid_argument, "no common lead to verify");
  for (const EnsembleForecast& f : ensembles) check_truth_covers(truth, f.start_day, horizon);

  const int i_sst = truth_var_index(truth);
  const auto sea = grid->sea_cells();
  const std::vector<double> w = sea_weights(*grid, opt.lat_weighted);
  const double inv_t = 1.0 / static_cast<double>(ensembles.size());
  const double m = static_cast<double>(n_members);
  const double inv_pairs = 1.0 / (m * (m - 1.0));
  const double ssr_factor = opt.ssr_corrected ? std::sqrt((m + 1.0) / m) : 1.0;

  MetricSeries out;
  out.members = n_members;
  out.start_days = static_cast<int>(ensembles.size());
  out.leads.reserve(horizon);

  std::vector<double> vals(n_members);
  for (int lead = 1; lead <= horizon; ++lead) {
    double skill_acc = 0.0, pair_acc = 0.0, var_acc = 0.0, err_acc = 0.0, err2_acc = 0.0;
    for (const EnsembleForecast& f : ensembles) {
      const float* obs = truth.frame_at(f.start_day + lead, i_sst);
      const std::vector<float>& mean_state = f.mean.states[lead - 1];
      for (std::size_t k = 0; k < sea.size(); ++k) {
        const std::size_t c = sea[k];
        const double o = obs[c];

        double skill = 0.0, sum = 0.0;
        for (int i = 0; i < n_members; ++i) {
          const double v = f.members[i].states[lead - 1][c];
          vals[i] = v;
          skill += std::abs(v - o);
          sum += v;
        }
        skill /= m;
        const double mean = sum / m;
        double var = 0.0;
        for (int i = 0; i < n_members; ++i) var += (vals[i] - mean) * (vals[i] - mean);
        var /= (m - 1.0);

        // sum_{i<j} |v_i - v_j| = sum_k (2k - M + 1) v_(k) over sorted values
        std::sort(vals.begin(), vals.end());
        double pair_sum = 0.0;
        for (int k2 = 0; k2 < n_members; ++k2)
          pair_sum += (2.0 * k2 - m + 1.0) * vals[k2];

        const double err = static_cast<double>(mean_state[c]) - o;
        skill_acc += w[k] * skill;
        pair_acc += w[k] * 2.0 * pair_sum * inv_pairs;
        var_acc += w[k] * var;
        err_acc += w[k] * err;
        err2_acc += w[k] * err * err;
      }
    }

    LeadMetrics lm;
    lm.lead = lead;
    lm.crps_skill = skill_acc * inv_t;
    lm.crps_spread = pair_acc * inv_t;
    lm.crps = lm.crps_skill - 0.5 * lm.crps_spread;
    lm.spread = std::sqrt(var_acc * inv_t);
    lm.bias = err_acc * inv_t;
    lm.rmse = std::sqrt(err2_acc * inv_t);
    lm.rmse_debiased = std::sqrt(std::max(0.0, lm.rmse * lm.rmse - lm.bias * lm.bias));
    if (lm.spread == 0.0 && lm.rmse_debiased == 0.0) {
      lm.ssr = 0.0;
      out.warnings.push_back("lead " + std::to_string(lead) +
                             ": spread and debiased rmse both zero; ssr reported as 0");
    } else if (lm.spread == 0.0) {
      lm.ssr = 0.0;
    } else if (lm.rmse_debiased == 0.0) {
      lm.ssr = std::numeric_limits<double>::infinity();
    } else {
      lm.ssr = ssr_factor * lm.spread / lm.rmse_debiased;
    }
    out.leads.push_back(lm);
  }
  return out;
}

std::vector<RmseBias> rmse_and_bias(const Trajectory& pred, const TimeSeries& truth,
                                    bool lat_weighted) {
  if (!pred.grid->same_as(*truth.grid))
    throw Error(Errc::grid_mismatch, "prediction and truth grids differ");
  const int i_sst = truth_var_index(truth);
  const auto sea = pred.grid->sea_cells();
  const std::vector<double> w = sea_weights(*pred.grid, lat_weighted);

  std::vector<RmseBias> out;
  out.reserve(pred.states.size());
  for (int lead = 1; lead <= pred.horizon(); ++lead) {
    check_truth_covers(truth, pred.start_day, lead);
    const float* obs = truth.frame_at(pred.start_day + lead, i_sst);
    const std::vector<float>& state = pred.states[lead - 1];
    double err_acc = 0.0, err2_acc = 0.0;
    for (std::size_t k = 0; k < sea.size(); ++k) {
      const std::size_t c = sea[k];
      const double err = static_cast<double>(state[c]) - static_cast<double>(obs[c]);
      err_acc += w[k] * err;
      err2_acc += w[k] * err * err;
    }
    RmseBias rb;
    rb.bias = err_acc;
    rb.rmse = std::sqrt(err2_acc);
    rb.rmse_debiased = std::sqrt(std::max(0.0, rb.rmse * rb.rmse - rb.bias * rb.bias));
    out.push_back(rb);
  }
  return out;
}

Field bias_map(const Trajectory& pred, const TimeSeries& truth, int lead) {
  if (lead < 1 || lead > pred.horizon())
    throw Error(Errc::lead_out_of_range,
                "lead " + std::to_string(lead) + " outside horizon 1.." +
                    std::to_string(pred.horizon()));
  if (!pred.grid->same_as(*truth.grid))
    throw Error(Errc::grid_mismatch, "prediction and truth grids differ");
  const int i_sst = truth_var_index(truth);
  check_truth_covers(truth, pred.start_day, lead);

  Field out = make_field(pred.grid, Var::sst);
  const float* obs = truth.frame_at(pred.start_day + lead, i_sst);
  const std::vector<float>& state = pred.states[lead - 1];
  for (std::size_t c = 0; c < pred.grid->n_cells(); ++c)
    out.values[c] = pred.grid->is_sea(c)
                        ? static_cast<float>(static_cast<double>(state[c]) -
                                             static_cast<double>(obs[c]))
                        : missing_value();
  return out;
}

namespace {

const LeadMetrics& lead_entry(const MetricSeries& s, int lead, const std::string& who) {
  for (const LeadMetrics& lm : s.leads)
    if (lm.lead == lead) return lm;
  throw Error(Errc::lead_mismatch, who + " has no lead " + std::to_string(lead));
}

}  // namespace

std::string format_rmse_increase(const MetricSeries& reference,
                                 const std::vector<MetricSeries>& candidates,
                                 const std::vector<std::string>& names,
                                 const std::vector<int>& leads) {
  if (candidates.size() != names.size())
    throw Error(Errc::invalid_argument, "one name per candidate required");
  std::string out = "candidate,lead,rmse_increase_pct\n";
  char buf[64];
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    for (int lead : leads) {
      const double ref = lead_entry(reference, lead, "reference").rmse;
      const double cand = lead_entry(candidates[i], lead, names[i]).rmse;
      if (ref == 0.0)
        throw Error(Errc::invalid_argument,
                    "reference rmse is zero at lead " + std::to_string(lead));
      std::snprintf(buf, sizeof buf, "%s,%d,%.2f\n", names[i].c_str(), lead,
                    100.0 * (cand - ref) / ref);
      out += buf;
    }
  }
  return out;
}

void write_metrics_csv(const MetricSeries& series, std::ostream& os) {
  os << "lead,crps,crps_skill,crps_spread,spread,rmse,bias,rmse_debiased,ssr,members,"
        "start_days\n";
  for (const LeadMetrics& lm : series.leads) {
    os << lm.lead << ',' << fmt_shortest(lm.crps) << ',' << fmt_shortest(lm.crps_skill)
       << ',' << fmt_shortest(lm.crps_spread) << ',' << fmt_shortest(lm.spread) << ','
       << fmt_shortest(lm.rmse) << ',' << fmt_shortest(lm.bias) << ','
       << fmt_shortest(lm.rmse_debiased) << ',' << fmt_shortest(lm.ssr) << ','
       << series.members << ',' << series.start_days << '\n';
  }
}

void write_metrics_csv(const MetricSeries& series, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(Errc::truncated_file, "cannot open " + path.string() + " for writing");
  write_metrics_csv(series, os);
  os.flush();
  if (!os) throw Error(Errc::truncated_file, "short write to " + path.string());
}

namespace {

[[noreturn]] void csv_fail(const std::string& origin, int line, const std::string& what) {
  throw Error(Errc::parse_error, origin + ":" + std::to_string(line) + ": " + what);
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = s.find(',', pos);
    if (comma == std::string::npos) {
      out.push_back(s.substr(pos));
      return out;
    }
    out.push_back(s.substr(pos, comma - pos));
    pos = comma + 1;
  }
}

double csv_double(const std::string& tok, const std::string& origin, int line) {
  if (tok == "inf") return std::numeric_limits<double>::infinity();
  if (tok == "-inf") return -std::numeric_limits<double>::infinity();
  if (tok == "nan" || tok == "-nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const char* b = tok.data();
  const char* e = b + tok.size();
  const auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc() || res.ptr != e)
    csv_fail(origin, line, "bad number '" + tok + "'");
  return v;
}

int csv_int(const std::string& tok, const std::string& origin, int line) {
  int v = 0;
  const char* b = tok.data();
  const char* e = b + tok.size();
  const auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc() || res.ptr != e)
    csv_fail(origin, line, "bad integer '" + tok + "'");
  return v;
}

}  // namespace

MetricSeries read_metrics_csv(std::istream& is, const std::string& origin) {
  static constexpr const char* kHeader =
      "lead,crps,crps_skill,crps_spread,spread,rmse,bias,rmse_debiased,ssr,members,"
      "start_days";
  std::string line;
  if (!std::getline(is, line)) csv_fail(origin, 1, "empty metrics csv");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader) csv_fail(origin, 1, "unrecognized metrics header");

  MetricSeries out;
  int line_no = 1;
  bool first = true;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != 11)
      csv_fail(origin, line_no, "expected 11 fields, got " + std::to_string(cells.size()));
    LeadMetrics lm;
    lm.lead = csv_int(cells[0], origin, line_no);
    lm.crps = csv_double(cells[1], origin, line_no);
    lm.crps_skill = csv_double(cells[2], origin, line_no);
    lm.crps_spread = csv_double(cells[3], origin, line_no);
    lm.spread = csv_double(cells[4], origin, line_no);
    lm.rmse = csv_double(cells[5], origin, line_no);
    lm.bias = csv_double(cells[6], origin, line_no);
    lm.rmse_debiased = csv_double(cells[7], origin, line_no);
    lm.ssr = csv_double(cells[8], origin, line_no);
    const int members = csv_int(cells[9], origin, line_no);
    const int start_days = csv_int(cells[10], origin, line_no);
    if (first) {
      out.members = members;
      out.start_days = start_days;
      first = false;
    } else if (members != out.members || start_days != out.start_days) {
      csv_fail(origin, line_no, "inconsistent members/start_days across rows");
    }
    out.leads.push_back(lm);
  }
  return out;
}

MetricSeries read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(Errc::truncated_file, "cannot open " + path.string());
  return read_metrics_csv(is, path.filename().string());
}

}  // namespace ecast
