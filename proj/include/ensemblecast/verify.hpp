#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ensemblecast/ensemble.hpp"

namespace ecast {

struct VerifyOptions {
  bool lat_weighted = false;      // cos-lat cell weights instead of uniform
  bool ssr_corrected = false;     // multiply the ratio by sqrt((M+1)/M)
  int max_lead = 0;               // 0 = full common horizon
};

struct LeadMetrics {
  int lead = 0;
  double crps = 0.0;
  double crps_skill = 0.0;
  double crps_spread = 0.0;
  double spread = 0.0;
  double rmse = 0.0;
  double bias = 0.0;
  double rmse_debiased = 0.0;
  double ssr = 0.0;
};

struct MetricSeries {
  std::string variable = "sst";
  int members = 0;
  int start_days = 0;
  std::vector<LeadMetrics> leads;
  std::vector<std::string> warnings;  // degenerate-ratio records
};

/// Pools all start days and sea cells per lead. crps = crps_skill -
/// crps_spread / 2 with the unbiased 1/(M(M-1)) pair term; spread is the
/// root of the pooled Bessel-corrected member variance; rmse/bias are for
/// the ensemble mean; ssr = spread / rmse_debiased (0 if spread is 0, +inf
/// if only the debiased rmse is, 0 with a warning if both are).
MetricSeries verify_ensemble(const std::vector<EnsembleForecast>& ensembles,
                             const TimeSeries& truth, const VerifyOptions& opt = {});

struct RmseBias {
  double rmse = 0.0;
  double bias = 0.0;
  double rmse_debiased = 0.0;
};

/// Deterministic per-lead scores of one trajectory against observations;
/// rmse_debiased = sqrt(rmse^2 - bias^2).
std::vector<RmseBias> rmse_and_bias(const Trajectory& pred, const TimeSeries& truth,
                                    bool lat_weighted = false);

/// Signed per-cell error (pred - truth) at a 1-based lead; land is missing.
Field bias_map(const Trajectory& pred, const TimeSeries& truth, int lead);

/// CSV rows `candidate,lead,rmse_increase_pct` with the percentage increase
/// 100 * (candidate - reference) / reference rounded to two decimals.
std::string format_rmse_increase(const MetricSeries& reference,
                                 const std::vector<MetricSeries>& candidates,
                                 const std::vector<std::string>& names,
                                 const std::vector<int>& leads);

/// Header `lead,crps,crps_skill,crps_spread,spread,rmse,bias,rmse_debiased,
/// ssr,members,start_days`; one row per lead, shortest round-trip decimals.
void write_metrics_csv(const MetricSeries& series, std::ostream& os);
void write_metrics_csv(const MetricSeries& series, const std::filesystem::path& path);

/// Parses a CSV produced by write_metrics_csv; warnings are not serialized
/// and come back empty. ParseError on any malformed line.
MetricSeries read_metrics_csv(std::istream& is, const std::string& origin);
MetricSeries read_metrics_csv(const std::filesystem::path& path);

}  // namespace ecast
