#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rdid/pipeline.hpp"

namespace rdid {

struct DynamicConfig {
  RdidType type = RdidType::Simple;
  CiType citype = CiType::BoundsYe;  // used by type 0 only
  Loss loss = Loss::L1;              // used by type 1 only
  std::optional<double> peval;       // used by type 2 only
  BootstrapPlan plan;
  bool bootstrap = true;
};

struct DynamicRow {
  double t = 0.0;
  std::size_t n_obs = 0;
  std::optional<RdidBounds> bounds;  // type 0
  std::optional<double> point;       // type 1 and 2
  std::optional<double> sb_hat;      // type 2
  std::optional<ConfidenceInterval> ci;
  std::optional<std::string> error;
};

// Distinct time values among post-period rows, ascending.
inline std::vector<double> post_period_levels(const PanelDataset& ds) {
  const auto post = ds.post();
  const auto tidx = ds.time_index();
  const auto levels = ds.time_levels();
  std::vector<bool> present(levels.size(), false);
  for (std::size_t i = 0; i < ds.n_obs(); ++i)
    if (post[i]) present[tidx[i]] = true;
  std::vector<double> out;
  for (std::size_t k = 0; k < levels.size(); ++k)
    if (present[k]) out.push_back(levels[k]);
  return out;
}

// Estimation sample for one post level: every pre-period row plus the post
// rows observed at time t.
inline std::vector<RowIndex> period_sample(const PanelDataset& ds, double t) {
  const auto post = ds.post();
  const auto time = ds.time();
  std::vector<RowIndex> rows;
  for (std::size_t i = 0; i < ds.n_obs(); ++i)
    if (!post[i] || time[i] == t) rows.push_back(i);
  return rows;
}

// Runs the configured estimator once per post-period level. A failing period
// produces a row carrying the error message.
inline std::vector<DynamicRow> rdid_by_period(const PanelDataset& ds, const DynamicConfig& cfg) {
  ds.roles().require_for(Command::RdidDy);
  const auto periods = post_period_levels(ds);
  if (periods.empty()) throw Error(ErrorCode::EmptyAfterFilter, "no post-period rows");
  const bool info_is_time = *ds.roles().info == *ds.roles().time;

  std::vector<DynamicRow> table;
  for (double t : periods) {
    DynamicRow row;
    row.t = t;
    const auto rows = period_sample(ds, t);
    row.n_obs = rows.size();
    try {
      RdidOptions opt;
      opt.type = cfg.type;
      opt.plan = cfg.plan;
      opt.bootstrap = cfg.bootstrap;
      opt.peval = cfg.peval;
      if (cfg.type == RdidType::LinearForecast && !cfg.peval && info_is_time) opt.peval = t;
      const RdidResult r = run_rdid(ds, rows, opt);
      switch (cfg.type) {
        case RdidType::Simple:
          row.bounds = r.bounds;
          if (cfg.citype == CiType::BoundsYe) row.ci = r.ci_bounds;
          else if (cfg.citype == CiType::AttYe) row.ci = r.ci_att;
          else row.ci = r.ci_union;
          break;
        case RdidType::PolicyOriented:
          for (const auto& po : r.po)
            if (po.estimate.loss == cfg.loss) {
              row.point = po.estimate.value;
              row.ci = po.ci;
            }
          break;
        case RdidType::LinearForecast:
          row.point = r.forecast->value;
          row.sb_hat = r.forecast->sb_hat;
          row.ci = r.forecast_ci;
          break;
      }
    } catch (const Error& e) {
      row.error = e.what();
    }
    table.push_back(std::move(row));
  }
  return table;
}

}  // namespace rdid
