#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rdid/estimation.hpp"
#include "rdid/inference.hpp"

namespace rdid {

// Cohort code 0 marks the never-treated group.
inline constexpr double kNeverTreated = 0.0;

struct StagPeriods {
  double g_min = 0.0;
  std::vector<double> cohorts;       // treated cohorts, ascending
  std::vector<double> post_periods;  // ascending
  std::vector<double> info_levels;   // ascending
  bool post_from_role = false;
  bool info_from_role = false;
};

namespace detail {

inline std::vector<double> sorted_unique(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace detail

// Post periods default to t >= smallest treated cohort and the information
// set to the periods before it; explicit post/info roles override.
inline StagPeriods resolve_stag_defaults(const PanelDataset& ds) {
  ds.roles().require_for(Command::RdidStag);
  const auto cohort = ds.cohort();
  const auto time = ds.time();
  StagPeriods sp;
  bool any_never = false;
  std::vector<double> treated;
  for (double g : cohort) {
    if (g == kNeverTreated) any_never = true;
    else treated.push_back(g);
  }
  if (treated.empty()) throw Error(ErrorCode::NoTreatedCohort, "every row is in cohort 0");
  if (!any_never) throw Error(ErrorCode::NoNeverTreated, "no rows with cohort 0");
  sp.cohorts = detail::sorted_unique(std::move(treated));
  sp.g_min = sp.cohorts.front();
  sp.post_from_role = ds.roles().post.has_value();
  sp.info_from_role = ds.roles().info.has_value();

  std::vector<double> post_t;
  std::vector<double> info;
  for (std::size_t i = 0; i < ds.n_obs(); ++i) {
    const bool is_post = sp.post_from_role ? ds.post()[i] != 0 : time[i] >= sp.g_min;
    if (is_post) post_t.push_back(time[i]);
    else info.push_back(sp.info_from_role ? ds.info()[i] : time[i]);
  }
  sp.post_periods = detail::sorted_unique(std::move(post_t));
  sp.info_levels = detail::sorted_unique(std::move(info));
  if (sp.info_levels.empty()) throw Error(ErrorCode::NoPrePeriods, "no periods before the first treated cohort");
  if (sp.post_periods.empty()) throw Error(ErrorCode::EmptyAfterFilter, "no post-period rows");
  return sp;
}

// Per-row slots into the cohort/period grid, computed once per dataset.
struct StagLayout {
  StagPeriods periods;
  std::vector<std::int32_t> cohort_slot;  // 0 never treated, k+1 for periods.cohorts[k]
  std::vector<std::int32_t> period_slot;  // info levels first, then post periods
  std::vector<std::vector<std::uint8_t>> cohort_indicator;  // per treated cohort: row in cohort

  std::size_t n_info() const { return periods.info_levels.size(); }
  std::size_t n_post() const { return periods.post_periods.size(); }
  std::size_t n_slots() const { return n_info() + n_post(); }

  static StagLayout build(const PanelDataset& ds) {
    StagLayout lay;
    lay.periods = resolve_stag_defaults(ds);
    const auto& sp = lay.periods;
    const std::size_t n = ds.n_obs();
    lay.cohort_slot.resize(n);
    lay.period_slot.resize(n);
    lay.cohort_indicator.assign(sp.cohorts.size(), std::vector<std::uint8_t>(n, 0));
    auto find = [](const std::vector<double>& v, double x) {
      return static_cast<std::int32_t>(std::lower_bound(v.begin(), v.end(), x) - v.begin());
    };
    for (std::size_t i = 0; i < n; ++i) {
      const double g = ds.cohort()[i];
      if (g == kNeverTreated) {
        lay.cohort_slot[i] = 0;
      } else {
        const auto k = find(sp.cohorts, g);
        lay.cohort_slot[i] = k + 1;
        lay.cohort_indicator[static_cast<std::size_t>(k)][i] = 1;
      }
      const double t = ds.time()[i];
      const bool is_post = sp.post_from_role ? ds.post()[i] != 0 : t >= sp.g_min;
      if (is_post) lay.period_slot[i] = static_cast<std::int32_t>(lay.n_info()) + find(sp.post_periods, t);
      else lay.period_slot[i] = find(sp.info_levels, sp.info_from_role ? ds.info()[i] : t);
    }
    return lay;
  }

  std::size_t cohort_index(double g) const {
    if (g == kNeverTreated) throw Error(ErrorCode::InvalidArgument, "cohort 0 is the control group");
    auto it = std::lower_bound(periods.cohorts.begin(), periods.cohorts.end(), g);
    if (it == periods.cohorts.end() || *it != g)
      throw Error(ErrorCode::InvalidArgument, "unknown cohort " + csv::format_double(g));
    return static_cast<std::size_t>(it - periods.cohorts.begin());
  }
};

// One cohort's estimates against the never-treated group.
struct CohortPoint {
  double g = 0.0;
  std::optional<SelectionBiasProfile> profile;
  std::optional<std::string> profile_error;
  std::vector<std::optional<EstimandValue>> theta;  // per post period
  std::vector<std::optional<std::string>> theta_error;
};

namespace detail {

struct CellSums {
  double sum = 0.0;
  std::size_t n = 0;
};

// Point estimates for all cohorts on a row sample.
inline std::vector<CohortPoint> staggered_point(const PanelDataset& ds, const StagLayout& lay, RowSpan rows) {
  const std::size_t n_coh = lay.periods.cohorts.size();
  const std::size_t n_slots = lay.n_slots();
  const bool cov = ds.has_covariates();
  std::vector<CohortPoint> out(n_coh);

  if (!cov) {
    const auto y = ds.outcome();
    std::vector<CellSums> acc((n_coh + 1) * n_slots);
    for (RowIndex i : rows) {
      auto& c = acc[static_cast<std::size_t>(lay.cohort_slot[i]) * n_slots +
                    static_cast<std::size_t>(lay.period_slot[i])];
      c.sum += y[i];
      ++c.n;
    }
    auto diff = [&](std::size_t coh, std::size_t slot) -> std::optional<double> {
      const auto& a = acc[(coh + 1) * n_slots + slot];
      const auto& b = acc[slot];
      if (a.n == 0 || b.n == 0) return std::nullopt;
      return a.sum / static_cast<double>(a.n) - b.sum / static_cast<double>(b.n);
    };
    for (std::size_t c = 0; c < n_coh; ++c) {
      auto& cp = out[c];
      cp.g = lay.periods.cohorts[c];
      SelectionBiasProfile prof;
      std::size_t total = 0;
      for (std::size_t k = 0; k < lay.n_info(); ++k)
        total += acc[(c + 1) * n_slots + k].n + acc[k].n;
      for (std::size_t k = 0; k < lay.n_info(); ++k) {
        const auto d = diff(c, k);
        if (!d) {
          cp.profile_error = std::string("DegenerateCell: info level ") + csv::format_double(lay.periods.info_levels[k]);
          break;
        }
        const std::size_t nk = acc[(c + 1) * n_slots + k].n + acc[k].n;
        prof.entries.push_back(
            {lay.periods.info_levels[k], *d, static_cast<double>(nk) / static_cast<double>(total), nk});
      }
      if (!cp.profile_error) cp.profile = std::move(prof);
      for (std::size_t p = 0; p < lay.n_post(); ++p) {
        const auto d = diff(c, lay.n_info() + p);
        if (d) {
          cp.theta.emplace_back(EstimandValue{*d, EstimandKind::SimpleDim});
          cp.theta_error.emplace_back();
        } else {
          cp.theta.emplace_back();
          cp.theta_error.emplace_back("DegenerateCell: period " + csv::format_double(lay.periods.post_periods[p]));
        }
      }
    }
    return out;
  }

  // Covariate-adjusted path: one doubly robust contrast per (cohort, period).
  std::vector<std::vector<RowIndex>> by_cell((n_coh + 1) * n_slots);
  for (RowIndex i : rows)
    by_cell[static_cast<std::size_t>(lay.cohort_slot[i]) * n_slots + static_cast<std::size_t>(lay.period_slot[i])]
        .push_back(i);
  auto contrast = [&](std::size_t c, std::size_t slot, const std::string& where) {
    std::vector<RowIndex> cell = by_cell[(c + 1) * n_slots + slot];
    const auto& ctrl = by_cell[slot];
    cell.insert(cell.end(), ctrl.begin(), ctrl.end());
    return dr_diff_in_means(ds.outcome(), lay.cohort_indicator[c], ds.covariates(), cell, where);
  };
  for (std::size_t c = 0; c < n_coh; ++c) {
    auto& cp = out[c];
    cp.g = lay.periods.cohorts[c];
    try {
      SelectionBiasProfile prof;
      std::size_t total = 0;
      for (std::size_t k = 0; k < lay.n_info(); ++k)
        total += by_cell[(c + 1) * n_slots + k].size() + by_cell[k].size();
      for (std::size_t k = 0; k < lay.n_info(); ++k) {
        const std::size_t nk = by_cell[(c + 1) * n_slots + k].size() + by_cell[k].size();
        const auto e = contrast(c, k, "info level " + csv::format_double(lay.periods.info_levels[k]));
        prof.entries.push_back(
            {lay.periods.info_levels[k], e.value, static_cast<double>(nk) / static_cast<double>(total), nk});
      }
      cp.profile = std::move(prof);
    } catch (const Error& e) {
      cp.profile_error = e.what();
    }
    for (std::size_t p = 0; p < lay.n_post(); ++p) {
      try {
        cp.theta.emplace_back(
            contrast(c, lay.n_info() + p, "period " + csv::format_double(lay.periods.post_periods[p])));
        cp.theta_error.emplace_back();
      } catch (const Error& e) {
        cp.theta.emplace_back();
        cp.theta_error.emplace_back(e.what());
      }
    }
  }
  return out;
}

}  // namespace detail

// Selection bias of cohort g against the never-treated cohort at each info period.
inline SelectionBiasProfile cohort_sb_profile(const PanelDataset& ds, double g) {
  const StagLayout lay = StagLayout::build(ds);
  const std::size_t c = lay.cohort_index(g);
  const auto rows = ds.all_rows();
  const auto pts = detail::staggered_point(ds, lay, rows);
  if (pts[c].profile_error) {
    const auto& msg = *pts[c].profile_error;
    const bool degenerate = msg.rfind("DegenerateCell", 0) == 0;
    throw Error(degenerate ? ErrorCode::DegenerateCell : ErrorCode::SingularDesign,
                degenerate ? msg.substr(std::string("DegenerateCell: ").size()) : msg);
  }
  return *pts[c].profile;
}

struct CohortTimeCell {
  double g = 0.0;
  double t = 0.0;
  std::optional<EstimandValue> theta_dim;
  std::optional<RdidBounds> bounds;
  std::optional<ConfidenceInterval> ci;
  std::optional<std::string> error;
};

struct StaggeredOptions {
  BootstrapPlan plan;
  bool bootstrap = true;
};

struct StaggeredResult {
  StagPeriods periods;
  std::vector<CohortTimeCell> cells;  // cohort-major, post periods ascending
  std::map<double, SelectionBiasProfile> profiles;
  std::size_t n_obs = 0;
  std::size_t bootstrap_draws = 0;
  std::size_t bootstrap_failures = 0;
};

// Bounds on ATT(g,t) for every treated cohort and post period, with type-1
// intervals from one joint cluster bootstrap over the whole table.
inline StaggeredResult staggered_table(const PanelDataset& ds, const StaggeredOptions& opt) {
  const StagLayout lay = StagLayout::build(ds);
  const auto rows = ds.all_rows();
  const auto pts = detail::staggered_point(ds, lay, rows);

  StaggeredResult res;
  res.periods = lay.periods;
  res.n_obs = ds.n_obs();
  std::vector<std::size_t> valid;  // indices into res.cells
  for (const auto& cp : pts) {
    if (cp.profile) res.profiles.emplace(cp.g, *cp.profile);
    for (std::size_t p = 0; p < lay.n_post(); ++p) {
      CohortTimeCell cell;
      cell.g = cp.g;
      cell.t = lay.periods.post_periods[p];
      if (cp.profile_error) {
        cell.error = cp.profile_error;
      } else if (cp.theta_error[p]) {
        cell.error = cp.theta_error[p];
      } else {
        cell.theta_dim = cp.theta[p];
        cell.bounds = rdid_bounds(*cp.theta[p], *cp.profile);
        valid.push_back(res.cells.size());
      }
      res.cells.push_back(std::move(cell));
    }
  }
  if (!opt.bootstrap || valid.empty()) return res;

  const std::size_t n_post = lay.n_post();
  auto statistic = [&](RowSpan sample) {
    const auto b = detail::staggered_point(ds, lay, sample);
    std::vector<double> out;
    out.reserve(2 * valid.size());
    for (std::size_t v : valid) {
      const std::size_t c = v / n_post;
      const std::size_t p = v % n_post;
      if (!b[c].profile || !b[c].theta[p]) throw Error(ErrorCode::DegenerateCell, "resampled cell");
      const auto bounds = rdid_bounds(*b[c].theta[p], *b[c].profile);
      out.push_back(bounds.lower);
      out.push_back(bounds.upper);
    }
    return out;
  };
  try {
    const auto draws = cluster_bootstrap(ds, rows, opt.plan, statistic);
    res.bootstrap_draws = draws.size();
    res.bootstrap_failures = draws.failures;
    for (std::size_t j = 0; j < valid.size(); ++j) {
      auto& cell = res.cells[valid[j]];
      cell.ci = ci_bounds_ye(draws.column(2 * j), draws.column(2 * j + 1), cell.bounds->lower, cell.bounds->upper,
                             opt.plan.level);
    }
  } catch (const Error& e) {
    for (std::size_t v : valid) res.cells[v].error = e.what();
  }
  return res;
}

}  // namespace rdid
