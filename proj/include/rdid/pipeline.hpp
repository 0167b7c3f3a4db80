#pragma once

#include <optional>
#include <vector>

#include "rdid/estimation.hpp"
#include "rdid/inference.hpp"
#include "rdid/panel.hpp"

namespace rdid {

enum class RdidType { Simple = 0, PolicyOriented = 1, LinearForecast = 2 };

struct RdidOptions {
  RdidType type = RdidType::Simple;
  std::optional<double> peval;
  BootstrapPlan plan;
  bool bootstrap = true;
};

// Everything one estimation pass produces, before inference.
struct RdidPoint {
  EstimandValue estimand;
  SelectionBiasProfile profile;
  RdidBounds bounds;
  std::vector<PoRdidEstimate> po;
  std::optional<LinearForecast> forecast;
};

struct PoResult {
  PoRdidEstimate estimate;
  std::optional<ConfidenceInterval> ci;
};

struct RdidResult {
  RdidType type = RdidType::Simple;
  std::size_t n_obs = 0;
  double level = 95.0;
  EstimandValue estimand;
  SelectionBiasProfile profile;
  RdidBounds bounds;
  std::optional<ConfidenceInterval> ci_bounds;
  std::optional<ConfidenceInterval> ci_att;
  std::optional<ConfidenceInterval> ci_union;
  std::vector<PoResult> po;
  std::optional<LinearForecast> forecast;
  std::optional<ConfidenceInterval> forecast_ci;
  std::size_t bootstrap_draws = 0;
  std::size_t bootstrap_failures = 0;
};

inline RdidPoint estimate_rdid_point(const PanelDataset& ds, RowSpan rows, RdidType type, double peval) {
  const bool cov = ds.has_covariates();
  RdidPoint pt;
  pt.profile = selection_bias_profile(ds, rows, cov);
  pt.estimand = post_period_estimand(ds, rows, cov);
  pt.bounds = rdid_bounds(pt.estimand, pt.profile);
  if (type == RdidType::PolicyOriented)
    for (Loss loss : kAllLosses) pt.po.push_back(po_rdid(pt.estimand, pt.profile, loss));
  if (type == RdidType::LinearForecast) pt.forecast = sb_linear_forecast(pt.profile, pt.estimand, peval);
  return pt;
}

namespace detail {

inline bool same_levels(const SelectionBiasProfile& a, const SelectionBiasProfile& b) {
  if (a.entries.size() != b.entries.size()) return false;
  for (std::size_t k = 0; k < a.entries.size(); ++k)
    if (a.entries[k].level != b.entries[k].level) return false;
  return true;
}

}  // namespace detail

// The rdid command: bounds (type 0), PO-RDID under three losses (type 1) or
// the linear SB forecast (type 2), each with bootstrap inference.
inline RdidResult run_rdid(const PanelDataset& ds, RowSpan rows, const RdidOptions& opt) {
  opt.plan.validate();
  const double peval = opt.type == RdidType::LinearForecast ? opt.peval.value_or(default_peval(ds, rows)) : 0.0;
  const RdidPoint pt = estimate_rdid_point(ds, rows, opt.type, peval);

  RdidResult res;
  res.type = opt.type;
  res.n_obs = rows.size();
  res.level = opt.plan.level;
  res.estimand = pt.estimand;
  res.profile = pt.profile;
  res.bounds = pt.bounds;
  res.forecast = pt.forecast;
  for (const auto& po : pt.po) res.po.push_back({po, std::nullopt});
  if (!opt.bootstrap) return res;

  auto statistic = [&](RowSpan sample) {
    const RdidPoint b = estimate_rdid_point(ds, sample, opt.type, peval);
    std::vector<double> out;
    switch (opt.type) {
      case RdidType::Simple:
        if (!detail::same_levels(b.profile, pt.profile))
          throw Error(ErrorCode::DegenerateCell, "resample lost an info level");
        out.push_back(b.bounds.lower);
        out.push_back(b.bounds.upper);
        for (const auto& e : b.profile.entries) out.push_back(b.estimand.value - e.sb);
        break;
      case RdidType::PolicyOriented:
        for (const auto& po : b.po) out.push_back(po.value);
        break;
      case RdidType::LinearForecast:
        out.push_back(b.forecast->value);
        break;
    }
    return out;
  };
  const BootstrapDraws draws = cluster_bootstrap(ds, rows, opt.plan, statistic);
  res.bootstrap_draws = draws.size();
  res.bootstrap_failures = draws.failures;
  const double level = opt.plan.level;

  switch (opt.type) {
    case RdidType::Simple: {
      const auto lo = draws.column(0);
      const auto hi = draws.column(1);
      res.ci_bounds = ci_bounds_ye(lo, hi, pt.bounds.lower, pt.bounds.upper, level);
      res.ci_att = ci_att_ye(lo, hi, pt.bounds.lower, pt.bounds.upper, level);
      std::vector<std::vector<double>> per_level;
      std::vector<double> point;
      for (std::size_t k = 0; k < pt.profile.size(); ++k) {
        per_level.push_back(draws.column(2 + k));
        point.push_back(pt.estimand.value - pt.profile.entries[k].sb);
      }
      res.ci_union = ci_union(per_level, point, level);
      break;
    }
    case RdidType::PolicyOriented:
      for (std::size_t j = 0; j < res.po.size(); ++j) res.po[j].ci = ci_percentile(draws.column(j), level);
      break;
    case RdidType::LinearForecast:
      res.forecast_ci = ci_percentile(draws.column(0), level);
      break;
  }
  return res;
}

inline RdidResult run_rdid(const PanelDataset& ds, const RdidOptions& opt) {
  const auto rows = ds.all_rows();
  return run_rdid(ds, rows, opt);
}

}  // namespace rdid
