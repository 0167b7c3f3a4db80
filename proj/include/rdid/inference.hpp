#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "rdid/error.hpp"
#include "rdid/normal.hpp"
#include "rdid/panel.hpp"
#include "rdid/rng.hpp"

namespace rdid {

struct BootstrapPlan {
  std::size_t replicates = 500;
  std::uint64_t seed = 20240101;
  double level = 95.0;
  // Worker threads; 0 picks the hardware concurrency. Results never depend on it.
  unsigned threads = 0;

  void validate() const {
    if (replicates < 2) throw Error(ErrorCode::InvalidArgument, "at least two bootstrap replicates are required");
    if (!(level > 0.0 && level < 100.0)) throw Error(ErrorCode::InvalidArgument, "level must lie in (0,100)");
  }
};

inline constexpr double kMinSuccessShare = 0.8;

// Successful replicate statistics in replicate order.
struct BootstrapDraws {
  std::vector<std::vector<double>> draws;
  std::size_t requested = 0;
  std::size_t failures = 0;

  std::size_t size() const { return draws.size(); }

  std::vector<double> column(std::size_t j) const {
    std::vector<double> out;
    out.reserve(draws.size());
    for (const auto& d : draws) out.push_back(d.at(j));
    return out;
  }
};

namespace detail {

inline unsigned resolve_threads(unsigned requested, std::size_t work) {
  unsigned t = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::min<std::size_t>(t, std::max<std::size_t>(work, 1)));
}

// Runs body(i) for i in [0, count) on a small worker pool. The first
// exception thrown by any body is rethrown after all workers stop.
template <class Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body) {
  threads = resolve_threads(threads, count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace detail

// Rows of each cluster present in `rows`, clusters in order of first appearance.
inline std::vector<std::vector<RowIndex>> group_by_cluster(const PanelDataset& ds, RowSpan rows) {
  const auto cluster = ds.cluster();
  std::vector<std::int64_t> slot(ds.n_clusters(), -1);
  std::vector<std::vector<RowIndex>> groups;
  for (RowIndex i : rows) {
    auto& s = slot[cluster[i]];
    if (s < 0) {
      s = static_cast<std::int64_t>(groups.size());
      groups.emplace_back();
    }
    groups[static_cast<std::size_t>(s)].push_back(i);
  }
  return groups;
}

// Draws |clusters| clusters with replacement for replicate r of the plan.
inline std::vector<RowIndex> resample_clusters(const std::vector<std::vector<RowIndex>>& groups,
                                               std::uint64_t seed, std::size_t replicate) {
  Rng rng = Rng::stream(seed, {static_cast<std::uint64_t>(replicate)});
  std::vector<RowIndex> rows;
  std::size_t expected = 0;
  for (const auto& g : groups) expected += g.size();
  rows.reserve(expected + expected / 8);
  for (std::size_t k = 0; k < groups.size(); ++k) {
    const auto& g = groups[rng.below(groups.size())];
    rows.insert(rows.end(), g.begin(), g.end());
  }
  return rows;
}

// Cluster bootstrap of `statistic` (a callable taking RowSpan and returning
// std::vector<double>). A replicate whose statistic throws rdid::Error is a
// failure; more than 20% failures aborts with TooManyFailures.
template <class Statistic>
BootstrapDraws cluster_bootstrap(const PanelDataset& ds, RowSpan rows, const BootstrapPlan& plan,
                                 Statistic&& statistic) {
  plan.validate();
  const auto groups = group_by_cluster(ds, rows);
  if (groups.empty()) throw Error(ErrorCode::EmptyAfterFilter, "bootstrap sample is empty");

  std::vector<std::optional<std::vector<double>>> results(plan.replicates);
  detail::parallel_for(plan.replicates, plan.threads, [&](std::size_t r) {
    const auto sample = resample_clusters(groups, plan.seed, r);
    try {
      results[r] = statistic(RowSpan(sample));
    } catch (const Error&) {
      results[r].reset();
    }
  });

  BootstrapDraws out;
  out.requested = plan.replicates;
  for (auto& r : results) {
    if (r) out.draws.push_back(std::move(*r));
    else ++out.failures;
  }
  if (static_cast<double>(out.draws.size()) < kMinSuccessShare * static_cast<double>(plan.replicates))
    throw Error(ErrorCode::TooManyFailures, std::to_string(out.failures) + " of " +
                                                std::to_string(plan.replicates) + " bootstrap replicates failed");
  return out;
}

template <class Statistic>
BootstrapDraws cluster_bootstrap(const PanelDataset& ds, const BootstrapPlan& plan, Statistic&& statistic) {
  const auto rows = ds.all_rows();
  return cluster_bootstrap(ds, rows, plan, std::forward<Statistic>(statistic));
}

inline double sample_sd(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

// Linear-interpolation quantile of sorted data: position h = (n-1)p,
// x[floor h] + (h - floor h)(x[floor h + 1] - x[floor h]).
inline double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error(ErrorCode::InvalidArgument, "quantile of empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

enum class CiType { BoundsYe = 1, AttYe = 2, Union = 3, Percentile = 4 };

inline const char* ci_type_name(CiType t) {
  switch (t) {
    case CiType::BoundsYe: return "bounds_ye";
    case CiType::AttYe: return "att_ye";
    case CiType::Union: return "union";
    case CiType::Percentile: return "percentile";
  }
  return "?";
}

struct ConfidenceInterval {
  CiType type = CiType::BoundsYe;
  double level = 95.0;
  double lower = 0.0;
  double upper = 0.0;

  double length() const { return upper - lower; }
  bool contains(double x) const { return lower <= x && x <= upper; }
  bool contains(double lo, double hi) const { return lower <= lo && hi <= upper; }
};

// Type 1: [L - z sd(L*), U + z sd(U*)].
inline ConfidenceInterval ci_bounds_ye(double sd_lower, double sd_upper, double lower, double upper,
                                       double level) {
  const double z = normal::two_sided_critical(level);
  ConfidenceInterval ci{CiType::BoundsYe, level, lower - z * sd_lower, upper + z * sd_upper};
  ci.lower = std::min(ci.lower, lower);
  ci.upper = std::max(ci.upper, upper);
  return ci;
}

inline ConfidenceInterval ci_bounds_ye(std::span<const double> lower_draws, std::span<const double> upper_draws,
                                       double lower, double upper, double level) {
  return ci_bounds_ye(sample_sd(lower_draws), sample_sd(upper_draws), lower, upper, level);
}

// Critical value c >= 0 with Phi(c + width_ratio) - Phi(-c) = level/100,
// found by bisection.
inline double imbens_manski_critical(double width_ratio, double level) {
  const double target = level / 100.0;
  auto f = [&](double c) { return normal::cdf(c + width_ratio) - normal::cdf(-c) - target; };
  double lo = 0.0;
  double hi = 1.0;
  while (f(hi) < 0.0) hi *= 2.0;
  if (f(lo) >= 0.0) return 0.0;
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Type 2: Imbens-Manski interval for the parameter inside [L, U].
inline ConfidenceInterval ci_att_ye(double sd_lower, double sd_upper, double lower, double upper, double level) {
  const double sigma = std::max(sd_lower, sd_upper);
  if (sigma <= 0.0) return {CiType::AttYe, level, lower, upper};
  const double c = imbens_manski_critical((upper - lower) / sigma, level);
  return {CiType::AttYe, level, lower - c * sd_lower, upper + c * sd_upper};
}

inline ConfidenceInterval ci_att_ye(std::span<const double> lower_draws, std::span<const double> upper_draws,
                                    double lower, double upper, double level) {
  return ci_att_ye(sample_sd(lower_draws), sample_sd(upper_draws), lower, upper, level);
}

// Type 3: union over levels of the two-sided intervals for estimand - sb(level).
// per_level_draws[k] are the draws of the k-th candidate DID estimate.
inline ConfidenceInterval ci_union(const std::vector<std::vector<double>>& per_level_draws,
                                   std::span<const double> point, double level) {
  if (per_level_draws.size() != point.size() || point.empty())
    throw Error(ErrorCode::InvalidArgument, "union interval needs one draw set per level");
  const double z = normal::two_sided_critical(level);
  ConfidenceInterval ci{CiType::Union, level, point[0], point[0]};
  for (std::size_t k = 0; k < point.size(); ++k) {
    const double sd = sample_sd(per_level_draws[k]);
    ci.lower = std::min(ci.lower, point[k] - z * sd);
    ci.upper = std::max(ci.upper, point[k] + z * sd);
  }
  return ci;
}

// Percentile interval from the alpha/2 and 1-alpha/2 linear-interpolation quantiles.
inline ConfidenceInterval ci_percentile(std::span<const double> draws, double level) {
  std::vector<double> sorted(draws.begin(), draws.end());
  std::sort(sorted.begin(), sorted.end());
  const double alpha = 1.0 - level / 100.0;
  return {CiType::Percentile, level, quantile_sorted(sorted, alpha / 2.0), quantile_sorted(sorted, 1.0 - alpha / 2.0)};
}

}  // namespace rdid
