#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rdid/csv.hpp"
#include "rdid/error.hpp"
#include "rdid/normal.hpp"
#include "rdid/panel.hpp"
#include "rdid/pipeline.hpp"
#include "rdid/rng.hpp"
#include "rdid/staggered.hpp"

namespace rdid {

enum class DgpKind { AshenfelterDip, CovariateExample, Staggered };

// Panel: n units observed in every period. RepeatedCrossSection: n fresh
// units drawn in each period, each its own cluster.
enum class Sampling { Panel, RepeatedCrossSection };

inline const char* dgp_name(DgpKind k) {
  switch (k) {
    case DgpKind::AshenfelterDip: return "ashenfelter";
    case DgpKind::CovariateExample: return "covariate";
    case DgpKind::Staggered: return "staggered";
  }
  return "?";
}

inline DgpKind parse_dgp_kind(std::string_view s) {
  if (s == "ashenfelter") return DgpKind::AshenfelterDip;
  if (s == "covariate") return DgpKind::CovariateExample;
  if (s == "staggered") return DgpKind::Staggered;
  throw Error(ErrorCode::Usage, "unknown DGP kind '" + std::string(s) + "'");
}

struct DgpSpec {
  DgpKind kind = DgpKind::AshenfelterDip;
  double theta = 0.0;
  double p = 0.5;            // P(X = 1), covariate example
  int horizon = 4;           // T, staggered design
  std::size_t n = 1000;
  std::uint64_t seed = 1;
  Sampling sampling = Sampling::Panel;
  int post_periods = 1;      // ashenfelter: post periods 1..post_periods
  double noise_scale = 4.0;  // ashenfelter noise multiplier
  // Ashenfelter only: U is 2 for every sixth unit and 0 otherwise.
  bool deterministic_latent = false;
  // Sample size used as the report key; 0 means n.
  std::size_t nominal_n = 0;

  void validate() const {
    if (n < 10) throw Error(ErrorCode::InvalidArgument, "n must be at least 10");
    if (!(p > 0.0 && p < 1.0)) throw Error(ErrorCode::InvalidArgument, "p must lie in (0,1)");
    if (horizon < 1) throw Error(ErrorCode::InvalidArgument, "horizon must be at least 1");
    if (post_periods < 1) throw Error(ErrorCode::InvalidArgument, "post_periods must be at least 1");
    if (!(noise_scale >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise_scale must be non-negative");
  }

  std::size_t key_n() const { return nominal_n ? nominal_n : n; }
};

// A generated dataset as named numeric columns plus the roles the matching
// command expects.
struct GeneratedData {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;
  VariableRoles roles;

  const std::vector<double>& column(std::string_view name) const {
    for (std::size_t j = 0; j < names.size(); ++j)
      if (names[j] == name) return columns[j];
    throw Error(ErrorCode::MissingColumn, std::string(name));
  }

  std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }

  PanelDataset dataset() const { return dataset(roles); }

  PanelDataset dataset(const VariableRoles& r) const {
    PanelColumns cols;
    cols.outcome = column(r.outcome);
    if (r.treat) cols.treat = column(*r.treat);
    if (r.post) cols.post = column(*r.post);
    if (r.info) cols.info = column(*r.info);
    if (r.time) cols.time = column(*r.time);
    if (r.cohort) cols.cohort = column(*r.cohort);
    for (const auto& c : r.covariates) cols.covariates.push_back(column(c));
    if (r.cluster)
      for (double v : column(*r.cluster)) cols.cluster.push_back(static_cast<std::uint64_t>(v));
    return PanelDataset::from_columns(r, std::move(cols));
  }

  // Shortest round-trip formatting, so reading the file back gives the same doubles.
  void write_csv(std::ostream& out) const {
    csv::write_row(out, names);
    std::vector<std::string> fields(names.size());
    for (std::size_t i = 0; i < rows(); ++i) {
      for (std::size_t j = 0; j < names.size(); ++j) fields[j] = csv::format_double(columns[j][i]);
      csv::write_row(out, fields);
    }
  }
};

namespace detail {

struct ColumnBuilder {
  GeneratedData data;

  explicit ColumnBuilder(std::vector<std::string> names) {
    data.columns.resize(names.size());
    data.names = std::move(names);
  }

  void push(std::initializer_list<double> row) {
    std::size_t j = 0;
    for (double v : row) data.columns[j++].push_back(v);
  }
};

}  // namespace detail

// Y_it = (1+|t|+t^2) U_i + theta D_i t 1{t>=0} + s eps_it, D = 1{U >= 1},
// pre periods -2..0 and post periods 1..post_periods.
inline GeneratedData gen_ashenfelter(const DgpSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  detail::ColumnBuilder b({"id", "t", "y", "d", "post"});
  const int t_last = spec.post_periods;
  auto outcome = [&](double u, double d, int t) {
    const double ft = 1.0 + std::abs(t) + static_cast<double>(t) * t;
    const double eps = spec.noise_scale > 0.0 ? spec.noise_scale * rng.normal() : 0.0;
    return ft * u + spec.theta * d * (t >= 0 ? t : 0) + eps;
  };
  auto latent = [&](std::size_t unit) {
    if (spec.deterministic_latent) return unit % 6 == 0 ? 2.0 : 0.0;
    return rng.normal();
  };
  if (spec.sampling == Sampling::Panel) {
    for (std::size_t i = 0; i < spec.n; ++i) {
      const double u = latent(i);
      const double d = u >= 1.0 ? 1.0 : 0.0;
      for (int t = -2; t <= t_last; ++t)
        b.push({static_cast<double>(i + 1), static_cast<double>(t), outcome(u, d, t), d, t >= 1 ? 1.0 : 0.0});
    }
  } else {
    std::size_t id = 0;
    for (int t = -2; t <= t_last; ++t)
      for (std::size_t i = 0; i < spec.n; ++i) {
        const double u = latent(i);
        const double d = u >= 1.0 ? 1.0 : 0.0;
        b.push({static_cast<double>(++id), static_cast<double>(t), outcome(u, d, t), d, t >= 1 ? 1.0 : 0.0});
      }
  }
  b.data.roles.outcome = "y";
  b.data.roles.treat = "d";
  b.data.roles.post = "post";
  b.data.roles.info = "t";
  b.data.roles.cluster = "id";
  return std::move(b.data);
}

// Y_t = (1 + 0.5^t X) U + theta X D t 1{t>=0}, t in {0,1}, X ~ Bern(p)
// independent of U, D = 1{U >= 1}. The information set is X.
inline GeneratedData gen_covariate_example(const DgpSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  detail::ColumnBuilder b({"id", "t", "y", "d", "post", "x"});
  auto outcome = [&](double u, double x, double d, int t) {
    return (1.0 + std::pow(0.5, t) * x) * u + spec.theta * x * d * t;
  };
  if (spec.sampling == Sampling::Panel) {
    for (std::size_t i = 0; i < spec.n; ++i) {
      const double u = rng.normal();
      const double x = rng.bernoulli(spec.p) ? 1.0 : 0.0;
      const double d = u >= 1.0 ? 1.0 : 0.0;
      for (int t = 0; t <= 1; ++t)
        b.push({static_cast<double>(i + 1), static_cast<double>(t), outcome(u, x, d, t), d, double(t), x});
    }
  } else {
    std::size_t id = 0;
    for (int t = 0; t <= 1; ++t)
      for (std::size_t i = 0; i < spec.n; ++i) {
        const double u = rng.normal();
        const double x = rng.bernoulli(spec.p) ? 1.0 : 0.0;
        const double d = u >= 1.0 ? 1.0 : 0.0;
        b.push({static_cast<double>(++id), static_cast<double>(t), outcome(u, x, d, t), d, double(t), x});
      }
  }
  b.data.roles.outcome = "y";
  b.data.roles.treat = "d";
  b.data.roles.post = "post";
  b.data.roles.info = "x";
  b.data.roles.cluster = "id";
  return std::move(b.data);
}

namespace detail {

// First period with U >= 2 - t/T, or 0 when that never happens within the horizon.
inline int staggered_cohort(double u, int T) {
  const int g = static_cast<int>(std::ceil(T * (2.0 - u)));
  return g <= T ? std::max(g, 1) : 0;
}

// Unit effects theta_s ~ N((1+s^2)/2, 1) for s = 1..T; index 0 unused.
inline std::vector<double> staggered_effects(Rng& rng, int T) {
  std::vector<double> theta(static_cast<std::size_t>(T) + 1, 0.0);
  for (int s = 1; s <= T; ++s) theta[s] = rng.normal((1.0 + static_cast<double>(s) * s) / 2.0, 1.0);
  return theta;
}

inline double staggered_outcome(Rng& rng, double u, int g, int t, const std::vector<double>& theta) {
  const double t2 = static_cast<double>(t) * t;
  double y = (1.0 + t2) * u + rng.normal(t2, 1.0);
  if (g > 0)
    for (int s = g; s <= t; ++s) y += theta[s];
  return y;
}

}  // namespace detail

// Staggered adoption over periods -T..T with U ~ U[0,2] and cohort
// g = first t with U >= 2 - t/T (0 if never treated).
inline GeneratedData gen_staggered(const DgpSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const int T = spec.horizon;
  detail::ColumnBuilder b({"id", "t", "y", "g"});
  if (spec.sampling == Sampling::Panel) {
    for (std::size_t i = 0; i < spec.n; ++i) {
      const double u = rng.uniform(0.0, 2.0);
      const int g = detail::staggered_cohort(u, T);
      const auto theta = detail::staggered_effects(rng, T);
      for (int t = -T; t <= T; ++t)
        b.push({static_cast<double>(i + 1), double(t), detail::staggered_outcome(rng, u, g, t, theta), double(g)});
    }
  } else {
    std::size_t id = 0;
    for (int t = -T; t <= T; ++t)
      for (std::size_t i = 0; i < spec.n; ++i) {
        const double u = rng.uniform(0.0, 2.0);
        const int g = detail::staggered_cohort(u, T);
        const auto theta = detail::staggered_effects(rng, T);
        b.push({static_cast<double>(++id), double(t), detail::staggered_outcome(rng, u, g, t, theta), double(g)});
      }
  }
  b.data.roles.outcome = "y";
  b.data.roles.time = "t";
  b.data.roles.cohort = "g";
  b.data.roles.cluster = "id";
  return std::move(b.data);
}

inline GeneratedData generate(const DgpSpec& spec) {
  switch (spec.kind) {
    case DgpKind::AshenfelterDip: return gen_ashenfelter(spec);
    case DgpKind::CovariateExample: return gen_covariate_example(spec);
    case DgpKind::Staggered: return gen_staggered(spec);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown DGP kind");
}

struct PeriodTruth {
  double t = 0.0;
  double att = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

struct CohortTimeTruth {
  int g = 0;
  int t = 0;
  double att = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

struct TruthSet {
  double att = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double latent_gap = 0.0;  // E[U|D=1] - E[U|D=0]
  std::vector<double> sb_levels;
  std::vector<double> sb_values;
  std::vector<PeriodTruth> periods;       // ashenfelter, one per post period
  std::vector<double> cohort_gap;         // staggered mu(g), g = 1..T
  std::vector<CohortTimeTruth> cells;     // staggered, g-major

  const CohortTimeTruth& cell(int g, int t) const {
    for (const auto& c : cells)
      if (c.g == g && c.t == t) return c;
    throw Error(ErrorCode::InvalidArgument, "no truth for this cohort and period");
  }
};

// E[U | U >= 1] - E[U | U < 1] for standard normal U.
inline double normal_tail_gap() {
  const double phi1 = normal::pdf(1.0);
  const double cdf1 = normal::cdf(1.0);
  return phi1 / (1.0 - cdf1) + phi1 / cdf1;
}

// E[U|G=g] - E[U|G=never] for the staggered design, g = 1..T.
inline double staggered_cohort_gap(int g, int T) {
  return 2.0 - (2.0 * g - 1.0) / (2.0 * T) - 0.5;
}

// ATT(g,t) = sum_{s=g}^{t} (1+s^2)/2, zero for t < g.
inline double staggered_att(int g, int t) {
  double att = 0.0;
  for (int s = g; s <= t; ++s) att += (1.0 + static_cast<double>(s) * s) / 2.0;
  return att;
}

inline TruthSet analytic_truths(const DgpSpec& spec) {
  TruthSet truth;
  switch (spec.kind) {
    case DgpKind::AshenfelterDip: {
      const double c = spec.deterministic_latent ? 2.0 : normal_tail_gap();
      truth.latent_gap = c;
      for (int t = -2; t <= 0; ++t) {
        truth.sb_levels.push_back(t);
        truth.sb_values.push_back((1.0 + std::abs(t) + t * t) * c);
      }
      // Pooled post periods share one estimand; with a single post period it is t = 1.
      for (int t = 1; t <= spec.post_periods; ++t) {
        const double post_sb = (1.0 + t + static_cast<double>(t) * t) * c;
        const double att = spec.theta * t;
        truth.periods.push_back({double(t), att, att + post_sb - 7.0 * c, att + post_sb - c});
      }
      truth.att = truth.periods.front().att;
      truth.lower = truth.periods.front().lower;
      truth.upper = truth.periods.front().upper;
      break;
    }
    case DgpKind::CovariateExample: {
      const double c = normal_tail_gap();
      const double p = spec.p;
      truth.latent_gap = c;
      truth.sb_levels = {0.0, 1.0};
      truth.sb_values = {c, 2.0 * c};
      truth.att = p * spec.theta;
      truth.lower = (p / 2.0 - 1.0) * c + p * spec.theta;
      truth.upper = p * c / 2.0 + p * spec.theta;
      break;
    }
    case DgpKind::Staggered: {
      const int T = spec.horizon;
      for (int g = 1; g <= T; ++g) {
        const double mu = staggered_cohort_gap(g, T);
        truth.cohort_gap.push_back(mu);
        for (int t = 1; t <= T; ++t) {
          const double att = staggered_att(g, t);
          const double t2 = static_cast<double>(t) * t;
          truth.cells.push_back({g, t, att, att + (t2 - double(T) * T) * mu, att + t2 * mu});
        }
      }
      for (int t0 = -T; t0 <= 0; ++t0) truth.sb_levels.push_back(t0);
      break;
    }
  }
  return truth;
}

// Sample layout of the reference coverage tables at total
// sample size N: repeated cross-sections with N/4 rows per period for the
// ashenfelter design (theta = -1), N/2 for the covariate example (theta = 6)
// and N per period for the staggered design.
inline DgpSpec coverage_design(DgpKind kind, std::size_t N) {
  DgpSpec spec;
  spec.kind = kind;
  spec.sampling = Sampling::RepeatedCrossSection;
  spec.nominal_n = N;
  switch (kind) {
    case DgpKind::AshenfelterDip:
      spec.theta = -1.0;
      spec.n = N / 4;
      break;
    case DgpKind::CovariateExample:
      spec.theta = 6.0;
      spec.n = N / 2;
      break;
    case DgpKind::Staggered:
      spec.n = N;
      break;
  }
  return spec;
}

struct CoverageCell {
  std::string ci_type;
  int g = 0;  // staggered cells only
  int t = 0;
  std::size_t successes = 0;
  double cp_inf = 0.0;
  double avg_length = 0.0;
};

struct SimulationReport {
  DgpSpec spec;
  std::size_t sims = 0;
  std::size_t failures = 0;  // simulations that produced no interval at all
  std::size_t replicates = 0;
  double level = 95.0;
  std::vector<CoverageCell> cells;
  // Staggered: largest spread of the bounds width across periods within a cohort.
  double max_width_spread = 0.0;

  const CoverageCell& cell(std::string_view ci_type, int g = 0, int t = 0) const {
    for (const auto& c : cells)
      if (c.ci_type == ci_type && c.g == g && c.t == t) return c;
    throw Error(ErrorCode::InvalidArgument, "no coverage cell " + std::string(ci_type));
  }

  void write_csv(std::ostream& out) const {
    csv::write_row(out, {"dgp", "N", "ci_type", "g", "t", "sims", "successes", "cp_inf", "avg_length"});
    for (const auto& c : cells)
      csv::write_row(out, {dgp_name(spec.kind), std::to_string(spec.key_n()), c.ci_type, std::to_string(c.g),
                           std::to_string(c.t), std::to_string(sims), std::to_string(c.successes),
                           csv::format_double(c.cp_inf), csv::format_double(c.avg_length)});
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["dgp"] = dgp_name(spec.kind);
    j["N"] = spec.key_n();
    j["sims"] = sims;
    j["failures"] = failures;
    j["replicates"] = replicates;
    j["level"] = level;
    j["seed"] = spec.seed;
    auto arr = nlohmann::ordered_json::array();
    for (const auto& c : cells) {
      nlohmann::ordered_json e;
      e["ci_type"] = c.ci_type;
      if (spec.kind == DgpKind::Staggered) {
        e["g"] = c.g;
        e["t"] = c.t;
      }
      e["successes"] = c.successes;
      e["cp_inf"] = c.cp_inf;
      e["avg_length"] = c.avg_length;
      arr.push_back(std::move(e));
    }
    j["cells"] = std::move(arr);
    if (spec.kind == DgpKind::Staggered) j["max_width_spread"] = max_width_spread;
    return j;
  }
};

namespace detail {

struct SimIntervals {
  // One entry per reported interval; nullopt when that interval failed.
  std::vector<std::optional<ConfidenceInterval>> ci;
  double width_spread = 0.0;
};

struct CoverageAccumulator {
  std::size_t n = 0;
  std::size_t cover_set = 0;
  std::size_t cover_lower = 0;
  std::size_t cover_upper = 0;
  double length = 0.0;
};

}  // namespace detail

// Monte Carlo coverage of the confidence intervals. Simulation s draws its
// data from derive_seed(spec.seed, {s}) and its bootstrap from
// derive_seed(plan.seed, {s}); the report does not depend on plan.threads.
inline SimulationReport run_coverage_study(const DgpSpec& spec, std::size_t sims, const BootstrapPlan& plan) {
  spec.validate();
  plan.validate();
  if (sims == 0) throw Error(ErrorCode::InvalidArgument, "at least one simulation is required");
  const TruthSet truth = analytic_truths(spec);
  const bool stag = spec.kind == DgpKind::Staggered;

  // Interval slots and their targets.
  struct Slot {
    std::string ci_type;
    int g = 0;
    int t = 0;
    double lower = 0.0;
    double upper = 0.0;
    bool pointwise = false;
  };
  std::vector<Slot> slots;
  if (stag) {
    for (const auto& c : truth.cells) slots.push_back({ci_type_name(CiType::BoundsYe), c.g, c.t, c.lower, c.upper, false});
  } else {
    slots.push_back({ci_type_name(CiType::BoundsYe), 0, 0, truth.lower, truth.upper, false});
    slots.push_back({ci_type_name(CiType::AttYe), 0, 0, truth.lower, truth.upper, true});
    slots.push_back({ci_type_name(CiType::Union), 0, 0, truth.lower, truth.upper, false});
  }

  std::vector<detail::SimIntervals> results(sims);
  detail::parallel_for(sims, plan.threads, [&](std::size_t s) {
    DgpSpec ss = spec;
    ss.seed = derive_seed(spec.seed, {s});
    BootstrapPlan ps = plan;
    ps.seed = derive_seed(plan.seed, {s});
    ps.threads = 1;
    auto& out = results[s];
    out.ci.assign(slots.size(), std::nullopt);
    try {
      const PanelDataset ds = generate(ss).dataset();
      if (stag) {
        const StaggeredResult r = staggered_table(ds, {ps, true});
        for (std::size_t k = 0; k < slots.size(); ++k)
          for (const auto& cell : r.cells)
            if (cell.g == slots[k].g && cell.t == slots[k].t && cell.ci) out.ci[k] = cell.ci;
        for (const auto& [g, prof] : r.profiles) {
          double lo = INFINITY, hi = -INFINITY;
          for (const auto& cell : r.cells)
            if (cell.g == g && cell.bounds) {
              lo = std::min(lo, cell.bounds->width());
              hi = std::max(hi, cell.bounds->width());
            }
          if (hi >= lo) out.width_spread = std::max(out.width_spread, hi - lo);
        }
      } else {
        RdidOptions opt;
        opt.plan = ps;
        const RdidResult r = run_rdid(ds, opt);
        out.ci = {r.ci_bounds, r.ci_att, r.ci_union};
      }
    } catch (const Error&) {
      // counted below as a failed simulation
    }
  });

  SimulationReport rep;
  rep.spec = spec;
  rep.sims = sims;
  rep.replicates = plan.replicates;
  rep.level = plan.level;
  std::vector<detail::CoverageAccumulator> acc(slots.size());
  for (const auto& r : results) {
    bool any = false;
    for (std::size_t k = 0; k < slots.size(); ++k) {
      if (!r.ci[k]) continue;
      any = true;
      const auto& ci = *r.ci[k];
      auto& a = acc[k];
      ++a.n;
      a.length += ci.length();
      if (ci.contains(slots[k].lower, slots[k].upper)) ++a.cover_set;
      if (ci.contains(slots[k].lower)) ++a.cover_lower;
      if (ci.contains(slots[k].upper)) ++a.cover_upper;
    }
    if (!any) ++rep.failures;
    rep.max_width_spread = std::max(rep.max_width_spread, r.width_spread);
  }
  for (std::size_t k = 0; k < slots.size(); ++k) {
    CoverageCell c;
    c.ci_type = slots[k].ci_type;
    c.g = slots[k].g;
    c.t = slots[k].t;
    c.successes = acc[k].n;
    if (acc[k].n > 0) {
      const double n = static_cast<double>(acc[k].n);
      const std::size_t hits = slots[k].pointwise ? std::min(acc[k].cover_lower, acc[k].cover_upper) : acc[k].cover_set;
      c.cp_inf = static_cast<double>(hits) / n;
      c.avg_length = acc[k].length / n;
    } else {
      c.cp_inf = NAN;
      c.avg_length = NAN;
    }
    rep.cells.push_back(std::move(c));
  }
  return rep;
}

}  // namespace rdid
