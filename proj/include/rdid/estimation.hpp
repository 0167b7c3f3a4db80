#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rdid/csv.hpp"
#include "rdid/error.hpp"
#include "rdid/panel.hpp"

namespace rdid {

enum class EstimandKind { SimpleDim, DoublyRobust };

struct EstimandValue {
  double value = 0.0;
  EstimandKind kind = EstimandKind::SimpleDim;
};

struct SbEntry {
  double level = 0.0;
  double sb = 0.0;
  double weight = 0.0;
  std::size_t n = 0;
};

// Estimated selection bias at each information level with the share of
// observations at that level.
struct SelectionBiasProfile {
  std::vector<SbEntry> entries;

  double min_sb() const {
    return std::min_element(entries.begin(), entries.end(),
                            [](const SbEntry& a, const SbEntry& b) { return a.sb < b.sb; })->sb;
  }
  double max_sb() const {
    return std::max_element(entries.begin(), entries.end(),
                            [](const SbEntry& a, const SbEntry& b) { return a.sb < b.sb; })->sb;
  }
  std::size_t size() const { return entries.size(); }

  void validate() const {
    if (entries.empty()) throw Error(ErrorCode::InvalidArgument, "selection bias profile is empty");
    double total = 0.0;
    for (std::size_t k = 0; k < entries.size(); ++k) {
      const auto& e = entries[k];
      if (!std::isfinite(e.sb) || !std::isfinite(e.level))
        throw Error(ErrorCode::InvalidArgument, "non-finite profile entry");
      if (e.weight < 0.0 || e.weight > 1.0)
        throw Error(ErrorCode::InvalidArgument, "profile weight outside [0,1]");
      if (k > 0 && !(entries[k - 1].level < e.level))
        throw Error(ErrorCode::InvalidArgument, "profile levels must be strictly increasing");
      total += e.weight;
    }
    if (std::fabs(total - 1.0) > 1e-12)
      throw Error(ErrorCode::InvalidArgument, "profile weights must sum to one");
  }
};

inline SelectionBiasProfile make_profile(std::span<const double> levels, std::span<const double> sb,
                                         std::span<const double> weights) {
  if (levels.size() != sb.size() || levels.size() != weights.size())
    throw Error(ErrorCode::InvalidArgument, "profile columns differ in length");
  SelectionBiasProfile p;
  for (std::size_t k = 0; k < levels.size(); ++k) p.entries.push_back({levels[k], sb[k], weights[k], 0});
  p.validate();
  return p;
}

inline SelectionBiasProfile make_profile(std::span<const double> levels, std::span<const double> sb) {
  std::vector<double> w(levels.size(), 1.0 / static_cast<double>(levels.size()));
  return make_profile(levels, sb, w);
}

struct RdidBounds {
  double lower = 0.0;
  double upper = 0.0;
  EstimandValue estimand;
  double sb_inf = 0.0;
  double sb_sup = 0.0;

  double width() const { return upper - lower; }
};

enum class Loss { L1, L2, Linf };

inline const char* loss_name(Loss loss) {
  switch (loss) {
    case Loss::L1: return "L1";
    case Loss::L2: return "L2";
    case Loss::Linf: return "Linf";
  }
  return "?";
}

inline constexpr std::array<Loss, 3> kAllLosses{Loss::L1, Loss::L2, Loss::Linf};

struct PoRdidEstimate {
  Loss loss = Loss::L1;
  double sb_opt = 0.0;
  double value = 0.0;
};

struct LinearForecast {
  double intercept = 0.0;
  double slope = 0.0;
  double peval = 0.0;
  double sb_hat = 0.0;
  double value = 0.0;
};

// Running sums for one treated/control split.
struct GroupMoments {
  double sum1 = 0.0;
  double sum0 = 0.0;
  std::size_t n1 = 0;
  std::size_t n0 = 0;

  void add(double y, bool treated) {
    if (treated) {
      sum1 += y;
      ++n1;
    } else {
      sum0 += y;
      ++n0;
    }
  }
  std::size_t n() const { return n1 + n0; }
  bool degenerate() const { return n1 == 0 || n0 == 0; }
  double difference() const {
    return sum1 / static_cast<double>(n1) - sum0 / static_cast<double>(n0);
  }
};

// mean(outcome | treat = 1) - mean(outcome | treat = 0) over rows.
inline EstimandValue diff_in_means(std::span<const double> outcome, std::span<const std::uint8_t> treat,
                                   RowSpan rows, const std::string& where = "sample") {
  GroupMoments m;
  for (RowIndex i : rows) m.add(outcome[i], treat[i] != 0);
  if (m.degenerate()) throw Error(ErrorCode::DegenerateCell, where);
  return {m.difference(), EstimandKind::SimpleDim};
}

namespace detail {

inline constexpr int kIrlsMaxIter = 100;
inline constexpr double kIrlsTol = 1e-10;
inline constexpr double kPropensityTrim = 1e-6;

// Logistic regression by iteratively reweighted least squares. Returns the
// fitted probabilities.
inline Eigen::VectorXd fit_logistic(const Eigen::MatrixXd& z, const Eigen::VectorXd& d) {
  const Eigen::Index p = z.cols();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  for (int iter = 0; iter < kIrlsMaxIter; ++iter) {
    const Eigen::VectorXd eta = z * beta;
    const Eigen::VectorXd mu = (1.0 + (-eta.array()).exp()).inverse().matrix();
    const Eigen::ArrayXd w = mu.array() * (1.0 - mu.array());
    const Eigen::ArrayXd sw = w.sqrt();
    const Eigen::VectorXd work = (eta.array() + (d - mu).array() / w).matrix();
    const Eigen::MatrixXd zw = z.array().colwise() * sw;
    const Eigen::VectorXd rhs = (work.array() * sw).matrix();
    if (!zw.allFinite() || !rhs.allFinite())
      throw Error(ErrorCode::IrlsDiverged, "non-finite IRLS weights (separation?)");
    const Eigen::VectorXd next = zw.colPivHouseholderQr().solve(rhs);
    if (!next.allFinite()) throw Error(ErrorCode::IrlsDiverged, "non-finite IRLS step");
    const double change = (next - beta).cwiseAbs().maxCoeff();
    beta = next;
    if (change < kIrlsTol) {
      const Eigen::VectorXd eta_f = z * beta;
      return (1.0 + (-eta_f.array()).exp()).inverse().matrix();
    }
  }
  throw Error(ErrorCode::IrlsDiverged, "no convergence in " + std::to_string(kIrlsMaxIter) + " iterations");
}

}  // namespace detail

// Doubly robust ATT-type contrast: logistic propensity e(X), linear control
// outcome model m0(X), treated weights proportional to D, control weights
// proportional to (1-D) e/(1-e), each normalized to sum to one.
inline EstimandValue dr_diff_in_means(std::span<const double> outcome, std::span<const std::uint8_t> treat,
                                      const std::vector<std::vector<double>>& covariates, RowSpan rows,
                                      const std::string& where = "sample") {
  if (covariates.empty()) throw Error(ErrorCode::InvalidArgument, "doubly robust estimand needs covariates");
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto p = static_cast<Eigen::Index>(covariates.size() + 1);
  Eigen::MatrixXd z(n, p);
  Eigen::VectorXd y(n), d(n);
  Eigen::Index n1 = 0;
  for (Eigen::Index r = 0; r < n; ++r) {
    const RowIndex i = rows[static_cast<std::size_t>(r)];
    z(r, 0) = 1.0;
    for (Eigen::Index k = 1; k < p; ++k) z(r, k) = covariates[static_cast<std::size_t>(k - 1)][i];
    y(r) = outcome[i];
    d(r) = treat[i] ? 1.0 : 0.0;
    n1 += treat[i] ? 1 : 0;
  }
  const Eigen::Index n0 = n - n1;
  if (n1 == 0 || n0 == 0) throw Error(ErrorCode::DegenerateCell, where);
  {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(z);
    if (qr.rank() < p) throw Error(ErrorCode::SingularDesign, "covariate design is rank deficient in " + where);
  }

  Eigen::VectorXd e = detail::fit_logistic(z, d);
  bool interior = false;
  for (Eigen::Index r = 0; r < n; ++r) {
    if (e(r) > detail::kPropensityTrim && e(r) < 1.0 - detail::kPropensityTrim) interior = true;
    e(r) = std::clamp(e(r), detail::kPropensityTrim, 1.0 - detail::kPropensityTrim);
  }
  if (!interior) throw Error(ErrorCode::PropensityDegenerate, "all propensities trimmed in " + where);

  Eigen::MatrixXd zc(n0, p);
  Eigen::VectorXd yc(n0);
  for (Eigen::Index r = 0, c = 0; r < n; ++r) {
    if (d(r) != 0.0) continue;
    zc.row(c) = z.row(r);
    yc(c) = y(r);
    ++c;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr0(zc);
  if (qr0.rank() < p) throw Error(ErrorCode::SingularDesign, "control outcome design is rank deficient in " + where);
  const Eigen::VectorXd gamma = qr0.solve(yc);
  const Eigen::VectorXd resid = y - z * gamma;

  double treated_sum = 0.0;
  double control_num = 0.0;
  double control_den = 0.0;
  for (Eigen::Index r = 0; r < n; ++r) {
    if (d(r) != 0.0) {
      treated_sum += resid(r);
    } else {
      const double odds = e(r) / (1.0 - e(r));
      control_num += odds * resid(r);
      control_den += odds;
    }
  }
  const double value = treated_sum / static_cast<double>(n1) - control_num / control_den;
  if (!std::isfinite(value)) throw Error(ErrorCode::PropensityDegenerate, "non-finite weights in " + where);
  return {value, EstimandKind::DoublyRobust};
}

inline EstimandValue group_contrast(const PanelDataset& ds, std::span<const std::uint8_t> treat, RowSpan rows,
                                    bool use_covariates, const std::string& where) {
  if (use_covariates) return dr_diff_in_means(ds.outcome(), treat, ds.covariates(), rows, where);
  return diff_in_means(ds.outcome(), treat, rows, where);
}

// Post-period contrast (theta_OLS, or tau_DR with covariates).
inline EstimandValue post_period_estimand(const PanelDataset& ds, RowSpan rows, bool use_covariates) {
  const auto post = ds.post();
  std::vector<RowIndex> post_rows;
  post_rows.reserve(rows.size());
  for (RowIndex i : rows)
    if (post[i]) post_rows.push_back(i);
  return group_contrast(ds, ds.treat(), post_rows, use_covariates, "post period");
}

// Selection bias at every info level among pre-period rows; weights are the
// level's share of pre-period rows.
inline SelectionBiasProfile selection_bias_profile(const PanelDataset& ds, RowSpan rows, bool use_covariates) {
  if (!ds.roles().info || !ds.roles().treat || !ds.roles().post)
    throw Error(ErrorCode::Usage, "selection bias profile needs treat, post and info roles");
  const auto levels = ds.info_levels();
  SelectionBiasProfile profile;

  if (!use_covariates) {
    const auto y = ds.outcome();
    const auto d = ds.treat();
    const auto post = ds.post();
    const auto idx = ds.info_index();
    std::vector<GroupMoments> acc(levels.size());
    std::size_t total = 0;
    for (RowIndex i : rows) {
      if (post[i]) continue;
      acc[idx[i]].add(y[i], d[i] != 0);
      ++total;
    }
    if (total == 0) throw Error(ErrorCode::NoPrePeriods, "no pre-period rows");
    for (std::size_t k = 0; k < levels.size(); ++k) {
      const auto& m = acc[k];
      if (m.n() == 0) continue;
      if (m.degenerate()) throw Error(ErrorCode::DegenerateCell, "info level " + csv::format_double(levels[k]));
      profile.entries.push_back(
          {levels[k], m.difference(), static_cast<double>(m.n()) / static_cast<double>(total), m.n()});
    }
    return profile;
  }

  const auto cells = split_cells(ds, rows, true);
  if (cells.empty()) throw Error(ErrorCode::NoPrePeriods, "no pre-period rows");
  std::size_t total = 0;
  for (const auto& c : cells) total += c.treated_rows.size() + c.control_rows.size();
  for (const auto& c : cells) {
    std::vector<RowIndex> cell_rows = c.treated_rows;
    cell_rows.insert(cell_rows.end(), c.control_rows.begin(), c.control_rows.end());
    std::sort(cell_rows.begin(), cell_rows.end());
    const auto est = dr_diff_in_means(ds.outcome(), ds.treat(), ds.covariates(), cell_rows,
                                      "info level " + csv::format_double(c.info_level));
    profile.entries.push_back({c.info_level, est.value,
                               static_cast<double>(cell_rows.size()) / static_cast<double>(total),
                               cell_rows.size()});
  }
  return profile;
}

// Sharp bounds: [estimand - max sb, estimand - min sb].
inline RdidBounds rdid_bounds(const EstimandValue& estimand, const SelectionBiasProfile& profile) {
  if (profile.entries.empty()) throw Error(ErrorCode::InvalidArgument, "selection bias profile is empty");
  RdidBounds b;
  b.estimand = estimand;
  b.sb_inf = profile.min_sb();
  b.sb_sup = profile.max_sb();
  b.lower = estimand.value - b.sb_sup;
  b.upper = estimand.value - b.sb_inf;
  return b;
}

// Smallest sb whose cumulative weight (sorted by sb) reaches one half.
inline double weighted_median(const SelectionBiasProfile& profile) {
  std::vector<SbEntry> sorted = profile.entries;
  std::stable_sort(sorted.begin(), sorted.end(), [](const SbEntry& a, const SbEntry& b) { return a.sb < b.sb; });
  double total = 0.0;
  for (const auto& e : sorted) total += e.weight;
  double cumulative = 0.0;
  for (const auto& e : sorted) {
    cumulative += e.weight;
    // Relative slack absorbs rounding in weights such as k/n.
    if (cumulative >= 0.5 * total - 1e-12) return e.sb;
  }
  return sorted.back().sb;
}

inline double weighted_mean_sb(const SelectionBiasProfile& profile) {
  double num = 0.0;
  double den = 0.0;
  for (const auto& e : profile.entries) {
    num += e.weight * e.sb;
    den += e.weight;
  }
  return num / den;
}

// Policy-oriented point estimate under an L1, L2 or L-infinity loss.
inline PoRdidEstimate po_rdid(const EstimandValue& estimand, const SelectionBiasProfile& profile, Loss loss) {
  if (profile.entries.empty()) throw Error(ErrorCode::InvalidArgument, "selection bias profile is empty");
  PoRdidEstimate out;
  out.loss = loss;
  switch (loss) {
    case Loss::L1: out.sb_opt = weighted_median(profile); break;
    case Loss::L2: out.sb_opt = weighted_mean_sb(profile); break;
    case Loss::Linf: out.sb_opt = 0.5 * (profile.min_sb() + profile.max_sb()); break;
  }
  out.sb_opt = std::clamp(out.sb_opt, profile.min_sb(), profile.max_sb());
  out.value = estimand.value - out.sb_opt;
  return out;
}

// Unweighted least-squares line of sb on level, evaluated at peval.
inline LinearForecast sb_linear_forecast(const SelectionBiasProfile& profile, const EstimandValue& estimand,
                                         double peval) {
  if (profile.entries.size() < 2)
    throw Error(ErrorCode::InsufficientLevels, "linear forecast needs at least two info levels");
  const auto n = static_cast<Eigen::Index>(profile.entries.size());
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    x(k, 0) = 1.0;
    x(k, 1) = profile.entries[static_cast<std::size_t>(k)].level;
    y(k) = profile.entries[static_cast<std::size_t>(k)].sb;
  }
  const Eigen::Vector2d coef = x.householderQr().solve(y);
  LinearForecast f;
  f.intercept = coef(0);
  f.slope = coef(1);
  f.peval = peval;
  f.sb_hat = f.intercept + f.slope * peval;
  f.value = estimand.value - f.sb_hat;
  return f;
}

// Mean of the info variable among post-period rows.
inline double default_peval(const PanelDataset& ds, RowSpan rows) {
  const auto post = ds.post();
  const auto info = ds.info();
  double sum = 0.0;
  std::size_t n = 0;
  for (RowIndex i : rows) {
    if (!post[i]) continue;
    sum += info[i];
    ++n;
  }
  if (n == 0) throw Error(ErrorCode::DegenerateCell, "post period has no rows");
  return sum / static_cast<double>(n);
}

}  // namespace rdid
