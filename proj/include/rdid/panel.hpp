#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "rdid/csv.hpp"
#include "rdid/error.hpp"

namespace rdid {

using RowIndex = std::size_t;
using RowSpan = std::span<const RowIndex>;

enum class Command { Rdid, RdidDy, RdidStag };

// Column names bound to each estimation role.
struct VariableRoles {
  std::string outcome;
  std::optional<std::string> treat;
  std::optional<std::string> post;
  std::optional<std::string> info;
  std::optional<std::string> time;
  std::optional<std::string> cohort;
  std::optional<std::string> cluster;
  std::vector<std::string> covariates;

  bool operator==(const VariableRoles&) const = default;

  // Distinct role columns in a fixed order (outcome first).
  std::vector<std::string> columns() const {
    std::vector<std::string> out{outcome};
    for (const auto* r : {&treat, &post, &info, &time, &cohort, &cluster})
      if (*r) out.push_back(**r);
    for (const auto& c : covariates) out.push_back(c);
    return out;
  }

  void validate() const {
    if (outcome.empty()) throw Error(ErrorCode::Usage, "outcome role is required");
    std::vector<std::pair<std::string, std::string>> named{{"outcome", outcome}};
    auto add = [&](const char* role, const std::optional<std::string>& col) {
      if (col) named.emplace_back(role, *col);
    };
    add("treat", treat);
    add("post", post);
    add("time", time);
    add("cohort", cohort);
    add("cluster", cluster);
    for (const auto& c : covariates) named.emplace_back("covariate", c);
    for (std::size_t a = 0; a < named.size(); ++a)
      for (std::size_t b = a + 1; b < named.size(); ++b)
        if (named[a].second == named[b].second)
          throw Error(ErrorCode::Usage, "column '" + named[a].second + "' bound to both " +
                                            named[a].first + " and " + named[b].first);
    // info may coincide with time but with no other role.
    if (info) {
      for (const auto& [role, col] : named)
        if (col == *info && role != "time")
          throw Error(ErrorCode::Usage, "column '" + col + "' bound to both info and " + role);
    }
  }

  void require_for(Command cmd) const {
    validate();
    auto need = [](const std::optional<std::string>& r, const char* flag) {
      if (!r) throw Error(ErrorCode::Usage, std::string(flag) + " is required");
    };
    auto forbid = [](const std::optional<std::string>& r, const char* flag, const char* cmd_name) {
      if (r) throw Error(ErrorCode::Usage, std::string(flag) + " is not accepted by " + cmd_name);
    };
    switch (cmd) {
      case Command::Rdid:
        need(treat, "treat");
        need(post, "post");
        need(info, "info");
        forbid(time, "tname", "rdid");
        forbid(cohort, "gname", "rdid");
        break;
      case Command::RdidDy:
        need(treat, "treat");
        need(post, "post");
        need(info, "info");
        need(time, "tname");
        forbid(cohort, "gname", "rdid-dy");
        break;
      case Command::RdidStag:
        need(cohort, "gname");
        need(time, "tname");
        forbid(treat, "treat", "rdidstag");
        break;
    }
  }
};

// Raw numeric columns handed to PanelDataset. Absent roles stay empty.
struct PanelColumns {
  std::vector<double> outcome;
  std::vector<double> treat;
  std::vector<double> post;
  std::vector<double> info;
  std::vector<double> time;
  std::vector<double> cohort;
  std::vector<std::vector<double>> covariates;
  // Arbitrary cluster codes; densified by first appearance. Empty means one
  // cluster per row.
  std::vector<std::uint64_t> cluster;
};

// Validated, immutable long-format panel. Cell-level non-degeneracy is
// checked by the consumers (split_cells and the estimators), since which
// cells matter depends on the command.
class PanelDataset {
 public:
  static PanelDataset from_columns(VariableRoles roles, PanelColumns cols,
                                   std::size_t dropped_rows = 0) {
    roles.validate();
    PanelDataset ds;
    const std::size_t n = cols.outcome.size();
    if (n == 0) throw Error(ErrorCode::EmptyAfterFilter, "no observations");

    auto check_len = [&](const std::vector<double>& v, const std::optional<std::string>& role) {
      if (role && v.size() != n)
        throw Error(ErrorCode::InvalidArgument, "column '" + *role + "' has wrong length");
      if (!role && !v.empty())
        throw Error(ErrorCode::InvalidArgument, "column supplied for an unbound role");
    };
    check_len(cols.treat, roles.treat);
    check_len(cols.post, roles.post);
    check_len(cols.info, roles.info);
    check_len(cols.time, roles.time);
    check_len(cols.cohort, roles.cohort);
    if (cols.covariates.size() != roles.covariates.size())
      throw Error(ErrorCode::InvalidArgument, "covariate count does not match roles");
    for (const auto& c : cols.covariates)
      if (c.size() != n) throw Error(ErrorCode::InvalidArgument, "covariate column has wrong length");

    auto check_finite = [&](const std::vector<double>& v, const std::string& name) {
      for (std::size_t i = 0; i < v.size(); ++i)
        if (!std::isfinite(v[i]))
          throw Error(ErrorCode::NonNumeric, name + " row " + std::to_string(i + 1));
    };
    check_finite(cols.outcome, roles.outcome);
    if (roles.info) check_finite(cols.info, *roles.info);
    if (roles.time) check_finite(cols.time, *roles.time);
    if (roles.cohort) check_finite(cols.cohort, *roles.cohort);
    for (std::size_t k = 0; k < cols.covariates.size(); ++k)
      check_finite(cols.covariates[k], roles.covariates[k]);

    auto to_binary = [&](const std::vector<double>& v, const std::string& name) {
      std::vector<std::uint8_t> out(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] == 0.0) out[i] = 0;
        else if (v[i] == 1.0) out[i] = 1;
        else throw Error(ErrorCode::NonBinary, name);
      }
      return out;
    };
    if (roles.treat) ds.treat_ = to_binary(cols.treat, *roles.treat);
    if (roles.post) ds.post_ = to_binary(cols.post, *roles.post);

    ds.outcome_ = std::move(cols.outcome);
    ds.info_ = std::move(cols.info);
    ds.time_ = std::move(cols.time);
    ds.cohort_ = std::move(cols.cohort);
    ds.covariates_ = std::move(cols.covariates);

    ds.cluster_.resize(n);
    if (cols.cluster.empty()) {
      for (std::size_t i = 0; i < n; ++i) ds.cluster_[i] = static_cast<std::uint32_t>(i);
      ds.n_clusters_ = n;
    } else {
      if (cols.cluster.size() != n)
        throw Error(ErrorCode::InvalidArgument, "cluster column has wrong length");
      std::unordered_map<std::uint64_t, std::uint32_t> codes;
      for (std::size_t i = 0; i < n; ++i) {
        auto [it, inserted] = codes.try_emplace(cols.cluster[i], static_cast<std::uint32_t>(codes.size()));
        ds.cluster_[i] = it->second;
      }
      ds.n_clusters_ = codes.size();
    }

    index_levels(ds.info_, ds.info_levels_, ds.info_index_);
    index_levels(ds.time_, ds.time_levels_, ds.time_index_);
    ds.roles_ = std::move(roles);
    ds.dropped_rows_ = dropped_rows;
    return ds;
  }

  const VariableRoles& roles() const noexcept { return roles_; }
  std::size_t n_obs() const noexcept { return outcome_.size(); }
  std::size_t dropped_rows() const noexcept { return dropped_rows_; }

  std::span<const double> outcome() const noexcept { return outcome_; }
  std::span<const std::uint8_t> treat() const noexcept { return treat_; }
  std::span<const std::uint8_t> post() const noexcept { return post_; }
  std::span<const double> info() const noexcept { return info_; }
  std::span<const double> time() const noexcept { return time_; }
  std::span<const double> cohort() const noexcept { return cohort_; }
  const std::vector<std::vector<double>>& covariates() const noexcept { return covariates_; }
  bool has_covariates() const noexcept { return !covariates_.empty(); }

  // Sorted distinct info values and each row's position among them.
  std::span<const double> info_levels() const noexcept { return info_levels_; }
  std::span<const std::uint32_t> info_index() const noexcept { return info_index_; }
  std::span<const double> time_levels() const noexcept { return time_levels_; }
  std::span<const std::uint32_t> time_index() const noexcept { return time_index_; }

  std::size_t n_clusters() const noexcept { return n_clusters_; }
  std::span<const std::uint32_t> cluster() const noexcept { return cluster_; }

  std::vector<RowIndex> all_rows() const {
    std::vector<RowIndex> rows(n_obs());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return rows;
  }

  bool operator==(const PanelDataset&) const = default;

 private:
  PanelDataset() = default;

  static void index_levels(const std::vector<double>& values, std::vector<double>& levels,
                           std::vector<std::uint32_t>& index) {
    if (values.empty()) return;
    levels = values;
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    index.resize(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
      index[i] = static_cast<std::uint32_t>(
          std::lower_bound(levels.begin(), levels.end(), values[i]) - levels.begin());
  }

  VariableRoles roles_;
  std::vector<double> outcome_;
  std::vector<std::uint8_t> treat_;
  std::vector<std::uint8_t> post_;
  std::vector<double> info_;
  std::vector<double> time_;
  std::vector<double> cohort_;
  std::vector<std::vector<double>> covariates_;
  std::vector<std::uint32_t> cluster_;
  std::size_t n_clusters_ = 0;
  std::vector<double> info_levels_;
  std::vector<std::uint32_t> info_index_;
  std::vector<double> time_levels_;
  std::vector<std::uint32_t> time_index_;
  std::size_t dropped_rows_ = 0;
};

// Reads a CSV stream into a PanelDataset. Rows with a missing role value are
// dropped when drop_missing is set and rejected otherwise. The cluster
// column may hold any text; other role columns must be numeric.
inline PanelDataset load_panel(std::istream& source, const VariableRoles& roles, bool drop_missing) {
  roles.validate();
  const csv::Table table = csv::read(source);

  auto col = [&](const std::string& name) {
    auto j = table.column(name);
    if (!j) throw Error(ErrorCode::MissingColumn, name);
    return *j;
  };
  const std::vector<std::string> names = roles.columns();
  std::vector<std::size_t> idx;
  for (const auto& name : names) idx.push_back(col(name));

  std::optional<std::size_t> cluster_col;
  if (roles.cluster) cluster_col = col(*roles.cluster);

  PanelColumns cols;
  cols.covariates.resize(roles.covariates.size());
  std::map<std::string, std::uint64_t> cluster_codes;
  std::size_t dropped = 0;

  auto numeric = [&](const std::vector<std::string>& rec, const std::string& name, std::size_t row) {
    auto v = csv::parse_double(rec[col(name)]);
    if (!v) throw Error(ErrorCode::NonNumeric, name + " row " + std::to_string(row + 2));
    return *v;
  };

  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& rec = table.rows[r];
    bool missing = false;
    for (std::size_t k = 0; k < names.size(); ++k) {
      if (csv::is_missing(rec[idx[k]])) {
        missing = true;
        if (!drop_missing)
          throw Error(ErrorCode::MissingValue, names[k] + " row " + std::to_string(r + 2));
      }
    }
    if (missing) {
      ++dropped;
      continue;
    }
    cols.outcome.push_back(numeric(rec, roles.outcome, r));
    if (roles.treat) cols.treat.push_back(numeric(rec, *roles.treat, r));
    if (roles.post) cols.post.push_back(numeric(rec, *roles.post, r));
    if (roles.info) cols.info.push_back(numeric(rec, *roles.info, r));
    if (roles.time) cols.time.push_back(numeric(rec, *roles.time, r));
    if (roles.cohort) cols.cohort.push_back(numeric(rec, *roles.cohort, r));
    for (std::size_t k = 0; k < roles.covariates.size(); ++k)
      cols.covariates[k].push_back(numeric(rec, roles.covariates[k], r));
    if (cluster_col) {
      const std::string key(csv::trim(rec[*cluster_col]));
      auto [it, inserted] = cluster_codes.try_emplace(key, cluster_codes.size());
      cols.cluster.push_back(it->second);
    }
  }
  if (cols.outcome.empty()) throw Error(ErrorCode::EmptyAfterFilter, "no rows left after filtering");
  return PanelDataset::from_columns(roles, std::move(cols), dropped);
}

// Treated and control rows sharing one information level.
struct Cell {
  double info_level = 0.0;
  std::vector<RowIndex> treated_rows;
  std::vector<RowIndex> control_rows;
};

// One cell per distinct info level among the given rows (restricted to
// post = 0 when pre_only), ascending by level.
inline std::vector<Cell> split_cells(const PanelDataset& ds, RowSpan rows, bool pre_only) {
  if (!ds.roles().info) throw Error(ErrorCode::Usage, "info role is required to split cells");
  if (!ds.roles().treat) throw Error(ErrorCode::Usage, "treat role is required to split cells");
  if (pre_only && !ds.roles().post) throw Error(ErrorCode::Usage, "post role is required for pre-period cells");
  const auto levels = ds.info_levels();
  const auto index = ds.info_index();
  const auto treat = ds.treat();
  const auto post = ds.post();

  std::vector<Cell> cells(levels.size());
  std::vector<bool> seen(levels.size(), false);
  for (RowIndex i : rows) {
    if (pre_only && post[i]) continue;
    const auto k = index[i];
    seen[k] = true;
    (treat[i] ? cells[k].treated_rows : cells[k].control_rows).push_back(i);
  }
  std::vector<Cell> out;
  for (std::size_t k = 0; k < levels.size(); ++k) {
    if (!seen[k]) continue;
    cells[k].info_level = levels[k];
    if (cells[k].treated_rows.empty() || cells[k].control_rows.empty())
      throw Error(ErrorCode::DegenerateCell, "info level " + csv::format_double(levels[k]));
    out.push_back(std::move(cells[k]));
  }
  return out;
}

inline std::vector<Cell> split_cells(const PanelDataset& ds, bool pre_only) {
  const auto rows = ds.all_rows();
  return split_cells(ds, rows, pre_only);
}

}  // namespace rdid
