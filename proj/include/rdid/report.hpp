#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rdid/csv.hpp"
#include "rdid/dynamics.hpp"
#include "rdid/error.hpp"
#include "rdid/pipeline.hpp"
#include "rdid/staggered.hpp"

namespace rdid {

inline constexpr const char* kVersion = "1.0.0";

// Fixed 4-decimal display; missing values print as ".".
inline std::string fmt4(std::optional<double> v) {
  if (!v || !std::isfinite(*v)) return ".";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

struct TableRow {
  std::string label;
  std::vector<std::string> keys;  // stored-result key of each column
};

// A display table whose cells are looked up in the stored results, so the
// printed numbers and the machine payload cannot disagree.
struct ResultsTable {
  std::string title;
  std::vector<std::string> columns;
  std::vector<TableRow> rows;
  std::vector<std::string> preamble;
  std::vector<std::string> notes;

  static constexpr int kLabelWidth = 15;
  static constexpr int kValueWidth = 10;

  std::string render(const std::map<std::string, double>& results) const {
    std::ostringstream out;
    for (const auto& line : preamble) out << line << '\n';
    const std::string rule = std::string(kLabelWidth + 1, '-') + "+" +
                             std::string(static_cast<std::size_t>(kValueWidth) * columns.size() + 1, '-');
    auto pad = [](const std::string& s, int width) {
      return s.size() >= static_cast<std::size_t>(width) ? s : std::string(width - s.size(), ' ') + s;
    };
    out << rule << '\n' << pad(title, kLabelWidth) << " |";
    for (const auto& c : columns) out << pad(c, kValueWidth);
    out << '\n' << rule << '\n';
    for (const auto& row : rows) {
      out << pad(row.label, kLabelWidth) << " |";
      for (const auto& key : row.keys) {
        std::optional<double> v;
        if (auto it = results.find(key); it != results.end()) v = it->second;
        out << pad(fmt4(v), kValueWidth);
      }
      out << '\n';
    }
    out << rule << '\n';
    for (const auto& line : notes) out << line << '\n';
    return out.str();
  }
};

// Everything a command reports: stored results keyed as in the table, plus
// the table layout and run metadata.
struct CommandOutput {
  std::string command;
  nlohmann::ordered_json options = nlohmann::ordered_json::object();
  std::map<std::string, double> results;
  std::size_t n_obs = 0;
  std::uint64_t seed = 0;
  ResultsTable table;

  std::string render() const { return table.render(results); }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["options"] = options;
    auto res = nlohmann::ordered_json::object();
    for (const auto& [k, v] : results) res[k] = v;
    j["results"] = std::move(res);
    j["meta"] = {{"n_obs", n_obs}, {"seed", seed}, {"version", kVersion}};
    auto rows = nlohmann::ordered_json::array();
    for (const auto& r : table.rows) rows.push_back({{"label", r.label}, {"keys", r.keys}});
    j["table"] = {{"title", table.title}, {"columns", table.columns},    {"rows", rows},
                  {"preamble", table.preamble}, {"notes", table.notes}};
    return j;
  }

  static CommandOutput from_json(const nlohmann::ordered_json& j) {
    try {
      CommandOutput o;
      o.command = j.at("command").get<std::string>();
      o.options = j.at("options");
      for (const auto& [k, v] : j.at("results").items()) o.results[k] = v.get<double>();
      o.n_obs = j.at("meta").at("n_obs").get<std::size_t>();
      o.seed = j.at("meta").at("seed").get<std::uint64_t>();
      const auto& t = j.at("table");
      o.table.title = t.at("title").get<std::string>();
      o.table.columns = t.at("columns").get<std::vector<std::string>>();
      o.table.preamble = t.at("preamble").get<std::vector<std::string>>();
      o.table.notes = t.at("notes").get<std::vector<std::string>>();
      for (const auto& r : t.at("rows"))
        o.table.rows.push_back({r.at("label").get<std::string>(), r.at("keys").get<std::vector<std::string>>()});
      return o;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Io, std::string("malformed results payload: ") + e.what());
    }
  }

  // One CSV row per table row: label, then the displayed columns.
  void write_csv(std::ostream& out) const {
    std::vector<std::string> header{"label"};
    header.insert(header.end(), table.columns.begin(), table.columns.end());
    csv::write_row(out, header);
    for (const auto& r : table.rows) {
      std::vector<std::string> fields{r.label};
      for (const auto& key : r.keys) {
        auto it = results.find(key);
        fields.push_back(it == results.end() ? "" : csv::format_double(it->second));
      }
      csv::write_row(out, fields);
    }
  }
};

namespace detail {

inline std::string level_label(double v) { return csv::format_double(v); }

inline std::vector<std::string> role_preamble(const VariableRoles& roles, bool treat_line) {
  std::vector<std::string> lines{" **** RDID Estimation version " + std::string(kVersion) + " **** ",
                                 "Y name: " + roles.outcome};
  if (treat_line && roles.treat) lines.push_back("D name: " + *roles.treat);
  if (roles.cohort) lines.push_back("G name: " + *roles.cohort);
  if (!roles.covariates.empty()) {
    std::string x = "X name(s):";
    for (const auto& c : roles.covariates) x += " " + c;
    lines.push_back(x);
  }
  return lines;
}

}  // namespace detail

inline CommandOutput report_rdid(const VariableRoles& roles, const RdidResult& r, std::uint64_t seed) {
  CommandOutput o;
  o.command = "rdid";
  o.n_obs = r.n_obs;
  o.seed = seed;
  auto& res = o.results;
  res[r.estimand.kind == EstimandKind::DoublyRobust ? "DR" : "OLS"] = r.estimand.value;
  res["N"] = static_cast<double>(r.n_obs);
  auto& t = o.table;
  t.preamble = detail::role_preamble(roles, true);
  switch (r.type) {
    case RdidType::Simple: {
      res["SB_LB"] = r.bounds.sb_inf;
      res["SB_UB"] = r.bounds.sb_sup;
      res["RDID_LB"] = r.bounds.lower;
      res["RDID_UB"] = r.bounds.upper;
      auto put = [&](const char* name, const std::optional<ConfidenceInterval>& ci) {
        if (!ci) return;
        res[std::string(name) + "_LB"] = ci->lower;
        res[std::string(name) + "_UB"] = ci->upper;
      };
      put("CI1", r.ci_bounds);
      put("CI2", r.ci_att);
      put("CI3", r.ci_union);
      t.title = "Y: " + roles.outcome;
      t.columns = {"LB", "UB"};
      t.rows = {{"RDID", {"RDID_LB", "RDID_UB"}},
                {"CI_1", {"CI1_LB", "CI1_UB"}},
                {"CI_2", {"CI2_LB", "CI2_UB"}},
                {"CI_3", {"CI3_LB", "CI3_UB"}}};
      t.notes = {"* RDID: Point estimates for RDID bounds",
                 "* CI_1: Confidence interval for the bounds",
                 "* CI_2: Confidence interval for the ATT",
                 "* CI_3: Confidence interval from union bounds"};
      break;
    }
    case RdidType::PolicyOriented: {
      t.title = "Y: " + roles.outcome;
      t.columns = {"PE", "CI_LB", "CI_UB"};
      for (const auto& po : r.po) {
        const std::string name = loss_name(po.estimate.loss);
        res[name + "_PE"] = po.estimate.value;
        if (po.ci) {
          res[name + "_CI_LB"] = po.ci->lower;
          res[name + "_CI_UB"] = po.ci->upper;
        }
        t.rows.push_back({name, {name + "_PE", name + "_CI_LB", name + "_CI_UB"}});
      }
      break;
    }
    case RdidType::LinearForecast: {
      const bool dr = r.estimand.kind == EstimandKind::DoublyRobust;
      res["SB_hat"] = r.forecast->sb_hat;
      res["proj_PE"] = r.forecast->value;
      res["peval"] = r.forecast->peval;
      if (r.forecast_ci) {
        res["CI_LB"] = r.forecast_ci->lower;
        res["CI_UB"] = r.forecast_ci->upper;
      }
      t.title = "Y";
      t.columns = {"PE", "CI_LB", "CI_UB", dr ? "TAU_DR" : "OLS", "SB_hat"};
      t.rows = {{roles.outcome, {"proj_PE", "CI_LB", "CI_UB", dr ? "DR" : "OLS", "SB_hat"}}};
      t.notes = {"* Selection bias predicted at " + csv::format_double(r.forecast->peval)};
      break;
    }
  }
  return o;
}

inline CommandOutput report_dynamic(const VariableRoles& roles, const DynamicConfig& cfg,
                                    const std::vector<DynamicRow>& rows, std::size_t n_obs, std::uint64_t seed) {
  CommandOutput o;
  o.command = "rdid-dy";
  o.n_obs = n_obs;
  o.seed = seed;
  auto& res = o.results;
  res["N"] = static_cast<double>(n_obs);
  auto& t = o.table;
  t.title = "T: " + roles.time.value_or("t");
  const bool bounds = cfg.type == RdidType::Simple;
  if (bounds) t.columns = {"RDID_LB", "RDID_UB", "CI_LB", "CI_UB"};
  else t.columns = {"RDID_PE", "CI_LB", "CI_UB"};
  for (const auto& r : rows) {
    const std::string suffix = "_" + detail::level_label(r.t);
    if (r.bounds) {
      res["RDID_LB" + suffix] = r.bounds->lower;
      res["RDID_UB" + suffix] = r.bounds->upper;
    }
    if (r.point) res["RDID_PE" + suffix] = *r.point;
    if (r.ci) {
      res["CI_LB" + suffix] = r.ci->lower;
      res["CI_UB" + suffix] = r.ci->upper;
    }
    if (bounds) t.rows.push_back({detail::level_label(r.t), {"RDID_LB" + suffix, "RDID_UB" + suffix, "CI_LB" + suffix, "CI_UB" + suffix}});
    else t.rows.push_back({detail::level_label(r.t), {"RDID_PE" + suffix, "CI_LB" + suffix, "CI_UB" + suffix}});
  }
  switch (cfg.type) {
    case RdidType::Simple:
      if (cfg.citype == CiType::BoundsYe) t.notes.push_back("* Confidence intervals are obtained for the bounds");
      else if (cfg.citype == CiType::AttYe) t.notes.push_back("* Confidence intervals are obtained for the ATT");
      else t.notes.push_back("* Confidence intervals are obtained from union bounds");
      break;
    case RdidType::PolicyOriented:
      t.notes.push_back(std::string("* RDID estimates are obtained as PO-RDID estimates (") + loss_name(cfg.loss) + ")");
      break;
    case RdidType::LinearForecast:
      t.notes.push_back("* RDID estimates are obtained from linear predictions of the selection bias");
      break;
  }
  for (const auto& r : rows)
    if (r.error) t.notes.push_back("! " + detail::level_label(r.t) + ": " + *r.error);
  return o;
}

inline CommandOutput report_staggered(const VariableRoles& roles, const StaggeredResult& r, double level,
                                      std::uint64_t seed) {
  CommandOutput o;
  o.command = "rdidstag";
  o.n_obs = r.n_obs;
  o.seed = seed;
  auto& res = o.results;
  res["N"] = static_cast<double>(r.n_obs);
  auto& t = o.table;
  t.preamble = detail::role_preamble(roles, false);
  if (!r.periods.post_from_role)
    t.preamble.push_back("postname is not specified: using units with T >= min(G) as post-period units.");
  if (!r.periods.info_from_role)
    t.preamble.push_back("infoname is not specified: using pre-period T < min(G) as the information set.");
  t.title = "ATT(G/T)";
  const std::string lv = csv::format_double(level);
  t.columns = {"RDID_LB", "RDID_UB", lv + "CI_LB", lv + "CI_UB"};
  for (const auto& c : r.cells) {
    const std::string g = detail::level_label(c.g);
    const std::string tt = detail::level_label(c.t);
    const std::string suffix = "_" + g + "_" + tt;
    if (c.bounds) {
      res["RDID_LB" + suffix] = c.bounds->lower;
      res["RDID_UB" + suffix] = c.bounds->upper;
    }
    if (c.ci) {
      res["CI_LB" + suffix] = c.ci->lower;
      res["CI_UB" + suffix] = c.ci->upper;
    }
    t.rows.push_back({"ATT(" + g + "/" + tt + ")",
                      {"RDID_LB" + suffix, "RDID_UB" + suffix, "CI_LB" + suffix, "CI_UB" + suffix}});
  }
  auto joined = [](const std::vector<double>& v) {
    std::string s;
    for (double x : v) s += " " + csv::format_double(x);
    return s;
  };
  t.notes = {"- Information elements:" + joined(r.periods.info_levels),
             "- Post-periods:" + joined(r.periods.post_periods), "- Groups:" + joined(r.periods.cohorts)};
  for (const auto& c : r.cells)
    if (c.error) t.notes.push_back("! ATT(" + detail::level_label(c.g) + "/" + detail::level_label(c.t) + "): " + *c.error);
  return o;
}

}  // namespace rdid
