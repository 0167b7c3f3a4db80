#pragma once

#include <algorithm>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rdid/dynamics.hpp"
#include "rdid/error.hpp"
#include "rdid/panel.hpp"
#include "rdid/pipeline.hpp"
#include "rdid/report.hpp"
#include "rdid/simulation.hpp"
#include "rdid/staggered.hpp"
#include "rdid/svg.hpp"

namespace rdid {

inline int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Usage: return 2;
    case ErrorCategory::Data: return 3;
    case ErrorCategory::Estimation: return 4;
    case ErrorCategory::Io: return 5;
  }
  return 1;
}

// Parsed flags shared by the estimation subcommands.
struct CommandSpec {
  std::string input;
  std::string outcome;
  std::vector<std::string> covars;
  std::string treat, post, info, tname, gname, cluster;
  int rdidtype = 0;
  std::optional<double> peval;
  int citype = 1;
  std::string losstype = "L1";
  double level = 95.0;
  std::size_t brep = 500;
  std::uint64_t seed = 20240101;
  unsigned threads = 0;
  bool drop_missing = false;
  std::string json_path, csv_path, figure_stem;

  VariableRoles roles() const {
    VariableRoles r;
    r.outcome = outcome;
    auto opt = [](const std::string& s) { return s.empty() ? std::nullopt : std::optional<std::string>(s); };
    r.treat = opt(treat);
    r.post = opt(post);
    r.info = opt(info);
    r.time = opt(tname);
    r.cohort = opt(gname);
    r.cluster = opt(cluster);
    r.covariates = covars;
    return r;
  }

  BootstrapPlan plan() const {
    BootstrapPlan p;
    p.replicates = brep;
    p.seed = seed;
    p.level = level;
    p.threads = threads;
    return p;
  }

  nlohmann::ordered_json options_json(bool estimator_flags, bool dynamic_flags) const {
    nlohmann::ordered_json j;
    j["input"] = input;
    j["outcome"] = outcome;
    j["covars"] = covars;
    auto put = [&](const char* k, const std::string& v) {
      if (!v.empty()) j[k] = v;
    };
    put("treat", treat);
    put("post", post);
    put("info", info);
    put("tname", tname);
    put("gname", gname);
    put("cluster", cluster);
    if (estimator_flags) {
      j["rdidtype"] = rdidtype;
      if (peval) j["peval"] = *peval;
    }
    if (dynamic_flags) {
      j["citype"] = citype;
      j["losstype"] = losstype;
    }
    j["level"] = level;
    j["brep"] = brep;
    j["seed"] = seed;
    return j;
  }
};

namespace detail {

inline Loss parse_loss(const std::string& s) {
  std::string l = s;
  std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (l == "l1") return Loss::L1;
  if (l == "l2") return Loss::L2;
  if (l == "linf") return Loss::Linf;
  throw Error(ErrorCode::Usage, "losstype must be L1, L2 or Linf");
}

inline PanelDataset load_input(const CommandSpec& spec, const VariableRoles& roles) {
  std::ifstream f(spec.input, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot open '" + spec.input + "'");
  return load_panel(f, roles, spec.drop_missing);
}

inline void write_outputs(const CommandSpec& spec, const CommandOutput& o) {
  if (!spec.json_path.empty()) {
    std::ofstream f(spec.json_path, std::ios::binary);
    if (!f) throw Error(ErrorCode::Io, "cannot open '" + spec.json_path + "' for writing");
    f << o.to_json().dump(2) << '\n';
    if (!f) throw Error(ErrorCode::Io, "failed writing '" + spec.json_path + "'");
  }
  if (!spec.csv_path.empty()) {
    std::ofstream f(spec.csv_path, std::ios::binary);
    if (!f) throw Error(ErrorCode::Io, "cannot open '" + spec.csv_path + "' for writing");
    o.write_csv(f);
    if (!f) throw Error(ErrorCode::Io, "failed writing '" + spec.csv_path + "'");
  }
}

inline void add_role_flags(CLI::App* app, CommandSpec& s) {
  app->add_option("input", s.input, "CSV file in long format")->required();
  app->add_option("--outcome", s.outcome, "outcome column")->required();
  app->add_option("--covars", s.covars, "covariate columns (comma separated)")->delimiter(',');
  app->add_option("--cluster", s.cluster, "cluster column for resampling");
  app->add_option("--level", s.level, "confidence level in percent")->capture_default_str();
  app->add_option("--brep", s.brep, "bootstrap replicates")->capture_default_str();
  app->add_option("--seed", s.seed, "bootstrap seed")->capture_default_str();
  app->add_option("--threads", s.threads, "worker threads (0 = all cores)");
  app->add_flag("--drop-missing", s.drop_missing, "drop rows with missing role values");
  app->add_option("--json", s.json_path, "write results as JSON");
  app->add_option("--csv", s.csv_path, "write the table as CSV");
  app->add_option("--figure", s.figure_stem, "write SVG figure(s) with this file stem");
}

inline int run_rdid_cmd(const CommandSpec& spec, std::ostream& out) {
  const VariableRoles roles = spec.roles();
  roles.require_for(Command::Rdid);
  if (spec.rdidtype < 0 || spec.rdidtype > 2) throw Error(ErrorCode::Usage, "rdidtype must be 0, 1 or 2");
  const PanelDataset ds = load_input(spec, roles);
  RdidOptions opt;
  opt.type = static_cast<RdidType>(spec.rdidtype);
  opt.peval = spec.peval;
  opt.plan = spec.plan();
  const RdidResult r = run_rdid(ds, opt);
  CommandOutput o = report_rdid(roles, r, spec.seed);
  o.options = spec.options_json(true, false);
  out << o.render();
  write_outputs(spec, o);
  if (!spec.figure_stem.empty()) {
    FigureSeries fs;
    fs.title = "Selection bias by information level";
    fs.x_label = *roles.info;
    fs.y_label = "Estimated selection bias";
    for (const auto& e : r.profile.entries) {
      fs.x.push_back(e.level);
      fs.y.push_back(e.sb);
    }
    const std::string path = spec.figure_stem + ".svg";
    emit_figure(fs, FigureKind::Scatter, path);
    out << "file " << path << " saved\n";
  }
  return 0;
}

inline int run_dynamic_cmd(const CommandSpec& spec, std::ostream& out) {
  const VariableRoles roles = spec.roles();
  roles.require_for(Command::RdidDy);
  if (spec.rdidtype < 0 || spec.rdidtype > 2) throw Error(ErrorCode::Usage, "rdidtype must be 0, 1 or 2");
  if (spec.citype < 1 || spec.citype > 3) throw Error(ErrorCode::Usage, "citype must be 1, 2 or 3");
  DynamicConfig cfg;
  cfg.type = static_cast<RdidType>(spec.rdidtype);
  cfg.citype = static_cast<CiType>(spec.citype);
  cfg.loss = parse_loss(spec.losstype);
  cfg.peval = spec.peval;
  cfg.plan = spec.plan();
  const PanelDataset ds = load_input(spec, roles);
  const auto rows = rdid_by_period(ds, cfg);
  CommandOutput o = report_dynamic(roles, cfg, rows, ds.n_obs(), spec.seed);
  o.options = spec.options_json(true, true);
  out << o.render();
  write_outputs(spec, o);
  if (!spec.figure_stem.empty()) {
    FigureSeries fs;
    fs.title = cfg.type == RdidType::Simple ? "RDID bounds by period" : "RDID estimates by period";
    fs.x_label = *roles.time;
    fs.y_label = "ATT";
    for (const auto& r : rows) {
      fs.x.push_back(r.t);
      if (cfg.type == RdidType::Simple) {
        fs.lower.push_back(r.bounds ? r.bounds->lower : NAN);
        fs.upper.push_back(r.bounds ? r.bounds->upper : NAN);
      } else {
        fs.y.push_back(r.point.value_or(NAN));
      }
      fs.ci_lower.push_back(r.ci ? r.ci->lower : NAN);
      fs.ci_upper.push_back(r.ci ? r.ci->upper : NAN);
    }
    const std::string path = spec.figure_stem + ".svg";
    emit_figure(fs, FigureKind::Interval, path);
    out << "file " << path << " saved\n";
  }
  return 0;
}

inline int run_staggered_cmd(const CommandSpec& spec, std::ostream& out) {
  const VariableRoles roles = spec.roles();
  roles.require_for(Command::RdidStag);
  const PanelDataset ds = load_input(spec, roles);
  StaggeredOptions opt;
  opt.plan = spec.plan();
  opt.plan.validate();
  const StaggeredResult r = staggered_table(ds, opt);
  CommandOutput o = report_staggered(roles, r, spec.level, spec.seed);
  o.options = spec.options_json(false, false);
  out << o.render();
  write_outputs(spec, o);
  if (!spec.figure_stem.empty()) {
    for (double g : r.periods.cohorts) {
      FigureSeries fs;
      fs.title = "Cohort " + csv::format_double(g);
      fs.x_label = *roles.time;
      fs.y_label = "ATT(g,t)";
      for (const auto& c : r.cells) {
        if (c.g != g) continue;
        fs.x.push_back(c.t);
        fs.lower.push_back(c.bounds ? c.bounds->lower : NAN);
        fs.upper.push_back(c.bounds ? c.bounds->upper : NAN);
        fs.ci_lower.push_back(c.ci ? c.ci->lower : NAN);
        fs.ci_upper.push_back(c.ci ? c.ci->upper : NAN);
      }
      const std::string path = spec.figure_stem + "_g" + csv::format_double(g) + ".svg";
      emit_figure(fs, FigureKind::Interval, path);
      out << "file " << path << " saved\n";
    }
  }
  return 0;
}

struct SimulateSpec {
  std::string kind = "ashenfelter";
  std::size_t n = 1000;
  double theta = 0.0;
  double p = 0.5;
  int horizon = 4;
  int post_periods = 1;
  std::uint64_t seed = 1;
  std::string sampling = "panel";
  std::string export_path;
  std::size_t sims = 0;
  std::size_t brep = 300;
  double level = 95.0;
  std::uint64_t boot_seed = 20240101;
  unsigned threads = 0;
  std::string json_path, csv_path;
};

inline int run_simulate_cmd(const SimulateSpec& s, std::ostream& out) {
  DgpSpec spec;
  spec.kind = parse_dgp_kind(s.kind);
  spec.n = s.n;
  spec.theta = s.theta;
  spec.p = s.p;
  spec.horizon = s.horizon;
  spec.post_periods = s.post_periods;
  spec.seed = s.seed;
  if (s.sampling == "panel") spec.sampling = Sampling::Panel;
  else if (s.sampling == "cross-section") spec.sampling = Sampling::RepeatedCrossSection;
  else throw Error(ErrorCode::Usage, "sampling must be 'panel' or 'cross-section'");
  spec.validate();
  if (s.export_path.empty() && s.sims == 0) throw Error(ErrorCode::Usage, "nothing to do: give --export or --sims");

  if (!s.export_path.empty()) {
    const GeneratedData data = generate(spec);
    std::ofstream f(s.export_path, std::ios::binary);
    if (!f) throw Error(ErrorCode::Io, "cannot open '" + s.export_path + "' for writing");
    data.write_csv(f);
    if (!f) throw Error(ErrorCode::Io, "failed writing '" + s.export_path + "'");
    out << "wrote " << data.rows() << " rows to " << s.export_path << '\n';
  }
  if (s.sims == 0) return 0;

  BootstrapPlan plan;
  plan.replicates = s.brep;
  plan.level = s.level;
  plan.seed = s.boot_seed;
  plan.threads = s.threads;
  const SimulationReport rep = run_coverage_study(spec, s.sims, plan);

  CommandOutput o;
  o.command = "simulate";
  o.seed = spec.seed;
  o.n_obs = spec.n;
  o.options = {{"kind", s.kind}, {"n", s.n}, {"theta", s.theta}, {"sims", s.sims}, {"brep", s.brep}, {"level", s.level}};
  o.table.title = std::string(dgp_name(spec.kind));
  o.table.columns = {"CP_inf", "Avg_Len"};
  for (const auto& c : rep.cells) {
    std::string label = c.ci_type;
    if (spec.kind == DgpKind::Staggered) label = "ATT(" + std::to_string(c.g) + "/" + std::to_string(c.t) + ")";
    const std::string suffix = spec.kind == DgpKind::Staggered
                                   ? "_" + std::to_string(c.g) + "_" + std::to_string(c.t)
                                   : "_" + c.ci_type;
    o.results["CP" + suffix] = c.cp_inf;
    o.results["LEN" + suffix] = c.avg_length;
    o.results["SIMS" + suffix] = static_cast<double>(c.successes);
    o.table.rows.push_back({label, {"CP" + suffix, "LEN" + suffix}});
  }
  o.table.notes = {"* " + std::to_string(rep.sims) + " simulations, " + std::to_string(rep.failures) +
                   " failed, " + std::to_string(rep.replicates) + " bootstrap replicates"};
  out << o.render();
  if (!s.json_path.empty()) {
    std::ofstream f(s.json_path, std::ios::binary);
    if (!f) throw Error(ErrorCode::Io, "cannot open '" + s.json_path + "' for writing");
    f << rep.to_json().dump(2) << '\n';
  }
  if (!s.csv_path.empty()) {
    std::ofstream f(s.csv_path, std::ios::binary);
    if (!f) throw Error(ErrorCode::Io, "cannot open '" + s.csv_path + "' for writing");
    rep.write_csv(f);
  }
  return 0;
}

}  // namespace detail

// Runs one command line (without the program name). Tables go to `out`,
// diagnostics to `err`; the return value is the process exit status.
inline int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Robust difference-in-differences estimation", "rdid"};
  app.require_subcommand(1);

  CommandSpec rdid_spec, dy_spec, stag_spec;
  auto* rdid = app.add_subcommand("rdid", "bounds, policy-oriented or forecast RDID estimates");
  detail::add_role_flags(rdid, rdid_spec);
  rdid->add_option("--treat", rdid_spec.treat, "treatment indicator column")->required();
  rdid->add_option("--post", rdid_spec.post, "post-period indicator column")->required();
  rdid->add_option("--info", rdid_spec.info, "information index column")->required();
  rdid->add_option("--rdidtype", rdid_spec.rdidtype, "0 bounds, 1 policy-oriented, 2 linear forecast")
      ->capture_default_str();
  rdid->add_option("--peval", rdid_spec.peval, "evaluation point for --rdidtype 2");

  auto* dy = app.add_subcommand("rdid-dy", "RDID estimates for each post period");
  detail::add_role_flags(dy, dy_spec);
  dy->add_option("--treat", dy_spec.treat, "treatment indicator column")->required();
  dy->add_option("--post", dy_spec.post, "post-period indicator column")->required();
  dy->add_option("--info", dy_spec.info, "information index column")->required();
  dy->add_option("--tname", dy_spec.tname, "time column")->required();
  dy->add_option("--rdidtype", dy_spec.rdidtype, "0 bounds, 1 policy-oriented, 2 linear forecast")
      ->capture_default_str();
  dy->add_option("--peval", dy_spec.peval, "evaluation point for --rdidtype 2");
  dy->add_option("--citype", dy_spec.citype, "1 bounds, 2 ATT, 3 union bounds")->capture_default_str();
  dy->add_option("--losstype", dy_spec.losstype, "L1, L2 or Linf")->capture_default_str();

  auto* stag = app.add_subcommand("rdidstag", "cohort-time bounds under staggered adoption");
  detail::add_role_flags(stag, stag_spec);
  stag->add_option("--gname", stag_spec.gname, "cohort column (0 = never treated)")->required();
  stag->add_option("--tname", stag_spec.tname, "time column")->required();
  stag->add_option("--post", stag_spec.post, "post-period indicator column");
  stag->add_option("--info", stag_spec.info, "information index column");

  detail::SimulateSpec sim;
  auto* simulate = app.add_subcommand("simulate", "generate a simulated dataset or run a coverage study");
  simulate->add_option("--kind", sim.kind, "ashenfelter, covariate or staggered")->capture_default_str();
  simulate->add_option("--n", sim.n, "units (or rows per period for cross-sections)")->capture_default_str();
  simulate->add_option("--theta", sim.theta, "treatment effect parameter")->capture_default_str();
  simulate->add_option("--p", sim.p, "P(X = 1) for the covariate design")->capture_default_str();
  simulate->add_option("--horizon", sim.horizon, "horizon of the staggered design")->capture_default_str();
  simulate->add_option("--post-periods", sim.post_periods, "post periods of the ashenfelter design")
      ->capture_default_str();
  simulate->add_option("--seed", sim.seed, "data seed")->capture_default_str();
  simulate->add_option("--sampling", sim.sampling, "panel or cross-section")->capture_default_str();
  simulate->add_option("--export", sim.export_path, "write the generated dataset as CSV");
  simulate->add_option("--sims", sim.sims, "number of coverage simulations");
  simulate->add_option("--brep", sim.brep, "bootstrap replicates per simulation")->capture_default_str();
  simulate->add_option("--level", sim.level, "confidence level in percent")->capture_default_str();
  simulate->add_option("--boot-seed", sim.boot_seed, "bootstrap seed")->capture_default_str();
  simulate->add_option("--threads", sim.threads, "worker threads (0 = all cores)");
  simulate->add_option("--json", sim.json_path, "write the coverage report as JSON");
  simulate->add_option("--csv", sim.csv_path, "write the coverage report as CSV");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(ErrorCategory::Usage);
  }

  try {
    if (rdid->parsed()) return detail::run_rdid_cmd(rdid_spec, out);
    if (dy->parsed()) return detail::run_dynamic_cmd(dy_spec, out);
    if (stag->parsed()) return detail::run_staggered_cmd(stag_spec, out);
    return detail::run_simulate_cmd(sim, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.category());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace rdid
