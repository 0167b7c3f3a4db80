// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "oracle.hpp"
#include "rdid/cli.hpp"
#include "rdid/rdid.hpp"
#include "test_util.hpp"

using namespace rdid;

namespace {

constexpr double kC = 1.81273524710015957031776066378;
constexpr double kExample2Lower = -8.2509409884006382812710426551;
constexpr double kExample2Upper = 2.62547049420031914063552132755;

struct Check {
  bool ok = true;
  std::string detail;

  void expect(bool cond, const std::string& what) {
    if (cond) return;
    ok = false;
    if (detail.size() < 600) detail += (detail.empty() ? "" : "; ") + what;
  }
  void near(double got, double want, double tol, const std::string& what) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s = %.6f, want %.6f +- %.3g", what.c_str(), got, want, tol);
    expect(std::abs(got - want) <= tol, buf);
  }
};

int failures = 0;

void criterion(int id, const char* name, double budget_s, const std::function<void(Check&)>& body) {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.expect(false, std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f s, budget %.0f s", secs, budget_s);
  c.expect(secs <= budget_s, std::string("over time budget (") + buf + ")");
  std::printf("%s C%d %s (%s)%s%s\n", c.ok ? "PASS" : "FAIL", id, name, buf, c.detail.empty() ? "" : ": ",
              c.detail.c_str());
  std::fflush(stdout);
  if (!c.ok) ++failures;
}

PanelDataset example2(std::size_t n, std::uint64_t seed) {
  DgpSpec spec;
  spec.theta = -1;
  spec.n = n;
  spec.seed = seed;
  return gen_ashenfelter(spec).dataset();
}

void coverage_check(Check& c, DgpKind kind, const double (&cp_len)[3]) {
  BootstrapPlan plan;
  plan.replicates = 300;
  const auto rep = run_coverage_study(coverage_design(kind, 1000), 500, plan);
  const char* types[] = {"bounds_ye", "att_ye", "union"};
  for (int k = 0; k < 3; ++k) {
    const auto& cell = rep.cell(types[k]);
    char buf[200];
    std::snprintf(buf, sizeof buf, "%s CP %.4f len %.4f (ref %.4f)", types[k], cell.cp_inf, cell.avg_length,
                  cp_len[k]);
    c.expect(cell.cp_inf >= 0.92 && cell.cp_inf <= 0.98, buf);
    c.expect(std::abs(cell.avg_length / cp_len[k] - 1.0) <= 0.10, buf);
    if (c.ok && k == 2) c.detail = buf;
  }
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace

int main() {
  criterion(1, "oracle equivalence on small datasets", 1, [](Check& c) {
    std::mt19937_64 gen(1);
    for (int rep = 0; rep < 200; ++rep) {
      const auto raw = oracle::random_small(gen);
      const auto o = oracle::compute(raw);
      const auto ds = fixture::make_panel(raw.y, raw.d, raw.post, raw.info);
      const auto rows = ds.all_rows();
      const auto prof = selection_bias_profile(ds, rows, false);
      const auto e = post_period_estimand(ds, rows, false);
      const auto b = rdid_bounds(e, prof);
      const std::string tag = "dataset " + std::to_string(rep);
      c.expect(std::abs(b.lower - o.lower) <= 1e-12 && std::abs(b.upper - o.upper) <= 1e-12, tag + " bounds");
      c.expect(std::abs(po_rdid(e, prof, Loss::L1).value - o.l1) <= 1e-12, tag + " L1");
      c.expect(std::abs(po_rdid(e, prof, Loss::L2).value - o.l2) <= 1e-12, tag + " L2");
      c.expect(std::abs(po_rdid(e, prof, Loss::Linf).value - o.linf) <= 1e-12, tag + " Linf");
      if (o.levels.size() >= 2)
        c.expect(std::abs(sb_linear_forecast(prof, e, 1.0).value - (o.estimand - o.intercept - o.slope)) <= 1e-12,
                 tag + " forecast");
    }
  });

  criterion(2, "analytic bounds, ashenfelter design at N=50000", 10, [](Check& c) {
    const auto ds = example2(50000, 20240101);
    const auto rows = ds.all_rows();
    const auto prof = selection_bias_profile(ds, rows, false);
    const auto e = post_period_estimand(ds, rows, false);
    const auto b = rdid_bounds(e, prof);
    c.near(b.lower, kExample2Lower, 0.15, "lower");
    c.near(b.upper, kExample2Upper, 0.15, "upper");
    c.near(e.value - prof.entries.back().sb, -1.0 + 2 * kC, 0.15, "DID");
  });

  criterion(3, "coverage, ashenfelter design N=1000", 900, [](Check& c) {
    const double ref[3] = {15.1823, 14.9536, 15.1933};
    coverage_check(c, DgpKind::AshenfelterDip, ref);
  });

  criterion(4, "coverage, covariate design N=1000", 900, [](Check& c) {
    const double ref[3] = {3.4183, 3.3703, 3.4183};
    coverage_check(c, DgpKind::CovariateExample, ref);
  });

  criterion(5, "staggered coverage, cohort 1, N=1000", 1200, [](Check& c) {
    BootstrapPlan plan;
    plan.replicates = 300;
    const auto rep = run_coverage_study(coverage_design(DgpKind::Staggered, 1000), 300, plan);
    const double ref[4] = {22.9296, 23.0335, 23.2027, 23.4838};
    std::string summary;
    for (int t = 1; t <= 4; ++t) {
      const auto& cell = rep.cell("bounds_ye", 1, t);
      char buf[160];
      std::snprintf(buf, sizeof buf, "t=%d CP %.4f len %.4f (ref %.4f)", t, cell.cp_inf, cell.avg_length, ref[t - 1]);
      c.expect(cell.cp_inf >= 0.93 && cell.cp_inf <= 1.0, buf);
      c.expect(std::abs(cell.avg_length / ref[t - 1] - 1.0) <= 0.10, buf);
      summary += std::string(summary.empty() ? "" : ", ") + buf;
    }
    char spread[80];
    std::snprintf(spread, sizeof spread, "width spread %.3g", rep.max_width_spread);
    c.expect(rep.max_width_spread <= 1e-12, spread);
    if (c.ok) c.detail = summary + ", " + spread;
  });

  criterion(6, "PO-RDID optimum identities", 10, [](Check& c) {
    const auto ds = example2(50000, 6);
    const auto rows = ds.all_rows();
    const auto prof = selection_bias_profile(ds, rows, false);
    const auto e = post_period_estimand(ds, rows, false);
    c.near(po_rdid(e, prof, Loss::L1).value, -1.0, 0.1, "L1");
    c.near(po_rdid(e, prof, Loss::L2).value, -1.0 - 2 * kC / 3, 0.1, "L2");
    c.near(po_rdid(e, prof, Loss::Linf).value, -1.0 - kC, 0.1, "Linf");
    // Keep only t = 0 and t = 1: a single info level.
    std::vector<RowIndex> two;
    for (RowIndex r : rows)
      if (ds.info()[r] >= 0.0) two.push_back(r);
    const auto p1 = selection_bias_profile(ds, two, false);
    const auto e1 = post_period_estimand(ds, two, false);
    const double did = e1.value - p1.entries.front().sb;
    c.expect(p1.size() == 1, "singleton profile");
    for (Loss loss : kAllLosses)
      c.expect(po_rdid(e1, p1, loss).value == did, std::string("singleton ") + loss_name(loss));
  });

  criterion(7, "linear forecast of selection bias", 10, [](Check& c) {
    const auto ds = example2(50000, 7);
    const auto rows = ds.all_rows();
    const auto f = sb_linear_forecast(selection_bias_profile(ds, rows, false), post_period_estimand(ds, rows, false), 1.0);
    c.near(f.sb_hat, -7 * kC / 3, 0.1, "SB_hat(1)");
  });

  criterion(8, "confidence interval structure", 120, [](Check& c) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      DgpSpec spec;
      spec.kind = seed == 2 ? DgpKind::CovariateExample : DgpKind::AshenfelterDip;
      spec.theta = 1;
      spec.n = 800;
      spec.seed = seed;
      const auto ds = generate(spec).dataset();
      double prev[3] = {0, 0, 0};
      for (double level : {80.0, 90.0, 95.0, 99.0}) {
        RdidOptions opt;
        opt.plan.replicates = 200;
        opt.plan.level = level;
        opt.plan.seed = seed;
        opt.plan.threads = 1;
        const auto r = run_rdid(ds, opt);
        opt.plan.threads = 4;
        const auto r4 = run_rdid(ds, opt);
        const std::string tag = "seed " + std::to_string(seed) + " level " + std::to_string(int(level));
        const double L = r.bounds.lower, U = r.bounds.upper;
        c.expect(r.ci_bounds->contains(L, U), tag + " CI1");
        c.expect(r.ci_att->contains(L, U), tag + " CI2");
        c.expect(r.ci_union->contains(L, U), tag + " CI3");
        const double len[3] = {r.ci_bounds->length(), r.ci_att->length(), r.ci_union->length()};
        for (int k = 0; k < 3; ++k) {
          c.expect(len[k] >= prev[k], tag + " widening");
          prev[k] = len[k];
        }
        c.expect(r.ci_bounds->lower == r4.ci_bounds->lower && r.ci_bounds->upper == r4.ci_bounds->upper &&
                     r.ci_att->lower == r4.ci_att->lower && r.ci_union->upper == r4.ci_union->upper,
                 tag + " thread invariance");
      }
    }
  });

  criterion(9, "CLI round trip and table layout", 60, [](Check& c) {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "rdid_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string data = (dir / "data.csv").string();
    const std::string json = (dir / "out.json").string();
    std::ostringstream out, err;
    c.expect(run_command({"simulate", "--kind", "ashenfelter", "--n", "60", "--theta", "-1", "--seed", "11",
                          "--export", data},
                         out, err) == 0,
             "simulate: " + err.str());
    out.str("");
    c.expect(run_command({"rdid", data, "--outcome", "y", "--treat", "d", "--post", "post", "--info", "t",
                          "--cluster", "id", "--brep", "50", "--seed", "7", "--threads", "2", "--json", json},
                         out, err) == 0,
             "rdid: " + err.str());

    DgpSpec spec;
    spec.theta = -1;
    spec.n = 60;
    spec.seed = 11;
    const auto ds = generate(spec).dataset();
    RdidOptions opt;
    opt.plan.replicates = 50;
    opt.plan.seed = 7;
    const auto direct = report_rdid(ds.roles(), run_rdid(ds, opt), 7);
    const auto back = CommandOutput::from_json(nlohmann::ordered_json::parse(slurp(json)));
    c.expect(back.results == direct.results, "stored results differ from in-process run");
    c.expect(out.str() == direct.render(), "printed table differs from in-process run");
    c.expect(out.str() == slurp(fs::path(RDID_GOLDEN_DIR) / "rdid_type0.txt"), "table differs from golden file");

    const std::regex row(R"(^ +(RDID|CI_[123]) \|( +-?\d+\.\d{4}){2}$)");
    std::istringstream lines(out.str());
    std::string line;
    int matched = 0;
    while (std::getline(lines, line)) matched += std::regex_match(line, row);
    c.expect(matched == 4, "expected 4 formatted table rows, got " + std::to_string(matched));
    for (const char* key : {"OLS", "N", "SB_LB", "SB_UB", "RDID_LB", "RDID_UB", "CI1_LB", "CI1_UB", "CI2_LB",
                            "CI2_UB", "CI3_LB", "CI3_UB"})
      c.expect(back.results.count(key) == 1, std::string("missing stored result ") + key);
    fs::remove_all(dir);
  });

  std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
