#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "rdid/simulation.hpp"

using namespace rdid;

namespace {

constexpr double kC = 1.81273524710015957031776066378;
constexpr double kTreatedShare = 0.158655253931457051414767454368;

double share(const std::vector<double>& v, double x) {
  double n = 0;
  for (double a : v) n += a == x;
  return n / static_cast<double>(v.size());
}

RdidOptions point_only() {
  RdidOptions o;
  o.bootstrap = false;
  return o;
}

}  // namespace

TEST(Generators, AshenfelterLayoutAndShare) {
  DgpSpec spec;
  spec.n = 100000;
  spec.seed = 4;
  const auto g = gen_ashenfelter(spec);
  EXPECT_EQ(g.names, (std::vector<std::string>{"id", "t", "y", "d", "post"}));
  EXPECT_EQ(g.rows(), 4 * spec.n);
  EXPECT_NEAR(share(g.column("d"), 1.0), kTreatedShare, 0.004);
  EXPECT_NEAR(share(g.column("post"), 1.0), 0.25, 1e-12);
  const auto ds = g.dataset();
  EXPECT_EQ(ds.n_clusters(), spec.n);
}

TEST(Generators, CrossSectionUsesFreshUnits) {
  DgpSpec spec;
  spec.n = 50;
  spec.sampling = Sampling::RepeatedCrossSection;
  const auto ds = gen_ashenfelter(spec).dataset();
  EXPECT_EQ(ds.n_obs(), 200u);
  EXPECT_EQ(ds.n_clusters(), 200u);
}

TEST(Generators, Deterministic) {
  for (DgpKind kind : {DgpKind::AshenfelterDip, DgpKind::CovariateExample, DgpKind::Staggered}) {
    DgpSpec spec;
    spec.kind = kind;
    spec.n = 300;
    spec.seed = 77;
    const auto a = generate(spec);
    const auto b = generate(spec);
    EXPECT_EQ(a.columns, b.columns) << dgp_name(kind);
    spec.seed = 78;
    EXPECT_NE(generate(spec).columns, a.columns) << dgp_name(kind);
  }
}

TEST(Generators, CsvRoundTripIsExact) {
  DgpSpec spec;
  spec.kind = DgpKind::CovariateExample;
  spec.n = 40;
  const auto g = generate(spec);
  std::ostringstream out;
  g.write_csv(out);
  std::istringstream in(out.str());
  const auto ds = load_panel(in, g.roles, false);
  const auto direct = g.dataset();
  ASSERT_EQ(ds.n_obs(), direct.n_obs());
  for (std::size_t i = 0; i < ds.n_obs(); ++i) EXPECT_EQ(ds.outcome()[i], direct.outcome()[i]);
}

TEST(Generators, StaggeredCohortsAndEffects) {
  DgpSpec spec;
  spec.kind = DgpKind::Staggered;
  spec.n = 40000;
  spec.seed = 12;
  const auto g = gen_staggered(spec);
  const auto& coh = g.column("g");
  EXPECT_EQ(g.rows(), 9 * spec.n);
  EXPECT_NEAR(share(coh, 0), 0.5, 0.01);
  for (int c = 1; c <= 4; ++c) EXPECT_NEAR(share(coh, c), 0.125, 0.006) << c;
  // Treatment effects are constant within a unit once adopted.
  const auto& t = g.column("t");
  for (std::size_t i = 0; i < g.rows(); ++i) EXPECT_GE(t[i], -4.0);
  EXPECT_EQ(detail::staggered_cohort(1.99, 4), 1);
  EXPECT_EQ(detail::staggered_cohort(1.0, 4), 4);
  EXPECT_EQ(detail::staggered_cohort(0.99, 4), 0);
}

TEST(Truths, AnalyticValues) {
  EXPECT_NEAR(normal_tail_gap(), kC, 1e-12);
  DgpSpec a;
  a.theta = -1;
  const auto ta = analytic_truths(a);
  EXPECT_NEAR(ta.lower, -8.2509409884006382812710426551, 1e-12);
  EXPECT_NEAR(ta.upper, 2.62547049420031914063552132755, 1e-12);
  EXPECT_EQ(ta.att, -1.0);

  DgpSpec b;
  b.kind = DgpKind::CovariateExample;
  b.theta = 2;
  const auto tb = analytic_truths(b);
  EXPECT_NEAR(tb.lower, -0.359551435325119677738320497832, 1e-12);
  EXPECT_NEAR(tb.upper, 1.45318381177503989257944016594, 1e-12);
  EXPECT_EQ(tb.att, 1.0);

  DgpSpec c;
  c.kind = DgpKind::Staggered;
  const auto tc = analytic_truths(c);
  EXPECT_EQ(tc.cells.size(), 16u);
  EXPECT_EQ(tc.cell(1, 1).lower, -19.625);
  EXPECT_EQ(tc.cell(1, 1).upper, 2.375);
  EXPECT_EQ(tc.cell(1, 2).att, 3.5);
  EXPECT_EQ(tc.cell(3, 2).att, 0.0);
  for (const auto& cell : tc.cells) {
    EXPECT_LE(cell.lower, cell.att);
    EXPECT_GE(cell.upper, cell.att);
  }
}

TEST(Truths, EstimatorsConvergeToIdentifiedSets) {
  DgpSpec a;
  a.theta = -1;
  a.n = 50000;
  a.seed = 101;
  const auto ra = run_rdid(gen_ashenfelter(a).dataset(), point_only());
  const auto ta = analytic_truths(a);
  EXPECT_NEAR(ra.bounds.lower, ta.lower, 0.2);
  EXPECT_NEAR(ra.bounds.upper, ta.upper, 0.2);

  DgpSpec b;
  b.kind = DgpKind::CovariateExample;
  b.theta = 2;
  b.n = 200000;
  b.seed = 102;
  const auto rb = run_rdid(gen_covariate_example(b).dataset(), point_only());
  const auto tb = analytic_truths(b);
  EXPECT_NEAR(rb.bounds.lower, tb.lower, 0.05);
  EXPECT_NEAR(rb.bounds.upper, tb.upper, 0.05);
}

TEST(Coverage, NoiselessDesignCoversExactly) {
  DgpSpec spec;
  spec.theta = 1.5;
  spec.n = 120;
  spec.noise_scale = 0;
  spec.deterministic_latent = true;
  BootstrapPlan plan;
  plan.replicates = 50;
  const auto rep = run_coverage_study(spec, 8, plan);
  EXPECT_EQ(rep.failures, 0u);
  for (const char* type : {"bounds_ye", "att_ye", "union"}) {
    const auto& c = rep.cell(type);
    EXPECT_EQ(c.successes, 8u);
    EXPECT_EQ(c.cp_inf, 1.0) << type;
    EXPECT_DOUBLE_EQ(c.avg_length, 12.0) << type;
  }
}

TEST(Coverage, ThreadInvariant) {
  DgpSpec spec;
  spec.kind = DgpKind::Staggered;
  spec.n = 200;
  spec.seed = 3;
  BootstrapPlan plan;
  plan.replicates = 30;
  plan.threads = 1;
  const auto one = run_coverage_study(spec, 6, plan);
  plan.threads = 4;
  const auto four = run_coverage_study(spec, 6, plan);
  EXPECT_EQ(one.to_json().dump(), four.to_json().dump());
  EXPECT_LE(one.max_width_spread, 1e-12);
  EXPECT_EQ(one.cells.size(), 16u);
}

TEST(Coverage, CsvLayout) {
  DgpSpec spec;
  spec.n = 150;
  BootstrapPlan plan;
  plan.replicates = 20;
  const auto rep = run_coverage_study(spec, 3, plan);
  std::ostringstream out;
  rep.write_csv(out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "dgp,N,ci_type,g,t,sims,successes,cp_inf,avg_length");
  int rows = 0;
  while (std::getline(in, line)) {
    EXPECT_EQ(line.rfind("ashenfelter,150,", 0), 0u) << line;
    ++rows;
  }
  EXPECT_EQ(rows, 3);
}

TEST(Specs, Validation) {
  DgpSpec spec;
  spec.n = 0;
  EXPECT_THROW(spec.validate(), Error);
  EXPECT_EQ(parse_dgp_kind("staggered"), DgpKind::Staggered);
  EXPECT_THROW(parse_dgp_kind("nope"), Error);
  const auto d = coverage_design(DgpKind::AshenfelterDip, 1000);
  EXPECT_EQ(d.n, 250u);
  EXPECT_EQ(d.key_n(), 1000u);
  EXPECT_EQ(d.sampling, Sampling::RepeatedCrossSection);
}
