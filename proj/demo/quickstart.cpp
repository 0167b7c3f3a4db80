// Simulates the Ashenfelter-dip design and prints bounds, policy-oriented
// estimates and the forecast for one dataset.
#include <cstdio>

#include "rdid/rdid.hpp"

int main() {
  rdid::DgpSpec spec;
  spec.kind = rdid::DgpKind::AshenfelterDip;
  spec.theta = -1.0;
  spec.n = 5000;
  spec.seed = 7;
  const rdid::PanelDataset ds = rdid::gen_ashenfelter(spec).dataset();
  const rdid::TruthSet truth = rdid::analytic_truths(spec);

  rdid::RdidOptions opt;
  opt.plan.replicates = 200;
  const rdid::RdidResult r = rdid::run_rdid(ds, opt);
  std::printf("post-period estimand   %9.4f\n", r.estimand.value);
  std::printf("bounds                 [%.4f, %.4f]\n", r.bounds.lower, r.bounds.upper);
  std::printf("identified set (true)  [%.4f, %.4f]\n", truth.lower, truth.upper);
  std::printf("CI for the bounds      [%.4f, %.4f]\n", r.ci_bounds->lower, r.ci_bounds->upper);

  for (rdid::Loss loss : rdid::kAllLosses) {
    const auto po = rdid::po_rdid(r.estimand, r.profile, loss);
    std::printf("PO-RDID %-4s           %9.4f\n", rdid::loss_name(loss), po.value);
  }
  const auto fc = rdid::sb_linear_forecast(r.profile, r.estimand, 1.0);
  std::printf("forecast SB at t=1     %9.4f\n", fc.sb_hat);
  return 0;
}
