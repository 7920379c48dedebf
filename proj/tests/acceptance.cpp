// One PASS/FAIL line per acceptance criterion. Exit status is nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "ddc/ddc.hpp"
#include "oracles.hpp"

using namespace ddc;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::printf("CRITERION %d: %s | %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
}

std::string f(const char* fmtstr, double x) {
  char b[64];
  std::snprintf(b, sizeof b, fmtstr, x);
  return b;
}

Params base_params(double eps = 0) {
  Params p;
  p.Pr = 2;
  p.d = 0.1;
  p.R2 = 10;
  p.eps = eps;
  p.J = 12;
  p.K = 12;
  return p;
}

void criterion1() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> U(0, 1);
  double worst = 0;
  int blocks = 0;
  for (int draw = 0; draw < 20; ++draw) {
    Params p;
    p.Pr = 1 + 9 * U(rng);
    p.d = 0.05 + 0.9 * U(rng);
    p.R1 = 60 * U(rng);
    p.R2 = 30 * U(rng);
    p.alpha = 1 + 3 * U(rng);
    p.J = 12;
    p.K = 12;
    for (double eps : {0.0, 0.05 + 0.95 * U(rng)}) {
      p.eps = eps;
      const LinearOperator L = eps > 0 ? assemble_L(p) : assemble_L_incomp(p);
      for (const auto& b : L.blocks) {
        const Eigen::MatrixXd ref = eps > 0 ? oracle::mode_matrix_5(p, b.mode) : oracle::mode_matrix_3(p, b.mode);
        worst = std::max(worst, oracle::spectrum_distance(-b.A, -ref));
        ++blocks;
      }
    }
  }
  report(1, worst <= 1e-10,
         "max |eig(block) - eig(analytic)| = " + f("%.2e", worst) + " over " + std::to_string(blocks) +
             " blocks, 20 draws (tol 1e-10)");
}

void criterion2() {
  std::mt19937_64 rng(202);
  double worst = 0;
  for (double eps : {1.0, 0.1, 0.01}) {
    Params p = base_params(eps);
    p.R1 = 28.8;
    const Eigen::MatrixXd L = assemble_L(p).matrix, Ls = assemble_L_adjoint(p).matrix;
    for (int i = 0; i < 100; ++i) {
      const RealField u = oracle::random_field(p, rng), v = oracle::random_field(p, rng);
      const RealField Lu(p, L * u.coeffs()), Lsv(p, Ls * v.coeffs());
      const double lhs = std::abs(inner_eps(Lu, v, eps) - inner_eps(u, Lsv, eps));
      worst = std::max(worst, lhs / (norms(u, eps).l2_eps * norms(v, eps).l2_eps));
    }
  }
  report(2, worst <= 1e-12, "max |(Lu,v)-(u,L*v)| / (|||u||| |||v|||) = " + f("%.2e", worst) + " (tol 1e-12)");
}

void criterion3() {
  std::mt19937_64 rng(303);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    Params p = base_params(i % 2 ? 0.1 : 1.0);
    p.R1 = 28.8;
    const RealField u = oracle::random_field(p, rng);
    const RealField Lu(p, assemble_L(p).matrix * u.coeffs());
    const double lhs = inner_eps(Lu, u, p.eps);
    const double rhs = oracle::energy_form(u);
    worst = std::max(worst, std::abs(lhs - rhs) / std::abs(rhs));
  }
  report(3, worst <= 1e-12, "max relative gap to the energy form = " + f("%.2e", worst) + " (tol 1e-12)");
}

void criterion4() {
  const Params p0 = base_params(0);
  const EigenData e0 = critical_R1(p0);
  const oracle::ClosedHopf ch = oracle::closed_form_hopf(p0);
  const double rel_R = std::abs(e0.R1_crit - ch.R1) / ch.R1;
  const double rel_a = std::abs(e0.a - ch.a) / ch.a;
  const bool same_mode = e0.mode == ch.mode;
  double re_max = std::abs(e0.lambda_plus.real());
  std::string eps_part;
  for (double eps : {0.05, 0.025}) {
    const EigenData ee = critical_R1(base_params(eps));
    re_max = std::max(re_max, std::abs(ee.lambda_plus.real()));
    eps_part += " R1c(" + f("%g", eps) + ")=" + f("%.10f", ee.R1_crit);
  }
  report(4, re_max <= 1e-9 && rel_R <= 1e-8 && rel_a <= 1e-8 && same_mode,
         "max|Re lambda+| = " + f("%.1e", re_max) + ", R1c rel gap " + f("%.1e", rel_R) + ", a rel gap " +
             f("%.1e", rel_a) + " (R1c=" + f("%.10f", e0.R1_crit) + ", closed form " + f("%.10f", ch.R1) + ")" +
             eps_part);
}

void criterion5() {
  double worst = 0, min_val = 1e300;
  for (double eps : {0.0, 0.05}) {
    const Params p = base_params(eps);
    const EigenData ed = critical_R1(p);
    const TransversalityCheck tc = transversality_check(ed, p);
    worst = std::max(worst, std::abs(tc.fd_value - tc.formula_value) / std::abs(tc.formula_value));
    min_val = std::min({min_val, tc.fd_value, tc.formula_value});
  }
  report(5, worst <= 1e-5 && min_val > 0,
         "max relative gap fd vs formula = " + f("%.1e", worst) + ", min value " + f("%.4f", min_val) +
             " (tol 1e-5, both > 0), eps in {0, 0.05}");
}

void criterion6() {
  const std::vector<double> grid = {0.2, 0.1, 0.05, 0.025};
  const EigenData e0 = critical_R1(base_params(0));
  std::vector<double> dR, da, dR11, da11;
  std::string modes;
  for (double eps : grid) {
    const Params p = base_params(eps);
    const EigenData ee = critical_R1(p);
    dR.push_back(std::abs(ee.R1_crit - e0.R1_crit));
    da.push_back(std::abs(ee.a - e0.a));
    modes += " (" + std::to_string(ee.mode.j) + "," + std::to_string(ee.mode.k) + ")";
    const auto c = mode_crossing(p, e0.mode, 4 * steady_estimate(p));
    dR11.push_back(c ? std::abs(c->R1 - e0.R1_crit) : NAN);
    da11.push_back(c ? std::abs(c->a - e0.a) : NAN);
  }
  const FitResult fR = loglog_fit(grid, dR), fa = loglog_fit(grid, da);
  const FitResult tR = loglog_fit(grid, dR11), ta = loglog_fit(grid, da11);
  const bool pass = std::abs(fR.slope - 2) <= 0.1 && std::abs(fa.slope - 2) <= 0.1;
  report(6, pass,
         "slopes R1c " + f("%.3f", fR.slope) + ", a " + f("%.3f", fa.slope) + " (2.0 +- 0.1); critical modes" + modes +
             "; tracked mode (" + std::to_string(e0.mode.j) + "," + std::to_string(e0.mode.k) + ") slopes R1c " +
             f("%.3f", tR.slope) + ", a " + f("%.3f", ta.slope) + ", last-pair local R1c " +
             f("%.3f", std::log(dR11[2] / dR11[3]) / std::log(2.0)));
}

void criterion7() {
  const Params p = base_params(0.05);
  const EigenData ed = critical_R1(p);
  HopfProblem hp(p, ed, 8);
  const double eta0 = hp.first_order().eta0;
  const DeltaMax dm = estimate_delta_max(hp);
  const double scale = std::min(1.0, dm.delta_max / 0.32);
  std::vector<double> ds, errs;
  double res = 0, br = 0;
  for (double d : {0.02, 0.04, 0.08, 0.16}) {
    const HopfBranchPoint bp = hp.picard(d * scale);
    ds.push_back(d * scale);
    errs.push_back(std::abs(bp.eta / (bp.delta * bp.delta) - eta0));
    res = std::max(res, bp.residual);
    br = std::max(br, bp.bracket_U);
  }
  for (double d : {0.5 * dm.delta_max, -0.5 * dm.delta_max}) {
    const HopfBranchPoint bp = hp.picard(d);
    res = std::max(res, bp.residual);
    br = std::max(br, bp.bracket_U);
  }
  const FitResult fe = loglog_fit(ds, errs);
  // No slope tolerance is pinned for the error fit; r^2 and an order of at least one are required.
  const bool pass = dm.ratio_half <= 0.5 && res <= 1e-9 && br <= 1e-10 && fe.r_squared >= 0.98 && fe.slope >= 0.85;
  report(7, pass,
         "eps=0.05: delta_max " + f("%.4f", dm.delta_max) + ", ratio at delta_max/2 " + f("%.3f", dm.ratio_half) +
             " (<= 0.5), max residual " + f("%.1e", res) + " (<= 1e-9), max [U]+ " + f("%.1e", br) +
             " (<= 1e-10), |eta/delta^2 - eta0| fit slope " + f("%.3f", fe.slope) + " r2 " + f("%.4f", fe.r_squared));
}

void criterion8() {
  const std::vector<double> grid = {0.04, 0.02, 0.01, 0.005};
  const EpsStudy st = eps_convergence_study(base_params(0), grid, 0.1, 8);
  for (const auto& r : st.rows)
    if (!r.error.empty()) {
      report(8, false, "row eps=" + f("%g", r.eps) + " failed: " + r.error);
      return;
    }
  double pmax = 0;
  for (const auto& r : st.rows) pmax = std::max(pmax, r.pressure_gap);
  auto ok = [](const FitResult& fr) { return std::abs(fr.slope - 1) <= 0.15; };
  const bool pass = ok(st.eta_fit) && ok(st.omega_fit) && ok(st.velocity_fit) && std::isfinite(pmax);
  report(8, pass,
         "delta=0.1, eps in {0.04..0.005}: slopes eta " + f("%.3f", st.eta_fit.slope) + ", omega " +
             f("%.3f", st.omega_fit.slope) + ", velocity/theta/psi " + f("%.3f", st.velocity_fit.slope) + ", Y-norm orbit " +
             f("%.3f", st.orbit_fit.slope) + " (1.0 +- 0.15); max pressure gap " + f("%.2e", pmax));
}

void criterion9() {
  Params p = base_params(0.05);
  p.J = p.K = 4;
  const EigenData ed = critical_R1(p);
  HopfProblem hp(p, ed, 8);
  std::vector<double> ds, gaps;
  double triv = 0, ov = 1, hill = 0, Lmin = 1e300;
  for (double d : {0.02, 0.04, 0.08, 0.16}) {
    const FloquetResult r = floquet_analysis(hp, hp.picard(d));
    ds.push_back(d);
    gaps.push_back(std::abs(r.lambda_delta.real() - r.lambda_pred));
    triv = std::max(triv, r.trivial_defect);
    ov = std::min(ov, r.trivial_overlap);
    hill = std::max(hill, r.hill_agreement);
    Lmin = std::min(Lmin, r.Lambda);
  }
  const FitResult fg = loglog_fit(ds, gaps);
  const bool pass = triv <= 1e-6 && ov >= 0.9 && std::abs(fg.slope - 3) <= 0.3 && hill <= 1e-6 && Lmin > 0;
  report(9, pass,
         "J=K=4 eps=0.05: trivial defect " + f("%.1e", triv) + " (<= 1e-6), overlap " + f("%.4f", ov) +
             " (>= 0.9), |lambda - lambda_pred| slope " + f("%.3f", fg.slope) + " (3.0 +- 0.3), Hill agreement " +
             f("%.1e", hill) + " (<= 1e-6), min Lambda " + f("%.4f", Lmin) + " (> 0)");
}

void criterion10() {
  Params p = base_params(0.05);
  p.J = p.K = 6;
  const EigenData ed = critical_R1(p);
  const double eta = HopfProblem(p, ed, 8).picard(1.0).eta;
  const OrbitComparison oc = simulate_to_orbit(p, ed, eta, 0.5, 400);
  const DecayMeasurement dm = measure_decay(p.with_R1(0.9 * ed.R1_crit), 1e-6, 20, 7);
  const bool pass = oc.amplitude_rel_gap <= 0.05 && oc.period_rel_gap <= 0.01 && dm.rel_gap <= 0.10;
  report(10, pass,
         "J=K=6 eps=0.05 eta=" + f("%.5f", eta) + ": amplitude gap " + f("%.2e", oc.amplitude_rel_gap) +
             " (<= 5%), period gap " + f("%.2e", oc.period_rel_gap) + " (<= 1%), decay-rate gap " + f("%.2e", dm.rel_gap) +
             " (<= 10%)");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion11(const std::string& cli) {
  const fs::path root = fs::temp_directory_path() / "ddc_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  {
    std::ofstream c(root / "run.ini");
    c << "[params]\nJ = 6\nK = 6\n[critical]\neps = 0, 0.05\n[branch]\neps = 0, 0.05\ndelta = 0.05, 0.1, 0.2\n"
         "delta_max = false\n[floquet]\nJ = 3\nK = 3\neps = 0\ndelta = 0.05, 0.1\n";
  }
  bool same = true;
  size_t files = 0;
  for (const char* cmd : {"critical", "branch", "floquet"}) {
    for (int run = 0; run < 2; ++run) {
      const std::string line = cli + " " + cmd + " --config " + (root / "run.ini").string() + " --out " +
                               (root / ("run" + std::to_string(run))).string() + " --threads " +
                               (run ? "2" : "1") + " > /dev/null 2>&1";
      if (std::system(line.c_str()) != 0) same = false;
    }
  }
  for (const auto& e : fs::directory_iterator(root / "run0")) {
    ++files;
    const fs::path other = root / "run1" / e.path().filename();
    if (!fs::exists(other) || slurp(e.path()) != slurp(other)) same = false;
  }
  size_t files1 = std::distance(fs::directory_iterator(root / "run1"), fs::directory_iterator{});
  same = same && files == files1 && files > 0;
  report(11, same, std::to_string(files) + " output files compared byte-wise across two runs (threads 1 and 2)");
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "ddc";
  const auto t0 = std::chrono::steady_clock::now();
  auto guarded = [](int id, auto fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      report(id, false, std::string("error: ") + e.what());
    }
  };
  guarded(1, criterion1);
  guarded(2, criterion2);
  guarded(3, criterion3);
  guarded(4, criterion4);
  guarded(5, criterion5);
  guarded(6, criterion6);
  guarded(7, criterion7);
  guarded(8, criterion8);
  guarded(9, criterion9);
  guarded(10, criterion10);
  guarded(11, [&] { criterion11(cli); });
  std::printf("%d of 11 criteria failed (%.0f s)\n", failures,
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return failures == 0 ? 0 : 1;
}
