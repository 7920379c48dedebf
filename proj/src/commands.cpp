#include <algorithm>
#include <cmath>
#include <iostream>
#include <mutex>
#include <optional>

#include "ddc/ddc.hpp"
#include "ddc/harness.hpp"

namespace ddc::harness {

namespace fs = std::filesystem;

namespace {

std::string cell(double x) { return std::isfinite(x) ? fmt(x) : "nan"; }
std::string cell(int x) { return std::to_string(x); }

std::string status_of(const std::string& err) {
  if (err.empty()) return "ok";
  return err.substr(0, err.find(':'));
}

int exit_for(size_t ok, size_t total) {
  if (total == 0 || ok == total) return kOk;
  return ok == 0 ? kHard : kPartial;
}

void warn(const std::string& what, const std::string& err) { std::cerr << what << ": " << err << "\n"; }

BranchOptions branch_options(Config& cfg, const std::string& sec) {
  BranchOptions o;
  o.tol = cfg.num(sec + ".tol", o.tol);
  o.max_iter = cfg.integer(sec + ".max_iter", o.max_iter);
  o.newton = cfg.flag(sec + ".newton", o.newton);
  o.max_last_share = cfg.num(sec + ".max_last_share", o.max_last_share);
  return o;
}

std::vector<double> default_deltas(double scale) {
  std::vector<double> d;
  for (double x : {0.02, 0.04, 0.08, 0.16}) d.push_back(x * scale);
  return d;
}

json eigen_json(const EigenData& ed) {
  return {{"eps", ed.eps},
          {"R1_crit", ed.R1_crit},
          {"a", ed.a},
          {"lambda_plus", {ed.lambda_plus.real(), ed.lambda_plus.imag()}},
          {"mode", {ed.mode.j, ed.mode.k}},
          {"transversality", ed.transversality}};
}

}  // namespace

int run_critical(const RunOptions& ro) {
  Config cfg("critical", ro);
  const Params base = cfg.params();
  std::vector<double> eps = cfg.list("critical.eps", "0,0.05,0.1,0.2");
  std::vector<double> R2s = cfg.list("critical.R2", fmt(base.R2));
  const bool fd = cfg.flag("critical.fd_check", true);
  const bool vectors = cfg.flag("critical.write_eigenvectors", true);
  cfg.check_unused({"params", "critical"});
  const Provenance pv = cfg.provenance();
  fs::create_directories(ro.out);

  std::sort(eps.begin(), eps.end());
  std::sort(R2s.begin(), R2s.end());
  struct Row {
    double eps = 0, R2 = 0;
    std::optional<EigenData> ed;
    TransversalityCheck tc{NAN, NAN};
    std::string err;
  };
  std::vector<Row> rows;
  for (double r2 : R2s)
    for (double e : eps) rows.push_back({e, r2});
  parallel_for(rows.size(), ro.threads, [&](size_t i) {
    Row& r = rows[i];
    try {
      Params p = base.with_eps(r.eps);
      p.R2 = r.R2;
      r.ed = critical_R1(p);
      r.tc.formula_value = r.ed->transversality;
      if (fd) r.tc = transversality_check(*r.ed, p);
    } catch (const Error& e) {
      r.err = e.what();
    }
  });

  CsvWriter csv(ro.out / "critical.csv",
                {"eps", "R2", "R1_crit", "a", "transversality_fd", "transversality_formula", "mode_j", "mode_k", "status"},
                pv);
  json jrows = json::array();
  size_t ok = 0;
  for (size_t i = 0; i < rows.size(); ++i) {
    const Row& r = rows[i];
    if (r.ed) ++ok;
    else warn("critical eps=" + fmt(r.eps) + " R2=" + fmt(r.R2), r.err);
    csv.row({cell(r.eps), cell(r.R2), cell(r.ed ? r.ed->R1_crit : NAN), cell(r.ed ? r.ed->a : NAN),
             cell(r.tc.fd_value), cell(r.tc.formula_value), cell(r.ed ? r.ed->mode.j : -1),
             cell(r.ed ? r.ed->mode.k : -1), status_of(r.err)});
    json jr = {{"eps", r.eps}, {"R2", r.R2}, {"status", status_of(r.err)}, {"error", r.err}};
    if (r.ed) {
      jr["eigen"] = eigen_json(*r.ed);
      jr["transversality_fd"] = r.tc.fd_value;
      if (vectors) {
        const std::string name = "eigen_" + std::to_string(i) + ".json";
        write_json(ro.out / name,
                   {{"eigen", eigen_json(*r.ed)},
                    {"u_plus", field_to_json(r.ed->u_plus)},
                    {"u_plus_adj", field_to_json(r.ed->u_plus_adj)}},
                   pv);
        jr["vectors"] = name;
      }
    }
    jrows.push_back(jr);
  }

  // Drift of R1c and a against the eps = 0 row at the same R2.
  json fits = json::array();
  for (double r2 : R2s) {
    const Row* ref = nullptr;
    for (const auto& r : rows)
      if (r.R2 == r2 && r.eps == 0 && r.ed) ref = &r;
    if (!ref) continue;
    std::vector<double> x, dR, da;
    for (const auto& r : rows)
      if (r.R2 == r2 && r.eps > 0 && r.ed) {
        x.push_back(r.eps);
        dR.push_back(std::abs(r.ed->R1_crit - ref->ed->R1_crit));
        da.push_back(std::abs(r.ed->a - ref->ed->a));
      }
    if (x.size() < 3) continue;
    try {
      fits.push_back({{"R2", r2}, {"R1_drift", fit_to_json(loglog_fit(x, dR))}, {"a_drift", fit_to_json(loglog_fit(x, da))}});
    } catch (const Error& e) {
      warn("critical drift fit R2=" + fmt(r2), e.what());
    }
  }
  write_json(ro.out / "critical.json", {{"rows", jrows}, {"drift_fits", fits}}, pv);
  return exit_for(ok, rows.size());
}

int run_branch(const RunOptions& ro) {
  Config cfg("branch", ro);
  const Params base = cfg.params();
  std::vector<double> eps = cfg.list("branch.eps", "0");
  const std::vector<double> deltas_cfg = cfg.list("branch.delta", "");
  const int M = cfg.integer("branch.M", 8);
  const BranchOptions o = branch_options(cfg, "branch");
  const bool find_max = cfg.flag("branch.delta_max", true);
  const bool orbits = cfg.flag("branch.write_orbits", true);
  cfg.check_unused({"params", "branch"});
  const Provenance pv = cfg.provenance();
  fs::create_directories(ro.out);
  std::sort(eps.begin(), eps.end());

  struct Row {
    double eps = 0, delta = 0;
    std::optional<HopfBranchPoint> bp;
    std::string err;
  };
  std::vector<Row> rows;
  json summaries = json::array();
  std::vector<std::optional<HopfProblem>> problems(eps.size());
  size_t ok = 0, total = 0;

  for (size_t ie = 0; ie < eps.size(); ++ie) {
    json s = {{"eps", eps[ie]}};
    std::vector<double> deltas = deltas_cfg;
    try {
      const Params p = base.with_eps(eps[ie]);
      problems[ie].emplace(p, critical_R1(p), M);
      const HopfProblem& hp = *problems[ie];
      const HopfCoefficients c = hp.first_order();
      s["eigen"] = eigen_json(hp.eigen());
      s["eta0"] = c.eta0;
      s["omega0"] = c.omega0;
      s["Kz0_plus"] = {c.Kz0_plus.real(), c.Kz0_plus.imag()};
      double scale = 1;
      if (find_max) {
        const DeltaMax dm = estimate_delta_max(hp, 0.32, 6, o);
        s["delta_max"] = dm.delta_max;
        s["delta_failed"] = dm.failed_at;
        s["contraction_at_half"] = dm.ratio_half;
        scale = std::min(1.0, dm.delta_max / 0.32);
      }
      if (deltas.empty()) deltas = default_deltas(scale);
    } catch (const Error& e) {
      s["error"] = e.what();
      warn("branch eps=" + fmt(eps[ie]), e.what());
      if (!problems[ie]) {
        ++total;
        summaries.push_back(s);
        continue;
      }
      if (deltas.empty()) deltas = default_deltas(1);
    }
    std::sort(deltas.begin(), deltas.end());
    const size_t first = rows.size();
    for (double d : deltas) rows.push_back({eps[ie], d});
    const HopfProblem& hp = *problems[ie];
    parallel_for(deltas.size(), ro.threads, [&](size_t k) {
      Row& r = rows[first + k];
      try {
        r.bp = hp.picard(r.delta, o);
      } catch (const Error& e) {
        r.err = e.what();
      }
    });
    std::vector<std::pair<double, double>> lin;
    std::vector<double> dx, dy;
    const double eta0 = s.value("eta0", NAN);
    for (size_t k = first; k < rows.size(); ++k) {
      ++total;
      if (!rows[k].bp) continue;
      ++ok;
      lin.emplace_back(rows[k].delta * rows[k].delta, rows[k].bp->eta_tilde);
      dx.push_back(rows[k].delta);
      dy.push_back(std::abs(rows[k].bp->eta_tilde - eta0));
    }
    if (lin.size() >= 3) {
      try {
        s["eta_tilde_vs_delta2"] = fit_to_json(linear_fit(lin));
        s["eta_tilde_error"] = fit_to_json(loglog_fit(dx, dy));
      } catch (const Error& e) {
        warn("branch fit eps=" + fmt(eps[ie]), e.what());
      }
    }
    summaries.push_back(s);
  }

  CsvWriter csv(ro.out / "branch.csv",
                {"eps", "delta", "eta", "omega", "eta_tilde", "omega_tilde", "residual", "bracket_U", "iterations",
                 "contraction", "last_harmonic_share", "status"},
                pv);
  for (size_t i = 0; i < rows.size(); ++i) {
    const Row& r = rows[i];
    if (!r.bp) {
      warn("branch eps=" + fmt(r.eps) + " delta=" + fmt(r.delta), r.err);
      csv.row({cell(r.eps), cell(r.delta), "nan", "nan", "nan", "nan", "nan", "nan", "0", "nan", "nan", status_of(r.err)});
      continue;
    }
    const HopfBranchPoint& b = *r.bp;
    csv.row({cell(r.eps), cell(r.delta), cell(b.eta), cell(b.omega), cell(b.eta_tilde), cell(b.omega_tilde),
             cell(b.residual), cell(b.bracket_U), cell(b.iterations), cell(b.contraction), cell(b.last_harmonic_share),
             "ok"});
    if (orbits) {
      const size_t ie = std::find(eps.begin(), eps.end(), r.eps) - eps.begin();
      const HopfProblem& hp = *problems[ie];
      json j = {{"eps", r.eps},
                {"delta", r.delta},
                {"eta", b.eta},
                {"omega", b.omega},
                {"R1", hp.eigen().R1_crit + b.eta},
                {"residual", b.residual},
                {"harmonic_energies", b.harmonic_energies},
                {"U", tpfield_to_json(b.orbit_U)},
                {"orbit", tpfield_to_json(hp.to_field(Stack(r.delta * (hp.z0() + r.delta * b.U))))}};
      write_json(ro.out / ("orbit_" + std::to_string(i) + ".json"), j, pv);
    }
  }
  write_json(ro.out / "branch_summary.json", {{"branches", summaries}}, pv);
  return exit_for(ok, total);
}

int run_floquet(const RunOptions& ro) {
  Config cfg("floquet", ro);
  Params base = cfg.params();
  std::vector<double> eps = cfg.list("floquet.eps", "0.05");
  base.J = cfg.integer("floquet.J", 4);
  base.K = cfg.integer("floquet.K", 4);
  base.validate();
  const int M = cfg.integer("floquet.M", 8);
  const std::vector<double> deltas_cfg = cfg.list("floquet.delta", "0.02,0.04,0.08,0.16");
  FloquetOptions fo;
  fo.steps0 = cfg.integer("floquet.steps0", fo.steps0);
  fo.tol = cfg.num("floquet.tol", fo.tol);
  fo.max_doublings = cfg.integer("floquet.max_doublings", fo.max_doublings);
  fo.hill = cfg.flag("floquet.hill", fo.hill);
  fo.hill_vectors = cfg.integer("floquet.hill_vectors", fo.hill_vectors);
  const BranchOptions o = branch_options(cfg, "floquet");
  const int liouville_steps = cfg.integer("floquet.liouville_steps", 512);
  cfg.check_unused({"params", "floquet"});
  const Provenance pv = cfg.provenance();
  fs::create_directories(ro.out);
  std::sort(eps.begin(), eps.end());
  std::vector<double> deltas = deltas_cfg;
  std::sort(deltas.begin(), deltas.end());

  struct Row {
    double eps = 0, delta = 0;
    std::optional<FloquetResult> fr;
    std::string err;
  };
  std::vector<Row> rows;
  json summaries = json::array();
  size_t ok = 0, total = 0;
  for (double e : eps) {
    json s = {{"eps", e}};
    std::optional<HopfProblem> hp;
    try {
      const Params p = base.with_eps(e);
      hp.emplace(p, critical_R1(p), M);
      s["eigen"] = eigen_json(hp->eigen());
      s["kappa1"] = kappa1(*hp);
    } catch (const Error& err) {
      s["error"] = err.what();
      warn("floquet eps=" + fmt(e), err.what());
      summaries.push_back(s);
      for (double d : deltas) rows.push_back({e, d, std::nullopt, err.what()});
      total += deltas.size();
      continue;
    }
    const size_t first = rows.size();
    for (double d : deltas) rows.push_back({e, d});
    parallel_for(deltas.size(), ro.threads, [&](size_t k) {
      Row& r = rows[first + k];
      try {
        r.fr = floquet_analysis(*hp, hp->picard(r.delta, o), fo);
      } catch (const Error& err) {
        r.err = err.what();
      }
    });
    std::vector<double> dx, gap;
    for (size_t k = first; k < rows.size(); ++k) {
      ++total;
      if (!rows[k].fr) continue;
      ++ok;
      dx.push_back(rows[k].delta);
      gap.push_back(std::abs(rows[k].fr->lambda_delta.real() - rows[k].fr->lambda_pred));
    }
    if (dx.size() >= 3) {
      try {
        s["lambda_gap_fit"] = fit_to_json(loglog_fit(dx, gap));
      } catch (const Error& err) {
        warn("floquet fit eps=" + fmt(e), err.what());
      }
    }
    if (liouville_steps > 0 && !deltas.empty()) {
      try {
        s["liouville_defect"] = liouville_defect(*hp, hp->picard(deltas.back(), o), liouville_steps);
      } catch (const Error& err) {
        warn("floquet Liouville check eps=" + fmt(e), err.what());
      }
    }
    summaries.push_back(s);
  }

  CsvWriter csv(ro.out / "floquet.csv",
                {"eps", "delta", "lambda_hill_re", "lambda_hill_im", "lambda_monodromy", "lambda_pred", "trivial_defect",
                 "kappa1", "lambda_monodromy_im", "hill_agreement", "trivial_overlap", "Lambda", "stable", "steps",
                 "status"},
                pv);
  for (const Row& r : rows) {
    if (!r.fr) {
      warn("floquet eps=" + fmt(r.eps) + " delta=" + fmt(r.delta), r.err);
      csv.row({cell(r.eps), cell(r.delta), "nan", "nan", "nan", "nan", "nan", "nan", "nan", "nan", "nan", "nan", "0",
               "0", status_of(r.err)});
      continue;
    }
    const FloquetResult& f = *r.fr;
    csv.row({cell(r.eps), cell(r.delta), cell(f.lambda_hill.real()), cell(f.lambda_hill.imag()),
             cell(f.lambda_delta.real()), cell(f.lambda_pred), cell(f.trivial_defect), cell(f.kappa1_estimate),
             cell(f.lambda_delta.imag()), cell(f.hill_agreement), cell(f.trivial_overlap), cell(f.Lambda),
             cell(int(f.stable)), cell(f.steps), "ok"});
  }
  write_json(ro.out / "floquet_summary.json", {{"runs", summaries}}, pv);
  return exit_for(ok, total);
}

int run_simulate(const RunOptions& ro) {
  Config cfg("simulate", ro);
  Params base = cfg.params();
  base.eps = cfg.num("simulate.eps", 0.05);
  base.J = cfg.integer("simulate.J", 6);
  base.K = cfg.integer("simulate.K", 6);
  base.validate();
  const bool do_orbit = cfg.flag("simulate.orbit", true);
  const double delta = cfg.num("simulate.delta", 1.0);
  const double seed_scale = cfg.num("simulate.seed_scale", 0.5);
  const double T_max = cfg.num("simulate.T_max", 400);
  const int M = cfg.integer("simulate.M", 8);
  const double drift_tol = cfg.num("simulate.drift_tol", 1e-3);
  SimOptions so;
  so.dt = cfg.num("simulate.dt", 0);
  so.temam = cfg.flag("simulate.temam", false);
  so.record_every = cfg.integer("simulate.record_every", 10);
  const bool do_decay = cfg.flag("simulate.decay", true);
  const double decay_factor = cfg.num("simulate.decay_factor", 0.9);
  const double decay_amp = cfg.num("simulate.decay_amp", 1e-6);
  const double decay_T = cfg.num("simulate.decay_T", 20);
  cfg.check_unused({"params", "simulate"});
  const Provenance pv = cfg.provenance();
  fs::create_directories(ro.out);

  EigenData ed = critical_R1(base);
  const double eta = HopfProblem(base, ed, M).picard(delta).eta;

  std::optional<OrbitComparison> oc;
  OrbitComparison partial;
  std::optional<DecayMeasurement> dm;
  std::string orbit_err, decay_err;
  std::vector<std::function<void()>> jobs;
  if (do_orbit)
    jobs.push_back([&] {
      try {
        oc = simulate_to_orbit(base, ed, eta, seed_scale * delta, T_max, so, M, drift_tol, &partial);
      } catch (const Error& e) {
        orbit_err = e.what();
      }
    });
  if (do_decay)
    jobs.push_back([&] {
      try {
        dm = measure_decay(base.with_R1(decay_factor * ed.R1_crit), decay_amp, decay_T, ro.seed, so);
      } catch (const Error& e) {
        decay_err = e.what();
      }
    });
  parallel_for(jobs.size(), ro.threads, [&](size_t i) { jobs[i](); });

  const std::vector<std::string> cols = {"t", "E", "D", "P", "div", "bracket_re", "bracket_im"};
  auto dump = [&](const fs::path& path, const std::vector<SimRecord>& recs) {
    CsvWriter csv(path, cols, pv);
    for (const auto& r : recs)
      csv.row({cell(r.t), cell(r.E), cell(r.D), cell(r.P), cell(r.div), cell(r.bracket.real()), cell(r.bracket.imag())});
  };
  json summary = {{"eigen", eigen_json(ed)}, {"eta", eta}, {"delta", delta}};
  size_t ok = 0;
  if (do_orbit) {
    const OrbitComparison& c = oc ? *oc : partial;
    if (oc) ++ok;
    else warn("simulate orbit", orbit_err);
    if (!c.records.empty()) {
      dump(ro.out / "simulate_orbit.csv", c.records);
      write_json(ro.out / "restart.json", {{"t", c.t_end}, {"state", field_to_json(c.final_state)}}, pv);
    }
    summary["orbit"] = {{"status", status_of(orbit_err)},     {"error", orbit_err},
                        {"R1", c.R1},                         {"delta_branch", c.delta_branch},
                        {"delta_amplitude", c.delta_amplitude}, {"amplitude_sim", c.amplitude_sim},
                        {"amplitude_branch", c.amplitude_branch}, {"amplitude_rel_gap", c.amplitude_rel_gap},
                        {"period_sim", c.period_sim},         {"period_branch", c.period_branch},
                        {"period_rel_gap", c.period_rel_gap}, {"return_drift", c.return_drift},
                        {"crossings", c.crossings},           {"t_end", c.t_end}};
  }
  if (do_decay) {
    if (dm) {
      ++ok;
      dump(ro.out / "simulate_decay.csv", dm->records);
      summary["decay"] = {{"status", "ok"},
                          {"R1", decay_factor * ed.R1_crit},
                          {"rate_sim", dm->rate_sim},
                          {"rate_pred", dm->rate_pred},
                          {"rel_gap", dm->rel_gap}};
    } else {
      warn("simulate decay", decay_err);
      summary["decay"] = {{"status", status_of(decay_err)}, {"error", decay_err}};
    }
  }
  write_json(ro.out / "simulate.json", summary, pv);
  return exit_for(ok, jobs.size());
}

int run_sweep_eps(const RunOptions& ro) {
  Config cfg("sweep-eps", ro);
  const Params base = cfg.params();
  std::vector<double> eps = cfg.list("sweep-eps.eps", "0.04,0.02,0.01,0.005");
  const double delta = cfg.num("sweep-eps.delta", 0.1);
  const int M = cfg.integer("sweep-eps.M", 8);
  const BranchOptions o = branch_options(cfg, "sweep-eps");
  cfg.check_unused({"params", "sweep-eps"});
  const Provenance pv = cfg.provenance();
  fs::create_directories(ro.out);
  std::sort(eps.begin(), eps.end());

  const EpsReference ref = eps_reference(base, delta, M, o);
  EpsStudy st;
  st.delta = delta;
  st.eta0_incomp = ref.eta0;
  st.eta_incomp = ref.b0.eta;
  st.omega_incomp = ref.b0.omega;
  st.rows.resize(eps.size());
  parallel_for(eps.size(), ro.threads, [&](size_t i) { st.rows[i] = eps_gap_row(ref, eps[i]); });
  fit_eps_study(st);

  CsvWriter csv(ro.out / "sweep_eps.csv",
                {"eps", "R1_crit", "a", "eta0", "eta", "omega", "eta0_gap", "eta_gap", "omega_gap", "velocity_gap",
                 "orbit_gap", "y_eps_gap", "pressure_gap", "iterations", "status"},
                pv);
  size_t ok = 0;
  for (const auto& r : st.rows) {
    if (r.error.empty()) ++ok;
    else warn("sweep-eps eps=" + fmt(r.eps), r.error);
    csv.row({cell(r.eps), cell(r.R1_crit), cell(r.a), cell(r.eta0), cell(r.eta), cell(r.omega), cell(r.eta0_gap),
             cell(r.eta_gap), cell(r.omega_gap), cell(r.velocity_gap), cell(r.orbit_gap), cell(r.y_eps_gap),
             cell(r.pressure_gap), cell(r.iterations), status_of(r.error)});
  }
  json j = {{"delta", delta},
            {"R1_crit_incomp", ref.e0.R1_crit},
            {"eta0_incomp", st.eta0_incomp},
            {"eta_incomp", st.eta_incomp},
            {"omega_incomp", st.omega_incomp}};
  if (ok >= 3)
    j["fits"] = {{"eta0", fit_to_json(st.eta0_fit)},
                 {"eta", fit_to_json(st.eta_fit)},
                 {"omega", fit_to_json(st.omega_fit)},
                 {"velocity", fit_to_json(st.velocity_fit)},
                 {"orbit", fit_to_json(st.orbit_fit)}};
  write_json(ro.out / "sweep_eps.json", j, pv);
  return exit_for(ok, st.rows.size());
}

int run(const std::string& command, const RunOptions& ro) {
  try {
    if (ro.threads < 1) throw Error(ErrorCode::InvalidArgument, "--threads must be at least 1");
    if (command == "critical") return run_critical(ro);
    if (command == "branch") return run_branch(ro);
    if (command == "floquet") return run_floquet(ro);
    if (command == "simulate") return run_simulate(ro);
    if (command == "sweep-eps") return run_sweep_eps(ro);
    if (command == "plots") return run_plots(ro);
    throw Error(ErrorCode::InvalidArgument, "unknown command '" + command + "'");
  } catch (const std::exception& e) {
    std::cerr << "ddc " << command << ": " << e.what() << "\n";
    return kHard;
  }
}

}  // namespace ddc::harness
