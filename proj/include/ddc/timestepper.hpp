#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <deque>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "ddc/hopf_branch.hpp"
#include "ddc/transform.hpp"

namespace ddc {

struct SimOptions {
  double dt = 0;  // 0 selects the default
  bool temam = false;
  double blowup = 1e6;
  int record_every = 10;
  size_t ring = 100000;
};

struct SimRecord {
  double t = 0;
  double E = 0;  // 1/2 |||u|||_eps^2
  double D = 0;
  double P = 0;
  double div = 0;
  cplx bracket{};
};

inline double default_dt(const Params& p) {
  if (p.eps == 0) return 1e-3;
  const double qmax = std::sqrt(q2({p.J, p.K}, p.alpha));
  return std::min(1e-3, p.eps / (4 * std::sqrt(p.Pr) * qmax));
}

/// 1/2 (div w)(w, theta, psi), the opt-in stabilizing term.
inline RealField temam_term(const RealField& u) {
  const Params& p = u.params();
  const Collocation& c = *shared_collocation(p.J, p.K, p.alpha);
  using enum Trig;
  const Eigen::MatrixXd dv = c.synth(divergence(u), Cos, Cos);
  RealField out(p);
  out.set_grid(Var::w1, c.analyze(0.5 * dv.cwiseProduct(c.synth(u.grid(Var::w1), Sin, Cos)), Sin, Cos));
  for (Var v : {Var::w2, Var::theta, Var::psi})
    out.set_grid(v, c.analyze(0.5 * dv.cwiseProduct(c.synth(u.grid(v), Cos, Sin)), Cos, Sin));
  return out;
}

/// Crank-Nicolson on the linear operator, Adams-Bashforth-2 on the nonlinearity, in the
/// coordinates of GalerkinSystem (solenoidal coordinates at eps = 0, so the nonlinearity is
/// projected before the implicit solve).
class Simulator {
 public:
  Simulator(const Params& p, const SimOptions& o = {}, std::optional<EigenData> ed = std::nullopt)
      : sys_(p), o_(o), ed_(std::move(ed)) {
    dt_ = o.dt > 0 ? o.dt : default_dt(p);
    x_ = Eigen::VectorXd::Zero(sys_.dim());
    for (const auto& b : sys_.L().blocks) {
      const int nb = static_cast<int>(b.idx.size());
      Eigen::MatrixXd A = Eigen::MatrixXd::Identity(nb, nb) + 0.5 * dt_ * b.A;
      Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
      if (!(lu.rcond() > 1e-14)) throw Error(ErrorCode::SingularBlock, "implicit block factorization failed");
      lus_.push_back(lu);
    }
  }

  const GalerkinSystem& system() const { return sys_; }
  double t() const { return t_; }
  double dt() const { return dt_; }
  long steps() const { return n_; }
  const Eigen::VectorXd& state() const { return x_; }
  RealField field() const { return sys_.field(x_); }
  const std::deque<SimRecord>& records() const { return rec_; }

  void set_state(const Eigen::VectorXd& x, double t = 0) {
    if (x.size() != sys_.dim()) throw Error(ErrorCode::Mismatch, "state dimension differs from the system");
    x_ = x;
    t_ = t;
    n_ = 0;
    have_prev_ = false;
    rec_.clear();
  }
  void set_field(const RealField& u, double t = 0) { set_state(sys_.restrict(u.coeffs()), t); }

  Eigen::VectorXd nonlinear(const Eigen::VectorXd& x) const {
    if (!o_.temam) return sys_.N(x, x);
    const RealField u = sys_.field(x);
    return sys_.restrict(Eigen::VectorXd(nonlinear_N(u, u).coeffs() + temam_term(u).coeffs()));
  }

  void step() {
    const Eigen::VectorXd Nn = nonlinear(x_);
    const Eigen::VectorXd Nx = have_prev_ ? Eigen::VectorXd(1.5 * Nn - 0.5 * Nprev_) : Nn;
    Eigen::VectorXd rhs = x_ - 0.5 * dt_ * (sys_.L().matrix * x_) - dt_ * Nx;
    for (size_t b = 0; b < lus_.size(); ++b) {
      const auto& idx = sys_.L().blocks[b].idx;
      Eigen::VectorXd r(idx.size());
      for (size_t i = 0; i < idx.size(); ++i) r[i] = rhs[idx[i]];
      r = lus_[b].solve(r);
      for (size_t i = 0; i < idx.size(); ++i) x_[idx[i]] = r[i];
    }
    Nprev_ = Nn;
    have_prev_ = true;
    t_ += dt_;
    ++n_;
    const double nrm = sys_.norm(x_);
    if (!std::isfinite(nrm) || nrm > o_.blowup)
      throw Error(ErrorCode::BlowUp, "state norm " + std::to_string(nrm) + " at t = " + std::to_string(t_));
    if (n_ % o_.record_every == 0) record();
  }

  void run_until(double T, const std::function<void(const Simulator&)>& on_step = {}) {
    while (t_ < T - 0.5 * dt_) {
      step();
      if (on_step) on_step(*this);
    }
  }

  SimRecord diagnostics() const {
    const RealField u = field();
    const Params& p = sys_.params();
    SimRecord r;
    r.t = t_;
    r.E = 0.5 * sys_.inner(x_, x_);
    r.D = dirichlet_sq(u, Var::w1) + dirichlet_sq(u, Var::w2) + dirichlet_sq(u, Var::theta) +
          p.d * dirichlet_sq(u, Var::psi);
    r.P = 2 * p.R1 * l2_pair(u, Var::theta, u, Var::w2);
    r.div = divergence_norm(u);
    if (ed_) r.bracket = sys_.inner(Eigen::VectorXcd(x_.cast<cplx>()), ed_->upa);
    return r;
  }

 private:
  void record() {
    rec_.push_back(diagnostics());
    if (rec_.size() > o_.ring) rec_.pop_front();
  }

  GalerkinSystem sys_;
  SimOptions o_;
  std::optional<EigenData> ed_;
  double dt_ = 1e-3;
  double t_ = 0;
  long n_ = 0;
  Eigen::VectorXd x_, Nprev_;
  bool have_prev_ = false;
  std::vector<Eigen::PartialPivLU<Eigen::MatrixXd>> lus_;
  std::deque<SimRecord> rec_;
};

struct OrbitComparison {
  double R1 = 0;
  double eta = 0;
  double delta_branch = 0;     // branch point with the same eta
  double delta_amplitude = 0;  // branch point with the measured amplitude
  double amplitude_sim = 0;
  double amplitude_branch = 0;
  double period_sim = 0;
  double period_branch = 0;
  double amplitude_rel_gap = 0;
  double period_rel_gap = 0;
  double return_drift = 0;  // relative change of the section amplitude over the last returns
  int crossings = 0;
  double t_end = 0;
  bool converged = false;
  std::vector<SimRecord> records;
  RealField final_state;
};

namespace detail {

/// RMS norm sqrt(sum_m |||u_m|||^2) of a branch orbit delta (z0 + delta U).
inline double branch_rms(const HopfProblem& hp, const HopfBranchPoint& bp) {
  return hp.stack_norm(Stack(bp.delta * (hp.z0() + bp.delta * bp.U)));
}

/// Solve g(delta) = target for a monotone branch quantity by secant steps.
inline double invert_branch(const std::function<double(double)>& g, double target, double d0) {
  double x0 = d0, x1 = 1.1 * d0, f0 = g(x0) - target, f1 = g(x1) - target;
  for (int it = 0; it < 40 && std::abs(f1) > 1e-13 * std::max(1.0, std::abs(target)); ++it) {
    const double x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
    x0 = x1;
    f0 = f1;
    x1 = x2;
    f1 = g(x1) - target;
  }
  return x1;
}

}  // namespace detail

/// Run from the conductive state seeded along u+ at R1 = R1c + eta and compare the attractor
/// with the branch point of the same eta. The Poincare section is Im[u]_+ crossing upward with
/// Re[u]_+ > 0; amplitude is the RMS of |||u|||_eps over the last return interval.
inline OrbitComparison simulate_to_orbit(const Params& p, const EigenData& ed, double eta, double seed_amp,
                                         double T_max, const SimOptions& so = {}, int M = 8,
                                         double drift_tol = 1e-3, OrbitComparison* partial = nullptr) {
  OrbitComparison oc;
  oc.eta = eta;
  oc.R1 = ed.R1_crit + eta;
  HopfProblem hp(p, ed, M);
  const double eta0 = hp.first_order().eta0;
  oc.delta_branch = detail::invert_branch([&](double d) { return hp.picard(d).eta; }, eta, std::sqrt(eta / eta0));
  const HopfBranchPoint bp = hp.picard(oc.delta_branch);
  oc.amplitude_branch = detail::branch_rms(hp, bp);
  oc.period_branch = 2 * kPi / (ed.a * (1 + bp.omega));

  Simulator sim(p.with_R1(oc.R1), so, ed);
  sim.set_state(Eigen::VectorXd(2 * seed_amp * ed.up.real()));
  double prev_im = 0, sum_e = 0, sum_t = 0;
  bool have = false;
  std::vector<double> cross_t, cross_amp;
  auto on_step = [&](const Simulator& s) {
    const Eigen::VectorXd& x = s.state();
    const cplx c = s.system().inner(Eigen::VectorXcd(x.cast<cplx>()), ed.upa);
    sum_e += s.system().inner(x, x) * s.dt();
    sum_t += s.dt();
    if (have && prev_im < 0 && c.imag() >= 0 && c.real() > 0) {
      const double f = prev_im / (prev_im - c.imag());
      cross_t.push_back(s.t() - s.dt() + f * s.dt());
      cross_amp.push_back(std::sqrt(sum_e / sum_t));
      sum_e = sum_t = 0;
    }
    prev_im = c.imag();
    have = true;
  };
  while (sim.t() < T_max) {
    sim.run_until(std::min(T_max, sim.t() + 5 * oc.period_branch), on_step);
    const size_t nc = cross_amp.size();
    if (nc >= 6) {
      oc.return_drift = std::abs(cross_amp[nc - 1] - cross_amp[nc - 4]) / cross_amp[nc - 1];
      if (oc.return_drift < drift_tol) {
        oc.converged = true;
        break;
      }
    }
  }
  oc.t_end = sim.t();
  oc.records.assign(sim.records().begin(), sim.records().end());
  oc.final_state = sim.field();
  oc.crossings = static_cast<int>(cross_t.size());
  if (cross_t.size() >= 4) {
    const size_t nc = cross_t.size();
    oc.period_sim = (cross_t[nc - 1] - cross_t[nc - 4]) / 3;
    oc.amplitude_sim = cross_amp[nc - 1];
    oc.amplitude_rel_gap = std::abs(oc.amplitude_sim - oc.amplitude_branch) / oc.amplitude_branch;
    oc.period_rel_gap = std::abs(oc.period_sim - oc.period_branch) / oc.period_branch;
    oc.delta_amplitude = detail::invert_branch([&](double d) { return detail::branch_rms(hp, hp.picard(d)); },
                                               oc.amplitude_sim, oc.delta_branch);
  }
  if (partial) *partial = oc;
  if (!oc.converged)
    throw Error(ErrorCode::NotConverged, "return map drift " + std::to_string(oc.return_drift) + " at T_max");
  return oc;
}

struct DecayMeasurement {
  double rate_sim = 0;   // fitted d log E / dt over the tail
  double rate_pred = 0;  // 2 Re lambda of the leading eigenvalue
  double rel_gap = 0;
  std::vector<SimRecord> records;
};

/// Tiny-amplitude run below criticality; fits the late-time decay of E.
inline DecayMeasurement measure_decay(const Params& p, double amp, double T, uint64_t seed, const SimOptions& so = {}) {
  DecayMeasurement dm;
  GalerkinSystem sys(p);
  double lead = -std::numeric_limits<double>::infinity();
  for (const auto& b : sys.L().blocks) {
    const Eigen::VectorXcd ev = eigenvalues_of_negated(b.A);
    for (int i = 0; i < ev.size(); ++i) lead = std::max(lead, ev[i].real());
  }
  dm.rate_pred = 2 * lead;
  Simulator sim(p, so);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Eigen::VectorXd x(sys.dim());
  for (int i = 0; i < x.size(); ++i) x[i] = nd(rng);
  sim.set_state(amp * x / sys.norm(x));
  sim.run_until(T);
  std::vector<std::pair<double, double>> pts;
  for (const auto& r : sim.records())
    if (r.t >= 0.6 * T && r.E > 0) pts.emplace_back(r.t, std::log(r.E));
  dm.records.assign(sim.records().begin(), sim.records().end());
  dm.rate_sim = linear_fit(pts).slope;
  dm.rel_gap = std::abs(dm.rate_sim - dm.rate_pred) / std::abs(dm.rate_pred);
  return dm;
}

}  // namespace ddc
