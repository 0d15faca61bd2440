#include "vqd/tdh.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace vqd::tdh {

namespace {

HamiltonianSpec one_body(const TdhSystem& sys, int mode) {
  const TdhMode& m = sys.modes[static_cast<std::size_t>(mode)];
  return HamiltonianSpec(m.grid, {m.mass}, m.potential, sys.kinetic);
}

double coordinate_mean(const WaveState& phi) {
  return std::real(inner(phi, multiply_coordinate(phi, 0)));
}

// Joint vector with `factors[i]` in tensor slot i.
Eigen::VectorXcd tensor_product(const Grid& joint,
                                const std::vector<const Eigen::VectorXcd*>& factors) {
  Eigen::VectorXcd out(static_cast<Eigen::Index>(joint.size()));
  for (std::size_t p = 0; p < joint.size(); ++p) {
    cdouble v(1.0, 0.0);
    for (int ax = 0; ax < joint.ndim(); ++ax) {
      const std::size_t j = (p / joint.stride(ax)) % static_cast<std::size_t>(joint.n_points(ax));
      v *= (*factors[static_cast<std::size_t>(ax)])[static_cast<Eigen::Index>(j)];
    }
    out[static_cast<Eigen::Index>(p)] = v;
  }
  return out;
}

void check_state(const TdhSystem& sys, const TDHState& s) {
  if (s.spfs.size() != sys.modes.size()) {
    throw StructuralError("state has the wrong number of single-particle functions");
  }
  for (std::size_t i = 0; i < s.spfs.size(); ++i) {
    if (s.spfs[i].grid() != *sys.modes[i].grid) {
      throw StructuralError("single-particle function grid mismatch");
    }
  }
}

}  // namespace

Coupling Coupling::none() { return Coupling{}; }

Coupling Coupling::bilinear(double c, int a, int b) {
  return bilinear_terms({Bilinear{a, b, c}});
}

Coupling Coupling::bilinear_terms(std::vector<Bilinear> terms) {
  Coupling out;
  for (const auto& t : terms) {
    if (t.a == t.b) throw StructuralError("bilinear coupling needs two distinct modes");
  }
  out.terms_ = std::move(terms);
  return out;
}

Coupling Coupling::tabulated(Eigen::MatrixXd w) {
  Coupling out;
  out.tabulated_ = std::move(w);
  return out;
}

TDHState make_state(const TdhSystem& sys, std::vector<WaveState> spfs) {
  TDHState s;
  for (auto& phi : spfs) s.spfs.push_back(normalized(phi));
  s.gauges.assign(sys.modes.size(), 0.0);
  check_state(sys, s);
  return s;
}

std::shared_ptr<const Grid> joint_grid(const TdhSystem& sys) {
  std::vector<AxisSpec> axes;
  const Boundary b = sys.modes.front().grid->boundary();
  for (const TdhMode& m : sys.modes) {
    if (m.grid->ndim() != 1) throw StructuralError("mode grids must be 1D");
    if (m.grid->boundary() != b) {
      throw StructuralError("mode grids must share the boundary treatment");
    }
    axes.push_back({m.grid->x_min(0), m.grid->x_max(0), m.grid->n_points(0)});
  }
  return Grid::make(axes, b);
}

Eigen::VectorXd coupling_table(const TdhSystem& sys) {
  const auto joint = joint_grid(sys);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(joint->size()));
  if (sys.coupling.is_tabulated()) {
    if (sys.modes.size() != 2) {
      throw StructuralError("tabulated coupling supports exactly 2 modes");
    }
    const auto& tab = sys.coupling.table();
    if (tab.rows() != sys.modes[0].grid->n_points(0) ||
        tab.cols() != sys.modes[1].grid->n_points(0)) {
      throw StructuralError("tabulated coupling size does not match mode grids");
    }
    for (std::size_t p = 0; p < joint->size(); ++p) {
      const auto i = static_cast<Eigen::Index>(p / joint->stride(0));
      const auto j = static_cast<Eigen::Index>(p % joint->stride(0) / joint->stride(1));
      w[static_cast<Eigen::Index>(p)] = tab(i, j);
    }
    return w;
  }
  for (const auto& t : sys.coupling.terms()) {
    for (std::size_t p = 0; p < joint->size(); ++p) {
      w[static_cast<Eigen::Index>(p)] +=
          t.c * joint->coordinate(p, t.a) * joint->coordinate(p, t.b);
    }
  }
  return w;
}

HamiltonianSpec joint_hamiltonian(const TdhSystem& sys) {
  const auto joint = joint_grid(sys);
  Eigen::VectorXd v = coupling_table(sys);
  std::vector<double> masses;
  for (const TdhMode& m : sys.modes) masses.push_back(m.mass);
  for (std::size_t p = 0; p < joint->size(); ++p) {
    for (int ax = 0; ax < joint->ndim(); ++ax) {
      const std::size_t j = (p / joint->stride(ax)) % static_cast<std::size_t>(joint->n_points(ax));
      v[static_cast<Eigen::Index>(p)] +=
          sys.modes[static_cast<std::size_t>(ax)].potential[static_cast<Eigen::Index>(j)];
    }
  }
  return HamiltonianSpec(joint, std::move(masses), std::move(v), sys.kinetic);
}

Eigen::VectorXd mean_field_potential(const TdhSystem& sys, const TDHState& s, int mode) {
  check_state(sys, s);
  const auto n = static_cast<Eigen::Index>(sys.modes[static_cast<std::size_t>(mode)].grid->size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  if (sys.coupling.is_tabulated()) {
    const auto& tab = sys.coupling.table();
    const int other = mode == 0 ? 1 : 0;
    const WaveState& phi = s.spfs[static_cast<std::size_t>(other)];
    const Eigen::VectorXd dens =
        phi.amp().cwiseAbs2() * phi.grid().cell_volume();
    v = mode == 0 ? Eigen::VectorXd(tab * dens) : Eigen::VectorXd(tab.transpose() * dens);
    return v;
  }
  for (const auto& t : sys.coupling.terms()) {
    if (t.a == mode || t.b == mode) {
      const int other = t.a == mode ? t.b : t.a;
      const double mean = coordinate_mean(s.spfs[static_cast<std::size_t>(other)]);
      const auto& axis = sys.modes[static_cast<std::size_t>(mode)].grid->axis(0);
      for (Eigen::Index i = 0; i < n; ++i) v[i] += t.c * mean * axis[static_cast<std::size_t>(i)];
    } else {
      const double m1 = coordinate_mean(s.spfs[static_cast<std::size_t>(t.a)]);
      const double m2 = coordinate_mean(s.spfs[static_cast<std::size_t>(t.b)]);
      v.array() += t.c * m1 * m2;
    }
  }
  return v;
}

namespace {

double coupling_mean(const TdhSystem& sys, const TDHState& s) {
  // <W> = <phi_0 | v_0 | phi_0> for any mode.
  const Eigen::VectorXd v0 = mean_field_potential(sys, s, 0);
  const WaveState& phi = s.spfs[0];
  return (phi.amp().cwiseAbs2().cwiseProduct(v0)).sum() * phi.grid().cell_volume();
}

std::vector<double> one_body_energies(const TdhSystem& sys, const TDHState& s) {
  std::vector<double> eps;
  for (std::size_t i = 0; i < sys.modes.size(); ++i) {
    const auto [e, var] = energy_moments(one_body(sys, static_cast<int>(i)),
                                         normalized(s.spfs[i]));
    (void)var;
    eps.push_back(e);
  }
  return eps;
}

// (H_i - E) phi_i for every mode; the workhorse shared by the equations of
// motion and the variance decomposition.
std::vector<WaveState> shifted_mean_field_action(const TdhSystem& sys, const TDHState& s,
                                                 double w_mean,
                                                 const std::vector<double>& eps) {
  std::vector<WaveState> out;
  for (std::size_t i = 0; i < sys.modes.size(); ++i) {
    const WaveState& phi = s.spfs[i];
    WaveState hphi = apply_h(one_body(sys, static_cast<int>(i)), phi);
    hphi = hphi + multiply_function(phi, mean_field_potential(sys, s, static_cast<int>(i)));
    // H_i - E = h_i + v_i + sum_{j != i} eps_j - E = h_i + v_i - eps_i - <W>.
    out.push_back(hphi - (cdouble(eps[i] + w_mean, 0.0) * phi));
  }
  return out;
}

}  // namespace

Eigen::MatrixXcd mean_field_h(const TdhSystem& sys, const TDHState& s, int mode) {
  check_state(sys, s);
  const auto eps = one_body_energies(sys, s);
  double shift = 0.0;
  for (std::size_t j = 0; j < eps.size(); ++j) {
    if (j != static_cast<std::size_t>(mode)) shift += eps[j];
  }
  Eigen::MatrixXcd m = dense_matrix(one_body(sys, mode), sys.hbar);
  const Eigen::VectorXd v = mean_field_potential(sys, s, mode);
  m += v.cast<cdouble>().asDiagonal();
  m += shift * Eigen::MatrixXcd::Identity(m.rows(), m.cols());
  return m;
}

double mean_energy(const TdhSystem& sys, const TDHState& s) {
  check_state(sys, s);
  const auto eps = one_body_energies(sys, s);
  double e = coupling_mean(sys, s);
  for (double x : eps) e += x;
  return e;
}

TdhRates tdh_rhs(const TdhSystem& sys, const TDHState& s) {
  check_state(sys, s);
  const auto eps = one_body_energies(sys, s);
  const double w_mean = coupling_mean(sys, s);
  double e_bar = w_mean;
  for (double x : eps) e_bar += x;

  TdhRates rates;
  auto shifted = shifted_mean_field_action(sys, s, w_mean, eps);
  for (auto& hphi : shifted) {
    rates.spf_dots.push_back(cdouble(0.0, -1.0 / sys.hbar) * hphi);
  }
  rates.phase_dot = -e_bar / sys.hbar;
  return rates;
}

WaveState hartree_to_grid(const TdhSystem& sys, const TDHState& s) {
  check_state(sys, s);
  const auto joint = joint_grid(sys);
  std::vector<const Eigen::VectorXcd*> factors;
  for (const WaveState& phi : s.spfs) factors.push_back(&phi.amp());
  Eigen::VectorXcd amp = tensor_product(*joint, factors);
  amp *= std::exp(cdouble(0.0, s.phase));
  return WaveState(joint, std::move(amp), sys.hbar, 1);
}

WaveState joint_derivative(const TdhSystem& sys, const TDHState& s) {
  const auto joint = joint_grid(sys);
  const TdhRates rates = tdh_rhs(sys, s);
  Eigen::VectorXcd amp = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(joint->size()));
  for (std::size_t i = 0; i < s.spfs.size(); ++i) {
    std::vector<const Eigen::VectorXcd*> factors;
    for (std::size_t j = 0; j < s.spfs.size(); ++j) {
      factors.push_back(j == i ? &rates.spf_dots[j].amp() : &s.spfs[j].amp());
    }
    amp += tensor_product(*joint, factors);
  }
  amp *= std::exp(cdouble(0.0, s.phase));
  // Global phase contributes i phase_dot Psi.
  const WaveState psi = hartree_to_grid(sys, s);
  amp += cdouble(0.0, rates.phase_dot) * psi.amp();
  return WaveState(joint, std::move(amp), sys.hbar, 1);
}

MeanFieldDecomposition tdh_error(const TdhSystem& sys, const TDHState& s) {
  check_state(sys, s);
  const double hbar = sys.hbar;
  const auto joint = joint_grid(sys);
  const WaveState psi = normalized(hartree_to_grid(sys, s));
  const HamiltonianSpec h = joint_hamiltonian(sys);

  MeanFieldDecomposition d;
  const auto [e_bar, var_e] = energy_moments(h, psi);
  d.e_bar = e_bar;
  d.var_e = var_e;

  const auto eps = one_body_energies(sys, s);
  const double w_mean = coupling_mean(sys, s);
  const auto shifted = shifted_mean_field_action(sys, s, w_mean, eps);
  d.var_mf = 0.0;
  for (std::size_t i = 0; i < shifted.size(); ++i) {
    // spfs are normalized, so ||(H_i - E) phi_i||^2 is the one-mode variance.
    d.var_mf += norm_sq(shifted[i]) / norm_sq(s.spfs[i]);
  }

  // Delta V = W + (N-1)<W> - sum_i v_i on the joint grid.
  const int n_modes = static_cast<int>(sys.modes.size());
  Eigen::VectorXd dv = coupling_table(sys);
  dv.array() += (n_modes - 1) * w_mean;
  for (int i = 0; i < n_modes; ++i) {
    const Eigen::VectorXd vi = mean_field_potential(sys, s, i);
    for (std::size_t p = 0; p < joint->size(); ++p) {
      const std::size_t j = (p / joint->stride(i)) % static_cast<std::size_t>(joint->n_points(i));
      dv[static_cast<Eigen::Index>(p)] -= vi[static_cast<Eigen::Index>(j)];
    }
  }

  const WaveState dv_psi = multiply_function(psi, dv);
  d.dv_mean = std::real(inner(psi, dv_psi));
  d.var_dv = norm_sq(dv_psi);

  // H_mf^0 Psi = sum_i [(H_i - E) phi_i at slot i] (x) rest.
  Eigen::VectorXcd mf_amp = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(joint->size()));
  for (std::size_t i = 0; i < s.spfs.size(); ++i) {
    std::vector<const Eigen::VectorXcd*> factors;
    for (std::size_t j = 0; j < s.spfs.size(); ++j) {
      factors.push_back(j == i ? &shifted[j].amp() : &s.spfs[j].amp());
    }
    mf_amp += tensor_product(*joint, factors);
  }
  mf_amp *= std::exp(cdouble(0.0, s.phase));
  const WaveState mf_psi(joint, std::move(mf_amp), hbar, 1);
  d.cross = 2.0 * std::real(inner(mf_psi, dv_psi));

  if (d.var_e <= 1e-13 * (d.e_bar * d.e_bar + d.var_e) || d.var_e <= 1e-26) {
    d.stationary = true;
    d.eps_mf = 0.0;
    d.r_mf = 1.0;
    d.r_lower = 1.0;
    return d;
  }

  d.eps_mf = std::sqrt(std::max(d.var_dv + d.cross, 0.0)) / hbar;
  d.r_mf = std::sqrt(std::clamp(d.var_mf / d.var_e, 0.0, 1.0));
  const double de_mf = std::sqrt(d.var_mf);
  const double dv0 = std::sqrt(d.var_dv);
  d.r_lower = de_mf / std::max(de_mf + dv0, 1e-300);
  return d;
}

TdhRun propagate(const TdhSystem& sys, TDHState s0, double t_final, int n_samples,
                 const OdeOptions& opts, WarningLog* log) {
  check_state(sys, s0);
  if (!(t_final > 0.0)) throw StructuralError("t_final must be positive");
  if (n_samples < 2) throw StructuralError("need at least 2 samples");
  const HamiltonianSpec h = joint_hamiltonian(sys);

  // Flatten (spf values, phase) into the ODE state vector.
  std::vector<Eigen::Index> sizes;
  Eigen::Index total = 0;
  for (const WaveState& phi : s0.spfs) {
    sizes.push_back(phi.amp().size());
    total += phi.amp().size();
  }
  auto pack = [&](const TDHState& s, std::vector<double>& y) {
    y.resize(static_cast<std::size_t>(2 * total) + 1);
    std::size_t k = 0;
    for (const WaveState& phi : s.spfs) {
      for (Eigen::Index i = 0; i < phi.amp().size(); ++i) {
        y[k++] = std::real(phi.amp()[i]);
        y[k++] = std::imag(phi.amp()[i]);
      }
    }
    y[k] = s.phase;
  };
  auto unpack = [&](const std::vector<double>& y) {
    TDHState s = s0;
    std::size_t k = 0;
    for (std::size_t m = 0; m < s.spfs.size(); ++m) {
      Eigen::VectorXcd amp(sizes[m]);
      for (Eigen::Index i = 0; i < sizes[m]; ++i) {
        const double re = y[k++];
        const double im = y[k++];
        amp[i] = cdouble(re, im);
      }
      s.spfs[m] = WaveState(s0.spfs[m].grid_ptr(), std::move(amp), sys.hbar, 1);
    }
    s.phase = y[k];
    return s;
  };

  OdeSystem system = [&](const std::vector<double>& y, std::vector<double>& dydt, double) {
    const TDHState s = unpack(y);
    const TdhRates rates = tdh_rhs(sys, s);
    dydt.resize(y.size());
    std::size_t k = 0;
    for (const WaveState& dphi : rates.spf_dots) {
      for (Eigen::Index i = 0; i < dphi.amp().size(); ++i) {
        dydt[k++] = std::real(dphi.amp()[i]);
        dydt[k++] = std::imag(dphi.amp()[i]);
      }
    }
    dydt[k] = rates.phase_dot;
  };

  TdhRun run;
  auto sample = [&](TDHState& s, double t) {
    for (std::size_t m = 0; m < s.spfs.size(); ++m) {
      const double drift = std::abs(norm(s.spfs[m]) - 1.0);
      if (drift > 1e-9) {
        if (log) {
          char buf[128];
          std::snprintf(buf, sizeof(buf), "renormalized spf %zu at t=%g (drift %.3g)", m, t,
                        drift);
          log->add(buf);
        }
        s.spfs[m] = normalized(s.spfs[m]);
      }
    }
    const WaveState psi = normalized(hartree_to_grid(sys, s));
    ErrorReport rep = local_error(h, psi, joint_derivative(sys, s));
    rep.t = t;
    const MeanFieldDecomposition dec = tdh_error(sys, s);
    // The closed-form correlation error must match the joint-grid
    // diagnostics; a mismatch means the equations of motion were not solved.
    const double diff = std::abs(dec.eps_mf - rep.eps);
    if (diff > std::max(1e-7 * std::max(dec.eps_mf, rep.eps),
                        1e-9 * std::sqrt(rep.var_e) / sys.hbar)) {
      rep.stationarity_ok = false;
    }
    run.times.push_back(t);
    run.states.push_back(s);
    run.reports.push_back(rep);
    run.decomps.push_back(dec);
  };

  std::vector<double> y;
  pack(s0, y);
  TDHState current = s0;
  sample(current, 0.0);
  pack(current, y);
  for (int i = 1; i < n_samples; ++i) {
    const double t0 = t_final * (i - 1) / (n_samples - 1);
    const double t1 = t_final * i / (n_samples - 1);
    integrate_sampled(system, y, {t0, t1}, opts, [](const std::vector<double>&, double) {});
    current = unpack(y);
    sample(current, t1);
    pack(current, y);  // renormalization (if any) feeds back into the run
  }
  accumulate_bound(run.reports);
  return run;
}

void write_decomposition_csv(const std::vector<double>& times,
                             const std::vector<MeanFieldDecomposition>& decomps,
                             const std::string& path) {
  std::ofstream out(path);
  if (!out) throw StructuralError("cannot write decomposition CSV: " + path);
  out << "t,var_E,var_mf,var_dV,cross,eps_mf,r_mf,r_lower\n";
  char buf[320];
  for (std::size_t i = 0; i < decomps.size(); ++i) {
    const auto& d = decomps[i];
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  times[i], d.var_e, d.var_mf, d.var_dv, d.cross, d.eps_mf, d.r_mf,
                  d.r_lower);
    out << buf;
  }
}

}  // namespace vqd::tdh
