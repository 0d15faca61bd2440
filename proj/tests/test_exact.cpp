#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "support.hpp"
#include "vqd/exact.hpp"

using namespace vqd;
using vqd::testing::harmonic_h;
using vqd::testing::ho_eigenstate;
using vqd::testing::random_smooth_state;

TEST_CASE("coherent state follows its analytic orbit in the harmonic well") {
  auto g = Grid::make_1d(-12.0, 12.0, 256);
  const double m = 1.0, w = 1.0, hbar = 1.0;
  HamiltonianSpec h = harmonic_h(g, m, w);
  fga::CoherentState s{cdouble(0.9, 0.4), std::sqrt(hbar / (2.0 * m * w)), m, 0.0, hbar};
  const WaveState psi0 = normalized(fga::coherent_to_grid(s, g));

  const double period = 2.0 * vqd::testing::kPi / w;
  Trajectory traj = propagate_exact(h, psi0, period, 9);
  CHECK(traj.method == PropagationMethod::eigendecomposition);
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    fga::CoherentState st = s;
    st.z = s.z * std::exp(cdouble(0.0, -w * traj.times[i]));
    const WaveState analytic = normalized(fga::coherent_to_grid(st, g));
    CHECK(std::abs(inner(traj.states[i], analytic)) >= 1.0 - 1e-7);
    CHECK(std::abs(traj.norms[i] - 1.0) < 1e-9);
    CHECK(std::abs(traj.energies[i] - traj.energies[0]) <
          1e-8 * std::abs(traj.energies[0]));
  }
}

TEST_CASE("eigenstates accumulate a pure phase") {
  auto g = Grid::make_1d(-10.0, 10.0, 192);
  const double m = 1.0, w = 1.0, hbar = 1.0;
  HamiltonianSpec h = harmonic_h(g, m, w);
  const WaveState psi0 = ho_eigenstate(g, 1, m, w);
  const double t = 2.7;
  Trajectory traj = propagate_exact(h, psi0, t, 3);
  const double e1 = 1.5 * hbar * w;
  const WaveState want = std::exp(cdouble(0.0, -e1 * t / hbar)) * psi0;
  CHECK(distance(traj.states.back(), want) < 1e-9);
}

TEST_CASE("zero-time propagation returns the initial state") {
  auto g = Grid::make_1d(-8.0, 8.0, 64);
  HamiltonianSpec h = harmonic_h(g, 1.0, 1.0);
  const WaveState psi0 = gaussian_state(g, {0.5}, {0.2}, {0.8});
  Trajectory traj = propagate_exact(h, psi0, 0.0, 10);
  REQUIRE(traj.states.size() == 1);
  CHECK(distance(traj.states[0], psi0) == 0.0);
  CHECK_THROWS_AS(propagate_exact(h, psi0, -1.0, 4), StructuralError);
}

TEST_CASE("distance: identity, Pythagoras, triangle inequality") {
  auto g = Grid::make_1d(-10.0, 10.0, 256);
  const WaveState a = ho_eigenstate(g, 0, 1.0, 1.0);
  const WaveState b = ho_eigenstate(g, 1, 1.0, 1.0);
  CHECK(distance(a, a) == 0.0);
  CHECK(distance(a, b) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-10));

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 6; ++trial) {
    const WaveState x = random_smooth_state(g, rng);
    const WaveState y = random_smooth_state(g, rng);
    const WaveState z = random_smooth_state(g, rng);
    CHECK(distance(x, y) <= norm(x) + norm(y) + 1e-12);
    CHECK(distance(x, z) <= distance(x, y) + distance(y, z) + 1e-12);
  }
}

TEST_CASE("unitarity keeps distances constant") {
  auto g = Grid::make_1d(-10.0, 10.0, 128);
  HamiltonianSpec h = vqd::testing::quartic_h(g, 1.0);
  std::mt19937_64 rng(11);
  const WaveState a = random_smooth_state(g, rng);
  const WaveState b = random_smooth_state(g, rng);
  Trajectory ta = propagate_exact(h, a, 3.0, 7);
  Trajectory tb = propagate_exact(h, b, 3.0, 7);
  const double d0 = distance(a, b);
  for (std::size_t i = 0; i < ta.states.size(); ++i) {
    CHECK(std::abs(distance(ta.states[i], tb.states[i]) - d0) < 1e-8);
  }
}

TEST_CASE("finite-difference derivative of the flow matches -i H psi / hbar") {
  auto g = Grid::make_1d(-12.0, 12.0, 256);
  HamiltonianSpec h = harmonic_h(g, 1.0, 1.0);
  fga::CoherentState s{cdouble(0.7, 0.0), std::sqrt(0.5), 1.0, 0.0, 1.0};
  const WaveState psi0 = normalized(fga::coherent_to_grid(s, g));
  DensePropagator prop(dense_matrix(h, 1.0), 1.0);

  const double t = 0.9;
  const WaveState psi_t(g, prop.evolve(psi0.amp(), t), 1.0, 1);
  const WaveState rhs = cdouble(0.0, -1.0) * apply_h(h, psi_t);

  auto fd_error = [&](double delta) {
    const WaveState plus(g, prop.evolve(psi0.amp(), t + delta), 1.0, 1);
    const WaveState minus(g, prop.evolve(psi0.amp(), t - delta), 1.0, 1);
    const WaveState fd = cdouble(1.0 / (2.0 * delta), 0.0) * (plus - minus);
    return distance(fd, rhs);
  };
  const double e1 = fd_error(0.02);
  const double e2 = fd_error(0.01);
  const double slope = std::log(e1 / e2) / std::log(2.0);
  CHECK(slope >= 1.9);
}

TEST_CASE("short-iterative Lanczos agrees with the dense spectral path") {
  auto g = Grid::make_1d(-9.0, 9.0, 256);
  HamiltonianSpec h = vqd::testing::quartic_h(g, 1.0);
  const WaveState psi0 = gaussian_state(g, {1.0}, {0.5}, {0.6});
  Trajectory dense = propagate_exact(h, psi0, 2.0, 5);
  Trajectory kry = propagate_exact(h, psi0, 2.0, 5, PropagationMethod::krylov);
  CHECK(kry.method == PropagationMethod::krylov);
  for (std::size_t i = 0; i < dense.states.size(); ++i) {
    CHECK(distance(dense.states[i], kry.states[i]) < 1e-9);
  }
}

TEST_CASE("large grids switch to the Lanczos path automatically") {
  auto g = Grid::make_1d(-30.0, 30.0, 4096, Boundary::periodic);
  HamiltonianSpec h(g, {1.0}, Eigen::VectorXd::Zero(4096));
  const WaveState psi0 = gaussian_state(g, {0.0}, {1.0}, {1.5});
  Trajectory traj = propagate_exact(h, psi0, 0.5, 2);
  CHECK(traj.method == PropagationMethod::krylov);
  CHECK(std::abs(traj.norms.back() - 1.0) < 1e-9);
}

TEST_CASE("observable error bounds") {
  CHECK(observable_error_bounds(0.0, 5.0) == std::pair{0.0, 0.0});
  const auto [ac, ob] = observable_error_bounds(0.1, 1.0);
  CHECK(ac == doctest::Approx(0.1));
  CHECK(ob == doctest::Approx(0.2));
  CHECK_THROWS_AS(observable_error_bounds(-0.1, 1.0), StructuralError);
  CHECK_THROWS_AS(observable_error_bounds(0.1, -1.0), StructuralError);
}

TEST_CASE("trajectory export writes CSV and binary amplitudes") {
  auto g = Grid::make_1d(-8.0, 8.0, 32);
  HamiltonianSpec h = harmonic_h(g, 1.0, 1.0);
  const WaveState psi0 = gaussian_state(g, {0.4}, {0.0}, {0.7});
  Trajectory traj = propagate_exact(h, psi0, 1.0, 4);
  const std::string path = "traj_tmp.csv";
  export_trajectory_csv(traj, path, true);

  std::ifstream csv(path);
  std::string header;
  std::getline(csv, header);
  CHECK(header == "t,norm,energy");
  int rows = 0;
  for (std::string line; std::getline(csv, line);) ++rows;
  CHECK(rows == 4);

  std::ifstream bin(path + ".amps.bin", std::ios::binary);
  bin.seekg(0, std::ios::end);
  CHECK(static_cast<std::size_t>(bin.tellg()) == 4u * 32u * 2u * sizeof(float));
  bin.seekg(0);
  float re = 0.0f, im = 0.0f;
  bin.read(reinterpret_cast<char*>(&re), sizeof(float));
  bin.read(reinterpret_cast<char*>(&im), sizeof(float));
  CHECK(re == doctest::Approx(std::real(psi0.amp()[0])).epsilon(1e-6));
  CHECK(im == doctest::Approx(std::imag(psi0.amp()[0])).epsilon(1e-6));
  std::remove(path.c_str());
  std::remove((path + ".amps.bin").c_str());
}
