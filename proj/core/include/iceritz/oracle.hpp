#pragma once

#include "iceritz/energy.hpp"

#include <vector>

namespace iceritz {

/// Classical finite-difference solvers for the same obstacle problems,
/// used as independent ground truth in tests and studies.

struct PsorOptions {
  double omega = 0.0;       // 0 = optimal SOR factor for the grid size
  double tol = 1e-10;       // max nodal update
  long max_sweeps = 500000;
};

struct PsorResult {
  Vector u;             // nodal solution, cells+1 values including boundaries
  Vector x;             // node coordinates
  long sweeps = 0;
  double final_update = 0.0;
};

/// Projected SOR for the p=2 problem -u'' = a, u >= b, Dirichlet data imposed
/// strongly at the end nodes. Throws on divergence.
PsorResult solve_psor_1d(const ProblemSpec& spec, int cells, const PsorOptions& options = {});

struct PgdOptions {
  double tol = 1e-8;        // projected-gradient (variational) residual
  long max_iters = 2000000;
  double sufficient_decrease = 1e-10;
};

struct PgdResult {
  Vector u;        // nodal solution (1D: cells+1; 2D: row-major ny x nx)
  Vector x, y;     // node coordinates (y empty in 1D)
  long iterations = 0;
  double residual = 0.0;
  std::vector<double> energy;  // recorded discrete energy per accepted step
};

/// Projected gradient descent (Barzilai-Borwein steps with a monotone
/// backtracking safeguard) on the discrete p-energy, any p >= 2.
PgdResult solve_pgd_1d(const ProblemSpec& spec, int cells, const PgdOptions& options = {});
PgdResult solve_pgd_2d(const ProblemSpec& spec, int nx_cells, int ny_cells,
                       const PgdOptions& options = {});

/// Discrete energies used by the projected-gradient solvers; exposed so tests
/// can check monotonicity and cross-validate gradients.
double discrete_energy_1d(const ProblemSpec& spec, const Vector& u, int cells);
double discrete_energy_2d(const ProblemSpec& spec, const Vector& u, int nx_cells, int ny_cells);

}  // namespace iceritz
