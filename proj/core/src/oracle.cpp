#include "iceritz/oracle.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

namespace iceritz {

namespace {

// |s|^(p-2) * s with fast paths for the common exponents
inline double flux_1d(double s, double p) {
  if (p == 2.0) return s;
  if (p == 3.0) return std::abs(s) * s;
  if (p == 4.0) return s * s * s;
  return std::pow(std::abs(s), p - 2.0) * s;
}

inline double pow_norm(double nrm, double p) {
  if (p == 2.0) return nrm * nrm;
  if (p == 3.0) return nrm * nrm * nrm;
  if (p == 4.0) return nrm * nrm * nrm * nrm;
  return std::pow(nrm, p);
}

inline double pow_nrm_pm2(double nrm, double p) {
  if (p == 2.0) return 1.0;
  if (p == 3.0) return nrm;
  if (p == 4.0) return nrm * nrm;
  return nrm > 0.0 ? std::pow(nrm, p - 2.0) : 0.0;
}

Vector point1(double x) { return Vector::Constant(1, x); }
Vector point2(double x, double y) {
  Vector v(2);
  v << x, y;
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// Projected SOR, 1D, p = 2

PsorResult solve_psor_1d(const ProblemSpec& spec, int cells, const PsorOptions& options) {
  spec.validate();
  if (spec.domain.dim() != 1) throw std::invalid_argument("PSOR solver is 1D");
  if (spec.p != 2.0) throw std::invalid_argument("PSOR solver requires p = 2");
  if (cells < 2) throw std::invalid_argument("need at least two cells");

  const double lo = spec.domain.lo(0), hi = spec.domain.hi(0);
  const int n = cells;
  const double h = (hi - lo) / n;

  double omega = options.omega;
  if (omega == 0.0) omega = 2.0 / (1.0 + std::sin(M_PI / n));
  if (!(omega > 1.0 && omega < 2.0)) throw std::invalid_argument("omega must be in (1, 2)");

  PsorResult result;
  result.x.resize(n + 1);
  for (int i = 0; i <= n; ++i) result.x(i) = lo + i * h;

  Vector a(n + 1), b(n + 1);
  for (int i = 0; i <= n; ++i) {
    a(i) = spec.source ? spec.source(point1(result.x(i))) : 0.0;
    b(i) = spec.obstacle(point1(result.x(i)));
  }
  const double u_left = spec.boundary_value ? spec.boundary_value(point1(lo)) : 0.0;
  const double u_right = spec.boundary_value ? spec.boundary_value(point1(hi)) : 0.0;

  Vector& u = result.u;
  u.resize(n + 1);
  for (int i = 0; i <= n; ++i) {
    const double lin = u_left + (u_right - u_left) * i / n;
    u(i) = std::max(b(i), lin);
  }
  u(0) = u_left;
  u(n) = u_right;

  const double h2 = h * h;
  double update = 0.0;
  long sweep = 0;
  for (; sweep < options.max_sweeps; ++sweep) {
    update = 0.0;
    for (int i = 1; i < n; ++i) {
      const double gs = 0.5 * (u(i - 1) + u(i + 1) + h2 * a(i));
      const double cand = std::max(b(i), (1.0 - omega) * u(i) + omega * gs);
      update = std::max(update, std::abs(cand - u(i)));
      u(i) = cand;
    }
    if (!std::isfinite(update)) throw std::runtime_error("PSOR diverged (non-finite update)");
    if (update < options.tol) break;
  }
  if (update >= options.tol)
    throw std::runtime_error("PSOR did not converge within the sweep budget");
  result.sweeps = sweep + 1;
  result.final_update = update;
  return result;
}

// ---------------------------------------------------------------------------
// Projected gradient descent on the discrete p-energy

namespace {

struct PgdCore {
  std::function<double(const Vector&)> energy;
  std::function<void(const Vector&, Vector&)> gradient;
  std::function<void(Vector&)> project;  // clamps to obstacle, re-imposes Dirichlet

  // Monotone accelerated projected gradient (monotone FISTA with adaptive
  // Lipschitz backtracking and gradient restart). The recorded energy is
  // nonincreasing by construction; acceleration keeps stiff fine-grid
  // problems inside the iteration budget.
  PgdResult run(Vector u, const PgdOptions& options) const {
    PgdResult result;
    project(u);
    double e = energy(u);
    result.energy.push_back(e);

    Vector y = u, u_old = u;
    Vector gy(u.size()), gu(u.size());
    double t = 1.0;
    double lip = 1.0;

    long it = 0;
    for (; it < options.max_iters; ++it) {
      if (it % 10 == 0) {
        // variational-inequality residual at the monotone iterate: distance
        // to the projected fixed point of a unit gradient step
        gradient(u, gu);
        Vector probe = u - gu;
        project(probe);
        result.residual = (u - probe).cwiseAbs().maxCoeff();
        if (result.residual <= options.tol) break;
      }

      gradient(y, gy);
      const double ey = energy(y);
      // energies are O(1) sums over the mesh; differences below this floor
      // are rounding noise and the analytic gradient is the only safe signal
      const double noise = 1e-13 * std::max(1.0, std::abs(ey));
      Vector z;
      double ez = 0.0;
      bool stepped = false;
      for (int grow = 0; grow < 120; ++grow) {
        z = y - gy / lip;
        project(z);
        ez = energy(z);
        const Vector dz = z - y;
        const double model = gy.dot(dz) + 0.5 * lip * dz.squaredNorm();
        if (ez <= ey + model + noise || std::abs(model) < noise) {
          stepped = true;
          break;
        }
        lip *= 2.0;
      }
      if (!stepped) throw std::runtime_error("projected gradient: persistent line-search failure");

      // monotone pick (up to the noise floor), then the accelerated step
      const bool take_z = ez <= e + noise;
      const Vector u_new = take_z ? z : u;
      const double e_new = take_z ? std::min(ez, e) : e;
      const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      y = u_new + (t / t_new) * (z - u_new) + ((t - 1.0) / t_new) * (u_new - u_old);
      if (gy.dot(z - u) > 0.0) t = 1.0;  // restart on a badly aligned step
      else t = t_new;
      u_old = u;
      u = u_new;
      e = e_new;
      result.energy.push_back(e);
      lip *= 0.97;  // let the local Lipschitz estimate relax again
    }
    if (result.residual > options.tol)
      throw std::runtime_error("projected gradient did not converge within the iteration budget");
    result.iterations = it;
    result.u = std::move(u);
    return result;
  }
};

}  // namespace

// Cell-midpoint flux quadrature plus nodal (trapezoid) source quadrature:
// for p = 2 the stationarity conditions are exactly the classical 3-point
// difference equations, so the two oracles agree to solver tolerance.
double discrete_energy_1d(const ProblemSpec& spec, const Vector& u, int cells) {
  const double lo = spec.domain.lo(0), hi = spec.domain.hi(0);
  const double h = (hi - lo) / cells;
  double e = 0.0;
  for (int c = 0; c < cells; ++c) {
    const double xm = lo + (c + 0.5) * h;
    const double g = (u(c + 1) - u(c)) / h;
    const double psi = spec.drift ? spec.drift(point1(xm))(0) : 0.0;
    e += h * pow_norm(std::abs(g - psi), spec.p) / spec.p;
  }
  if (spec.source)
    for (int i = 0; i <= cells; ++i) {
      const double w = (i == 0 || i == cells) ? 0.5 * h : h;
      e -= w * spec.source(point1(lo + i * h)) * u(i);
    }
  return e;
}

PgdResult solve_pgd_1d(const ProblemSpec& spec, int cells, const PgdOptions& options) {
  spec.validate();
  if (spec.domain.dim() != 1) throw std::invalid_argument("this solver is 1D");
  if (cells < 2) throw std::invalid_argument("need at least two cells");

  const double lo = spec.domain.lo(0), hi = spec.domain.hi(0);
  const int n = cells;
  const double h = (hi - lo) / n;

  Vector x(n + 1), b(n + 1);
  for (int i = 0; i <= n; ++i) {
    x(i) = lo + i * h;
    b(i) = spec.obstacle(point1(x(i)));
  }
  Vector a_node(n + 1), psi_mid(n);
  for (int i = 0; i <= n; ++i)
    a_node(i) = spec.source ? spec.source(point1(lo + i * h)) : 0.0;
  for (int c = 0; c < n; ++c) {
    const double xm = lo + (c + 0.5) * h;
    psi_mid(c) = spec.drift ? spec.drift(point1(xm))(0) : 0.0;
  }
  const double u_left = spec.boundary_value ? spec.boundary_value(point1(lo)) : 0.0;
  const double u_right = spec.boundary_value ? spec.boundary_value(point1(hi)) : 0.0;
  const double p = spec.p;

  PgdCore core;
  core.energy = [=](const Vector& u) {
    double e = 0.0;
    for (int c = 0; c < n; ++c) {
      const double g = (u(c + 1) - u(c)) / h - psi_mid(c);
      e += h * pow_norm(std::abs(g), p) / p;
    }
    for (int i = 0; i <= n; ++i) e -= ((i == 0 || i == n) ? 0.5 * h : h) * a_node(i) * u(i);
    return e;
  };
  core.gradient = [=](const Vector& u, Vector& g) {
    g.setZero();
    for (int c = 0; c < n; ++c) {
      const double s = (u(c + 1) - u(c)) / h - psi_mid(c);
      const double phi = flux_1d(s, p);
      g(c) += -phi;
      g(c + 1) += phi;
    }
    for (int i = 1; i < n; ++i) g(i) -= h * a_node(i);
    g(0) = 0.0;
    g(n) = 0.0;
  };
  core.project = [=, &b](Vector& u) {
    for (int i = 1; i < n; ++i) u(i) = std::max(u(i), b(i));
    u(0) = u_left;
    u(n) = u_right;
  };

  Vector u0(n + 1);
  for (int i = 0; i <= n; ++i)
    u0(i) = std::max(b(i), u_left + (u_right - u_left) * static_cast<double>(i) / n);

  PgdResult result = core.run(std::move(u0), options);
  result.x = std::move(x);
  return result;
}

namespace {

// Q1 cells with 2x2 Gauss quadrature. Shape gradients at a quadrature point
// (xi, eta) for corners ordered 00, 10, 01, 11.
struct QuadPoint {
  double xi, eta;
  double shape[4];
  double dx[4], dy[4];  // scaled by 1/hx, 1/hy later
};

}  // namespace

double discrete_energy_2d(const ProblemSpec& spec, const Vector& u, int nx, int ny) {
  // Convenience wrapper for tests; mirrors the solver's internal energy.
  const double x0 = spec.domain.lo(0), y0 = spec.domain.lo(1);
  const double hx = (spec.domain.hi(0) - x0) / nx;
  const double hy = (spec.domain.hi(1) - y0) / ny;
  const double gp[2] = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};
  const double w = hx * hy / 4.0;
  const int sx = nx + 1;
  double e = 0.0;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const double c00 = u(j * sx + i), c10 = u(j * sx + i + 1);
      const double c01 = u((j + 1) * sx + i), c11 = u((j + 1) * sx + i + 1);
      for (double eta : gp)
        for (double xi : gp) {
          const double gx = ((1 - eta) * (c10 - c00) + eta * (c11 - c01)) / hx;
          const double gy = ((1 - xi) * (c01 - c00) + xi * (c11 - c10)) / hy;
          const double px = x0 + (i + xi) * hx, py = y0 + (j + eta) * hy;
          Vector psi = spec.drift ? spec.drift(point2(px, py)) : Vector(Vector::Zero(2));
          const double a = spec.source ? spec.source(point2(px, py)) : 0.0;
          const double uval = (1 - xi) * (1 - eta) * c00 + xi * (1 - eta) * c10 +
                              (1 - xi) * eta * c01 + xi * eta * c11;
          const double nrm = std::hypot(gx - psi(0), gy - psi(1));
          e += w * (pow_norm(nrm, spec.p) / spec.p - a * uval);
        }
    }
  return e;
}

PgdResult solve_pgd_2d(const ProblemSpec& spec, int nx, int ny, const PgdOptions& options) {
  spec.validate();
  if (spec.domain.dim() != 2) throw std::invalid_argument("this solver is 2D");
  if (nx < 2 || ny < 2) throw std::invalid_argument("need at least two cells per axis");

  const double x0 = spec.domain.lo(0), y0 = spec.domain.lo(1);
  const double hx = (spec.domain.hi(0) - x0) / nx;
  const double hy = (spec.domain.hi(1) - y0) / ny;
  const int sx = nx + 1, sy = ny + 1;
  const long nodes = static_cast<long>(sx) * sy;
  const double p = spec.p;

  Vector xs(sx), ys(sy);
  for (int i = 0; i < sx; ++i) xs(i) = x0 + i * hx;
  for (int j = 0; j < sy; ++j) ys(j) = y0 + j * hy;

  Vector b(nodes);
  for (int j = 0; j < sy; ++j)
    for (int i = 0; i < sx; ++i) b(j * sx + i) = spec.obstacle(point2(xs(i), ys(j)));

  // Dirichlet values on the rectangle boundary
  Vector hval = Vector::Zero(nodes);
  std::vector<bool> is_bnd(nodes, false);
  for (int j = 0; j < sy; ++j)
    for (int i = 0; i < sx; ++i)
      if (i == 0 || j == 0 || i == sx - 1 || j == sy - 1) {
        is_bnd[j * sx + i] = true;
        hval(j * sx + i) =
            spec.boundary_value ? spec.boundary_value(point2(xs(i), ys(j))) : 0.0;
      }

  // quadrature tables, with source and drift precomputed per Gauss point
  const double gpos[2] = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};
  QuadPoint qp[4];
  {
    int q = 0;
    for (double eta : gpos)
      for (double xi : gpos) {
        qp[q].xi = xi;
        qp[q].eta = eta;
        qp[q].shape[0] = (1 - xi) * (1 - eta);
        qp[q].shape[1] = xi * (1 - eta);
        qp[q].shape[2] = (1 - xi) * eta;
        qp[q].shape[3] = xi * eta;
        qp[q].dx[0] = -(1 - eta) / hx;
        qp[q].dx[1] = (1 - eta) / hx;
        qp[q].dx[2] = -eta / hx;
        qp[q].dx[3] = eta / hx;
        qp[q].dy[0] = -(1 - xi) / hy;
        qp[q].dy[1] = -xi / hy;
        qp[q].dy[2] = (1 - xi) / hy;
        qp[q].dy[3] = xi / hy;
        ++q;
      }
  }
  const long cells = static_cast<long>(nx) * ny;
  Matrix a_q(4, cells), psix_q(4, cells), psiy_q(4, cells);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const long c = static_cast<long>(j) * nx + i;
      for (int q = 0; q < 4; ++q) {
        const double px = x0 + (i + qp[q].xi) * hx;
        const double py = y0 + (j + qp[q].eta) * hy;
        a_q(q, c) = spec.source ? spec.source(point2(px, py)) : 0.0;
        if (spec.drift) {
          Vector psi = spec.drift(point2(px, py));
          psix_q(q, c) = psi(0);
          psiy_q(q, c) = psi(1);
        } else {
          psix_q(q, c) = 0.0;
          psiy_q(q, c) = 0.0;
        }
      }
    }

  const double w = hx * hy / 4.0;
  auto corner_ids = [&](int i, int j, long* id) {
    id[0] = static_cast<long>(j) * sx + i;
    id[1] = id[0] + 1;
    id[2] = id[0] + sx;
    id[3] = id[2] + 1;
  };

  PgdCore core;
  core.energy = [=](const Vector& u) {
    double e = 0.0;
    long id[4];
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const long c = static_cast<long>(j) * nx + i;
        corner_ids(i, j, id);
        const double cu[4] = {u(id[0]), u(id[1]), u(id[2]), u(id[3])};
        for (int q = 0; q < 4; ++q) {
          double gx = 0, gy = 0, uval = 0;
          for (int k = 0; k < 4; ++k) {
            gx += qp[q].dx[k] * cu[k];
            gy += qp[q].dy[k] * cu[k];
            uval += qp[q].shape[k] * cu[k];
          }
          gx -= psix_q(q, c);
          gy -= psiy_q(q, c);
          const double nrm = std::sqrt(gx * gx + gy * gy);
          e += w * (pow_norm(nrm, p) / p - a_q(q, c) * uval);
        }
      }
    return e;
  };
  core.gradient = [=](const Vector& u, Vector& g) {
    g.setZero();
    long id[4];
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const long c = static_cast<long>(j) * nx + i;
        corner_ids(i, j, id);
        const double cu[4] = {u(id[0]), u(id[1]), u(id[2]), u(id[3])};
        for (int q = 0; q < 4; ++q) {
          double gx = 0, gy = 0;
          for (int k = 0; k < 4; ++k) {
            gx += qp[q].dx[k] * cu[k];
            gy += qp[q].dy[k] * cu[k];
          }
          gx -= psix_q(q, c);
          gy -= psiy_q(q, c);
          const double nrm = std::sqrt(gx * gx + gy * gy);
          const double mag = pow_nrm_pm2(nrm, p);
          const double fx = mag * gx, fy = mag * gy;
          for (int k = 0; k < 4; ++k)
            g(id[k]) += w * (fx * qp[q].dx[k] + fy * qp[q].dy[k] - a_q(q, c) * qp[q].shape[k]);
        }
      }
    for (long i = 0; i < nodes; ++i)
      if (is_bnd[i]) g(i) = 0.0;
  };
  core.project = [=, &b, &is_bnd, &hval](Vector& u) {
    for (long i = 0; i < nodes; ++i) u(i) = is_bnd[i] ? hval(i) : std::max(u(i), b(i));
  };

  Vector u0(nodes);
  for (long i = 0; i < nodes; ++i) u0(i) = is_bnd[i] ? hval(i) : std::max(b(i), 0.0);

  PgdResult result = core.run(std::move(u0), options);
  result.x = std::move(xs);
  result.y = std::move(ys);
  return result;
}

}  // namespace iceritz
