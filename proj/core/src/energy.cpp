#include "iceritz/energy.hpp"

#include <cmath>
#include <stdexcept>

namespace iceritz {

// ---------------------------------------------------------------------------
// Domain

double Domain::volume() const {
  double v = 1.0;
  for (int k = 0; k < dim(); ++k) v *= hi(k) - lo(k);
  return v;
}

double Domain::perimeter() const {
  if (dim() != 2) throw std::invalid_argument("perimeter needs a 2D domain");
  return 2.0 * ((hi(0) - lo(0)) + (hi(1) - lo(1)));
}

bool Domain::contains(const Vector& x) const {
  if (x.size() != dim()) return false;
  for (int k = 0; k < dim(); ++k)
    if (x(k) < lo(k) || x(k) > hi(k)) return false;
  return true;
}

Domain Domain::interval(double a, double b) {
  Domain d;
  d.lo = Vector::Constant(1, a);
  d.hi = Vector::Constant(1, b);
  return d;
}

Domain Domain::box(double x0, double x1, double y0, double y1) {
  Domain d;
  d.lo.resize(2);
  d.hi.resize(2);
  d.lo << x0, y0;
  d.hi << x1, y1;
  return d;
}

void Domain::validate() const {
  if (dim() < 1 || dim() > 2) throw std::invalid_argument("domain must be 1D or 2D");
  for (int k = 0; k < dim(); ++k)
    if (!(hi(k) > lo(k))) throw std::invalid_argument("degenerate domain");
}

void ProblemSpec::validate() const {
  domain.validate();
  if (!(p >= 2.0)) throw std::invalid_argument("exponent p must be >= 2");
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  if (beta < 0.0) throw std::invalid_argument("beta must be nonnegative");
  if (!obstacle) throw std::invalid_argument("obstacle function missing");
}

// ---------------------------------------------------------------------------
// Sampling

Matrix sample_interior(const Domain& domain, int n, Rng& rng) {
  const int d = domain.dim();
  Matrix pts(d, n);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) {
      double x;
      do {
        x = domain.lo(k) + rng.uniform() * (domain.hi(k) - domain.lo(k));
      } while (x <= domain.lo(k) || x >= domain.hi(k));
      pts(k, i) = x;
    }
  }
  return pts;
}

Matrix sample_boundary(const Domain& domain, int m, Rng& rng) {
  const int d = domain.dim();
  if (d == 1) {
    // The boundary is two points; use both, always.
    Matrix pts(1, 2);
    pts(0, 0) = domain.lo(0);
    pts(0, 1) = domain.hi(0);
    return pts;
  }
  const double w = domain.hi(0) - domain.lo(0);
  const double h = domain.hi(1) - domain.lo(1);
  const double per = 2.0 * (w + h);
  Matrix pts(2, m);
  for (int i = 0; i < m; ++i) {
    double t = rng.uniform() * per;
    double x, y;
    if (t < w) {  // bottom
      x = domain.lo(0) + t;
      y = domain.lo(1);
    } else if (t < w + h) {  // right
      x = domain.hi(0);
      y = domain.lo(1) + (t - w);
    } else if (t < 2.0 * w + h) {  // top
      x = domain.hi(0) - (t - w - h);
      y = domain.hi(1);
    } else {  // left
      x = domain.lo(0);
      y = domain.hi(1) - (t - 2.0 * w - h);
    }
    pts(0, i) = x;
    pts(1, i) = y;
  }
  return pts;
}

SampleBatch sample_batch(const Domain& domain, int n_interior, int n_boundary,
                         std::uint64_t seed, std::uint64_t counter,
                         const std::function<bool(const Vector&)>& accept) {
  domain.validate();
  if (n_interior < 1) throw std::invalid_argument("need at least one interior point");
  SampleBatch batch;
  batch.seed = Rng::derive(seed, counter);
  Rng rng(batch.seed);
  if (!accept) {
    batch.interior = sample_interior(domain, n_interior, rng);
  } else {
    batch.interior.resize(domain.dim(), n_interior);
    long rejected = 0;
    const long budget = 1000L * n_interior;
    for (int i = 0; i < n_interior; ++i) {
      for (;;) {
        const Matrix pt = sample_interior(domain, 1, rng);
        if (accept(pt.col(0))) {
          batch.interior.col(i) = pt.col(0);
          break;
        }
        if (++rejected > budget)
          throw std::runtime_error("interior sampling: acceptance predicate rejects nearly everything");
      }
    }
  }
  batch.boundary = sample_boundary(domain, n_boundary, rng);
  return batch;
}

SampleBatch grid_batch(const Domain& domain, int n_interior, int n_boundary) {
  domain.validate();
  if (n_interior < 1) throw std::invalid_argument("need at least one interior point");
  SampleBatch batch;
  batch.seed = 0;
  const int d = domain.dim();
  if (d == 1) {
    batch.interior.resize(1, n_interior);
    const double len = domain.hi(0) - domain.lo(0);
    for (int i = 0; i < n_interior; ++i)
      batch.interior(0, i) = domain.lo(0) + (i + 0.5) * len / n_interior;
    batch.boundary.resize(1, 2);
    batch.boundary(0, 0) = domain.lo(0);
    batch.boundary(0, 1) = domain.hi(0);
    return batch;
  }
  const double w = domain.hi(0) - domain.lo(0);
  const double h = domain.hi(1) - domain.lo(1);
  int nx = std::max(1, static_cast<int>(std::lround(std::sqrt(n_interior * w / h))));
  int ny = (n_interior + nx - 1) / nx;
  while (nx * ny < n_interior) ++ny;
  batch.interior.resize(2, nx * ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      batch.interior(0, j * nx + i) = domain.lo(0) + (i + 0.5) * w / nx;
      batch.interior(1, j * nx + i) = domain.lo(1) + (j + 0.5) * h / ny;
    }
  const double per = domain.perimeter();
  const int m = std::max(4, n_boundary);
  batch.boundary.resize(2, m);
  for (int i = 0; i < m; ++i) {
    double t = (i + 0.5) * per / m;
    double x, y;
    if (t < w) {
      x = domain.lo(0) + t;
      y = domain.lo(1);
    } else if (t < w + h) {
      x = domain.hi(0);
      y = domain.lo(1) + (t - w);
    } else if (t < 2.0 * w + h) {
      x = domain.hi(0) - (t - w - h);
      y = domain.hi(1);
    } else {
      x = domain.lo(0);
      y = domain.hi(1) - (t - 2.0 * w - h);
    }
    batch.boundary(0, i) = x;
    batch.boundary(1, i) = y;
  }
  return batch;
}

// ---------------------------------------------------------------------------
// Losses

namespace {

void check_batch(const ProblemSpec& spec, const SampleBatch& batch) {
  spec.validate();
  if (batch.interior.cols() < 1) throw std::invalid_argument("empty interior batch");
  if (batch.interior.rows() != spec.domain.dim())
    throw std::invalid_argument("batch dimension mismatch");
  if (spec.beta > 0.0 && batch.boundary.cols() < 1)
    throw std::invalid_argument("boundary batch required when beta > 0");
}

}  // namespace

LossBreakdown losses_from_fields(const ProblemSpec& spec, const SampleBatch& batch,
                                 const RowVector& u_int, const Matrix& g_int,
                                 const RowVector& u_bnd) {
  check_batch(spec, batch);
  const int n = static_cast<int>(batch.interior.cols());
  const int m = static_cast<int>(batch.boundary.cols());
  if (u_int.size() != n || g_int.cols() != n)
    throw std::invalid_argument("interior field sample size mismatch");

  LossBreakdown lb;
  double sum1 = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vector x = batch.interior.col(i);
    Vector mismatch = g_int.col(i);
    if (spec.drift) mismatch -= spec.drift(x);
    const double a = spec.source ? spec.source(x) : 0.0;
    sum1 += std::pow(mismatch.norm(), spec.p) / spec.p - a * u_int(i);
    const double gap = (spec.obstacle ? spec.obstacle(x) : 0.0) - u_int(i);
    if (gap > 0.0) sum2 += gap * gap;
  }
  lb.loss1 = sum1 / n;
  lb.loss2 = sum2 / n;

  if (m > 0) {
    if (u_bnd.size() != m) throw std::invalid_argument("boundary field sample size mismatch");
    double sum3 = 0.0;
    for (int j = 0; j < m; ++j) {
      const Vector y = batch.boundary.col(j);
      const double h = spec.boundary_value ? spec.boundary_value(y) : 0.0;
      const double diff = u_bnd(j) - h;
      sum3 += diff * diff;
    }
    lb.loss3 = sum3 / m;
  }
  lb.total = lb.loss1 + spec.alpha * lb.loss2 + spec.beta * lb.loss3;
  return lb;
}

namespace {

LossBreakdown eval_losses(const Network& net, const ProblemSpec& spec, const SampleBatch& batch) {
  check_batch(spec, batch);
  RowVector u_int;
  Matrix g_int;
  net.evaluate_with_gradient(batch.interior, u_int, g_int);
  RowVector u_bnd;
  if (batch.boundary.cols() > 0) u_bnd = net.evaluate(batch.boundary);
  return losses_from_fields(spec, batch, u_int, g_int, u_bnd);
}

}  // namespace

double residual_loss(const Network& net, const ProblemSpec& spec, const SampleBatch& batch) {
  return eval_losses(net, spec, batch).loss1;
}
double obstacle_loss(const Network& net, const ProblemSpec& spec, const SampleBatch& batch) {
  return eval_losses(net, spec, batch).loss2;
}
double boundary_loss(const Network& net, const ProblemSpec& spec, const SampleBatch& batch) {
  return eval_losses(net, spec, batch).loss3;
}
LossBreakdown total_loss(const Network& net, const ProblemSpec& spec, const SampleBatch& batch) {
  return eval_losses(net, spec, batch);
}

LossBreakdown loss_and_gradient(const Network& net, const ProblemSpec& spec,
                                const SampleBatch& batch, ParamGradient& grad) {
  check_batch(spec, batch);
  const int n = static_cast<int>(batch.interior.cols());
  const int m = static_cast<int>(batch.boundary.cols());

  BatchForward fwd = net.forward(batch.interior);
  const RowVector& u_int = fwd.values();
  const Matrix& g_int = fwd.input_gradients();

  BatchForward fwd_bnd;
  RowVector u_bnd;
  if (m > 0) {
    fwd_bnd = net.forward(batch.boundary, /*with_input_tangents=*/false);
    u_bnd = fwd_bnd.values();
  }

  LossBreakdown lb = losses_from_fields(spec, batch, u_int, g_int, u_bnd);

  // Seeds of the weighted total with respect to (u_i, grad u_i):
  //   d/du_i  : (-a(x_i) - 2 alpha [b - u]_+) / N
  //   d/dg_i  : |g - drift|^(p-2) (g - drift) / N
  //   d/du_j  : 2 beta (u_j - h(y_j)) / M      (boundary)
  RowVector vseed(n);
  Matrix gseed(g_int.rows(), n);
  for (int i = 0; i < n; ++i) {
    const Vector x = batch.interior.col(i);
    const double a = spec.source ? spec.source(x) : 0.0;
    const double gap = spec.obstacle(x) - u_int(i);
    vseed(i) = (-a - 2.0 * spec.alpha * (gap > 0.0 ? gap : 0.0)) / n;
    Vector mismatch = g_int.col(i);
    if (spec.drift) mismatch -= spec.drift(x);
    const double nrm = mismatch.norm();
    const double factor = nrm > 0.0 ? std::pow(nrm, spec.p - 2.0) / n : 0.0;
    gseed.col(i) = factor * mismatch;
  }
  fwd.backward(vseed, gseed, grad);

  if (m > 0 && spec.beta > 0.0) {
    RowVector bseed(m);
    for (int j = 0; j < m; ++j) {
      const Vector y = batch.boundary.col(j);
      const double h = spec.boundary_value ? spec.boundary_value(y) : 0.0;
      bseed(j) = 2.0 * spec.beta * (u_bnd(j) - h) / m;
    }
    fwd_bnd.backward(bseed, Matrix(), grad);
  }
  return lb;
}

}  // namespace iceritz
