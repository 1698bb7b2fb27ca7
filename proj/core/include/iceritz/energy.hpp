#pragma once

#include "iceritz/nnet.hpp"
#include "iceritz/rng.hpp"

#include <cstdint>
#include <functional>

namespace iceritz {

/// Axis-aligned box domain in 1 or 2 dimensions.
struct Domain {
  Vector lo, hi;

  int dim() const { return static_cast<int>(lo.size()); }
  double volume() const;
  double perimeter() const;  // 2D only
  bool contains(const Vector& x) const;

  static Domain interval(double a, double b);
  static Domain box(double x0, double x1, double y0, double y1);
  static Domain unit_interval() { return interval(0.0, 1.0); }
  static Domain unit_square() { return box(0.0, 1.0, 0.0, 1.0); }

  void validate() const;
};

using ScalarField = std::function<double(const Vector&)>;
using VectorField = std::function<Vector(const Vector&)>;

/// Data of one penalized obstacle problem: minimize over v
///   (1/p) |grad v - drift|^p - source * v  (interior, sampled mean)
///   + alpha * [obstacle - v]_+^2           (constraint penalty)
///   + beta  * (v - boundary_value)^2       (boundary penalty)
struct ProblemSpec {
  Domain domain;
  double p = 2.0;
  ScalarField obstacle;        // b
  ScalarField source;          // a (may be null: zero)
  ScalarField boundary_value;  // h (may be null: zero)
  VectorField drift;           // may be null: zero
  double alpha = 1.0;
  double beta = 0.0;
  /// Optional acceptance predicate for interior sampling; points where it
  /// returns false (e.g. masked raster cells) are rejected and redrawn.
  std::function<bool(const Vector&)> interior_mask;

  void validate() const;  // p >= 2, alpha > 0, domain nondegenerate
};

/// Interior and boundary collocation points with the stream seed that
/// produced them. Columns are points.
struct SampleBatch {
  Matrix interior;  // d x N, strictly inside the domain
  Matrix boundary;  // d x M, on the domain boundary
  std::uint64_t seed = 0;
};

/// Fresh iid-uniform batch from the (seed, counter)-derived stream. In 1D the
/// boundary is always exactly the two endpoints; in 2D boundary points are
/// uniform over the perimeter by arc length. A non-null accept predicate
/// restricts interior points by rejection.
SampleBatch sample_batch(const Domain& domain, int n_interior, int n_boundary,
                         std::uint64_t seed, std::uint64_t counter = 0,
                         const std::function<bool(const Vector&)>& accept = nullptr);

/// Deterministic batch: interior points on a midpoint lattice (exactly
/// n_interior points in 1D, the closest lattice >= n_interior in 2D) and
/// equally spaced boundary points.
SampleBatch grid_batch(const Domain& domain, int n_interior, int n_boundary);

Matrix sample_interior(const Domain& domain, int n, Rng& rng);
Matrix sample_boundary(const Domain& domain, int m, Rng& rng);

struct LossBreakdown {
  double loss1 = 0.0;  // PDE residual term
  double loss2 = 0.0;  // obstacle penalty term (unweighted)
  double loss3 = 0.0;  // boundary mismatch term (unweighted)
  double total = 0.0;  // loss1 + alpha*loss2 + beta*loss3
};

/// Loss terms evaluated from precomputed field samples. This is the single
/// arithmetic core shared by the network path and by gridded-data benchmark
/// fields, so the two are comparable to machine precision.
LossBreakdown losses_from_fields(const ProblemSpec& spec, const SampleBatch& batch,
                                 const RowVector& interior_values,
                                 const Matrix& interior_gradients,
                                 const RowVector& boundary_values);

double residual_loss(const Network& net, const ProblemSpec& spec, const SampleBatch& batch);
double obstacle_loss(const Network& net, const ProblemSpec& spec, const SampleBatch& batch);
double boundary_loss(const Network& net, const ProblemSpec& spec, const SampleBatch& batch);
LossBreakdown total_loss(const Network& net, const ProblemSpec& spec, const SampleBatch& batch);

/// Loss plus the exact parameter gradient of the weighted total, including
/// the paths through the input gradient of the network.
LossBreakdown loss_and_gradient(const Network& net, const ProblemSpec& spec,
                                const SampleBatch& batch, ParamGradient& grad);

}  // namespace iceritz
