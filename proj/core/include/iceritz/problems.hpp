#pragma once

#include "iceritz/energy.hpp"

#include <optional>
#include <string>

namespace iceritz {

/// A problem with a known exact solution, for convergence studies and error
/// tracking during training.
struct MmsProblem {
  std::string name;
  ProblemSpec spec;
  ScalarField exact;
  VectorField exact_gradient;
};

// --- 1D manufactured problem (p = 2) ---------------------------------------
// Obstacle: three trigonometric branches on [0, 1], continuous and C1.
// Exact solution: equals the obstacle on [0, 0.25] and [0.75, 1], constant 10
// on the middle plateau.

double obstacle_1d(double x);
double exact_1d(double x);
double exact_1d_derivative(double x);
/// Source that makes exact_1d solve -u'' = a off the plateau seams. Exactly
/// on a seam the evaluation point is nudged toward the domain center;
/// *nudged reports that.
double mms_source_1d(double x, bool* nudged = nullptr);

// --- 2D radial manufactured family (p >= 2) ---------------------------------
// Radial profile pieces: F(r) = r^(p/(p-1)), G(r) = (1-r)^(p/(p-1)),
// E(r) = (p/(p-1)) r, inner profile 1 - (F - G + 1 - E), contact radius 0.75.
// The profile beyond the contact radius is the C1 tangent-line continuation
// of the inner branch (value and slope matched at r*), which pins down the
// otherwise free outer values.

inline constexpr double kContactRadius = 0.75;

double obstacle_2d(double r, double p);
double exact_2d(double r, double p);
double exact_2d_derivative(double r, double p);  // d/dr
/// Radial divergence source -(1/r) d/dr ( r |u'|^(p-2) u' ) of the exact
/// profile; finite as r -> 0.
double mms_source_2d(double r, double p, bool* nudged = nullptr);

/// Radial coordinate used by the 2D family: distance from the center of the
/// unit square.
double radial_coordinate(const Vector& x);

// --- assembled problems -----------------------------------------------------

MmsProblem make_mms_1d(double alpha, double beta);
MmsProblem make_mms_2d(double p, double alpha, double beta);

/// Parsed problem name, as accepted on the command line.
struct ProblemName {
  enum class Kind { mms1d, mms2d, grid } kind;
  double p = 2.0;           // mms2d
  std::string grid_paths;   // everything after "grid:"
};
ProblemName parse_problem_name(const std::string& name);

/// Registry lookup for the manufactured problems ("mms1d-p2", "mms2d-p3",
/// "mms2d-p4", and generally "mms2d-p<value>"). Grid-backed problems carry
/// file paths and are assembled by the caller.
MmsProblem problem_by_name(const std::string& name, double alpha, double beta);

/// Count of seam-point nudges performed by the source evaluations in this
/// process; exposed for diagnostics.
long seam_nudge_count();

}  // namespace iceritz
