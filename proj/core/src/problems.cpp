#include "iceritz/problems.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>

namespace iceritz {

namespace {

constexpr double kSeamTol = 1e-12;
constexpr double kSeamNudge = 1e-9;

std::atomic<long> g_seam_nudges{0};

void require_unit_interval(double x) {
  if (x < 0.0 || x > 1.0) throw std::domain_error("1D problem functions are defined on [0, 1]");
}

void require_radial_args(double r, double p) {
  if (r < 0.0) throw std::invalid_argument("radius must be nonnegative");
  if (!(p >= 2.0)) throw std::invalid_argument("exponent p must be >= 2");
}

}  // namespace

long seam_nudge_count() { return g_seam_nudges.load(); }

// ---------------------------------------------------------------------------
// 1D family (p = 2)

double obstacle_1d(double x) {
  require_unit_interval(x);
  if (x <= 0.25) return 10.0 * std::sin(2.0 * M_PI * x);
  if (x <= 0.75) return 5.0 * std::cos(M_PI * (4.0 * x - 1.0)) + 5.0;
  return 10.0 * std::sin(2.0 * M_PI * (1.0 - x));
}

double exact_1d(double x) {
  require_unit_interval(x);
  if (x <= 0.25) return 10.0 * std::sin(2.0 * M_PI * x);
  if (x <= 0.75) return 10.0;
  return 10.0 * std::sin(2.0 * M_PI * (1.0 - x));
}

double exact_1d_derivative(double x) {
  require_unit_interval(x);
  if (x < 0.25) return 20.0 * M_PI * std::cos(2.0 * M_PI * x);
  if (x <= 0.75) return 0.0;  // both one-sided slopes vanish at the seams
  return -20.0 * M_PI * std::cos(2.0 * M_PI * (1.0 - x));
}

double mms_source_1d(double x, bool* nudged) {
  require_unit_interval(x);
  if (nudged) *nudged = false;
  for (double seam : {0.25, 0.75}) {
    if (std::abs(x - seam) < kSeamTol) {
      x = seam + (seam < 0.5 ? kSeamNudge : -kSeamNudge);
      g_seam_nudges.fetch_add(1);
      if (nudged) *nudged = true;
    }
  }
  if (x < 0.25) return 40.0 * M_PI * M_PI * std::sin(2.0 * M_PI * x);
  if (x < 0.75) return 0.0;  // -u'' of the constant plateau
  return 40.0 * M_PI * M_PI * std::sin(2.0 * M_PI * (1.0 - x));
}

// ---------------------------------------------------------------------------
// 2D radial family

namespace {

struct RadialProfile {
  double q;      // 1/(p-1)
  double kappa;  // p/(p-1)
  double p;

  explicit RadialProfile(double p_) : q(1.0 / (p_ - 1.0)), kappa(p_ / (p_ - 1.0)), p(p_) {}

  // inner(r) = 1 - (F - G + 1 - E) with F = r^kappa, G = (1-r)^kappa,
  // E = kappa r; only meaningful for r <= 1.
  double inner(double r) const {
    return kappa * r + std::pow(1.0 - r, kappa) - std::pow(r, kappa);
  }
  double inner_d1(double r) const {
    if (q == 1.0) return 0.0;  // p = 2: the inner profile is constant
    return kappa * (1.0 - std::pow(1.0 - r, q) - std::pow(r, q));
  }
  double inner_d2(double r) const {
    return kappa * q * (std::pow(1.0 - r, q - 1.0) - std::pow(r, q - 1.0));
  }
};

}  // namespace

double obstacle_2d(double r, double p) {
  require_radial_args(r, p);
  if (r > kContactRadius) return 0.0;
  return RadialProfile(p).inner(r);
}

double exact_2d(double r, double p) {
  require_radial_args(r, p);
  const RadialProfile prof(p);
  if (r <= kContactRadius) return prof.inner(r);
  // C1 continuation past the contact radius: tangent line of the inner branch.
  return prof.inner(kContactRadius) + prof.inner_d1(kContactRadius) * (r - kContactRadius);
}

double exact_2d_derivative(double r, double p) {
  require_radial_args(r, p);
  const RadialProfile prof(p);
  return prof.inner_d1(std::min(r, kContactRadius));
}

double mms_source_2d(double r, double p, bool* nudged) {
  require_radial_args(r, p);
  if (nudged) *nudged = false;
  if (r < kSeamNudge || std::abs(r - kContactRadius) < kSeamTol) {
    r = (r < kSeamNudge) ? kSeamNudge : kContactRadius - kSeamNudge;
    g_seam_nudges.fetch_add(1);
    if (nudged) *nudged = true;
  }
  const RadialProfile prof(p);
  // a = -(1/r) d/dr ( r * phi(r) ), phi = |u'|^(p-2) u'
  if (r <= kContactRadius) {
    const double d1 = prof.inner_d1(r);
    const double d2 = prof.inner_d2(r);
    const double mag = std::pow(std::abs(d1), p - 2.0);
    const double phi = mag * d1;
    const double dphi = (p - 1.0) * mag * d2;
    return -(dphi + phi / r);
  }
  const double slope = prof.inner_d1(kContactRadius);
  const double phi = std::pow(std::abs(slope), p - 2.0) * slope;
  return -phi / r;
}

double radial_coordinate(const Vector& x) {
  if (x.size() != 2) throw std::invalid_argument("radial coordinate expects a 2D point");
  const double dx = x(0) - 0.5;
  const double dy = x(1) - 0.5;
  return std::sqrt(dx * dx + dy * dy);
}

// ---------------------------------------------------------------------------
// Assembled problems and registry

MmsProblem make_mms_1d(double alpha, double beta) {
  MmsProblem prob;
  prob.name = "mms1d-p2";
  prob.spec.domain = Domain::unit_interval();
  prob.spec.p = 2.0;
  prob.spec.obstacle = [](const Vector& x) { return obstacle_1d(x(0)); };
  prob.spec.source = [](const Vector& x) { return mms_source_1d(x(0)); };
  prob.spec.boundary_value = [](const Vector& x) { return exact_1d(x(0)); };
  prob.spec.alpha = alpha;
  prob.spec.beta = beta;
  prob.exact = [](const Vector& x) { return exact_1d(x(0)); };
  prob.exact_gradient = [](const Vector& x) {
    return Vector::Constant(1, exact_1d_derivative(x(0)));
  };
  return prob;
}

MmsProblem make_mms_2d(double p, double alpha, double beta) {
  if (!(p >= 2.0)) throw std::invalid_argument("exponent p must be >= 2");
  MmsProblem prob;
  prob.name = "mms2d-p" + std::to_string(p);
  prob.spec.domain = Domain::unit_square();
  prob.spec.p = p;
  prob.spec.obstacle = [p](const Vector& x) { return obstacle_2d(radial_coordinate(x), p); };
  prob.spec.source = [p](const Vector& x) { return mms_source_2d(radial_coordinate(x), p); };
  prob.spec.boundary_value = [p](const Vector& x) { return exact_2d(radial_coordinate(x), p); };
  prob.spec.alpha = alpha;
  prob.spec.beta = beta;
  prob.exact = [p](const Vector& x) { return exact_2d(radial_coordinate(x), p); };
  prob.exact_gradient = [p](const Vector& x) {
    const double r = radial_coordinate(x);
    if (r < 1e-14) return Vector(Vector::Zero(2));
    Vector g(2);
    const double dr = exact_2d_derivative(r, p);
    g << dr * (x(0) - 0.5) / r, dr * (x(1) - 0.5) / r;
    return g;
  };
  return prob;
}

ProblemName parse_problem_name(const std::string& name) {
  ProblemName parsed;
  if (name.rfind("grid:", 0) == 0) {
    parsed.kind = ProblemName::Kind::grid;
    parsed.grid_paths = name.substr(5);
    if (parsed.grid_paths.empty())
      throw std::invalid_argument("grid problem needs at least a bedrock path: grid:<bedrock>[,<thickness>[,<surface>]]");
    return parsed;
  }
  if (name == "mms1d-p2") {
    parsed.kind = ProblemName::Kind::mms1d;
    parsed.p = 2.0;
    return parsed;
  }
  if (name.rfind("mms2d-p", 0) == 0) {
    parsed.kind = ProblemName::Kind::mms2d;
    try {
      std::size_t used = 0;
      parsed.p = std::stod(name.substr(7), &used);
      if (used != name.size() - 7) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw std::invalid_argument("cannot parse exponent in problem name '" + name + "'");
    }
    if (!(parsed.p >= 2.0))
      throw std::invalid_argument("problem '" + name + "': exponent must be >= 2");
    return parsed;
  }
  throw std::invalid_argument("unknown problem '" + name +
                              "' (expected mms1d-p2, mms2d-p<value>, or grid:<paths>)");
}

MmsProblem problem_by_name(const std::string& name, double alpha, double beta) {
  const ProblemName parsed = parse_problem_name(name);
  switch (parsed.kind) {
    case ProblemName::Kind::mms1d:
      return make_mms_1d(alpha, beta);
    case ProblemName::Kind::mms2d:
      return make_mms_2d(parsed.p, alpha, beta);
    case ProblemName::Kind::grid:
      throw std::invalid_argument("grid problems are file-backed; assemble them via the geodata module");
  }
  throw std::logic_error("unreachable");
}

}  // namespace iceritz
