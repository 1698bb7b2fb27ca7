#include "doctest.h"

#include "iceritz/problems.hpp"

#include <cmath>

using namespace iceritz;

namespace {

// Fourth-order central differences, used as independent oracles below.
template <typename F>
double fd4_first(const F& f, double x, double h) {
  return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h);
}
template <typename F>
double fd4_second(const F& f, double x, double h) {
  return (-f(x + 2 * h) + 16 * f(x + h) - 30 * f(x) + 16 * f(x - h) - f(x - 2 * h)) /
         (12 * h * h);
}

Vector pt(double x) { return Vector::Constant(1, x); }
Vector pt2(double x, double y) {
  Vector v(2);
  v << x, y;
  return v;
}

}  // namespace

TEST_CASE("1D obstacle: branch values and domain guard") {
  CHECK(obstacle_1d(0.25) == doctest::Approx(10.0).epsilon(1e-14));  // seam continuity
  CHECK(obstacle_1d(0.75) == doctest::Approx(10.0).epsilon(1e-14));
  CHECK(obstacle_1d(0.5) == doctest::Approx(0.0).epsilon(1e-12));    // 5 cos(pi) + 5
  CHECK(obstacle_1d(0.0) == doctest::Approx(0.0));
  CHECK(obstacle_1d(1.0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(obstacle_1d(-0.01), std::domain_error);
  CHECK_THROWS_AS(obstacle_1d(1.01), std::domain_error);
}

TEST_CASE("1D exact solution: plateau and trigonometric branches") {
  CHECK(exact_1d(0.5) == 10.0);
  CHECK(exact_1d(0.125) == doctest::Approx(10.0 * std::sin(M_PI / 4)).epsilon(1e-14));
  CHECK(exact_1d(1.0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(exact_1d(0.0) == doctest::Approx(0.0));
}

TEST_CASE("1D family: C1 seams and dominance over the obstacle") {
  // one-sided derivatives from second-order stencils on each side
  for (double seam : {0.25, 0.75}) {
    const double d = 1e-5;
    auto f = [](double x) { return exact_1d(x); };
    const double left = (3 * f(seam) - 4 * f(seam - d) + f(seam - 2 * d)) / (2 * d);
    const double right = (-3 * f(seam) + 4 * f(seam + d) - f(seam + 2 * d)) / (2 * d);
    CHECK(std::abs(left - right) < 1e-8);
    CHECK(std::abs(left - exact_1d_derivative(seam)) < 1e-8);
  }
  for (int i = 0; i <= 10000; ++i) {
    const double x = i / 10000.0;
    CHECK(exact_1d(x) >= obstacle_1d(x) - 1e-12);
  }
}

TEST_CASE("1D manufactured source: closed form and FD cross-check") {
  CHECK(mms_source_1d(0.1) ==
        doctest::Approx(40.0 * M_PI * M_PI * std::sin(0.2 * M_PI)).epsilon(1e-14));
  CHECK(mms_source_1d(0.5) == 0.0);

  auto u = [](double x) { return exact_1d(x); };
  for (double x : {0.05, 0.12, 0.2, 0.4, 0.6, 0.8, 0.93}) {
    const double a_fd = -fd4_second(u, x, 1e-3);
    const double a = mms_source_1d(x);
    CHECK(std::abs(a - a_fd) <= 1e-6 * std::max(1.0, std::abs(a_fd)));
  }

  SUBCASE("seam evaluation is nudged and flagged") {
    const long before = seam_nudge_count();
    bool nudged = false;
    const double a = mms_source_1d(0.25, &nudged);
    CHECK(nudged);
    CHECK(std::isfinite(a));
    CHECK(seam_nudge_count() > before);
  }
}

TEST_CASE("2D obstacle: paper anchors") {
  CHECK(obstacle_2d(0.0, 3.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(obstacle_2d(0.0, 2.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(obstacle_2d(0.8, 3.0) == 0.0);  // beyond the contact radius
  CHECK(obstacle_2d(0.5, 2.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(obstacle_2d(-0.1, 3.0), std::invalid_argument);
  CHECK_THROWS_AS(obstacle_2d(0.5, 1.5), std::invalid_argument);
}

TEST_CASE("2D exact solution: seam, outer branch, and p = 2 degeneracy") {
  for (double p : {2.0, 3.0, 4.0, 2.5}) {
    CHECK(exact_2d(0.0, p) == doctest::Approx(1.0).epsilon(1e-14));

    // value continuity at the contact radius
    const double inner = exact_2d(kContactRadius - 1e-13, p);
    const double outer = exact_2d(kContactRadius + 1e-13, p);
    CHECK(std::abs(inner - outer) < 1e-12);

    // one-sided radial derivatives agree (C1 seam)
    const double d = 1e-5;
    auto f = [p](double r) { return exact_2d(r, p); };
    const double left =
        (3 * f(kContactRadius) - 4 * f(kContactRadius - d) + f(kContactRadius - 2 * d)) / (2 * d);
    const double right =
        (-3 * f(kContactRadius) + 4 * f(kContactRadius + d) - f(kContactRadius + 2 * d)) / (2 * d);
    CHECK(std::abs(left - right) < 1e-8);

    // the exact profile and the obstacle coincide on the contact disc
    for (double r = 0.0; r <= kContactRadius; r += 0.03)
      CHECK(exact_2d(r, p) == obstacle_2d(r, p));
    // and dominate it outside (obstacle drops to zero)
    for (double r = kContactRadius + 1e-6; r <= 1.0; r += 0.01)
      CHECK(exact_2d(r, p) >= obstacle_2d(r, p) - 1e-12);
  }

  SUBCASE("p = 2 collapses to the constant-1 profile") {
    for (double r = 0.0; r <= kContactRadius; r += 0.05) {
      CHECK(exact_2d(r, 2.0) == doctest::Approx(1.0).epsilon(1e-14));
      // quadratic family identity: E + G - F with F=r^2, G=(1-r)^2, E=2r
      const double plug = 2 * r + (1 - r) * (1 - r) - r * r;
      CHECK(obstacle_2d(r, 2.0) == doctest::Approx(plug).epsilon(1e-14));
    }
  }

  SUBCASE("outer branch equals an independently evaluated tangent line") {
    const double p = 3.0, r = 0.9;
    auto inner_only = [p](double rr) {
      const double kappa = p / (p - 1.0);
      return kappa * rr + std::pow(1.0 - rr, kappa) - std::pow(rr, kappa);
    };
    const double d = 1e-6;
    const double slope_fd =
        (3 * inner_only(kContactRadius) - 4 * inner_only(kContactRadius - d) +
         inner_only(kContactRadius - 2 * d)) /
        (2 * d);
    const double expected = inner_only(kContactRadius) + slope_fd * (r - kContactRadius);
    CHECK(exact_2d(r, p) == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("2D manufactured source: radial closed form vs FD flux divergence") {
  // independent route: gradient of the exact profile by 4th-order FD in x/y,
  // then the divergence of |grad u|^(p-2) grad u by 4th-order FD again
  const double p = 3.0;
  auto uxy = [p](double x, double y) {
    return exact_2d(std::hypot(x - 0.5, y - 0.5), p);
  };
  const double h1 = 1e-5;   // inner gradient stencil
  const double h2 = 1e-2;   // outer divergence stencil
  auto flux = [&](double x, double y, int comp) {
    const double gx = fd4_first([&](double t) { return uxy(t, y); }, x, h1);
    const double gy = fd4_first([&](double t) { return uxy(x, t); }, y, h1);
    const double nrm = std::hypot(gx, gy);
    const double mag = std::pow(nrm, p - 2.0);
    return comp == 0 ? mag * gx : mag * gy;
  };

  for (double r : {0.3, 0.45, 0.6}) {
    const double x = 0.5 + r, y = 0.5;  // probe along the horizontal ray
    const double div = fd4_first([&](double t) { return flux(t, y, 0); }, x, h2) +
                       fd4_first([&](double t) { return flux(x, t, 1); }, y, h2);
    const double a = mms_source_2d(r, p);
    CHECK(std::abs(a - (-div)) <= 1e-6 * std::max(1.0, std::abs(div)));
  }

  SUBCASE("origin limit is finite and matched by the formula") {
    const double a0 = mms_source_2d(0.0, 3.0);
    const double kappa = 3.0 / 2.0;
    CHECK(std::isfinite(a0));
    CHECK(a0 == doctest::Approx(2.0 * kappa * kappa).epsilon(1e-3));
    CHECK(mms_source_2d(0.0, 2.0) == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("assembled problems and the registry") {
  const MmsProblem p1 = make_mms_1d(4000.0, 4000.0);
  CHECK(p1.spec.domain.dim() == 1);
  CHECK(p1.spec.p == 2.0);
  CHECK(p1.exact(pt(0.5)) == 10.0);
  CHECK(p1.spec.boundary_value(pt(0.0)) == doctest::Approx(0.0));
  CHECK(p1.spec.boundary_value(pt(1.0)) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(p1.exact_gradient(pt(0.5))(0) == 0.0);

  const MmsProblem p2 = make_mms_2d(3.0, 100.0, 100.0);
  CHECK(p2.spec.domain.dim() == 2);
  CHECK(p2.exact(pt2(0.5, 0.5)) == doctest::Approx(1.0));
  // gradient points inward (profile decreases with radius for p > 2)
  const Vector g = p2.exact_gradient(pt2(0.8, 0.5));
  CHECK(g(0) < 0.0);
  CHECK(g(1) == doctest::Approx(0.0));

  CHECK(problem_by_name("mms1d-p2", 1, 1).name == "mms1d-p2");
  CHECK(problem_by_name("mms2d-p3", 1, 1).spec.p == 3.0);
  CHECK(problem_by_name("mms2d-p4", 1, 1).spec.p == 4.0);
  CHECK(problem_by_name("mms2d-p2.5", 1, 1).spec.p == 2.5);
  CHECK_THROWS_AS(problem_by_name("mms2d-p1.5", 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(problem_by_name("nope", 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(problem_by_name("grid:", 1, 1), std::invalid_argument);
  const ProblemName parsed = parse_problem_name("grid:bed.asc,thk.asc");
  CHECK(parsed.kind == ProblemName::Kind::grid);
  CHECK(parsed.grid_paths == "bed.asc,thk.asc");
}

TEST_CASE("radial exact gradient is consistent with finite differences") {
  const double p = 4.0;
  const MmsProblem prob = make_mms_2d(p, 1.0, 1.0);
  for (auto [x, y] : {std::pair{0.7, 0.4}, {0.3, 0.3}, {0.52, 0.61}}) {
    const Vector g = prob.exact_gradient(pt2(x, y));
    const double h = 1e-6;
    const double gx =
        (prob.exact(pt2(x + h, y)) - prob.exact(pt2(x - h, y))) / (2 * h);
    const double gy =
        (prob.exact(pt2(x, y + h)) - prob.exact(pt2(x, y - h))) / (2 * h);
    CHECK(g(0) == doctest::Approx(gx).epsilon(1e-7));
    CHECK(g(1) == doctest::Approx(gy).epsilon(1e-7));
  }
}
