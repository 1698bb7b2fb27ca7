#include "doctest.h"

#include "iceritz/metrics.hpp"
#include "iceritz/optim.hpp"
#include "iceritz/problems.hpp"

#include <cmath>

using namespace iceritz;

namespace {

Network tiny_net(std::uint64_t seed = 1) { return Network::init(seed, {1, 16, 16, 1}); }

bool networks_identical(const Network& a, const Network& b) {
  for (std::size_t l = 0; l < a.layers().size(); ++l) {
    if (a.layers()[l].weight != b.layers()[l].weight) return false;
    if (a.layers()[l].bias != b.layers()[l].bias) return false;
    if (a.layers()[l].normed && (a.layers()[l].gain != b.layers()[l].gain ||
                                 a.layers()[l].shift != b.layers()[l].shift))
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("learning rate schedule: published plateaus") {
  const LrSchedule sched{5e-4, 500, 750};
  CHECK(lr_at(0, sched) == 5e-4);
  CHECK(lr_at(499, sched) == 5e-4);
  CHECK(lr_at(500, sched) == 2.5e-4);
  CHECK(lr_at(600, sched) == 2.5e-4);
  CHECK(lr_at(749, sched) == 2.5e-4);
  CHECK(lr_at(750, sched) == 1.25e-4);
  CHECK(lr_at(100000, sched) == 1.25e-4);
  CHECK_THROWS_AS(lr_at(-1, sched), std::invalid_argument);

  // piecewise constant and nonincreasing, only the three plateau values
  for (long it = 1; it < 2000; ++it) {
    CHECK(lr_at(it, sched) <= lr_at(it - 1, sched));
    const double lr = lr_at(it, sched);
    CHECK((lr == 5e-4 || lr == 2.5e-4 || lr == 1.25e-4));
  }
}

TEST_CASE("adam: zero gradient is the identity on parameters") {
  Network net = tiny_net();
  const Network before = net;
  AdamState state = AdamState::for_network(net);
  const ParamGradient zero = net.zero_gradient();
  adam_step(net, zero, state, 1e-3);
  CHECK(networks_identical(net, before));
  CHECK(state.step == 1);
}

TEST_CASE("adam: constant gradient saturates to unit steps of size lr") {
  // single scalar weight, no norm layers
  Layer layer;
  layer.weight = Matrix::Constant(1, 1, 0.0);
  layer.bias = Vector::Zero(1);
  Network net({layer}, 1);
  AdamState state = AdamState::for_network(net);
  ParamGradient grad = net.zero_gradient();
  grad.blocks[0].weight(0, 0) = 0.37;  // constant gradient
  const double lr = 1e-3;
  double prev = net.layers()[0].weight(0, 0);
  double step_size = 0.0;
  for (int it = 0; it < 5000; ++it) {
    adam_step(net, grad, state, lr);
    step_size = std::abs(net.layers()[0].weight(0, 0) - prev);
    prev = net.layers()[0].weight(0, 0);
  }
  CHECK(step_size == doctest::Approx(lr).epsilon(0.02));
}

TEST_CASE("adam rejects non-finite gradients before touching parameters") {
  Network net = tiny_net();
  const Network before = net;
  AdamState state = AdamState::for_network(net);
  ParamGradient grad = net.zero_gradient();
  grad.blocks[0].weight(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(adam_step(net, grad, state, 1e-3), std::runtime_error);
  CHECK(networks_identical(net, before));
}

TEST_CASE("train: zero iterations leaves everything untouched") {
  const MmsProblem prob = make_mms_1d(100.0, 100.0);
  Network net = tiny_net();
  const Network before = net;
  TrainConfig cfg;
  cfg.iterations = 0;
  cfg.n_interior = 16;
  const TrainReport rep = train(net, prob.spec, cfg, prob.exact);
  CHECK(rep.iterations() == 0);
  CHECK(rep.losses.empty());
  CHECK_FALSE(rep.aborted);
  CHECK(networks_identical(net, before));
}

TEST_CASE("train: deterministic reruns are bit-identical") {
  const MmsProblem prob = make_mms_1d(100.0, 100.0);
  TrainConfig cfg;
  cfg.iterations = 60;
  cfg.n_interior = 64;
  cfg.seed = 5;
  cfg.error_every = 10;

  Network net1 = tiny_net(9);
  Network net2 = tiny_net(9);
  const TrainReport rep1 = train(net1, prob.spec, cfg, prob.exact);
  const TrainReport rep2 = train(net2, prob.spec, cfg, prob.exact);

  CHECK(networks_identical(net1, net2));
  REQUIRE(rep1.iterations() == rep2.iterations());
  for (long it = 0; it < rep1.iterations(); ++it) {
    CHECK(rep1.losses[it].total == rep2.losses[it].total);
    CHECK(rep1.losses[it].loss1 == rep2.losses[it].loss1);
  }
  CHECK(rep1.final_relative_l1 == rep2.final_relative_l1);

  // a different seed changes the trajectory
  Network net3 = tiny_net(9);
  TrainConfig other = cfg;
  other.seed = 6;
  const TrainReport rep3 = train(net3, prob.spec, other, prob.exact);
  CHECK(rep3.losses.back().total != rep1.losses.back().total);
}

TEST_CASE("train: report bookkeeping") {
  const MmsProblem prob = make_mms_1d(100.0, 100.0);
  Network net = tiny_net();
  TrainConfig cfg;
  cfg.iterations = 25;
  cfg.n_interior = 32;
  cfg.error_every = 5;
  const TrainReport rep = train(net, prob.spec, cfg, prob.exact);
  REQUIRE(rep.iterations() == 25);
  CHECK(rep.lr.size() == 25);
  CHECK(rep.l1_error.size() == 25);
  CHECK(std::isfinite(rep.l1_error[0]));
  CHECK(std::isfinite(rep.l1_error[24]));  // final iteration always evaluated
  CHECK_FALSE(std::isfinite(rep.l1_error[3]));
  CHECK(std::isfinite(rep.final_relative_l1));
  CHECK(rep.wall_seconds > 0.0);
}

TEST_CASE("train: aborts cleanly on a non-finite loss") {
  MmsProblem prob = make_mms_1d(100.0, 100.0);
  prob.spec.source = [](const Vector& x) {
    return x(0) > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  };
  Network net = tiny_net();
  TrainConfig cfg;
  cfg.iterations = 50;
  cfg.n_interior = 16;
  const TrainReport rep = train(net, prob.spec, cfg);
  CHECK(rep.aborted);
  CHECK_FALSE(rep.abort_reason.empty());
  CHECK(rep.iterations() < 50);
}

TEST_CASE("pretrain: zero target on a zero-initialized output is an exact fit") {
  Network net = tiny_net();
  for (Layer& l : net.layers()) {
    l.weight.setZero();
    l.bias.setZero();
  }
  TrainConfig cfg;
  cfg.iterations = 10;
  cfg.n_interior = 32;
  const PretrainReport rep =
      pretrain(net, Domain::unit_interval(), [](const Vector&) { return 0.0; }, cfg);
  REQUIRE(rep.mse.size() == 10);
  for (double v : rep.mse) CHECK(v == 0.0);
}

TEST_CASE("pretrain: fits the 1D obstacle to sup error 0.1 within 2000 iterations") {
  Network net = Network::init(3, {1, 128, 128, 128, 128, 128, 1});
  TrainConfig cfg;
  cfg.iterations = 2000;
  cfg.n_interior = 1024;
  cfg.seed = 3;
  const PretrainReport rep = pretrain(
      net, Domain::unit_interval(), [](const Vector& x) { return obstacle_1d(x(0)); }, cfg);
  REQUIRE_FALSE(rep.aborted);
  double sup = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    const double x = i / 1000.0;
    sup = std::max(sup, std::abs(net.eval(Vector::Constant(1, x)).value - obstacle_1d(x)));
  }
  CHECK(sup <= 0.1);  // the obstacle has amplitude 10
  CHECK(rep.mse.back() < rep.mse.front());
}

TEST_CASE("trailing-mean of the total loss decreases over a short run") {
  const MmsProblem prob = make_mms_1d(100.0, 100.0);
  Network net = Network::init(2, {1, 32, 32, 1});
  TrainConfig cfg;
  cfg.iterations = 600;
  cfg.n_interior = 256;
  cfg.error_every = 0;
  const TrainReport rep = train(net, prob.spec, cfg, nullptr);
  REQUIRE_FALSE(rep.aborted);
  auto mean_around = [&](long center, long radius) {
    double s = 0.0;
    long count = 0;
    for (long it = std::max(0L, center - radius); it < std::min(rep.iterations(), center + radius);
         ++it, ++count)
      s += rep.losses[it].total;
    return s / count;
  };
  CHECK(mean_around(550, 50) < mean_around(100, 50));
}
