#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "reinflow/errors.hpp"
#include "reinflow/flowmatch/dataset.hpp"
#include "reinflow/flowmatch/losses.hpp"
#include "reinflow/flowmatch/pretrain.hpp"
#include "reinflow/flowmatch/sampling.hpp"
#include "reinflow/flowmatch/schemes.hpp"
#include "reinflow/flowmatch/velocity_field.hpp"
#include "reinflow/numerics/finite_diff.hpp"
#include "support.hpp"

using namespace reinflow;
using namespace reinflow::flowmatch;
using numerics::Activation;
using numerics::SeededRng;

namespace {

constexpr std::size_t kEmbed = 4;

// Identity-activation single layer whose output is `bias` everywhere.
VelocityField constant_field(const Vector& c, std::size_t cond_dim = 0, bool shortcut = false) {
  const auto d = static_cast<std::size_t>(c.size());
  auto net = MlpParams::zeros({d + cond_dim + kEmbed * (shortcut ? 2 : 1), d}, Activation::Identity);
  net.biases[0] = c.transpose();
  return VelocityField(std::move(net), d, cond_dim, kEmbed, shortcut);
}

// v(t, x) = A x.
VelocityField linear_field(const Matrix& a) {
  const auto d = static_cast<std::size_t>(a.rows());
  auto net = MlpParams::zeros({d + kEmbed, d}, Activation::Identity);
  net.weights[0].topRows(a.rows()) = a.transpose();
  return VelocityField(std::move(net), d, 0, kEmbed, false);
}

VelocityField random_field(std::size_t d, std::size_t cond, bool shortcut, SeededRng& rng) {
  VelocityFieldConfig c;
  c.chunk_dim = d;
  c.cond_dim = cond;
  c.time_embed_dim = kEmbed;
  c.shortcut = shortcut;
  c.hidden = {6};
  return VelocityField::create(c, rng);
}

FlowBatch random_batch(std::size_t n, std::size_t d, std::size_t cond, SeededRng& rng) {
  FlowBatch b;
  b.x0 = test::random_matrix(n, d, rng);
  b.x1 = test::random_matrix(n, d, rng);
  b.cond = test::random_matrix(n, cond, rng);
  b.t.resize(n);
  for (std::size_t i = 0; i < n; ++i) b.t[i] = rng.uniform();
  return b;
}

}  // namespace

TEST_CASE("uniform discretization") {
  const auto s = DiscretizationScheme::uniform(4);
  CHECK(s.steps() == 4);
  CHECK(s.t(0) == 0.0);
  CHECK(s.t(4) == 1.0);
  CHECK(s.dt(1) == 0.25);
  CHECK_THROWS_AS(DiscretizationScheme::uniform(0), ConfigError);
  CHECK_THROWS_AS(DiscretizationScheme::from_knots({0.0, 0.6, 0.5, 1.0}), ConfigError);
}

TEST_CASE("time sampler moments") {
  SeededRng rng(4);
  const int n = 100000;
  std::vector<double> u, b, l;
  for (int i = 0; i < n; ++i) {
    u.push_back(sample_time({TimeSamplerKind::Uniform}, rng));
    b.push_back(sample_time({TimeSamplerKind::Beta, 1.5, 1.0}, rng));
    l.push_back(sample_time({TimeSamplerKind::LogitNormal, 1.5, 1.0, 0.0, 1.0}, rng));
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  CHECK(mean(u) == doctest::Approx(0.5).epsilon(0.02));
  CHECK(std::abs(mean(b) - 0.6) < 0.01);
  std::nth_element(l.begin(), l.begin() + n / 2, l.end());
  CHECK(std::abs(l[n / 2] - 0.5) < 0.01);
  for (double x : u) CHECK((x > 0.0 && x < 1.0));
  CHECK(time_sampler_from_string("beta") == TimeSamplerKind::Beta);
  CHECK_THROWS_AS(time_sampler_from_string("gaussian"), ConfigError);
}

TEST_CASE("reflow loss examples") {
  FlowBatch b;
  b.x0 = Matrix::Zero(1, 2);
  b.x1 = Matrix(1, 2);
  b.x1 << 1.0, 0.0;
  b.cond = Matrix(1, 0);
  b.t = Vector::Constant(1, 0.37);
  CHECK(reflow_loss(constant_field(Vector::Zero(2)), b).loss == doctest::Approx(1.0));
  CHECK(reflow_loss(constant_field(Vector(b.x1.row(0).transpose())), b).loss == 0.0);
}

TEST_CASE("reflow loss gradient matches finite differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SeededRng rng(seed);
    const auto field = random_field(3, 2, false, rng);
    const auto batch = random_batch(4, 3, 2, rng);
    const auto res = reflow_loss(field, batch);
    CHECK(res.loss >= 0.0);
    auto loss = [&](const MlpParams& p) {
      return reflow_loss(VelocityField(p, 3, 2, kEmbed, false), batch).loss;
    };
    const auto fd = numerics::finite_diff_grad(loss, field.net(), 1e-6);
    CHECK(numerics::max_relative_error(res.grads.flatten(), fd.flatten()) <= 1e-5);
  }
}

TEST_CASE("shortcut loss: constant field is self-consistent") {
  SeededRng rng(1);
  Vector c(2);
  c << 0.3, -1.2;
  const auto field = constant_field(c, 1, true);
  const auto batch = random_batch(16, 2, 1, rng);
  const auto res = shortcut_loss(field, batch, ShortcutConfig{8, 0.25}, rng);
  CHECK(res.consistency_term == 0.0);
  CHECK(res.flow_term > 0.0);
  CHECK_THROWS_AS(shortcut_loss(constant_field(c, 1, false), batch, ShortcutConfig{}, rng), ConfigError);
}

TEST_CASE("shortcut loss treats the two-step target as a constant") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SeededRng rng(seed);
    const auto field = random_field(2, 1, true, rng);
    const auto plan = plan_shortcut(random_batch(8, 2, 1, rng), ShortcutConfig{8, 0.5}, rng);
    REQUIRE(plan.sc_xt.rows() == 4);
    const Matrix targets = shortcut_targets(field, plan);
    const auto res = shortcut_loss(field, plan);
    const auto frozen = shortcut_loss(field, plan, targets);
    CHECK(res.grads.bitwise_equal(frozen.grads));

    auto rebuild = [&](const MlpParams& p) { return VelocityField(p, 2, 1, kEmbed, true); };
    const auto fd_frozen = numerics::finite_diff_grad(
        [&](const MlpParams& p) { return shortcut_loss(rebuild(p), plan, targets).loss; }, field.net(), 1e-6);
    CHECK(numerics::max_relative_error(res.grads.flatten(), fd_frozen.flatten()) <= 1e-5);

    // Differentiating through the target branch would give a different gradient.
    const auto fd_live = numerics::finite_diff_grad(
        [&](const MlpParams& p) { return shortcut_loss(rebuild(p), plan).loss; }, field.net(), 1e-6);
    CHECK(numerics::max_relative_error(res.grads.flatten(), fd_live.flatten()) > 1e-3);
  }
}

TEST_CASE("shortcut plan uses dyadic steps inside [0, 1]") {
  SeededRng rng(9);
  const auto plan = plan_shortcut(random_batch(400, 2, 0, rng), ShortcutConfig{8, 0.25}, rng);
  CHECK(plan.flow.size() == 300);
  for (Eigen::Index i = 0; i < plan.sc_step.size(); ++i) {
    const double d = plan.sc_step[i];
    CHECK((d == 0.125 || d == 0.25 || d == 0.5));
    CHECK(plan.sc_t[i] + 2.0 * d <= 1.0 + 1e-15);
  }
}

TEST_CASE("shortcut model: one step agrees with two steps after training") {
  SeededRng rng(21);
  FlowDataset data(2, 0);
  for (int i = 0; i < 2000; ++i) {
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    const std::vector<double> x = {sign * 1.5 + 0.3 * rng.normal(), 0.3 * rng.normal()};
    data.append(x, {});
  }
  VelocityFieldConfig c;
  c.chunk_dim = 2;
  c.cond_dim = 0;
  c.time_embed_dim = 8;
  c.shortcut = true;
  c.hidden = {64, 64};
  auto field = VelocityField::create(c, rng);
  PretrainConfig pc;
  pc.steps = 2000;
  pc.batch_size = 256;
  pc.lr = {2e-3, 1e-4, 0, 2000, numerics::LrScheduleKind::CosineWarmRestart};
  pretrain(field, data, pc, rng);

  const Matrix x0 = test::random_matrix(500, 2, rng);
  const Matrix none(500, 0);
  const Matrix one = euler_sample_batch(field, x0, none, DiscretizationScheme::uniform(1));
  const Matrix two = euler_sample_batch(field, x0, none, DiscretizationScheme::uniform(2));
  const double mean_l2 = (one - two).rowwise().norm().mean();
  MESSAGE("one-step vs two-step mean L2 " << mean_l2);
  CHECK(mean_l2 <= 0.1);
}

TEST_CASE("euler sampling examples") {
  Vector c(3);
  c << 0.5, -1.0, 2.0;
  const Vector x0 = Vector::Constant(3, 0.25);
  for (std::size_t k : {1, 3, 8}) {
    const Vector x = euler_sample(constant_field(c), x0, Vector(0), DiscretizationScheme::uniform(k));
    CHECK((x - (x0 + c)).cwiseAbs().maxCoeff() < 1e-14);
  }
  const auto decay = linear_field(-Matrix::Identity(1, 1));
  CHECK(euler_sample(decay, Vector::Ones(1), Vector(0), DiscretizationScheme::uniform(1))[0] == 0.0);
  CHECK(euler_sample(decay, Vector::Ones(1), Vector(0), DiscretizationScheme::uniform(64))[0] ==
        doctest::Approx(std::pow(1.0 - 1.0 / 64.0, 64)).epsilon(1e-12));
  CHECK(std::pow(1.0 - 1.0 / 64.0, 64) == doctest::Approx(0.3649).epsilon(1e-4));
}

TEST_CASE("euler sampling is deterministic and reports non-finite steps") {
  SeededRng rng(2);
  const auto field = random_field(2, 1, false, rng);
  const Vector x0 = test::random_vector(2, rng), cond = test::random_vector(1, rng);
  const Vector a = euler_sample(field, x0, cond, DiscretizationScheme::uniform(5));
  const Vector b = euler_sample(field, x0, cond, DiscretizationScheme::uniform(5));
  CHECK(a == b);
  Vector huge(1);
  huge << 1e308;
  CHECK_THROWS_AS(euler_sample(linear_field(Matrix::Constant(1, 1, 1e308)), huge, Vector(0),
                               DiscretizationScheme::uniform(2)),
                  NumericError);
}

TEST_CASE("log density: zero and constant divergence") {
  SeededRng rng(3);
  Vector c(2);
  c << 1.0, 2.0;
  const Vector x0 = test::random_vector(2, rng);
  const auto flat = exact_log_density(constant_field(c), x0, Vector(0), DiscretizationScheme::uniform(4),
                                      TraceMode::exact(), rng);
  CHECK(flat.log_p1 == doctest::Approx(flat.log_p0).epsilon(1e-15));
  CHECK(flat.log_p0 == doctest::Approx(standard_normal_logpdf(x0)));

  Matrix a(3, 3);
  a << 0.2, 0.5, -0.1, 0.0, -0.7, 0.3, 0.4, 0.1, 0.15;
  const double tau = a.trace();
  for (std::size_t k : {1, 2, 7}) {
    const auto est = exact_log_density(linear_field(a), test::random_vector(3, rng), Vector(0),
                                       DiscretizationScheme::uniform(k), TraceMode::exact(), rng);
    CHECK(std::abs(est.log_p1 - (est.log_p0 - tau)) <= 1e-6);
  }
}

TEST_CASE("log density matches the pushforward of a shifted Gaussian") {
  // v = c moves N(0, 1) to N(c, 1); the density at x_K is the shifted normal.
  SeededRng rng(8);
  Vector c(1);
  c << 0.8;
  for (int i = 0; i < 5; ++i) {
    const Vector x0 = test::random_vector(1, rng);
    const auto est = exact_log_density(constant_field(c), x0, Vector(0), DiscretizationScheme::uniform(3),
                                       TraceMode::exact(), rng);
    const double x = est.x_final[0];
    const double analytic = -0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * (x - 0.8) * (x - 0.8);
    CHECK(std::abs(est.log_p1 - analytic) <= 1e-6);
  }
}

TEST_CASE("exact trace agrees with a finite-difference Jacobian") {
  SeededRng rng(5);
  const auto field = random_field(3, 2, false, rng);
  const Vector x = test::random_vector(3, rng), cond = test::random_vector(2, rng);
  const Matrix jac = velocity_jacobian(field, x, cond, 0.4, 0.0);
  const double h = 1e-6;
  double trace = 0.0;
  for (int j = 0; j < 3; ++j) {
    Vector up = x, down = x;
    up[j] += h;
    down[j] -= h;
    const std::vector<double> t = {0.4};
    const double vu = field.evaluate(as_row(up), as_row(cond), t)(0, j);
    const double vd = field.evaluate(as_row(down), as_row(cond), t)(0, j);
    trace += (vu - vd) / (2 * h);
  }
  CHECK(std::abs(jac.trace() - trace) <= 1e-5);
}

TEST_CASE("Hutchinson trace is unbiased") {
  SeededRng rng(6);
  const auto field = random_field(4, 2, false, rng);
  const Vector x0 = test::random_vector(4, rng), cond = test::random_vector(2, rng);
  const auto scheme = DiscretizationScheme::uniform(2);
  SeededRng probe_rng(7);
  const auto exact = exact_log_density(field, x0, cond, scheme, TraceMode::exact(), probe_rng);
  const auto hutch = exact_log_density(field, x0, cond, scheme, TraceMode::hutchinson(10000), probe_rng);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(std::abs(hutch.step_traces[k] - exact.step_traces[k]) <= 4.0 * hutch.step_trace_se[k]);
    CHECK(hutch.step_trace_se[k] > 0.0);
  }
}

TEST_CASE("dataset text format round-trips") {
  const auto dir = test::scratch_dir("dataset");
  SeededRng rng(1);
  FlowDataset data(3, 2);
  for (int i = 0; i < 5; ++i) {
    const Vector t = test::random_vector(3, rng), c = test::random_vector(2, rng);
    data.append({t.data(), 3}, {c.data(), 2});
  }
  write_dataset(dir / "d.csv", data);
  const auto back = read_dataset(dir / "d.csv");
  REQUIRE(back.size() == 5);
  CHECK(back.targets() == data.targets());
  CHECK(back.conditions() == data.conditions());
  CHECK_THROWS_AS(data.append(std::vector<double>(2), std::vector<double>(2)), ConfigError);

  std::ofstream(dir / "bad.csv") << "3,2,2\n1,2,3,4,5\n";
  CHECK_THROWS_AS(read_dataset(dir / "bad.csv"), ConfigError);
}

TEST_CASE("pretraining is deterministic") {
  auto run = [] {
    SeededRng rng(12);
    FlowDataset data(2, 1);
    for (int i = 0; i < 64; ++i) {
      const double c = rng.uniform();
      data.append(std::vector<double>{c, -c}, std::vector<double>{c});
    }
    auto field = random_field(2, 1, false, rng);
    PretrainConfig pc;
    pc.steps = 20;
    pc.batch_size = 16;
    pretrain(field, data, pc, rng);
    return field.net();
  };
  CHECK(run().bitwise_equal(run()));
}
