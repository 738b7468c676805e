// Acceptance gate. Each criterion prints one PASS/FAIL line; the exit code is
// nonzero when any criterion fails. Pass criterion numbers as arguments to run
// a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "reinflow/envsim/expert.hpp"
#include "reinflow/envsim/vec_env.hpp"
#include "reinflow/flowmatch/losses.hpp"
#include "reinflow/flowmatch/sampling.hpp"
#include "reinflow/harness/config.hpp"
#include "reinflow/harness/metrics.hpp"
#include "reinflow/harness/workflows.hpp"
#include "reinflow/numerics/optim.hpp"
#include "reinflow/rlcore/critic.hpp"
#include "reinflow/rlcore/ppo.hpp"
#include "reinflow/rlcore/regularizers.hpp"
#include "reinflow/rlcore/trainer.hpp"
#include "reinflow/stochpolicy/chain.hpp"
#include "reinflow/stochpolicy/noise_schedule.hpp"

using namespace reinflow;
using numerics::Matrix;
using numerics::SeededRng;
using numerics::Vector;
using stochpolicy::NoisyFlowPolicy;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string format(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------- oracles

// Central differences, one coordinate at a time.
std::vector<double> central_diff(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
                                 double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// |a - b| / max(|a|, |b|, 1e-3): relative where the gradient is sizeable,
// absolute (scaled by 1e-3) where it is close to zero.
double worst_relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), 1e-3});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

double normal_logpdf(double y, double mean, double sigma) {
  const double z = (y - mean) / sigma;
  return -0.5 * z * z - std::log(sigma) - 0.5 * std::log(2.0 * std::numbers::pi);
}

Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, SeededRng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  }
  return m;
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_and_se(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= n - 1.0;
  return {mean, std::sqrt(var / n)};
}

// ---------------------------------------------------------------- fixtures

NoisyFlowPolicy small_policy(std::size_t d, std::size_t cond, std::size_t steps, std::size_t hidden, double sigma_min,
                             double sigma_max, double clip, SeededRng& rng, bool shortcut = false) {
  flowmatch::VelocityFieldConfig vc;
  vc.chunk_dim = d;
  vc.cond_dim = cond;
  vc.time_embed_dim = 4;
  vc.hidden = {hidden};
  vc.shortcut = shortcut;
  stochpolicy::NoiseHeadConfig nc;
  nc.sigma_min = sigma_min;
  nc.sigma_max = sigma_max;
  nc.hidden = {hidden};
  return NoisyFlowPolicy::create(flowmatch::VelocityField::create(vc, rng), nc,
                                 flowmatch::DiscretizationScheme::uniform(steps), clip, rng);
}

std::vector<stochpolicy::DenoisingChain> draw_chains(const NoisyFlowPolicy& policy, const Matrix& obs,
                                                     std::uint64_t seed) {
  auto streams = numerics::make_streams(seed, static_cast<std::size_t>(obs.rows()));
  return stochpolicy::sample_chains(policy, obs, streams);
}

stochpolicy::ChainBatch as_batch(const std::vector<stochpolicy::DenoisingChain>& chains, const Matrix& obs) {
  std::vector<std::size_t> idx(chains.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return stochpolicy::ChainBatch::gather(chains, obs, idx);
}

// Gradient of f over the policy's flat parameters by central differences.
std::vector<double> policy_fd(const NoisyFlowPolicy& base, const std::function<double(const NoisyFlowPolicy&)>& f) {
  NoisyFlowPolicy work = base;
  return central_diff(
      [&](const std::vector<double>& p) {
        stochpolicy::assign_params(work, p);
        return f(work);
      },
      stochpolicy::flatten_params(base), 1e-6);
}

// Final actions of a batch of chains driven by caller-supplied noise, written
// out step by step from the transition rule.
Matrix roll_chains(const NoisyFlowPolicy& policy, const Matrix& obs, const Matrix& a0, const std::vector<Matrix>& eps) {
  Matrix a = a0;
  for (std::size_t k = 0; k < policy.steps(); ++k) {
    const double t[] = {policy.scheme.t(k)};
    const double dt[] = {policy.scheme.dt(k)};
    const Matrix v = policy.velocity.evaluate(a, obs, t, dt);
    const Matrix sigma = stochpolicy::sigma_forward_batch(policy, t, a, obs).sigma;
    a = a + dt[0] * v + sigma.cwiseProduct(eps[k]);
    a = a.cwiseMax(-policy.clip_bound).cwiseMin(policy.clip_bound);
  }
  return a;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("reinflow_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

harness::RunConfig load_run_config(const std::string& name, std::uint64_t seed, const fs::path& out_dir) {
  auto config = harness::load_config(fs::path(REINFLOW_CONFIG_DIR) / name);
  config.seed = seed;
  config.out_dir = out_dir.string();
  config.finalize();
  return config;
}

// ---------------------------------------------------------------- 1

Outcome gradient_fidelity() {
  const double tol = 1e-5;
  std::vector<std::pair<std::string, std::function<double(SeededRng&)>>> checks;

  checks.emplace_back("reflow_loss", [](SeededRng& rng) {
    flowmatch::VelocityFieldConfig vc{4, 3, 4, false, {8}, numerics::Activation::Mish};
    const auto field = flowmatch::VelocityField::create(vc, rng);
    flowmatch::FlowBatch b{gaussian_matrix(6, 4, rng), gaussian_matrix(6, 4, rng), gaussian_matrix(6, 3, rng),
                           Vector(6)};
    for (Eigen::Index i = 0; i < 6; ++i) b.t(i) = rng.uniform_open();
    auto work = field;
    const auto fd = central_diff(
        [&](const std::vector<double>& p) {
          work.net().assign(p);
          return flowmatch::reflow_loss(work, b).loss;
        },
        field.net().flatten(), 1e-6);
    return worst_relative_error(flowmatch::reflow_loss(field, b).grads.flatten(), fd);
  });

  checks.emplace_back("shortcut_loss", [](SeededRng& rng) {
    flowmatch::VelocityFieldConfig vc{4, 3, 4, true, {8}, numerics::Activation::Mish};
    const auto field = flowmatch::VelocityField::create(vc, rng);
    flowmatch::FlowBatch b{gaussian_matrix(8, 4, rng), gaussian_matrix(8, 4, rng), gaussian_matrix(8, 3, rng),
                           Vector(8)};
    for (Eigen::Index i = 0; i < 8; ++i) b.t(i) = rng.uniform_open();
    const auto plan = flowmatch::plan_shortcut(b, flowmatch::ShortcutConfig{}, rng);
    // The self-consistency target is held fixed, exactly as in training.
    const Matrix target = flowmatch::shortcut_targets(field, plan);
    auto work = field;
    const auto fd = central_diff(
        [&](const std::vector<double>& p) {
          work.net().assign(p);
          return flowmatch::shortcut_loss(work, plan, target).loss;
        },
        field.net().flatten(), 1e-6);
    return worst_relative_error(flowmatch::shortcut_loss(field, plan).grads.flatten(), fd);
  });

  checks.emplace_back("chain_logprob", [](SeededRng& rng) {
    const auto policy = small_policy(4, 3, 3, 8, 0.1, 0.4, 1.0, rng);
    const Vector obs = gaussian_matrix(3, 1, rng).col(0);
    const auto chain = stochpolicy::sample_chain(policy, obs, rng);
    const auto fd = policy_fd(policy, [&](const NoisyFlowPolicy& p) { return stochpolicy::chain_logprob(p, chain, obs).joint; });
    return worst_relative_error(stochpolicy::chain_logprob(policy, chain, obs).grads.flatten(), fd);
  });

  checks.emplace_back("ppo_clip_loss", [](SeededRng& rng) {
    const auto policy = small_policy(3, 3, 2, 8, 0.1, 0.4, 1.0, rng);
    const Matrix obs = gaussian_matrix(8, 3, rng);
    const auto batch = as_batch(draw_chains(policy, obs, rng.next_u64()), obs);
    const auto ev = stochpolicy::evaluate_chains(policy, batch);
    // Half the samples sit well outside the clip range, half well inside.
    Vector old = ev.logprob;
    Vector adv(8);
    for (Eigen::Index i = 0; i < 8; ++i) {
      old(i) += (i % 2 == 0 ? 0.04 : 0.7) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
      adv(i) = rng.normal();
    }
    const double eps = 0.2;
    const auto ppo = rlcore::ppo_clip_loss(ev.logprob, old, adv, eps);
    auto grads = stochpolicy::PolicyGrads::zeros_like(policy);
    stochpolicy::backprop_chains(policy, batch, ev, ppo.grad_logp_new, nullptr, grads);
    const auto fd = policy_fd(policy, [&](const NoisyFlowPolicy& p) {
      return rlcore::ppo_clip_loss(stochpolicy::evaluate_chains(p, batch).logprob, old, adv, eps).loss;
    });
    return worst_relative_error(grads.flatten(), fd);
  });

  checks.emplace_back("entropy_regularizer", [](SeededRng& rng) {
    const auto policy = small_policy(4, 3, 4, 8, 0.1, 0.4, 1.0, rng);
    const Matrix obs = gaussian_matrix(5, 3, rng);
    const auto batch = as_batch(draw_chains(policy, obs, rng.next_u64()), obs);
    const auto fd = policy_fd(policy, [&](const NoisyFlowPolicy& p) { return rlcore::entropy_regularizer(p, batch).value; });
    return worst_relative_error(rlcore::entropy_regularizer(policy, batch).grads.flatten(), fd);
  });

  checks.emplace_back("w2_regularizer", [](SeededRng& rng) {
    const auto reference = small_policy(4, 3, 3, 8, 0.1, 0.4, 1.5, rng);
    auto policy = reference;
    auto flat = stochpolicy::flatten_params(policy);
    for (auto& x : flat) x += 0.1 * rng.normal();
    stochpolicy::assign_params(policy, flat);
    const Matrix obs = gaussian_matrix(6, 3, rng);
    const Matrix a0 = gaussian_matrix(6, 4, rng);
    const auto fd = policy_fd(policy, [&](const NoisyFlowPolicy& p) {
      return rlcore::w2_regularizer_from_noise(p, reference, obs, a0).value;
    });
    return worst_relative_error(rlcore::w2_regularizer_from_noise(policy, reference, obs, a0).grads.flatten(), fd);
  });

  checks.emplace_back("critic_loss", [](SeededRng& rng) {
    rlcore::CriticConfig cfg;
    cfg.hidden = {8, 8};
    cfg.output_bias = 0.3;
    const auto critic = rlcore::Critic::create(cfg, 6, rng);
    const Matrix obs = gaussian_matrix(8, 6, rng);
    const Vector ret = gaussian_matrix(8, 1, rng, 3.0).col(0);
    auto work = critic;
    const auto fd = central_diff(
        [&](const std::vector<double>& p) {
          work.net.assign(p);
          return rlcore::critic_loss(work, obs, ret, 0.5).loss;
        },
        critic.net.flatten(), 1e-6);
    return worst_relative_error(rlcore::critic_loss(critic, obs, ret, 0.5).grads.flatten(), fd);
  });

  bool pass = true;
  std::string detail;
  for (auto& [name, check] : checks) {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      SeededRng rng(1000 + seed, 7);
      worst = std::max(worst, check(rng));
    }
    pass = pass && worst <= tol;
    detail += format("%s%s %.1e", detail.empty() ? "" : ", ", name.c_str(), worst);
  }
  return {pass, "max relative error: " + detail};
}

// ---------------------------------------------------------------- 2

Outcome likelihood_exactness() {
  double worst = 0.0;
  for (std::size_t K : {1, 2, 4, 8}) {
    SeededRng rng(2000 + K, 3);
    // Clip bound 1 with sigma up to 0.6 so stored actions are often clipped.
    const auto policy = small_policy(4, 3, K, 8, 0.2, 0.6, 1.0, rng);
    for (int trial = 0; trial < 50; ++trial) {
      const Vector obs = gaussian_matrix(3, 1, rng).col(0);
      const auto chain = stochpolicy::sample_chain(policy, obs, rng);
      double joint = 0.0;
      for (Eigen::Index j = 0; j < 4; ++j) joint += normal_logpdf(chain.actions(0, j), 0.0, 1.0);
      for (std::size_t k = 0; k < K; ++k) {
        const Vector a = chain.actions.row(static_cast<Eigen::Index>(k)).transpose();
        const double t[] = {policy.scheme.t(k)};
        const double dt[] = {policy.scheme.dt(k)};
        const Vector v = policy.velocity.evaluate(a.transpose(), obs.transpose(), t, dt).row(0).transpose();
        const Vector sigma = stochpolicy::sigma_forward(policy, t[0], a, obs);
        for (Eigen::Index j = 0; j < 4; ++j) {
          joint += normal_logpdf(chain.actions(static_cast<Eigen::Index>(k) + 1, j), a(j) + dt[0] * v(j), sigma(j));
        }
      }
      worst = std::max(worst, std::abs(joint - chain.joint_logprob));
    }
  }
  return {worst <= 1e-12, format("max |stored - recomputed| = %.2e over K in {1,2,4,8}", worst)};
}

// ---------------------------------------------------------------- 3

Outcome one_step_marginal() {
  SeededRng rng(3000, 1);
  const std::size_t d = 2;
  const auto policy = small_policy(d, 3, 1, 8, 0.1, 0.5, 10.0, rng);
  const Eigen::Index n = 100000;
  const double t[] = {0.0};
  const double dt[] = {1.0};

  // Fixed a^0 and observation: moments of a^1 against a^0 + v dt and sigma^2.
  const Vector a0 = gaussian_matrix(d, 1, rng).col(0);
  const Vector obs = gaussian_matrix(3, 1, rng).col(0);
  const Vector mean = a0 + dt[0] * policy.velocity.evaluate(a0.transpose(), obs.transpose(), t, dt).row(0).transpose();
  const Vector sigma = stochpolicy::sigma_forward(policy, t[0], a0, obs);
  std::vector<std::vector<double>> draws(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    Matrix eps(1, d);
    for (std::size_t j = 0; j < d; ++j) eps(0, j) = rng.normal();
    const auto chain = stochpolicy::chain_from_noise(policy, obs, a0, eps);
    for (std::size_t j = 0; j < d; ++j) draws[j].push_back(chain.actions(1, j));
  }
  double worst_z = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const auto m = mean_and_se(draws[j]);
    worst_z = std::max(worst_z, std::abs(m.mean - mean(j)) / m.se);
    std::vector<double> sq;
    for (double x : draws[j]) sq.push_back((x - m.mean) * (x - m.mean));
    const auto v = mean_and_se(sq);
    worst_z = std::max(worst_z, std::abs(v.mean - sigma(j) * sigma(j)) / v.se);
  }

  // The library's own sampler over random a^0 and observations: standardized
  // residuals (a^1 - a^0 - v dt) / sigma must be N(0, 1).
  const Matrix obs_all = gaussian_matrix(n, 3, rng);
  const auto chains = draw_chains(policy, obs_all, 3001);
  Matrix first(n, d), second(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    first.row(i) = chains[static_cast<std::size_t>(i)].actions.row(0);
    second.row(i) = chains[static_cast<std::size_t>(i)].actions.row(1);
  }
  const Matrix v = policy.velocity.evaluate(first, obs_all, t, dt);
  const Matrix s = stochpolicy::sigma_forward_batch(policy, t, first, obs_all).sigma;
  const Matrix z = ((second - first - dt[0] * v).array() / s.array()).matrix();
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<double> zs(z.col(j).data(), z.col(j).data() + n);
    const auto m = mean_and_se(zs);
    worst_z = std::max(worst_z, std::abs(m.mean) / m.se);
    std::vector<double> sq;
    for (double x : zs) sq.push_back((x - m.mean) * (x - m.mean));
    const auto var = mean_and_se(sq);
    worst_z = std::max(worst_z, std::abs(var.mean - 1.0) / var.se);
  }
  return {worst_z <= 4.0, format("worst deviation %.2f standard errors (limit 4)", worst_z)};
}

// ---------------------------------------------------------------- 4

flowmatch::VelocityField linear_field(const Matrix& a, std::size_t embed) {
  const auto d = static_cast<std::size_t>(a.rows());
  auto net = numerics::MlpParams::zeros({d + embed, d}, numerics::Activation::Identity);
  net.weights[0].topRows(a.rows()) = a.transpose();
  return flowmatch::VelocityField(std::move(net), d, 0, embed, false);
}

Outcome divergence_oracle() {
  SeededRng rng(4000, 2);
  double worst_exact = 0.0;
  double worst_z = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t d = 3 + static_cast<std::size_t>(trial % 3);
    const Matrix a = gaussian_matrix(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d), rng, 0.5);
    const auto field = linear_field(a, 4);
    const Vector x0 = gaussian_matrix(static_cast<Eigen::Index>(d), 1, rng).col(0);
    const auto scheme = flowmatch::DiscretizationScheme::uniform(1 + static_cast<std::size_t>(trial));
    const auto exact = flowmatch::exact_log_density(field, x0, Vector(0), scheme, flowmatch::TraceMode::exact(), rng);
    double log_p0 = 0.0;
    for (Eigen::Index j = 0; j < x0.size(); ++j) log_p0 += normal_logpdf(x0(j), 0.0, 1.0);
    worst_exact = std::max(worst_exact, std::abs(exact.log_p1 - (log_p0 - a.trace())));

    const auto hutch =
        flowmatch::exact_log_density(field, x0, Vector(0), scheme, flowmatch::TraceMode::hutchinson(10000), rng);
    for (std::size_t k = 0; k < hutch.step_traces.size(); ++k) {
      const double se = hutch.step_trace_se[k];
      const double diff = std::abs(hutch.step_traces[k] - a.trace());
      worst_z = std::max(worst_z, se > 0.0 ? diff / se : (diff > 1e-12 ? INFINITY : 0.0));
    }
  }
  return {worst_exact <= 1e-6 && worst_z <= 4.0,
          format("exact-trace error %.2e (limit 1e-6); Hutchinson worst deviation %.2f SE (limit 4)", worst_exact,
                 worst_z)};
}

// ---------------------------------------------------------------- 5

// One-step bandit: constant observation, d = 1, reward -(a^K - 2)^2.
double bandit_worst_z(std::size_t K, std::size_t rollouts) {
  SeededRng init(5000 + K, 0);
  const auto policy = small_policy(1, 1, K, 4, 0.1, 0.5, 10.0, init);
  const Vector obs = Vector::Constant(1, 0.5);
  const auto reward = [](double a) { return -(a - 2.0) * (a - 2.0); };
  const std::size_t P = stochpolicy::flatten_params(policy).size();

  // Score function: r * grad sum_k ln pi(a^{k+1} | a^k), with a constant
  // baseline taken from an independent pilot batch.
  double baseline = 0.0;
  {
    const Matrix obs_rows = Matrix::Constant(2000, 1, 0.5);
    for (const auto& c : draw_chains(policy, obs_rows, 5100 + K)) baseline += reward(c.final_action()(0));
    baseline /= 2000.0;
  }
  std::vector<double> sf_sum(P, 0.0), sf_sq(P, 0.0);
  {
    const Matrix obs_rows = Matrix::Constant(static_cast<Eigen::Index>(rollouts), 1, 0.5);
    const auto chains = draw_chains(policy, obs_rows, 5200 + K);
    for (const auto& c : chains) {
      const double w = reward(c.final_action()(0)) - baseline;
      const auto g = stochpolicy::chain_logprob(policy, c, obs).grads.flatten();
      for (std::size_t p = 0; p < P; ++p) {
        sf_sum[p] += w * g[p];
        sf_sq[p] += (w * g[p]) * (w * g[p]);
      }
    }
  }

  // Pathwise finite differences of J with common random numbers.
  const auto n = static_cast<Eigen::Index>(rollouts);
  SeededRng noise(5300 + K, 0);
  const Matrix obs_rows = Matrix::Constant(n, 1, 0.5);
  const Matrix a0 = gaussian_matrix(n, 1, noise);
  std::vector<Matrix> eps;
  for (std::size_t k = 0; k < K; ++k) eps.push_back(gaussian_matrix(n, 1, noise));
  const auto base = stochpolicy::flatten_params(policy);
  auto work = policy;
  const double h = 1e-5;

  double worst = 0.0;
  const double N = static_cast<double>(rollouts);
  for (std::size_t p = 0; p < P; ++p) {
    auto plus = base, minus = base;
    plus[p] += h;
    minus[p] -= h;
    stochpolicy::assign_params(work, plus);
    const Matrix up = roll_chains(work, obs_rows, a0, eps);
    stochpolicy::assign_params(work, minus);
    const Matrix down = roll_chains(work, obs_rows, a0, eps);
    std::vector<double> per(rollouts);
    for (Eigen::Index i = 0; i < n; ++i) per[static_cast<std::size_t>(i)] = (reward(up(i, 0)) - reward(down(i, 0))) / (2.0 * h);
    const auto fd = mean_and_se(per);

    const double sf_mean = sf_sum[p] / N;
    const double sf_se = std::sqrt(std::max(0.0, sf_sq[p] / N - sf_mean * sf_mean) / (N - 1.0));
    const double se = std::hypot(sf_se, fd.se);
    const double diff = std::abs(sf_mean - fd.mean);
    worst = std::max(worst, se > 0.0 ? diff / se : (diff > 0.0 ? INFINITY : 0.0));
  }
  return worst;
}

Outcome policy_gradient_estimator() {
  bool pass = true;
  std::string detail;
  for (std::size_t K : {1, 2, 4}) {
    const double z = bandit_worst_z(K, 100000);
    pass = pass && z <= 4.0;
    detail += format("%sK=%zu %.2f", detail.empty() ? "" : ", ", K, z);
  }
  return {pass, "score-function vs finite-difference gradient, worst SE deviation: " + detail + " (limit 4)"};
}

// ---------------------------------------------------------------- 6

Outcome pretraining() {
  const auto dir = scratch("pretrain");
  const auto config = load_run_config("bc_clean.ini", 1, dir);
  if (config.demo_eta != 0.0 || config.demo_episodes != 200 || config.denoising_steps != 4 ||
      config.model.shortcut || config.env.task != envsim::TaskKind::Dense || config.eval_episodes != 100) {
    return {false, "bc_clean.ini does not describe 200 clean episodes, K = 4, dense env, 100 eval episodes"};
  }
  const auto pre = harness::run_pretrain(config);
  const auto expert = envsim::evaluate_expert(config.env, 0.0, config.eval_episodes, config.eval_seed);
  // Rewards are negative: 80% of the expert's score means at most 20% worse.
  const double threshold = expert.mean_return - 0.2 * std::abs(expert.mean_return);
  return {pre.eval.mean_return >= threshold,
          format("policy %.3f vs expert %.3f (threshold %.3f, policy/expert %.3f)", pre.eval.mean_return,
                 expert.mean_return, threshold, pre.eval.mean_return / expert.mean_return)};
}

// ---------------------------------------------------------------- 7, 8

struct FinetuneRun {
  harness::FinetuneOutcome out;
  bool finite = true;
};

FinetuneRun pretrain_and_finetune(const std::string& config_name, std::uint64_t seed, const std::string& tag) {
  const auto dir = scratch(tag + "_seed" + std::to_string(seed));
  const auto config = load_run_config(config_name, seed, dir);
  harness::run_pretrain(config);
  FinetuneRun run{harness::run_finetune(config), true};
  const auto table = harness::read_csv(run.out.metrics);
  for (const auto& row : table.rows) {
    for (double v : row) run.finite = run.finite && std::isfinite(v);
  }
  return run;
}

Outcome finetuning_lift() {
  bool pass = true;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto run = pretrain_and_finetune("lift_dense.ini", seed, "lift_dense");
    const double pre = run.out.pretrained_eval.mean_return;
    const double post = run.out.final_eval.mean_return;
    const double lift = (post - pre) / std::abs(pre);
    // The reward plot carries the pretrained level as a dashed reference line.
    std::ifstream svg(run.out.plot);
    const std::string plot((std::istreambuf_iterator<char>(svg)), std::istreambuf_iterator<char>());
    pass = pass && lift >= 0.3 && plot.find("class=\"reference\"") != std::string::npos;
    detail += format("dense seed %llu %.2f -> %.2f (%+.1f%%); ", static_cast<unsigned long long>(seed), pre, post,
                     100.0 * lift);
  }
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto run = pretrain_and_finetune("lift_sparse.ini", seed, "lift_sparse");
    const double pre = run.out.pretrained_eval.success_rate;
    const double post = run.out.final_eval.success_rate;
    pass = pass && pre <= 0.6 && post >= 0.9;
    detail += format("sparse seed %llu success %.0f%% -> %.0f%%%s", static_cast<unsigned long long>(seed),
                     100.0 * pre, 100.0 * post, seed == 3 ? "" : "; ");
  }
  return {pass, detail};
}

Outcome one_step_stability() {
  bool pass = true;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    std::string line;
    try {
      const auto run = pretrain_and_finetune("one_step.ini", seed, "one_step");
      const double pre = run.out.pretrained_eval.mean_return;
      const double post = run.out.final_eval.mean_return;
      pass = pass && run.finite && post >= pre;
      line = format("seed %llu %.2f -> %.2f%s", static_cast<unsigned long long>(seed), pre, post,
                    run.finite ? "" : " (non-finite metrics)");
    } catch (const harness::NumericAbort& e) {
      pass = false;
      line = format("seed %llu aborted: %s", static_cast<unsigned long long>(seed), e.what());
    }
    detail += (detail.empty() ? "" : "; ") + line;
  }
  return {pass, detail};
}

// ---------------------------------------------------------------- 9

Outcome regularizer_checks() {
  // Entropy: the closed-form per-symbol rate on sampled chains against the
  // Monte-Carlo average of -ln p(a^0, ..., a^K) / (K + 1).
  double worst_z = 0.0;
  for (std::size_t K : {1, 3, 4}) {
    SeededRng rng(9000 + K, 0);
    const auto policy = small_policy(3, 2, K, 8, 0.1, 0.5, 50.0, rng);
    const Eigen::Index n = 20000;
    const Matrix obs = gaussian_matrix(n, 2, rng);
    const auto chains = draw_chains(policy, obs, 9100 + K);
    const double closed = rlcore::entropy_regularizer(policy, as_batch(chains, obs)).value;
    std::vector<double> mc;
    for (std::size_t i = 0; i < chains.size(); ++i) {
      const auto& c = chains[i];
      double logp = 0.0;
      for (Eigen::Index j = 0; j < 3; ++j) logp += normal_logpdf(c.actions(0, j), 0.0, 1.0);
      for (std::size_t k = 0; k < K; ++k) {
        for (Eigen::Index j = 0; j < 3; ++j) {
          const auto kk = static_cast<Eigen::Index>(k);
          logp += normal_logpdf(c.actions(kk + 1, j), c.means(kk, j), c.sigmas(kk, j));
        }
      }
      // R_h is the negative entropy rate, so its estimate is +ln p / (K + 1).
      mc.push_back(logp / static_cast<double>(K + 1));
    }
    const auto m = mean_and_se(mc);
    worst_z = std::max(worst_z, std::abs(m.mean - closed) / m.se);
  }

  // W2: the regularizer (same a^0 for both policies) never falls below the
  // optimal 1D coupling of the same samples, which pairs sorted values.
  std::size_t pairs = 0, violations = 0;
  double tightest = INFINITY;
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    SeededRng rng(9200 + seed, 0);
    const std::size_t K = 1 + seed % 4;
    const auto reference = small_policy(1, 2, K, 8, 0.1, 0.3, seed % 2 == 0 ? 1.0 : 10.0, rng);
    auto policy = small_policy(1, 2, K, 8, 0.1, 0.3, reference.clip_bound, rng);
    const Eigen::Index n = 2000;
    const Matrix obs = Matrix::Constant(n, 2, 0.25 * static_cast<double>(seed % 3));
    const Matrix a0 = gaussian_matrix(n, 1, rng);
    const double bound = rlcore::w2_regularizer_from_noise(policy, reference, obs, a0).value;
    const Matrix x = stochpolicy::integrate_clipped(policy, a0, obs);
    const Matrix y = stochpolicy::integrate_clipped(reference, a0, obs);
    std::vector<double> xs(x.data(), x.data() + n), ys(y.data(), y.data() + n);
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    double w2 = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) w2 += 0.5 * (xs[i] - ys[i]) * (xs[i] - ys[i]);
    w2 /= static_cast<double>(n);
    ++pairs;
    if (bound < w2 - 1e-14) ++violations;
    tightest = std::min(tightest, bound - w2);
  }
  return {worst_z <= 3.0 && violations == 0,
          format("entropy closed form vs MC worst %.2f SE (limit 3); W2 bound held on %zu/%zu policy pairs (min "
                 "margin %.2e)",
                 worst_z, pairs - violations, pairs, tightest)};
}

// ---------------------------------------------------------------- 10

Outcome schedule_fidelity() {
  const std::size_t total = 1000;
  const stochpolicy::NoiseSchedule schedule{0.35, 0.3, total};
  const double lo = 0.10, hi = 0.24;
  bool pass = true;
  // Held at sigma_max through the first 35% of training.
  for (std::size_t it = 0; it <= 350; ++it) pass = pass && stochpolicy::noise_bound_at(schedule, it, lo, hi) == hi;
  pass = pass && stochpolicy::noise_bound_at(schedule, 351, lo, hi) < hi;
  const double end = stochpolicy::noise_bound_at(schedule, total, lo, hi);
  pass = pass && std::abs(end - 0.198) <= 1e-15 && end == 0.3 * lo + 0.7 * hi;
  double prev = hi;
  for (std::size_t it = 0; it <= total; ++it) {
    const double v = stochpolicy::noise_bound_at(schedule, it, lo, hi);
    pass = pass && v <= prev;
    prev = v;
  }

  const numerics::LrSchedule cosine{4.5e-5, 2.0e-5, 0, 100, numerics::LrScheduleKind::CosineWarmRestart};
  const double mid = numerics::schedule_lr(cosine, 50);
  const double start = numerics::schedule_lr(cosine, 0);
  pass = pass && std::abs(mid - 3.25e-5) <= 1e-18 && start == 4.5e-5;
  return {pass, format("noise bound end %.17g (target 0.198), hold through iter 350 of %zu; cosine midpoint %.6g "
                       "(target 3.25e-5)",
                       end, total, mid)};
}

// ---------------------------------------------------------------- 11

rlcore::TrainerState gate_trainer(rlcore::FinetuneConfig& cfg, std::uint64_t seed) {
  SeededRng rng(seed, 0);
  envsim::PointMassConfig env;
  env.horizon = 8;
  flowmatch::VelocityFieldConfig vc;
  vc.chunk_dim = env.chunk_dim();
  vc.cond_dim = envsim::PointMassConfig::obs_dim();
  vc.hidden = {16, 16};
  auto policy = NoisyFlowPolicy::create(flowmatch::VelocityField::create(vc, rng), stochpolicy::NoiseHeadConfig{},
                                        flowmatch::DiscretizationScheme::uniform(3), 1.0, rng);
  auto critic = rlcore::Critic::create(rlcore::CriticConfig{{16}, numerics::Activation::Mish, 0.0},
                                       envsim::PointMassConfig::obs_dim(), rng);
  cfg.n_envs = 4;
  cfg.n_steps = 8;
  cfg.iterations = 10;
  cfg.ppo.minibatch_size = 8;
  cfg.ppo.update_epochs = 3;
  cfg.noise.total_iterations = cfg.iterations;
  cfg.actor_lr = {1e-2, 1e-2, 0, 100, numerics::LrScheduleKind::Constant};
  return rlcore::TrainerState::create(std::move(policy), std::move(critic), env, cfg, seed);
}

Outcome stability_gates() {
  std::string detail;

  // Critic warmup: W iterations leave the actor bitwise unchanged while the
  // critic trains; the first iteration after the gate moves the actor.
  bool warmup_ok = true;
  {
    rlcore::FinetuneConfig cfg;
    cfg.ppo.critic_warmup_iters = 3;
    auto s = gate_trainer(cfg, 11);
    const auto frozen = stochpolicy::flatten_params(s.policy);
    const auto critic0 = s.critic.net.flatten();
    for (int i = 0; i < 3; ++i) {
      rlcore::finetune_iteration(s, cfg);
      warmup_ok = warmup_ok && stochpolicy::flatten_params(s.policy) == frozen && s.actor_opt.step == 0;
    }
    warmup_ok = warmup_ok && s.critic.net.flatten() != critic0 && s.critic_opt.step > 0;
    rlcore::finetune_iteration(s, cfg);
    warmup_ok = warmup_ok && stochpolicy::flatten_params(s.policy) != frozen;
  }
  detail += warmup_ok ? "warmup gate ok" : "warmup gate FAILED";

  // KL early stop: the first minibatch is at the snapshot (KL = 0) and is
  // applied; the second exceeds the target and nothing else is applied, to
  // either network, in any later epoch.
  bool kl_ok = true;
  {
    rlcore::FinetuneConfig cfg;
    cfg.ppo.target_kl = 1e-12;
    auto s = gate_trainer(cfg, 12);
    rlcore::finetune_iteration(s, cfg);
    kl_ok = s.last_kl_stop && s.last_actor_updates == 1 && s.last_critic_updates == 1 && s.actor_opt.step == 1 &&
            s.critic_opt.step == 1;
    rlcore::FinetuneConfig loose;
    loose.ppo.target_kl = 1e9;
    auto t = gate_trainer(loose, 12);
    rlcore::finetune_iteration(t, loose);
    const std::size_t expected = loose.ppo.update_epochs * (loose.n_envs * loose.n_steps / loose.ppo.minibatch_size);
    kl_ok = kl_ok && !t.last_kl_stop && t.last_actor_updates == expected && t.actor_opt.step == expected;
  }
  detail += kl_ok ? "; KL early stop ok" : "; KL early stop FAILED";

  // Clipping: every stored intermediate action of every chain stays inside
  // the bound even with noise far larger than the bound.
  bool clip_ok = true;
  double largest = 0.0;
  {
    SeededRng rng(13, 0);
    const auto policy = small_policy(4, 3, 4, 8, 1.0, 3.0, 0.5, rng);
    const Matrix obs = gaussian_matrix(5000, 3, rng, 3.0);
    for (const auto& c : draw_chains(policy, obs, 14)) {
      for (Eigen::Index k = 1; k < c.actions.rows(); ++k) largest = std::max(largest, c.actions.row(k).cwiseAbs().maxCoeff());
    }
    clip_ok = largest <= 0.5;

    rlcore::FinetuneConfig cfg;
    auto s = gate_trainer(cfg, 15);
    s.policy.noise.sigma_max = s.policy.sigma_max_current = 2.0;
    s.policy.noise.sigma_min = 1.0;
    const auto buffer = envsim::vec_rollout(s.policy, s.venv, 16, s.policy_streams);
    clip_ok = clip_ok && buffer.executed.cwiseAbs().maxCoeff() <= 1.0;
    for (const auto& c : buffer.chains) {
      clip_ok = clip_ok && c.actions.bottomRows(c.actions.rows() - 1).cwiseAbs().maxCoeff() <= s.policy.clip_bound;
    }
  }
  detail += clip_ok ? format("; clipping ok (max |a| %.3f within 0.5)", largest) : "; clipping FAILED";
  return {warmup_ok && kl_ok && clip_ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient fidelity", gradient_fidelity},
      {"likelihood exactness", likelihood_exactness},
      {"one-step marginal", one_step_marginal},
      {"divergence oracle", divergence_oracle},
      {"policy-gradient estimator", policy_gradient_estimator},
      {"pretraining", pretraining},
      {"fine-tuning lift", finetuning_lift},
      {"one-step fine-tuning stability", one_step_stability},
      {"regularizer checks", regularizer_checks},
      {"schedule fidelity", schedule_fidelity},
      {"stability gates", stability_gates},
  };

  std::set<std::size_t> selected;
  for (int i = 1; i < argc; ++i) selected.insert(static_cast<std::size_t>(std::stoul(argv[i])));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected.empty() && selected.count(i + 1) == 0) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s criterion %zu %s: %s [%.1fs]\n", outcome.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].first.c_str(), outcome.detail.c_str(), secs);
    std::fflush(stdout);
    if (!outcome.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
