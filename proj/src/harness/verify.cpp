#include "reinflow/harness/verify.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "reinflow/flowmatch/losses.hpp"
#include "reinflow/numerics/finite_diff.hpp"
#include "reinflow/rlcore/critic.hpp"
#include "reinflow/rlcore/ppo.hpp"
#include "reinflow/rlcore/regularizers.hpp"
#include "reinflow/stochpolicy/chain.hpp"

namespace reinflow::harness {

namespace {

using numerics::Matrix;
using numerics::SeededRng;
using numerics::Vector;
using stochpolicy::NoisyFlowPolicy;

constexpr double kStep = 1e-6;

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, SeededRng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  }
  return m;
}

std::string fmt(const char* f, double v) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Runs `check` for every seed and records the worst relative error.
template <typename F>
CheckResult worst_over_seeds(const std::string& name, std::uint64_t seed, std::size_t seeds, double tol, F check) {
  double worst = 0.0;
  for (std::size_t s = 0; s < seeds; ++s) {
    SeededRng rng(seed, 100 + s);
    worst = std::max(worst, check(rng));
  }
  return {name, worst <= tol, fmt("max relative error %.3e", worst)};
}

flowmatch::VelocityField probe_field(bool shortcut, std::size_t d, std::size_t c, SeededRng& rng) {
  flowmatch::VelocityFieldConfig cfg;
  cfg.chunk_dim = d;
  cfg.cond_dim = c;
  cfg.time_embed_dim = 4;
  cfg.shortcut = shortcut;
  cfg.hidden = {8};
  return flowmatch::VelocityField::create(cfg, rng);
}

// Policy gradient of f w.r.t. [theta, theta'] by central differences.
std::vector<double> fd_policy(const NoisyFlowPolicy& base, const std::function<double(const NoisyFlowPolicy&)>& f) {
  NoisyFlowPolicy work = base;
  return numerics::finite_diff_grad(
      [&](std::span<const double> p) {
        stochpolicy::assign_params(work, p);
        return f(work);
      },
      stochpolicy::flatten_params(base), kStep);
}

stochpolicy::ChainBatch sample_batch(const NoisyFlowPolicy& policy, const Matrix& obs, SeededRng& rng) {
  std::vector<stochpolicy::DenoisingChain> chains;
  for (Eigen::Index i = 0; i < obs.rows(); ++i) chains.push_back(stochpolicy::sample_chain(policy, obs.row(i).transpose(), rng));
  std::vector<std::size_t> idx(chains.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return stochpolicy::ChainBatch::gather(chains, obs, idx);
}

double gaussian_logpdf(double y, double mean, double sigma) {
  const double z = (y - mean) / sigma;
  return -0.5 * z * z - std::log(sigma) - 0.5 * std::log(2.0 * std::numbers::pi);
}

// Final actions of N chains integrated from given noise, batched.
Matrix final_actions(const NoisyFlowPolicy& policy, const Matrix& obs, const Matrix& a0, const std::vector<Matrix>& eps,
                     std::vector<Matrix>* trace = nullptr) {
  Matrix a = a0;
  if (trace != nullptr) trace->push_back(a);
  for (std::size_t k = 0; k < policy.steps(); ++k) {
    const double t[] = {policy.scheme.t(k)};
    const double dt[] = {policy.scheme.dt(k)};
    const Matrix v = policy.velocity.evaluate(a, obs, t, dt);
    const auto sig = stochpolicy::sigma_forward_batch(policy, t, a, obs);
    a = (a + dt[0] * v + sig.sigma.cwiseProduct(eps[k])).cwiseMax(-policy.clip_bound).cwiseMin(policy.clip_bound);
    if (trace != nullptr) trace->push_back(a);
  }
  return a;
}

double bandit_reward_mean(const Matrix& aK) { return -(aK.array() - 2.0).square().mean(); }

}  // namespace

NoisyFlowPolicy make_probe_policy(std::size_t chunk_dim, std::size_t cond_dim, std::size_t steps, std::size_t hidden,
                                  double sigma_min, double sigma_max, double clip_bound, SeededRng& rng) {
  flowmatch::VelocityFieldConfig vcfg;
  vcfg.chunk_dim = chunk_dim;
  vcfg.cond_dim = cond_dim;
  vcfg.time_embed_dim = 4;
  vcfg.hidden = {hidden};
  auto field = flowmatch::VelocityField::create(vcfg, rng);
  stochpolicy::NoiseHeadConfig ncfg;
  ncfg.sigma_min = sigma_min;
  ncfg.sigma_max = sigma_max;
  ncfg.hidden = {hidden};
  return NoisyFlowPolicy::create(std::move(field), ncfg, flowmatch::DiscretizationScheme::uniform(steps), clip_bound,
                                 rng);
}

std::vector<CheckResult> gradient_checks(std::uint64_t seed, std::size_t seeds, double tol) {
  std::vector<CheckResult> out;

  out.push_back(worst_over_seeds("grad reflow_loss", seed, seeds, tol, [](SeededRng& rng) {
    auto field = probe_field(false, 3, 2, rng);
    flowmatch::FlowBatch b{random_matrix(6, 3, rng), random_matrix(6, 3, rng), random_matrix(6, 2, rng), Vector(6)};
    for (Eigen::Index i = 0; i < 6; ++i) b.t(i) = rng.uniform_open();
    const auto analytic = flowmatch::reflow_loss(field, b).grads.flatten();
    auto work = field;
    const auto numeric = numerics::finite_diff_grad(
        [&](std::span<const double> p) {
          work.net().assign(p);
          return flowmatch::reflow_loss(work, b).loss;
        },
        field.net().flatten(), kStep);
    return numerics::max_relative_error(analytic, numeric);
  }));

  out.push_back(worst_over_seeds("grad shortcut_loss", seed, seeds, tol, [](SeededRng& rng) {
    auto field = probe_field(true, 3, 2, rng);
    flowmatch::FlowBatch b{random_matrix(8, 3, rng), random_matrix(8, 3, rng), random_matrix(8, 2, rng), Vector(8)};
    for (Eigen::Index i = 0; i < 8; ++i) b.t(i) = rng.uniform_open();
    const auto plan = flowmatch::plan_shortcut(b, {}, rng);
    const Matrix target = flowmatch::shortcut_targets(field, plan);
    const auto analytic = flowmatch::shortcut_loss(field, plan).grads.flatten();
    auto work = field;
    const auto numeric = numerics::finite_diff_grad(
        [&](std::span<const double> p) {
          work.net().assign(p);
          return flowmatch::shortcut_loss(work, plan, target).loss;
        },
        field.net().flatten(), kStep);
    return numerics::max_relative_error(analytic, numeric);
  }));

  out.push_back(worst_over_seeds("grad chain_logprob", seed, seeds, tol, [](SeededRng& rng) {
    auto policy = make_probe_policy(2, 3, 3, 6, 0.1, 0.5, 10.0, rng);
    const Vector obs = random_matrix(3, 1, rng).col(0);
    const auto chain = stochpolicy::sample_chain(policy, obs, rng);
    const auto analytic = stochpolicy::chain_logprob(policy, chain, obs).grads.flatten();
    const auto numeric =
        fd_policy(policy, [&](const NoisyFlowPolicy& p) { return stochpolicy::chain_logprob(p, chain, obs).joint; });
    return numerics::max_relative_error(analytic, numeric);
  }));

  out.push_back(worst_over_seeds("grad ppo_clip_loss", seed, seeds, tol, [](SeededRng& rng) {
    auto policy = make_probe_policy(2, 3, 2, 6, 0.1, 0.5, 10.0, rng);
    const Matrix obs = random_matrix(6, 3, rng);
    const auto batch = sample_batch(policy, obs, rng);
    const auto ev = stochpolicy::evaluate_chains(policy, batch);
    // Old log-probs offset so some samples sit inside and some outside the clip range.
    Vector old = ev.logprob;
    Vector adv(6);
    for (Eigen::Index i = 0; i < 6; ++i) {
      old(i) += (i % 2 == 0 ? 0.05 : 0.6) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
      adv(i) = rng.normal();
    }
    const double eps = 0.2;
    const auto ppo = rlcore::ppo_clip_loss(ev.logprob, old, adv, eps);
    auto grads = stochpolicy::PolicyGrads::zeros_like(policy);
    stochpolicy::backprop_chains(policy, batch, ev, ppo.grad_logp_new, nullptr, grads);
    const auto numeric = fd_policy(policy, [&](const NoisyFlowPolicy& p) {
      return rlcore::ppo_clip_loss(stochpolicy::evaluate_chains(p, batch).logprob, old, adv, eps).loss;
    });
    return numerics::max_relative_error(grads.flatten(), numeric);
  }));

  out.push_back(worst_over_seeds("grad entropy_regularizer", seed, seeds, tol, [](SeededRng& rng) {
    auto policy = make_probe_policy(2, 3, 3, 6, 0.1, 0.5, 10.0, rng);
    const auto batch = sample_batch(policy, random_matrix(5, 3, rng), rng);
    const auto analytic = rlcore::entropy_regularizer(policy, batch).grads.flatten();
    const auto numeric =
        fd_policy(policy, [&](const NoisyFlowPolicy& p) { return rlcore::entropy_regularizer(p, batch).value; });
    return numerics::max_relative_error(analytic, numeric);
  }));

  out.push_back(worst_over_seeds("grad w2_regularizer", seed, seeds, tol, [](SeededRng& rng) {
    auto reference = make_probe_policy(2, 3, 3, 6, 0.1, 0.5, 10.0, rng);
    auto policy = reference;
    auto flat = stochpolicy::flatten_params(policy);
    for (auto& x : flat) x += 0.1 * rng.normal();
    stochpolicy::assign_params(policy, flat);
    const Matrix obs = random_matrix(5, 3, rng);
    const Matrix a0 = random_matrix(5, 2, rng);
    const auto analytic = rlcore::w2_regularizer_from_noise(policy, reference, obs, a0).grads.flatten();
    const auto numeric = fd_policy(policy, [&](const NoisyFlowPolicy& p) {
      return rlcore::w2_regularizer_from_noise(p, reference, obs, a0).value;
    });
    return numerics::max_relative_error(analytic, numeric);
  }));

  out.push_back(worst_over_seeds("grad critic_loss", seed, seeds, tol, [](SeededRng& rng) {
    rlcore::CriticConfig cfg;
    cfg.hidden = {8, 8};
    cfg.output_bias = 0.5;
    const auto critic = rlcore::Critic::create(cfg, 4, rng);
    const Matrix obs = random_matrix(7, 4, rng);
    const Vector ret = random_matrix(7, 1, rng, 2.0).col(0);
    const auto analytic = rlcore::critic_loss(critic, obs, ret, 0.5).grads.flatten();
    auto work = critic;
    const auto numeric = numerics::finite_diff_grad(
        [&](std::span<const double> p) {
          work.net.assign(p);
          return rlcore::critic_loss(work, obs, ret, 0.5).loss;
        },
        critic.net.flatten(), kStep);
    return numerics::max_relative_error(analytic, numeric);
  }));

  return out;
}

std::vector<CheckResult> likelihood_checks(std::uint64_t seed, double tol) {
  std::vector<CheckResult> out;
  for (std::size_t K : {1, 2, 4, 8}) {
    SeededRng rng(seed, 200 + K);
    auto policy = make_probe_policy(4, 3, K, 8, 0.1, 0.3, 1.0, rng);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const Vector obs = random_matrix(3, 1, rng).col(0);
      const auto chain = stochpolicy::sample_chain(policy, obs, rng);
      double joint = 0.0;
      for (Eigen::Index j = 0; j < chain.actions.cols(); ++j) joint += gaussian_logpdf(chain.actions(0, j), 0.0, 1.0);
      for (std::size_t k = 0; k < K; ++k) {
        const Vector a = chain.actions.row(static_cast<Eigen::Index>(k)).transpose();
        const Vector v = policy.velocity.evaluate(flowmatch::as_row(a), flowmatch::as_row(obs),
                                                  std::vector<double>{policy.scheme.t(k)},
                                                  std::vector<double>{policy.scheme.dt(k)})
                             .row(0)
                             .transpose();
        const Vector sigma = stochpolicy::sigma_forward(policy, policy.scheme.t(k), a, obs);
        for (Eigen::Index j = 0; j < a.size(); ++j) {
          joint += gaussian_logpdf(chain.actions(static_cast<Eigen::Index>(k + 1), j),
                                   a(j) + policy.scheme.dt(k) * v(j), sigma(j));
        }
      }
      worst = std::max(worst, std::abs(joint - chain.joint_logprob));
    }
    out.push_back({"likelihood K=" + std::to_string(K), worst <= tol, fmt("max abs error %.3e", worst)});
  }
  return out;
}

BanditGradient bandit_gradient(std::size_t steps, std::size_t rollouts, std::uint64_t seed) {
  SeededRng init(seed, 300 + steps);
  const auto policy = make_probe_policy(1, 1, steps, 4, 0.1, 0.5, 10.0, init);
  const auto n = static_cast<Eigen::Index>(rollouts);
  const Matrix obs = Matrix::Constant(n, 1, 0.5);
  const std::size_t groups = 100;
  const Eigen::Index per = n / static_cast<Eigen::Index>(groups);
  const std::size_t P = stochpolicy::flatten_params(policy).size();

  BanditGradient out;

  // Score-function estimate: (1/N) sum_i r_i grad sum_k ln pi(a^{k+1}_i | a^k_i).
  {
    SeededRng rng(seed, 400 + steps);
    const Matrix a0 = random_matrix(n, 1, rng);
    std::vector<Matrix> eps;
    for (std::size_t k = 0; k < steps; ++k) eps.push_back(random_matrix(n, 1, rng));
    std::vector<Matrix> trace;
    const Matrix aK = final_actions(policy, obs, a0, eps, &trace);
    const Vector r = -(aK.col(0).array() - 2.0).square().matrix();
    std::vector<std::vector<double>> group_grads;
    for (std::size_t g = 0; g < groups; ++g) {
      stochpolicy::ChainBatch batch;
      const Eigen::Index start = static_cast<Eigen::Index>(g) * per;
      for (const auto& m : trace) batch.actions.push_back(m.middleRows(start, per));
      batch.obs = obs.middleRows(start, per);
      const auto ev = stochpolicy::evaluate_chains(policy, batch);
      auto grads = stochpolicy::PolicyGrads::zeros_like(policy);
      const Vector w = r.segment(start, per) / static_cast<double>(per);
      stochpolicy::backprop_chains(policy, batch, ev, w, nullptr, grads);
      group_grads.push_back(grads.flatten());
    }
    out.score_function.assign(P, 0.0);
    out.score_se.assign(P, 0.0);
    for (std::size_t p = 0; p < P; ++p) {
      double mean = 0.0;
      for (const auto& g : group_grads) mean += g[p];
      mean /= static_cast<double>(groups);
      double var = 0.0;
      for (const auto& g : group_grads) var += (g[p] - mean) * (g[p] - mean);
      var /= static_cast<double>(groups - 1);
      out.score_function[p] = mean;
      out.score_se[p] = std::sqrt(var / static_cast<double>(groups));
    }
  }

  // Finite differences of J with common random numbers.
  {
    SeededRng rng(seed, 500 + steps);
    const Matrix a0 = random_matrix(n, 1, rng);
    std::vector<Matrix> eps;
    for (std::size_t k = 0; k < steps; ++k) eps.push_back(random_matrix(n, 1, rng));
    const double h = 1e-5;
    const auto base = stochpolicy::flatten_params(policy);
    auto work = policy;
    out.finite_diff.assign(P, 0.0);
    out.finite_diff_se.assign(P, 0.0);
    for (std::size_t p = 0; p < P; ++p) {
      auto plus = base;
      auto minus = base;
      plus[p] += h;
      minus[p] -= h;
      stochpolicy::assign_params(work, plus);
      const Matrix a_plus = final_actions(work, obs, a0, eps);
      stochpolicy::assign_params(work, minus);
      const Matrix a_minus = final_actions(work, obs, a0, eps);
      std::vector<double> per_group(groups);
      double mean = 0.0;
      for (std::size_t g = 0; g < groups; ++g) {
        const Eigen::Index start = static_cast<Eigen::Index>(g) * per;
        per_group[g] = (bandit_reward_mean(a_plus.middleRows(start, per)) -
                        bandit_reward_mean(a_minus.middleRows(start, per))) /
                       (2.0 * h);
        mean += per_group[g];
      }
      mean /= static_cast<double>(groups);
      double var = 0.0;
      for (double v : per_group) var += (v - mean) * (v - mean);
      var /= static_cast<double>(groups - 1);
      out.finite_diff[p] = mean;
      out.finite_diff_se[p] = std::sqrt(var / static_cast<double>(groups));
    }
  }

  for (std::size_t p = 0; p < P; ++p) {
    const double se = std::hypot(out.score_se[p], out.finite_diff_se[p]);
    const double diff = std::abs(out.score_function[p] - out.finite_diff[p]);
    out.worst_z = std::max(out.worst_z, se > 0.0 ? diff / se : (diff > 0.0 ? INFINITY : 0.0));
  }
  return out;
}

std::vector<CheckResult> bandit_checks(std::uint64_t seed, std::size_t rollouts, double z_limit) {
  std::vector<CheckResult> out;
  for (std::size_t K : {1, 2, 4}) {
    const auto g = bandit_gradient(K, rollouts, seed);
    out.push_back({"bandit gradient K=" + std::to_string(K), g.worst_z <= z_limit,
                   fmt("worst deviation %.2f standard errors", g.worst_z)});
  }
  return out;
}

std::vector<CheckResult> run_verify_suite(std::uint64_t seed) {
  std::vector<CheckResult> all = gradient_checks(seed);
  for (auto& c : likelihood_checks(seed)) all.push_back(std::move(c));
  for (auto& c : bandit_checks(seed)) all.push_back(std::move(c));
  return all;
}

}  // namespace reinflow::harness
