#include "reinflow/harness/cli.hpp"

#include <cstdio>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "reinflow/errors.hpp"
#include "reinflow/harness/verify.hpp"
#include "reinflow/harness/workflows.hpp"

namespace reinflow::harness {

namespace {

RunConfig configure(const std::string& path, const std::optional<std::uint64_t>& seed) {
  auto config = load_config(path);
  if (seed.has_value()) config.seed = *seed;
  return config;
}

void print_eval(const char* label, const envsim::EvalResult& r) {
  std::printf("%s: mean_return %.6f success_rate %.4f over %zu episodes\n", label, r.mean_return, r.success_rate,
              r.returns.size());
}

}  // namespace

int run_command(int argc, char** argv) {
  CLI::App app{"Flow-policy pretraining and online fine-tuning on toy control tasks"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string checkpoint;
  std::string resume;
  std::optional<std::size_t> episodes;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "run configuration file")->required();
    sub->add_option("--seed", seed, "override the configured seed");
  };
  auto* demos = app.add_subcommand("demos", "generate scripted-expert demonstrations");
  add_common(demos);
  auto* pretrain = app.add_subcommand("pretrain", "behavior-clone a flow policy from demonstrations");
  add_common(pretrain);
  auto* finetune = app.add_subcommand("finetune", "fine-tune a pretrained policy online");
  add_common(finetune);
  finetune->add_option("--resume", resume, "continue from a fine-tuning checkpoint");
  auto* eval = app.add_subcommand("eval", "evaluate the deterministic policy");
  add_common(eval);
  eval->add_option("--checkpoint", checkpoint, "policy file or fine-tuning checkpoint (default: latest)");
  eval->add_option("--episodes", episodes, "evaluation episodes (default: finetune.eval_episodes)");
  auto* verify = app.add_subcommand("verify", "run the gradient, likelihood and estimator checks");
  verify->add_option("--seed", seed, "seed for the probe problems");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (verify->parsed()) {
      const auto results = run_verify_suite(seed.value_or(0));
      bool ok = true;
      for (const auto& r : results) {
        std::printf("%s %s %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
        ok = ok && r.passed;
      }
      return ok ? 0 : 1;
    }
    const auto config = configure(config_path, seed);
    if (demos->parsed()) {
      const auto out = run_demos(config);
      std::printf("wrote %zu records to %s (expert mean_return %.6f success_rate %.4f)\n", out.records,
                  out.dataset.c_str(), out.mean_return, out.success_rate);
    } else if (pretrain->parsed()) {
      const auto out = run_pretrain(config);
      std::printf("final loss %.6g, policy written to %s\n", out.final_loss, out.policy.c_str());
      print_eval("pretrained", out.eval);
    } else if (finetune->parsed()) {
      const auto out = run_finetune(config, resume.empty() ? std::nullopt : std::optional(std::filesystem::path(resume)));
      print_eval("pretrained", out.pretrained_eval);
      print_eval("final", out.final_eval);
      std::printf("metrics %s\nplot %s\ncheckpoint %s\n", out.metrics.c_str(), out.plot.c_str(),
                  out.checkpoint.c_str());
    } else if (eval->parsed()) {
      std::filesystem::path path = checkpoint;
      if (path.empty()) {
        const auto latest = output_root(config) / "finetune.ckpt";
        path = std::filesystem::exists(latest) ? latest : resolve_output(config, config.pretrained_path);
      }
      print_eval("eval", run_eval(config, path, episodes.value_or(config.eval_episodes)));
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const CheckpointError& e) {
    std::fprintf(stderr, "checkpoint error: %s\n", e.what());
    return 3;
  } catch (const NumericAbort& e) {
    std::fprintf(stderr, "numeric abort: %s\ndiagnostics: %s\n", e.what(), e.path().c_str());
    return 4;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 4;
  }
  return 0;
}

}  // namespace reinflow::harness
