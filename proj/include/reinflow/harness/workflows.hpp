#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "reinflow/envsim/expert.hpp"
#include "reinflow/harness/config.hpp"

namespace reinflow::harness {

// Output root: $REINFLOW_OUT_DIR when set, otherwise config.out_dir.
std::filesystem::path output_root(const RunConfig& config);
// Relative paths resolve against the output root.
std::filesystem::path resolve_output(const RunConfig& config, const std::string& path);

// Raised when fine-tuning hits a non-finite loss; `path` holds the minibatch dump.
class NumericAbort : public std::runtime_error {
 public:
  NumericAbort(const std::string& what, std::filesystem::path path) : std::runtime_error(what), path_(std::move(path)) {}
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

struct DemosOutcome {
  std::filesystem::path dataset;
  std::size_t records = 0;
  double mean_return = 0.0;
  double success_rate = 0.0;
};
DemosOutcome run_demos(const RunConfig& config);

struct PretrainOutcome {
  std::filesystem::path policy;
  double final_loss = 0.0;
  envsim::EvalResult eval;
};
// Uses the demo dataset at config.demo_path, generating it first if absent.
PretrainOutcome run_pretrain(const RunConfig& config);

struct FinetuneOutcome {
  std::filesystem::path checkpoint;
  std::filesystem::path metrics;
  std::filesystem::path plot;
  envsim::EvalResult pretrained_eval;
  envsim::EvalResult final_eval;
};
// Starts from the pretrained policy, or continues from `resume` (a fine-tuning
// checkpoint). `stop_after` ends the run early after that many total
// iterations, leaving a checkpoint behind.
FinetuneOutcome run_finetune(const RunConfig& config, const std::optional<std::filesystem::path>& resume = {},
                             std::optional<std::size_t> stop_after = {});

// Deterministic evaluation of a policy file or fine-tuning checkpoint.
envsim::EvalResult run_eval(const RunConfig& config, const std::filesystem::path& checkpoint,
                            std::size_t episodes);

}  // namespace reinflow::harness
