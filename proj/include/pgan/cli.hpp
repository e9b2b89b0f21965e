#pragma once

#include <string>
#include <vector>

#include "pgan/config.hpp"
#include "pgan/retrieval_eval.hpp"

namespace pgan {

inline constexpr const char* kVersion = "0.1.0";

/// Command wrappers behind the `pgan` binary. Each returns a process exit
/// code, writes its outputs under `out_dir`, and appends one line to
/// `out_dir/runs.jsonl`.
int cmd_generate(const AppConfig& cfg, const std::string& out_dir);

int cmd_train(const AppConfig& cfg, const std::string& variant,
              const std::string& data_dir, const std::string& out_dir,
              const std::string& resume = "", const std::string& proposals = "");

int cmd_eval(const AppConfig& cfg, const std::string& checkpoint,
             const std::string& data_dir, const std::string& out_dir);

int cmd_attention_report(const AppConfig& cfg, const std::string& checkpoint,
                         const std::string& data_dir, const std::string& out_dir);

struct AblateAxes {
    std::vector<std::string> variants = {"pgan"};
    std::vector<int> d_values;        // empty = config default
    std::vector<double> lambda_values;
    int seeds = 1;
};

int cmd_ablate(const AppConfig& cfg, const AblateAxes& axes,
               const std::string& data_dir, const std::string& out_dir);

/// Library-level eval used by cmd_eval and the acceptance suite: trains
/// nothing, loads the checkpoint, embeds the test split, runs the protocol.
MetricsReport evaluate_checkpoint(const AppConfig& cfg,
                                  const std::string& checkpoint,
                                  const Dataset& test);

} // namespace pgan
