#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"

namespace tslstm {
namespace commands {

// Generate a synthetic dataset on disk; returns a summary.
nlohmann::json cmd_synth(const RunConfig& cfg, const std::string& out_dir);

// Train on a dataset; writes checkpoint.json and train_log.json under
// out_dir. Pass a checkpoint path to resume.
nlohmann::json cmd_train(const RunConfig& cfg, const std::string& manifest_path,
                         const std::string& out_dir, const std::string& resume_path = "");

// Finite-difference gradient check; throws nothing on failure, the caller
// inspects "passed".
nlohmann::json cmd_gradcheck(const RunConfig& cfg, bool mutate);

// Caption every video of a split with beam search; writes id -> caption
// JSON to out_path (empty out_path skips the write).
nlohmann::json cmd_caption(const std::string& checkpoint_path, const std::string& manifest_path,
                           const std::string& split, const DecodeConfig& decode,
                           const std::string& out_path);

// Caption a single feature file.
nlohmann::json cmd_caption_features(const std::string& checkpoint_path,
                                    const std::string& features_path,
                                    const DecodeConfig& decode);

// Score a captions file against a dataset split.
nlohmann::json cmd_eval(const std::string& captions_path, const std::string& manifest_path,
                        const std::string& split);

// Train + evaluate once per N_e value with a shared seed and dataset;
// returns the comparison table.
nlohmann::json cmd_ablate_ne(const RunConfig& cfg, const std::vector<std::size_t>& ne_values,
                             const std::string& manifest_path, const std::string& out_dir);

std::string format_metric_row(const nlohmann::json& metrics, const std::string& label);

}  // namespace commands
}  // namespace tslstm
