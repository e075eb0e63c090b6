#pragma once

#include <json.hpp>

#include "data.hpp"
#include "training.hpp"

namespace tslstm {

struct DecodeConfig {
  std::size_t beam_width = 5;
  std::size_t max_len = 30;
  bool length_normalize = false;

  void validate() const;
  nlohmann::json to_json() const;
};

struct GradcheckConfig {
  std::size_t feature_dim = 6;
  std::size_t hidden = 3;
  std::size_t embed_dim = 3;
  std::size_t vocab_words = 4;  // plus the 4 reserved tokens
  std::size_t n_v = 6;
  std::size_t n_e = 2;
  std::size_t caption_len = 4;

  ModelConfig model_config() const;
  nlohmann::json to_json() const;
};

// Everything a CLI run can configure, parsed from a single JSON file with
// strict key checking. Section defaults follow the training protocol
// (hiddens 512, dropout 0.5, clip 10, patience 20, beam 5, max length 30).
struct RunConfig {
  unsigned long long seed = 42;
  TrainConfig train;
  SynthConfig synth;
  DecodeConfig decode;
  GradcheckConfig gradcheck;

  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig from_file(const std::string& path);
  nlohmann::json to_json() const;
};

}  // namespace tslstm
