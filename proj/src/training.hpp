#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "data.hpp"
#include "pipeline.hpp"

namespace tslstm {

// Element-wise clamp of every gradient entry into [-threshold, threshold].
void clip_gradients(ModelGrads& grads, double threshold);

struct AdadeltaState {
  ModelParams sq_grad;   // E[g^2]
  ModelParams sq_delta;  // E[dx^2]
  double rho = 0.95;
  double epsilon = 1e-6;
  double lr_scale = 1.0;

  static AdadeltaState init(const ModelConfig& cfg, double rho, double epsilon,
                            double lr_scale);
};

void adadelta_step(ModelParams& params, const ModelGrads& grads, AdadeltaState& state);

struct TrainConfig {
  std::size_t batch_size = 16;
  std::size_t max_epochs = 500;
  std::size_t patience = 20;
  double clip_threshold = 10.0;
  double dropout_rate = 0.5;
  bool encoder_dropout = true;
  double lr_scale = 1.0;
  double rho = 0.95;
  double epsilon = 1e-6;
  std::size_t max_caption_len = 30;
  int vocab_min_count = 2;
  // Optional stop once training perplexity drops below this (overfit runs).
  std::optional<double> target_train_perplexity;
  unsigned long long seed = 0;

  // Model dimensions; feature_dim and vocab_size come from the data.
  std::size_t enc_hidden = 512;
  std::size_t word_hidden = 512;
  std::size_t mm_hidden = 512;
  std::size_t embed_dim = 512;
  std::size_t n_e = 3;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_perplexity = 0.0;
  double val_loss = 0.0;
  double val_perplexity = 0.0;
  double wall_seconds = 0.0;
  bool improved = false;
};

struct Checkpoint {
  ModelConfig model_config;
  TrainConfig train_config;
  Vocabulary vocab;
  ModelParams current;  // parameters at the last completed epoch
  ModelParams best;     // parameters of the best validation epoch
  AdadeltaState optimizer;
  std::size_t epoch = 0;
  double best_val_loss = 0.0;
  std::size_t epochs_without_improvement = 0;
  std::string rng_state;

  nlohmann::json to_json() const;
  static Checkpoint from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochRecord> log;
  bool stopped_early = false;
};

// Mini-batch MLE training with adadelta, element-wise clipping, and early
// stopping on validation loss. Deterministic under a fixed seed. Pass a
// checkpoint to resume with an identical trajectory.
TrainResult train(const Dataset& ds, const TrainConfig& cfg,
                  const Checkpoint* resume = nullptr);

struct GradCheckReport {
  struct Entry {
    std::string tensor;
    double max_rel_err = 0.0;
  };
  std::vector<Entry> entries;
  double features_max_rel_err = 0.0;
  double tolerance = 1e-4;
  bool passed = false;

  nlohmann::json to_json() const;
};

// Compare analytic BPTT gradients against central finite differences
// (eps = 1e-5) for every parameter tensor and the input features, on a
// miniature random model.
GradCheckReport gradient_check(const ModelConfig& cfg, unsigned long long seed,
                               std::size_t n_v, std::size_t caption_len,
                               BackwardMutation mut = BackwardMutation::none);

}  // namespace tslstm
