#pragma once

#include <functional>
#include <string>
#include <vector>

#include "encoder.hpp"
#include "nn.hpp"

namespace tslstm {

struct ModelConfig {
  std::size_t feature_dim = 0;   // d_v
  std::size_t enc_hidden = 512;  // d_h
  std::size_t word_hidden = 512; // d_q
  std::size_t mm_hidden = 512;   // d_h'
  std::size_t embed_dim = 512;   // d_m
  std::size_t vocab_size = 0;    // d_s
  std::size_t n_e = 3;

  std::size_t context_dim() const { return feature_dim + enc_hidden; }
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Full parameter set: temporal-pooling encoder LSTM, word embedding, word
// LSTM, multi-modal LSTM, and the softmax output head.
struct ModelParams {
  LstmParams encoder;
  EmbeddingParams embedding;
  LstmParams word_lstm;
  MlstmParams mm_lstm;
  OutputParams output;

  static ModelParams zeros(const ModelConfig& cfg);
  // Uniform [-0.08, 0.08] weights, zero biases, forget-gate bias +1.
  static ModelParams init(const ModelConfig& cfg, std::mt19937_64& rng);
};

using ModelGrads = ModelParams;

struct NamedTensor {
  std::string name;
  double* data;
  std::size_t size;
};

// Flat view over every parameter tensor in a fixed, documented order.
// Shared by clipping, adadelta, serialization, and the gradient checker.
std::vector<NamedTensor> named_tensors(ModelParams& p);
std::vector<NamedTensor> named_tensors(const ModelParams& p);  // const-casts for read-only walks

}  // namespace tslstm
