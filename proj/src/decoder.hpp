#pragma once

#include <optional>

#include "model.hpp"
#include "tokens.hpp"

namespace tslstm {

enum class Mode { train, eval };

struct DecoderState {
  LstmState word;  // (q_t, u_t)
  LstmState mm;    // (h'_t, c'_t)
  static DecoderState zeros(const ModelConfig& cfg) {
    return {LstmState::zeros(cfg.word_hidden), LstmState::zeros(cfg.mm_hidden)};
  }
};

struct StepCache {
  int token = 0;
  Vector embed_mask, word_mask, mm_mask;  // dropout masks
  LstmCache word_cache;
  MlstmCache mm_cache;
  Vector mm_h_dropped;  // input to the output head
  Vector prob;
};

struct StepResult {
  DecoderState state;
  Vector prob;
  StepCache cache;
};

// One decode step: embed -> word LSTM -> M-LSTM (with context y) ->
// softmax head. `rng` is only consulted in train mode.
StepResult decode_step(int prev_token, const DecoderState& state, const Vector& y,
                       const ModelParams& p, double dropout_rate, Mode mode,
                       std::mt19937_64* rng);

struct DecoderLoss {
  double loss = 0.0;                    // negative mean per-token log-likelihood
  std::vector<double> token_log_probs;  // log p(target_t), one per target
  std::vector<StepCache> caches;
};

// Teacher-forced scoring of a caption [BOS, s_1, ..., s_T, EOS]: inputs are
// all tokens but the last, targets all tokens but the first.
DecoderLoss teacher_forced_loss(const std::vector<int>& caption, const Vector& y,
                                const ModelParams& p, double dropout_rate, Mode mode,
                                std::mt19937_64* rng);

// BPTT through the decoder; accumulates parameter gradients into `g` and
// returns the gradient w.r.t. the fused context y.
Vector decoder_backward(const DecoderLoss& fwd, const std::vector<int>& caption,
                        const ModelParams& p, ModelGrads& g,
                        BackwardMutation mut = BackwardMutation::none);

struct DecodeResult {
  std::vector<int> tokens;  // BOS ... EOS
  double log_prob = 0.0;    // summed log-probability of emitted tokens
};

// Argmax decoding from BOS; ties broken by lowest token index. PAD, BOS and
// UNK are never emitted.
DecodeResult greedy_decode(const Vector& y, const ModelParams& p, std::size_t max_len);

// Beam search over summed log-probability. Finished hypotheses leave the
// beam and compete in the final ranking; ties break by shorter length, then
// lexicographic token order.
DecodeResult beam_search(const Vector& y, const ModelParams& p, std::size_t width,
                         std::size_t max_len, bool length_normalize = false);

}  // namespace tslstm
