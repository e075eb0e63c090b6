#pragma once

#include <cstdint>
#include <random>
#include <utility>

#include "tensor.hpp"

namespace tslstm {

// Gate parameters of a standard LSTM cell. Each gate block maps the input
// (W_x*, hidden x input) and the previous hidden state (W_h*, hidden x hidden)
// plus a bias.
struct LstmParams {
  Matrix w_xf, w_xi, w_xo, w_xg;
  Matrix w_hf, w_hi, w_ho, w_hg;
  Vector b_f, b_i, b_o, b_g;

  static LstmParams zeros(std::size_t hidden, std::size_t input);
  std::size_t hidden_size() const { return b_f.size(); }
  std::size_t input_size() const { return w_xf.cols(); }
};

// Multi-modal LSTM: the standard gate blocks plus a per-gate projection of
// the fused video context y, which is the same vector at every time step.
struct MlstmParams {
  LstmParams base;
  Matrix w_yf, w_yi, w_yo, w_yg;

  static MlstmParams zeros(std::size_t hidden, std::size_t input, std::size_t context);
  std::size_t hidden_size() const { return base.hidden_size(); }
  std::size_t input_size() const { return base.input_size(); }
  std::size_t context_size() const { return w_yf.cols(); }
};

struct LstmState {
  Vector h, c;
  static LstmState zeros(std::size_t hidden) {
    return LstmState{Vector(hidden, 0.0), Vector(hidden, 0.0)};
  }
};

// Everything one forward step needs to replay for BPTT.
struct LstmCache {
  Vector x, h_prev, c_prev;
  Vector f, i, o, g;
  Vector c, tanh_c;
};

struct MlstmCache {
  LstmCache cell;
  Vector y;
};

// Gradient containers reuse the parameter layouts.
using LstmGrads = LstmParams;
using MlstmGrads = MlstmParams;

// Used by the gradcheck harness to prove the checker catches broken
// backward passes: drop_prev_cell removes the f ⊙ dc carry term.
enum class BackwardMutation { none, drop_prev_cell };

std::pair<LstmState, LstmCache> lstm_forward(const Vector& x, const LstmState& prev,
                                             const LstmParams& p);

struct LstmBackwardResult {
  Vector dx;
  LstmState dprev;
};

// Gradients are accumulated additively into `grads` so callers can sum
// across time steps.
LstmBackwardResult lstm_backward(const Vector& dh, const Vector& dc, const LstmCache& cache,
                                 const LstmParams& p, LstmGrads& grads,
                                 BackwardMutation mut = BackwardMutation::none);

std::pair<LstmState, MlstmCache> mlstm_forward(const Vector& q, const Vector& y,
                                               const LstmState& prev, const MlstmParams& p);

struct MlstmBackwardResult {
  Vector dq, dy;
  LstmState dprev;
};

MlstmBackwardResult mlstm_backward(const Vector& dh, const Vector& dc, const MlstmCache& cache,
                                   const MlstmParams& p, MlstmGrads& grads,
                                   BackwardMutation mut = BackwardMutation::none);

// Word embedding: column lookup of W (embed_dim x vocab).
struct EmbeddingParams {
  Matrix w;
};

Vector embed(std::size_t token, const EmbeddingParams& p);
void embed_backward(std::size_t token, const Vector& dm, Matrix& dw);

// Softmax output head: softmax(W h + b).
struct OutputParams {
  Matrix w;
  Vector b;
};

Vector project_softmax(const Vector& h, const OutputParams& p);

struct DropoutResult {
  Vector value;
  Vector mask;  // per-entry multiplier, reused by the backward pass
};

// Inverted dropout: survivors scaled by 1/(1-rate) at train time, exact
// identity in eval mode.
DropoutResult dropout(const Vector& x, double rate, bool train, std::mt19937_64& rng);

}  // namespace tslstm
