#include "nn.hpp"

#include <cmath>

namespace tslstm {

LstmParams LstmParams::zeros(std::size_t hidden, std::size_t input) {
  LstmParams p;
  p.w_xf = p.w_xi = p.w_xo = p.w_xg = Matrix(hidden, input);
  p.w_hf = p.w_hi = p.w_ho = p.w_hg = Matrix(hidden, hidden);
  p.b_f = p.b_i = p.b_o = p.b_g = Vector(hidden, 0.0);
  return p;
}

MlstmParams MlstmParams::zeros(std::size_t hidden, std::size_t input, std::size_t context) {
  MlstmParams p;
  p.base = LstmParams::zeros(hidden, input);
  p.w_yf = p.w_yi = p.w_yo = p.w_yg = Matrix(hidden, context);
  return p;
}

namespace {

void check_cell_shapes(const Vector& x, const LstmState& prev, const LstmParams& p,
                       const char* who) {
  if (x.size() != p.input_size()) {
    throw ShapeError(std::string(who) + ": input length " + std::to_string(x.size()) +
                     " vs cell input width " + std::to_string(p.input_size()));
  }
  if (prev.h.size() != p.hidden_size() || prev.c.size() != p.hidden_size()) {
    throw ShapeError(std::string(who) + ": state length " + std::to_string(prev.h.size()) +
                     " vs hidden size " + std::to_string(p.hidden_size()));
  }
}

void add_inplace(Vector& a, const Vector& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

// Finish the step once gate pre-activations are computed.
std::pair<LstmState, LstmCache> finish_forward(Vector af, Vector ai, Vector ao, Vector ag,
                                               const Vector& x, const LstmState& prev) {
  LstmCache cache;
  cache.x = x;
  cache.h_prev = prev.h;
  cache.c_prev = prev.c;
  cache.f = sigmoid(af);
  cache.i = sigmoid(ai);
  cache.o = sigmoid(ao);
  cache.g = tanh(ag);
  const std::size_t n = cache.f.size();
  cache.c.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    cache.c[k] = cache.f[k] * prev.c[k] + cache.i[k] * cache.g[k];
  }
  cache.tanh_c = tanh(cache.c);
  LstmState next;
  next.c = cache.c;
  next.h.resize(n);
  for (std::size_t k = 0; k < n; ++k) next.h[k] = cache.o[k] * cache.tanh_c[k];
  return {std::move(next), std::move(cache)};
}

struct GateDeltas {
  Vector da_f, da_i, da_o, da_g;
  Vector dc_prev;
};

// Backprop from (dh, dc) to gate pre-activation deltas.
GateDeltas gate_backward(const Vector& dh, const Vector& dc_in, const LstmCache& cache,
                         BackwardMutation mut) {
  const std::size_t n = dh.size();
  GateDeltas d;
  d.da_f.resize(n);
  d.da_i.resize(n);
  d.da_o.resize(n);
  d.da_g.resize(n);
  d.dc_prev.assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double tc = cache.tanh_c[k];
    const double do_ = dh[k] * tc;
    const double dc = dc_in[k] + dh[k] * cache.o[k] * (1.0 - tc * tc);
    const double df = dc * cache.c_prev[k];
    const double di = dc * cache.g[k];
    const double dg = dc * cache.i[k];
    if (mut != BackwardMutation::drop_prev_cell) {
      d.dc_prev[k] = dc * cache.f[k];
    }
    d.da_f[k] = df * cache.f[k] * (1.0 - cache.f[k]);
    d.da_i[k] = di * cache.i[k] * (1.0 - cache.i[k]);
    d.da_o[k] = do_ * cache.o[k] * (1.0 - cache.o[k]);
    d.da_g[k] = dg * (1.0 - cache.g[k] * cache.g[k]);
  }
  return d;
}

}  // namespace

std::pair<LstmState, LstmCache> lstm_forward(const Vector& x, const LstmState& prev,
                                             const LstmParams& p) {
  check_cell_shapes(x, prev, p, "lstm_forward");
  Vector af = matvec(p.w_xf, x);
  add_inplace(af, matvec(p.w_hf, prev.h));
  add_inplace(af, p.b_f);
  Vector ai = matvec(p.w_xi, x);
  add_inplace(ai, matvec(p.w_hi, prev.h));
  add_inplace(ai, p.b_i);
  Vector ao = matvec(p.w_xo, x);
  add_inplace(ao, matvec(p.w_ho, prev.h));
  add_inplace(ao, p.b_o);
  Vector ag = matvec(p.w_xg, x);
  add_inplace(ag, matvec(p.w_hg, prev.h));
  add_inplace(ag, p.b_g);
  return finish_forward(std::move(af), std::move(ai), std::move(ao), std::move(ag), x, prev);
}

LstmBackwardResult lstm_backward(const Vector& dh, const Vector& dc, const LstmCache& cache,
                                 const LstmParams& p, LstmGrads& grads, BackwardMutation mut) {
  if (dh.size() != p.hidden_size() || cache.x.size() != p.input_size()) {
    throw ShapeError("lstm_backward: cache/params shape mismatch");
  }
  GateDeltas d = gate_backward(dh, dc, cache, mut);

  add_outer(grads.w_xf, d.da_f, cache.x);
  add_outer(grads.w_xi, d.da_i, cache.x);
  add_outer(grads.w_xo, d.da_o, cache.x);
  add_outer(grads.w_xg, d.da_g, cache.x);
  add_outer(grads.w_hf, d.da_f, cache.h_prev);
  add_outer(grads.w_hi, d.da_i, cache.h_prev);
  add_outer(grads.w_ho, d.da_o, cache.h_prev);
  add_outer(grads.w_hg, d.da_g, cache.h_prev);
  add_inplace(grads.b_f, d.da_f);
  add_inplace(grads.b_i, d.da_i);
  add_inplace(grads.b_o, d.da_o);
  add_inplace(grads.b_g, d.da_g);

  LstmBackwardResult out;
  out.dx = matvec_transpose(p.w_xf, d.da_f);
  add_inplace(out.dx, matvec_transpose(p.w_xi, d.da_i));
  add_inplace(out.dx, matvec_transpose(p.w_xo, d.da_o));
  add_inplace(out.dx, matvec_transpose(p.w_xg, d.da_g));
  out.dprev.h = matvec_transpose(p.w_hf, d.da_f);
  add_inplace(out.dprev.h, matvec_transpose(p.w_hi, d.da_i));
  add_inplace(out.dprev.h, matvec_transpose(p.w_ho, d.da_o));
  add_inplace(out.dprev.h, matvec_transpose(p.w_hg, d.da_g));
  out.dprev.c = std::move(d.dc_prev);
  return out;
}

std::pair<LstmState, MlstmCache> mlstm_forward(const Vector& q, const Vector& y,
                                               const LstmState& prev, const MlstmParams& p) {
  check_cell_shapes(q, prev, p.base, "mlstm_forward");
  if (y.size() != p.context_size()) {
    throw ShapeError("mlstm_forward: context length " + std::to_string(y.size()) +
                     " vs context width " + std::to_string(p.context_size()));
  }
  Vector af = matvec(p.base.w_xf, q);
  add_inplace(af, matvec(p.base.w_hf, prev.h));
  add_inplace(af, matvec(p.w_yf, y));
  add_inplace(af, p.base.b_f);
  Vector ai = matvec(p.base.w_xi, q);
  add_inplace(ai, matvec(p.base.w_hi, prev.h));
  add_inplace(ai, matvec(p.w_yi, y));
  add_inplace(ai, p.base.b_i);
  Vector ao = matvec(p.base.w_xo, q);
  add_inplace(ao, matvec(p.base.w_ho, prev.h));
  add_inplace(ao, matvec(p.w_yo, y));
  add_inplace(ao, p.base.b_o);
  Vector ag = matvec(p.base.w_xg, q);
  add_inplace(ag, matvec(p.base.w_hg, prev.h));
  add_inplace(ag, matvec(p.w_yg, y));
  add_inplace(ag, p.base.b_g);
  auto [state, cache] =
      finish_forward(std::move(af), std::move(ai), std::move(ao), std::move(ag), q, prev);
  MlstmCache mc;
  mc.cell = std::move(cache);
  mc.y = y;
  return {std::move(state), std::move(mc)};
}

MlstmBackwardResult mlstm_backward(const Vector& dh, const Vector& dc, const MlstmCache& cache,
                                   const MlstmParams& p, MlstmGrads& grads,
                                   BackwardMutation mut) {
  if (dh.size() != p.hidden_size()) {
    throw ShapeError("mlstm_backward: cache/params shape mismatch");
  }
  GateDeltas d = gate_backward(dh, dc, cache.cell, mut);

  add_outer(grads.base.w_xf, d.da_f, cache.cell.x);
  add_outer(grads.base.w_xi, d.da_i, cache.cell.x);
  add_outer(grads.base.w_xo, d.da_o, cache.cell.x);
  add_outer(grads.base.w_xg, d.da_g, cache.cell.x);
  add_outer(grads.base.w_hf, d.da_f, cache.cell.h_prev);
  add_outer(grads.base.w_hi, d.da_i, cache.cell.h_prev);
  add_outer(grads.base.w_ho, d.da_o, cache.cell.h_prev);
  add_outer(grads.base.w_hg, d.da_g, cache.cell.h_prev);
  add_outer(grads.w_yf, d.da_f, cache.y);
  add_outer(grads.w_yi, d.da_i, cache.y);
  add_outer(grads.w_yo, d.da_o, cache.y);
  add_outer(grads.w_yg, d.da_g, cache.y);
  add_inplace(grads.base.b_f, d.da_f);
  add_inplace(grads.base.b_i, d.da_i);
  add_inplace(grads.base.b_o, d.da_o);
  add_inplace(grads.base.b_g, d.da_g);

  MlstmBackwardResult out;
  out.dq = matvec_transpose(p.base.w_xf, d.da_f);
  add_inplace(out.dq, matvec_transpose(p.base.w_xi, d.da_i));
  add_inplace(out.dq, matvec_transpose(p.base.w_xo, d.da_o));
  add_inplace(out.dq, matvec_transpose(p.base.w_xg, d.da_g));
  out.dy = matvec_transpose(p.w_yf, d.da_f);
  add_inplace(out.dy, matvec_transpose(p.w_yi, d.da_i));
  add_inplace(out.dy, matvec_transpose(p.w_yo, d.da_o));
  add_inplace(out.dy, matvec_transpose(p.w_yg, d.da_g));
  out.dprev.h = matvec_transpose(p.base.w_hf, d.da_f);
  add_inplace(out.dprev.h, matvec_transpose(p.base.w_hi, d.da_i));
  add_inplace(out.dprev.h, matvec_transpose(p.base.w_ho, d.da_o));
  add_inplace(out.dprev.h, matvec_transpose(p.base.w_hg, d.da_g));
  out.dprev.c = std::move(d.dc_prev);
  return out;
}

Vector embed(std::size_t token, const EmbeddingParams& p) {
  if (token >= p.w.cols()) {
    throw VocabError("embed: token index " + std::to_string(token) +
                     " out of range for vocabulary of size " + std::to_string(p.w.cols()));
  }
  return p.w.column(token);
}

void embed_backward(std::size_t token, const Vector& dm, Matrix& dw) {
  for (std::size_t r = 0; r < dw.rows(); ++r) dw(r, token) += dm[r];
}

Vector project_softmax(const Vector& h, const OutputParams& p) {
  if (h.size() != p.w.cols()) {
    throw ShapeError("project_softmax: hidden length " + std::to_string(h.size()) +
                     " vs projection " + shape_str(p.w));
  }
  Vector logits = matvec(p.w, h);
  for (std::size_t i = 0; i < logits.size(); ++i) logits[i] += p.b[i];
  return softmax(logits);
}

DropoutResult dropout(const Vector& x, double rate, bool train, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw ConfigError("dropout: rate must be in [0, 1), got " + std::to_string(rate));
  }
  DropoutResult out;
  if (!train || rate == 0.0) {
    out.value = x;
    out.mask = Vector(x.size(), 1.0);
    return out;
  }
  const double keep = 1.0 - rate;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  out.mask.resize(x.size());
  out.value.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out.mask[i] = unif(rng) < rate ? 0.0 : 1.0 / keep;
    out.value[i] = x[i] * out.mask[i];
  }
  return out;
}

}  // namespace tslstm
