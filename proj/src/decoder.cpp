#include "decoder.hpp"

#include <algorithm>
#include <cmath>

namespace tslstm {

namespace {

void validate_caption(const std::vector<int>& caption, std::size_t vocab_size) {
  if (caption.size() < 2 || caption.front() != kBos || caption.back() != kEos) {
    throw ConfigError("caption must be [BOS, ..., EOS]");
  }
  for (std::size_t i = 1; i + 1 < caption.size(); ++i) {
    if (caption[i] == kBos || caption[i] == kEos) {
      throw ConfigError("caption: BOS/EOS only allowed at the ends");
    }
    if (caption[i] < 0 || static_cast<std::size_t>(caption[i]) >= vocab_size) {
      throw VocabError("caption token out of range");
    }
  }
}

bool emittable(int token) { return token != kPad && token != kBos && token != kUnk; }

void mul_inplace(Vector& a, const Vector& mask) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] *= mask[i];
}

}  // namespace

StepResult decode_step(int prev_token, const DecoderState& state, const Vector& y,
                       const ModelParams& p, double dropout_rate, Mode mode,
                       std::mt19937_64* rng) {
  const bool train = mode == Mode::train;
  static std::mt19937_64 dummy_rng;  // never drawn from in eval mode
  std::mt19937_64& r = rng ? *rng : dummy_rng;

  StepResult out;
  out.cache.token = prev_token;

  Vector m = embed(static_cast<std::size_t>(prev_token), p.embedding);
  DropoutResult m_drop = dropout(m, dropout_rate, train, r);
  out.cache.embed_mask = std::move(m_drop.mask);

  auto [word_state, word_cache] = lstm_forward(m_drop.value, state.word, p.word_lstm);
  out.cache.word_cache = std::move(word_cache);
  DropoutResult q_drop = dropout(word_state.h, dropout_rate, train, r);
  out.cache.word_mask = std::move(q_drop.mask);

  auto [mm_state, mm_cache] = mlstm_forward(q_drop.value, y, state.mm, p.mm_lstm);
  out.cache.mm_cache = std::move(mm_cache);
  DropoutResult h_drop = dropout(mm_state.h, dropout_rate, train, r);
  out.cache.mm_mask = std::move(h_drop.mask);
  out.cache.mm_h_dropped = h_drop.value;

  out.prob = project_softmax(h_drop.value, p.output);
  out.cache.prob = out.prob;
  out.state.word = std::move(word_state);
  out.state.mm = std::move(mm_state);
  return out;
}

DecoderLoss teacher_forced_loss(const std::vector<int>& caption, const Vector& y,
                                const ModelParams& p, double dropout_rate, Mode mode,
                                std::mt19937_64* rng) {
  validate_caption(caption, p.output.b.size());
  const std::size_t n_targets = caption.size() - 1;
  DecoderLoss out;
  out.caches.reserve(n_targets);
  out.token_log_probs.reserve(n_targets);
  ModelConfig dims;  // only used for state sizing
  dims.word_hidden = p.word_lstm.hidden_size();
  dims.mm_hidden = p.mm_lstm.hidden_size();
  DecoderState state = DecoderState::zeros(dims);
  double total = 0.0;
  for (std::size_t t = 0; t < n_targets; ++t) {
    StepResult step = decode_step(caption[t], state, y, p, dropout_rate, mode, rng);
    const double lp = std::log(step.prob[caption[t + 1]]);
    out.token_log_probs.push_back(lp);
    total += lp;
    state = std::move(step.state);
    out.caches.push_back(std::move(step.cache));
  }
  out.loss = -total / static_cast<double>(n_targets);
  return out;
}

Vector decoder_backward(const DecoderLoss& fwd, const std::vector<int>& caption,
                        const ModelParams& p, ModelGrads& g, BackwardMutation mut) {
  const std::size_t n_targets = caption.size() - 1;
  if (fwd.caches.size() != n_targets) {
    throw ShapeError("decoder_backward: cache/caption length mismatch");
  }
  const double w = 1.0 / static_cast<double>(n_targets);
  Vector dy(p.mm_lstm.context_size(), 0.0);
  LstmState d_word = LstmState::zeros(p.word_lstm.hidden_size());
  LstmState d_mm = LstmState::zeros(p.mm_lstm.hidden_size());

  for (std::size_t t = n_targets; t-- > 0;) {
    const StepCache& cache = fwd.caches[t];
    // d(loss)/d(logits) = (p - onehot) / n_targets
    Vector dz = cache.prob;
    for (double& v : dz) v *= w;
    dz[caption[t + 1]] -= w;

    add_outer(g.output.w, dz, cache.mm_h_dropped);
    for (std::size_t i = 0; i < dz.size(); ++i) g.output.b[i] += dz[i];

    Vector dh_mm = matvec_transpose(p.output.w, dz);
    mul_inplace(dh_mm, cache.mm_mask);
    for (std::size_t i = 0; i < dh_mm.size(); ++i) dh_mm[i] += d_mm.h[i];

    MlstmBackwardResult mm_back =
        mlstm_backward(dh_mm, d_mm.c, cache.mm_cache, p.mm_lstm, g.mm_lstm, mut);
    for (std::size_t i = 0; i < dy.size(); ++i) dy[i] += mm_back.dy[i];
    d_mm = std::move(mm_back.dprev);

    Vector dq = std::move(mm_back.dq);
    mul_inplace(dq, cache.word_mask);
    for (std::size_t i = 0; i < dq.size(); ++i) dq[i] += d_word.h[i];

    LstmBackwardResult word_back =
        lstm_backward(dq, d_word.c, cache.word_cache, p.word_lstm, g.word_lstm, mut);
    d_word = std::move(word_back.dprev);

    Vector dm = std::move(word_back.dx);
    mul_inplace(dm, cache.embed_mask);
    embed_backward(static_cast<std::size_t>(caption[t]), dm, g.embedding.w);
  }
  return dy;
}

namespace {

struct Hypothesis {
  std::vector<int> tokens;  // emitted tokens, BOS excluded
  double log_prob = 0.0;
  DecoderState state;
  int last_token = kBos;
};

bool better(const Hypothesis& a, const Hypothesis& b, bool length_normalize) {
  const double sa = length_normalize && !a.tokens.empty()
                        ? a.log_prob / static_cast<double>(a.tokens.size())
                        : a.log_prob;
  const double sb = length_normalize && !b.tokens.empty()
                        ? b.log_prob / static_cast<double>(b.tokens.size())
                        : b.log_prob;
  if (sa != sb) return sa > sb;
  if (a.tokens.size() != b.tokens.size()) return a.tokens.size() < b.tokens.size();
  return a.tokens < b.tokens;
}

DecodeResult to_result(const Hypothesis& h) {
  DecodeResult out;
  out.tokens.reserve(h.tokens.size() + 2);
  out.tokens.push_back(kBos);
  out.tokens.insert(out.tokens.end(), h.tokens.begin(), h.tokens.end());
  if (out.tokens.back() != kEos) out.tokens.push_back(kEos);  // unscored, truncation only
  out.log_prob = h.log_prob;
  return out;
}

}  // namespace

DecodeResult greedy_decode(const Vector& y, const ModelParams& p, std::size_t max_len) {
  if (max_len == 0) throw ConfigError("greedy_decode: max_len must be >= 1");
  ModelConfig dims;
  dims.word_hidden = p.word_lstm.hidden_size();
  dims.mm_hidden = p.mm_lstm.hidden_size();
  Hypothesis h;
  h.state = DecoderState::zeros(dims);
  for (std::size_t step = 0; step < max_len; ++step) {
    StepResult r = decode_step(h.last_token, h.state, y, p, 0.0, Mode::eval, nullptr);
    int best = -1;
    for (std::size_t t = 0; t < r.prob.size(); ++t) {
      if (!emittable(static_cast<int>(t))) continue;
      if (best < 0 || r.prob[t] > r.prob[best]) best = static_cast<int>(t);
    }
    h.tokens.push_back(best);
    h.log_prob += std::log(r.prob[best]);
    h.last_token = best;
    h.state = std::move(r.state);
    if (best == kEos) break;
  }
  return to_result(h);
}

DecodeResult beam_search(const Vector& y, const ModelParams& p, std::size_t width,
                         std::size_t max_len, bool length_normalize) {
  if (width == 0) throw ConfigError("beam_search: width must be >= 1");
  if (max_len == 0) throw ConfigError("beam_search: max_len must be >= 1");
  ModelConfig dims;
  dims.word_hidden = p.word_lstm.hidden_size();
  dims.mm_hidden = p.mm_lstm.hidden_size();

  std::vector<Hypothesis> live(1);
  live[0].state = DecoderState::zeros(dims);
  std::vector<Hypothesis> finished;

  for (std::size_t step = 0; step < max_len && !live.empty(); ++step) {
    std::vector<Hypothesis> candidates;
    candidates.reserve(live.size() * 8);
    for (Hypothesis& h : live) {
      StepResult r = decode_step(h.last_token, h.state, y, p, 0.0, Mode::eval, nullptr);
      for (std::size_t t = 0; t < r.prob.size(); ++t) {
        if (!emittable(static_cast<int>(t))) continue;
        Hypothesis next;
        next.tokens = h.tokens;
        next.tokens.push_back(static_cast<int>(t));
        next.log_prob = h.log_prob + std::log(r.prob[t]);
        next.state = r.state;
        next.last_token = static_cast<int>(t);
        candidates.push_back(std::move(next));
      }
    }
    const std::size_t keep = std::min(width, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + keep, candidates.end(),
                      [&](const Hypothesis& a, const Hypothesis& b) {
                        return better(a, b, length_normalize);
                      });
    candidates.resize(keep);
    live.clear();
    const bool last_step = step + 1 == max_len;
    for (Hypothesis& h : candidates) {
      if (h.last_token == kEos || last_step) {
        finished.push_back(std::move(h));
      } else {
        live.push_back(std::move(h));
      }
    }
  }

  const Hypothesis* best = &finished[0];
  for (const Hypothesis& h : finished) {
    if (better(h, *best, length_normalize)) best = &h;
  }
  return to_result(*best);
}

}  // namespace tslstm
