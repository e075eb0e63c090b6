#include "pipeline.hpp"

namespace tslstm {

SampleForward sample_loss(const FeatureMatrix& features, const std::vector<int>& caption,
                          const ModelParams& p, const ForwardOptions& opt,
                          std::mt19937_64* rng) {
  const bool train = opt.mode == Mode::train;
  static std::mt19937_64 dummy_rng;
  std::mt19937_64& r = rng ? *rng : dummy_rng;

  SampleForward out;
  out.enc = encode(features, opt.n_e, p.encoder);
  out.enc_h.reserve(out.enc.h.size());
  out.enc_masks.reserve(out.enc.h.size());
  for (const Vector& h : out.enc.h) {
    if (opt.encoder_dropout) {
      DropoutResult d = dropout(h, opt.dropout_rate, train, r);
      out.enc_h.push_back(std::move(d.value));
      out.enc_masks.push_back(std::move(d.mask));
    } else {
      out.enc_h.push_back(h);
      out.enc_masks.push_back(Vector(h.size(), 1.0));
    }
  }
  out.y = fuse(features, out.enc_h);
  out.dec = teacher_forced_loss(caption, out.y, p, opt.dropout_rate, opt.mode, &r);
  out.loss = out.dec.loss;
  return out;
}

void sample_backward(const SampleForward& fwd, const FeatureMatrix& features,
                     const std::vector<int>& caption, const ModelParams& p, ModelGrads& g,
                     Matrix* d_features, BackwardMutation mut) {
  Vector dy = decoder_backward(fwd.dec, caption, p, g, mut);

  const std::size_t d_v = features.rows();
  const std::size_t n_v = features.cols();
  const std::size_t n_e = fwd.enc.h.size();
  const std::size_t d_h = fwd.enc.h.empty() ? 0 : fwd.enc.h[0].size();

  // Split dy into the v-bar and h-bar halves of the concatenation.
  Vector d_vbar(dy.begin(), dy.begin() + static_cast<std::ptrdiff_t>(d_v));
  Vector d_hbar(dy.begin() + static_cast<std::ptrdiff_t>(d_v), dy.end());

  // h-bar averages the (dropped) encoder hiddens.
  std::vector<Vector> dh(n_e, Vector(d_h, 0.0));
  const double inv_ne = 1.0 / static_cast<double>(n_e);
  for (std::size_t t = 0; t < n_e; ++t) {
    for (std::size_t i = 0; i < d_h; ++i) {
      dh[t][i] = d_hbar[i] * inv_ne * fwd.enc_masks[t][i];
    }
  }

  // BPTT through the encoder LSTM.
  Matrix d_segments(d_v, n_e);
  LstmState d_state = LstmState::zeros(d_h);
  for (std::size_t t = n_e; t-- > 0;) {
    Vector dh_t = dh[t];
    for (std::size_t i = 0; i < d_h; ++i) dh_t[i] += d_state.h[i];
    LstmBackwardResult back =
        lstm_backward(dh_t, d_state.c, fwd.enc.caches[t], p.encoder, g.encoder, mut);
    d_state = std::move(back.dprev);
    d_segments.set_column(t, back.dx);
  }

  if (d_features) {
    *d_features = temporal_pool_backward(d_segments, n_v);
    // v-bar averages all frame features directly.
    const double inv_nv = 1.0 / static_cast<double>(n_v);
    for (std::size_t r = 0; r < d_v; ++r) {
      for (std::size_t c = 0; c < n_v; ++c) (*d_features)(r, c) += d_vbar[r] * inv_nv;
    }
  }
}

Vector encode_video(const FeatureMatrix& features, const ModelParams& p, std::size_t n_e) {
  EncodeResult enc = encode(features, n_e, p.encoder);
  return fuse(features, enc.h);
}

}  // namespace tslstm
