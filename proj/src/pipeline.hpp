#pragma once

#include "decoder.hpp"
#include "encoder.hpp"

namespace tslstm {

struct ForwardOptions {
  std::size_t n_e = 1;
  double dropout_rate = 0.0;
  bool encoder_dropout = true;  // apply dropout to encoder hidden outputs
  Mode mode = Mode::eval;
};

// One (video, caption) training example pushed through the whole model:
// temporal pooling -> encoder LSTM -> fuse -> teacher-forced decoder.
struct SampleForward {
  EncodeResult enc;
  std::vector<Vector> enc_masks;  // dropout masks on encoder h outputs
  std::vector<Vector> enc_h;      // (possibly dropped) hiddens fed to fuse
  Vector y;
  DecoderLoss dec;
  double loss = 0.0;
};

SampleForward sample_loss(const FeatureMatrix& features, const std::vector<int>& caption,
                          const ModelParams& p, const ForwardOptions& opt,
                          std::mt19937_64* rng);

// Full BPTT. Parameter gradients accumulate into `g`; when `d_features` is
// non-null the gradient w.r.t. the frame features is written there.
void sample_backward(const SampleForward& fwd, const FeatureMatrix& features,
                     const std::vector<int>& caption, const ModelParams& p, ModelGrads& g,
                     Matrix* d_features = nullptr,
                     BackwardMutation mut = BackwardMutation::none);

// Encode a video and return the fused context for decoding (eval mode).
Vector encode_video(const FeatureMatrix& features, const ModelParams& p, std::size_t n_e);

}  // namespace tslstm
