#pragma once

#include <utility>
#include <vector>

#include "nn.hpp"
#include "tensor.hpp"

namespace tslstm {

// A video's features are a d_v x n_v matrix whose columns are per-frame
// feature vectors in temporal order.
using FeatureMatrix = Matrix;

// Half-open frame range [first, second) of segment i out of n_e, over n_v
// frames. Segments are contiguous, disjoint, and exhaustive; sizes differ by
// at most one when n_v is not divisible by n_e.
std::pair<std::size_t, std::size_t> segment_bounds(std::size_t i, std::size_t n_v,
                                                   std::size_t n_e);

// Mean-pool the frames of each segment: d_v x n_v -> d_v x n_e.
Matrix temporal_pool(const FeatureMatrix& v, std::size_t n_e);

// Distribute segment-mean gradients back to frames (1/|segment| each).
Matrix temporal_pool_backward(const Matrix& d_segments, std::size_t n_v);

struct EncodeResult {
  Matrix segment_means;            // d_v x n_e
  std::vector<Vector> h;           // n_e hidden vectors
  std::vector<LstmCache> caches;   // per time step, for BPTT
};

// Run the encoder LSTM over the segment means from a zero initial state.
EncodeResult encode(const FeatureMatrix& v, std::size_t n_e, const LstmParams& enc);

// Fused video context y = [mean of all frame features, mean of encoder
// hidden states].
Vector fuse(const FeatureMatrix& v, const std::vector<Vector>& h_seq);

}  // namespace tslstm
