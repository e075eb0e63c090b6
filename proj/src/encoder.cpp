#include "encoder.hpp"

namespace tslstm {

std::pair<std::size_t, std::size_t> segment_bounds(std::size_t i, std::size_t n_v,
                                                   std::size_t n_e) {
  return {i * n_v / n_e, (i + 1) * n_v / n_e};
}

Matrix temporal_pool(const FeatureMatrix& v, std::size_t n_e) {
  if (n_e == 0 || n_e > v.cols()) {
    throw ConfigError("temporal_pool: n_e = " + std::to_string(n_e) +
                      " must be in [1, n_v = " + std::to_string(v.cols()) + "]");
  }
  Matrix out(v.rows(), n_e);
  for (std::size_t i = 0; i < n_e; ++i) {
    auto [lo, hi] = segment_bounds(i, v.cols(), n_e);
    for (std::size_t r = 0; r < v.rows(); ++r) {
      double acc = 0.0;
      for (std::size_t c = lo; c < hi; ++c) acc += v(r, c);
      // Divide rather than multiply by a reciprocal so the n_e = 1 case is
      // bit-identical to mean_columns.
      out(r, i) = acc / static_cast<double>(hi - lo);
    }
  }
  return out;
}

Matrix temporal_pool_backward(const Matrix& d_segments, std::size_t n_v) {
  const std::size_t n_e = d_segments.cols();
  Matrix out(d_segments.rows(), n_v);
  for (std::size_t i = 0; i < n_e; ++i) {
    auto [lo, hi] = segment_bounds(i, n_v, n_e);
    const double inv = 1.0 / static_cast<double>(hi - lo);
    for (std::size_t r = 0; r < d_segments.rows(); ++r) {
      const double g = d_segments(r, i) * inv;
      for (std::size_t c = lo; c < hi; ++c) out(r, c) += g;
    }
  }
  return out;
}

EncodeResult encode(const FeatureMatrix& v, std::size_t n_e, const LstmParams& enc) {
  if (enc.input_size() != v.rows()) {
    throw ShapeError("encode: feature width " + std::to_string(v.rows()) +
                     " vs encoder input width " + std::to_string(enc.input_size()));
  }
  EncodeResult out;
  out.segment_means = temporal_pool(v, n_e);
  LstmState state = LstmState::zeros(enc.hidden_size());
  out.h.reserve(n_e);
  out.caches.reserve(n_e);
  for (std::size_t t = 0; t < n_e; ++t) {
    auto [next, cache] = lstm_forward(out.segment_means.column(t), state, enc);
    state = next;
    out.h.push_back(state.h);
    out.caches.push_back(std::move(cache));
  }
  return out;
}

Vector fuse(const FeatureMatrix& v, const std::vector<Vector>& h_seq) {
  if (v.cols() == 0 || h_seq.empty()) {
    throw ShapeError("fuse: empty features or hidden sequence");
  }
  Vector v_bar = mean_columns(v);
  Vector h_bar(h_seq[0].size(), 0.0);
  for (const Vector& h : h_seq) {
    for (std::size_t i = 0; i < h.size(); ++i) h_bar[i] += h[i];
  }
  for (double& x : h_bar) x /= static_cast<double>(h_seq.size());
  Vector y;
  y.reserve(v_bar.size() + h_bar.size());
  y.insert(y.end(), v_bar.begin(), v_bar.end());
  y.insert(y.end(), h_bar.begin(), h_bar.end());
  return y;
}

}  // namespace tslstm
