#pragma once

#include <array>
#include <string>
#include <unordered_map>
#include <vector>

#include "encoder.hpp"
#include "tokens.hpp"

namespace tslstm {

// Lowercase, split on word/punctuation boundaries, drop punctuation-only
// tokens ("A man is Shooting." -> [a, man, is, shooting]).
std::vector<std::string> tokenize(const std::string& sentence);

struct Vocabulary {
  std::vector<std::string> tokens;  // index -> token, reserved at 0..3
  std::unordered_map<std::string, int> index;
  int min_count = 2;

  // Keeps tokens whose frequency is strictly greater than min_count,
  // ordered by frequency desc then lexicographic.
  static Vocabulary build(const std::vector<std::vector<std::string>>& corpus, int min_count);

  std::size_t size() const { return tokens.size(); }
  int lookup(const std::string& token) const;          // OOV -> UNK
  const std::string& token(std::size_t index) const;   // out of range -> VocabError
};

// BOS + mapped indices (OOV -> UNK) + EOS.
std::vector<int> encode_caption(const std::vector<std::string>& words, const Vocabulary& vocab);
// Strip BOS/EOS/PAD, join with single spaces.
std::string decode_tokens(const std::vector<int>& indices, const Vocabulary& vocab);

struct VideoSample {
  std::string id;
  FeatureMatrix features;  // d_v x n_v
  std::vector<std::string> captions;
};

struct Dataset {
  std::string name;
  std::size_t feature_dim = 0;
  std::vector<VideoSample> videos;
  std::unordered_map<std::string, std::size_t> by_id;
  std::vector<std::string> train_ids, val_ids, test_ids;

  const VideoSample& video(const std::string& id) const;
  void rebuild_index();
};

// Binary feature file: magic "TSLF", u32 version, u32 d_v, u32 n_v, then
// n_v frames of d_v little-endian 32-bit floats.
void save_features(const std::string& path, const FeatureMatrix& features);
FeatureMatrix load_features(const std::string& path);

// Manifest JSON + one feature file per video under <dir>/features/.
void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& manifest_path);

// Split sizes in MSVD proportions (1970 -> 1200/100/670).
std::array<std::size_t, 3> msvd_split_sizes(std::size_t total);

struct SynthConfig {
  std::size_t n_videos = 200;
  std::size_t n_subjects = 6;
  std::size_t n_verbs = 6;
  std::size_t events_min = 2;
  std::size_t events_max = 3;
  std::size_t frames_min = 10;
  std::size_t frames_max = 15;
  std::size_t feature_dim = 16;
  double noise_std = 0.05;
  unsigned long long seed = 1;
  bool share_splits = false;  // put every video in train, val and test

  void validate() const;
};

// Event-structured synthetic videos: each video is a sequence of latent
// (subject, verb) events; frames of an event are its prototype vector plus
// Gaussian noise, and the caption is a deterministic template over the
// event sequence.
Dataset generate_synthetic(const SynthConfig& cfg);

}  // namespace tslstm
