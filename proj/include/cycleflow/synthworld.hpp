#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cycleflow/gradcore.hpp"
#include "cycleflow/rng.hpp"

namespace cycleflow {

// One synthetic speaker: a unit-norm timbre vector plus an affine map
// (pitch_scale, pitch_offset) from the shared token contour to this
// speaker's log-F0 range.
struct SpeakerSpec {
  int id = 0;
  Vector style;
  double pitch_scale = 1.0;   // alpha
  double pitch_offset = 0.0;  // beta
};

struct WorldConfig {
  int V = 16;          // token vocabulary size
  int T = 32;          // frames per utterance
  int d_s = 8;         // style dimension
  int d_c = 8;         // content embedding dimension
  int d_x = 16;        // frame feature dimension
  int n_speakers = 8;
  double noise_std = 0.05;

  // Pitch statistics of the synthetic world (log-F0-like units).
  double contour_mean = 5.0;
  double contour_std = 0.15;
  double alpha_min = 0.5, alpha_max = 2.0;
  double beta_min = -1.0, beta_max = 1.0;

  void validate() const;
};

// Frozen generative parameters of the synthetic speech world. Frames are
// produced by the linear map
//   frame[t] = W_c e[tokens[t]] + W_p log_f0[t] + W_s style (+ noise)
// which keeps every conversion and probe analytic.
struct World {
  WorldConfig cfg;
  std::uint64_t seed = 0;
  Vector token_contours;  // V
  Matrix token_embeds;    // V x d_c, one embedding per row
  Matrix mix_content;     // d_x x d_c
  Matrix mix_pitch;       // d_x x 1, unit norm
  Matrix mix_style;       // d_x x d_s
  std::vector<SpeakerSpec> speakers;
  double noise_std = 0.05;

  const SpeakerSpec& speaker(int id) const;
  // Noise-free frame matrix (T x d_x) for the given tokens/contour/style.
  Matrix clean_frames(const std::vector<int>& tokens, const Vector& log_f0, const Vector& style) const;
};

struct Utterance {
  std::vector<int> tokens;  // length T, values in [0, V)
  Vector log_f0;            // length T
  Matrix frames;            // T x d_x
  int speaker_id = 0;
};

// Deterministic construction from (seed, cfg). The mixing maps are checked
// for identifiability (singular values > 1e-8 and token separation); on
// failure the generation is retried with a perturbed stream, up to 10 times.
World make_world(std::uint64_t seed, const WorldConfig& cfg = WorldConfig());

Utterance sample_utterance(const World& world, int speaker_id, Rng& rng);

// Analytic ground-truth conversion: same tokens, target speaker's pitch
// statistics and style, no noise.
Utterance oracle_convert(const World& world, const Utterance& utt, int target_id);

// Least-squares style estimate from frames alone (tokens and contour
// unknown). Exact on noise-free oracle frames.
Vector probe_style(const World& world, const Matrix& frames);

// Per-frame nearest-token decoding given the pitch contour. Exact on
// noise-free oracle frames.
std::vector<int> probe_content(const World& world, const Matrix& frames, const Vector& log_f0);

void save_world(const World& world, const std::string& path);
World load_world(const std::string& path);

}  // namespace cycleflow
