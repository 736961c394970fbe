#pragma once

#include <string>
#include <vector>

#include "cycleflow/gradcore.hpp"
#include "cycleflow/rng.hpp"

namespace cycleflow {

// Dense per-frame estimator: n_layers linear layers, tanh between them,
// linear output. input_dim is the width of the assembled per-frame input
// vector; the assembly layout is fixed by the forward functions below.
struct FieldNetConfig {
  int input_dim = 1;
  int output_dim = 1;
  int hidden_dim = 128;
  int n_layers = 3;
  int time_embed_dim = 16;
  bool has_time = true;
  int d_s = 8;  // style conditioning width
  int d_c = 8;  // content conditioning width
  // Applied to raw log-F0-unit inputs (Z_t, f_r) before they enter the net.
  double input_scale = 0.125;

  void validate() const;
};

struct FieldNet {
  FieldNetConfig config;
  ParamSet params;
};

FieldNetConfig make_pitch_encoder_config(int d_c, int d_s, int hidden_dim = 128, int n_layers = 3);
FieldNetConfig make_pitch_field_config(int d_s, int hidden_dim = 128, int n_layers = 3,
                                       int time_embed_dim = 16);
FieldNetConfig make_mel_field_config(int d_x, int d_s, int d_c, int hidden_dim = 128,
                                     int n_layers = 3, int time_embed_dim = 16);

// Scaled-Gaussian fan-in init, zero biases, zero final layer (so freshly
// initialized fields are identically zero).
FieldNet init_field_net(const FieldNetConfig& config, Rng& rng);

// Sinusoidal features of t at geometrically spaced frequencies.
Vector time_embed(double t, int dim);

// Per-utterance standardization used on the encoder's pitch input; sequences
// with (near-)zero spread are only centered.
Vector normalize_contour(const Vector& f);

// Embedding-table lookup: one row of `table` per token.
Matrix content_encode(const Matrix& table, const std::vector<int>& tokens);

// --- assembled per-frame input blocks (columns = frames) ---
// Layouts:
//   encoder:     [content | style | normalized f]
//   pitch field: [scaled Z_t | time embed | style]  + conditioning row
//   mel field:   [x_t | time embed | style | scaled f_r | content]
Matrix pitch_encoder_input(const FieldNetConfig& cfg, const Matrix& content_enc,
                           const Vector& style, const Vector& src_logf0);
Matrix pitch_field_const_input(const FieldNetConfig& cfg, const Vector& z_t, double t,
                               const Vector& style);
Matrix mel_field_input(const FieldNetConfig& cfg, const Matrix& x_t, double t, const Vector& style,
                       const Vector& f_r, const Matrix& content_enc);

// Plain forward through the dense stack; input is input_dim x N.
Matrix dense_forward(const FieldNet& net, const Matrix& input);

// --- spec-shaped forwards (plain) ---
Vector pitch_encoder_forward(const FieldNet& net, const Matrix& content_enc, const Vector& style,
                             const Vector& src_logf0);
Vector pitch_field_forward(const FieldNet& net, const Vector& z_t, double t, const Vector& style,
                           const Vector& pitch_cond);
Matrix mel_field_forward(const FieldNet& net, const Matrix& x_t, double t, const Vector& style,
                         const Vector& f_r, const Matrix& content_enc);

// --- tape-side forwards for training ---
struct NetVars {
  const FieldNetConfig* config = nullptr;
  std::vector<Var> weights;
  std::vector<Var> biases;
};

// Pulls "<prefix>.W0", "<prefix>.b0", ... out of bound parameter leaves.
NetVars bind_net_vars(const ParamVars& pv, const std::string& prefix, const FieldNetConfig& config);

// Merges a net's parameters into `dst` under "<prefix>.<name>" keys.
void merge_params(ParamSet& dst, const std::string& prefix, const ParamSet& src);
// Writes prefixed tensors of `src` back into `dst` (inverse of merge).
void scatter_params(const ParamSet& src, const std::string& prefix, ParamSet& dst);

Var dense_forward_var(Tape& tape, const NetVars& net, Var input);

Var pitch_encoder_forward_var(Tape& tape, const NetVars& net, const Matrix& content_enc,
                              const Vector& style, const Vector& src_logf0);
// pitch_cond is a 1 x T graph node (typically the encoder output), so the
// base pitch loss trains the encoder through it.
Var pitch_field_forward_var(Tape& tape, const NetVars& net, const Vector& z_t, double t,
                            const Vector& style, Var pitch_cond);
Var mel_field_forward_var(Tape& tape, const NetVars& net, const Matrix& x_t, double t,
                          const Vector& style, const Vector& f_r, const Matrix& content_enc);

}  // namespace cycleflow
