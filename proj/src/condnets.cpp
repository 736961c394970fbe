#include "cycleflow/condnets.hpp"

#include <cmath>
#include <stdexcept>

namespace cycleflow {

void FieldNetConfig::validate() const {
  if (input_dim < 1 || output_dim < 1 || hidden_dim < 1 || time_embed_dim < 1 || d_s < 1 || d_c < 1)
    throw std::invalid_argument("FieldNetConfig: dimensions must be >= 1");
  if (n_layers < 2) throw std::invalid_argument("FieldNetConfig: n_layers must be >= 2");
  if (!(input_scale > 0.0)) throw std::invalid_argument("FieldNetConfig: input_scale must be > 0");
}

FieldNetConfig make_pitch_encoder_config(int d_c, int d_s, int hidden_dim, int n_layers) {
  FieldNetConfig c;
  c.d_c = d_c;
  c.d_s = d_s;
  c.hidden_dim = hidden_dim;
  c.n_layers = n_layers;
  c.has_time = false;
  c.input_dim = d_c + d_s + 1;
  c.output_dim = 1;
  c.validate();
  return c;
}

FieldNetConfig make_pitch_field_config(int d_s, int hidden_dim, int n_layers, int time_embed_dim) {
  FieldNetConfig c;
  c.d_s = d_s;
  c.hidden_dim = hidden_dim;
  c.n_layers = n_layers;
  c.time_embed_dim = time_embed_dim;
  c.has_time = true;
  c.input_dim = 1 + time_embed_dim + d_s + 1;
  c.output_dim = 1;
  c.validate();
  return c;
}

FieldNetConfig make_mel_field_config(int d_x, int d_s, int d_c, int hidden_dim, int n_layers,
                                     int time_embed_dim) {
  FieldNetConfig c;
  c.d_s = d_s;
  c.d_c = d_c;
  c.hidden_dim = hidden_dim;
  c.n_layers = n_layers;
  c.time_embed_dim = time_embed_dim;
  c.has_time = true;
  c.input_dim = d_x + time_embed_dim + d_s + 1 + d_c;
  c.output_dim = d_x;
  c.validate();
  return c;
}

FieldNet init_field_net(const FieldNetConfig& config, Rng& rng) {
  config.validate();
  FieldNet net;
  net.config = config;
  int in = config.input_dim;
  for (int l = 0; l < config.n_layers; ++l) {
    const bool last = (l == config.n_layers - 1);
    const int out = last ? config.output_dim : config.hidden_dim;
    Matrix w;
    if (last) {
      w = Matrix::Zero(out, in);
    } else {
      w = rng.normal_matrix(out, in) / std::sqrt(static_cast<double>(in));
    }
    net.params.add("W" + std::to_string(l), w);
    net.params.add("b" + std::to_string(l), Matrix::Zero(out, 1));
    in = out;
  }
  return net;
}

Vector time_embed(double t, int dim) {
  if (dim < 1) throw std::invalid_argument("time_embed: dim must be >= 1");
  Vector e(dim);
  const int pairs = dim / 2;
  for (int k = 0; k < pairs; ++k) {
    const double freq =
        pairs > 1 ? std::pow(1000.0, static_cast<double>(k) / static_cast<double>(pairs - 1)) : 1.0;
    e(2 * k) = std::sin(freq * t);
    e(2 * k + 1) = std::cos(freq * t);
  }
  if (dim % 2 == 1) e(dim - 1) = t;
  return e;
}

Vector normalize_contour(const Vector& f) {
  if (f.size() == 0) return f;
  const double mean = f.mean();
  Vector centered = f.array() - mean;
  const double var = centered.squaredNorm() / static_cast<double>(f.size());
  const double sd = std::sqrt(var);
  if (sd < 1e-8) return centered;
  return centered / sd;
}

Matrix content_encode(const Matrix& table, const std::vector<int>& tokens) {
  Matrix out(static_cast<Eigen::Index>(tokens.size()), table.cols());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const int v = tokens[i];
    if (v < 0 || v >= table.rows())
      throw std::invalid_argument("content_encode: token " + std::to_string(v) + " out of range");
    out.row(static_cast<Eigen::Index>(i)) = table.row(v);
  }
  return out;
}

Matrix pitch_encoder_input(const FieldNetConfig& cfg, const Matrix& content_enc,
                           const Vector& style, const Vector& src_logf0) {
  const Eigen::Index T = content_enc.rows();
  if (src_logf0.size() != T)
    throw std::invalid_argument("pitch_encoder_input: content/f0 length mismatch");
  if (content_enc.cols() != cfg.d_c || style.size() != cfg.d_s)
    throw std::invalid_argument("pitch_encoder_input: conditioning width mismatch");
  const Vector f_norm = normalize_contour(src_logf0);
  Matrix in(cfg.input_dim, T);
  in.topRows(cfg.d_c) = content_enc.transpose();
  in.middleRows(cfg.d_c, cfg.d_s) = style.replicate(1, T);
  in.row(cfg.d_c + cfg.d_s) = f_norm.transpose();
  return in;
}

Matrix pitch_field_const_input(const FieldNetConfig& cfg, const Vector& z_t, double t,
                               const Vector& style) {
  const Eigen::Index T = z_t.size();
  if (style.size() != cfg.d_s) throw std::invalid_argument("pitch_field_const_input: style width");
  Matrix in(1 + cfg.time_embed_dim + cfg.d_s, T);
  in.row(0) = (cfg.input_scale * z_t).transpose();
  in.middleRows(1, cfg.time_embed_dim) = time_embed(t, cfg.time_embed_dim).replicate(1, T);
  in.bottomRows(cfg.d_s) = style.replicate(1, T);
  return in;
}

Matrix mel_field_input(const FieldNetConfig& cfg, const Matrix& x_t, double t, const Vector& style,
                       const Vector& f_r, const Matrix& content_enc) {
  const Eigen::Index T = x_t.rows();
  if (f_r.size() != T || content_enc.rows() != T)
    throw std::invalid_argument("mel_field_input: per-frame length mismatch");
  if (style.size() != cfg.d_s || content_enc.cols() != cfg.d_c)
    throw std::invalid_argument("mel_field_input: conditioning width mismatch");
  const Eigen::Index d_x = x_t.cols();
  Matrix in(cfg.input_dim, T);
  in.topRows(d_x) = x_t.transpose();
  in.middleRows(d_x, cfg.time_embed_dim) = time_embed(t, cfg.time_embed_dim).replicate(1, T);
  in.middleRows(d_x + cfg.time_embed_dim, cfg.d_s) = style.replicate(1, T);
  in.row(d_x + cfg.time_embed_dim + cfg.d_s) = (cfg.input_scale * f_r).transpose();
  in.bottomRows(cfg.d_c) = content_enc.transpose();
  return in;
}

Matrix dense_forward(const FieldNet& net, const Matrix& input) {
  if (input.rows() != net.config.input_dim)
    throw std::invalid_argument("dense_forward: input width mismatch");
  Matrix h = input;
  for (int l = 0; l < net.config.n_layers; ++l) {
    const Matrix& w = net.params.at("W" + std::to_string(l));
    const Matrix& b = net.params.at("b" + std::to_string(l));
    Matrix z = w * h;
    z.colwise() += Eigen::VectorXd(b.col(0));
    if (l + 1 < net.config.n_layers)
      h = z.array().tanh().matrix();
    else
      h = std::move(z);
  }
  if (!h.allFinite()) throw std::runtime_error("dense_forward: non-finite output");
  return h;
}

Vector pitch_encoder_forward(const FieldNet& net, const Matrix& content_enc, const Vector& style,
                             const Vector& src_logf0) {
  const Matrix in = pitch_encoder_input(net.config, content_enc, style, src_logf0);
  return dense_forward(net, in).row(0).transpose();
}

Vector pitch_field_forward(const FieldNet& net, const Vector& z_t, double t, const Vector& style,
                           const Vector& pitch_cond) {
  if (t < 0.0 || t > 1.0) throw std::invalid_argument("pitch_field_forward: t out of [0, 1]");
  if (pitch_cond.size() != z_t.size())
    throw std::invalid_argument("pitch_field_forward: z_t/pitch_cond length mismatch");
  Matrix in(net.config.input_dim, z_t.size());
  in.topRows(net.config.input_dim - 1) = pitch_field_const_input(net.config, z_t, t, style);
  in.row(net.config.input_dim - 1) = pitch_cond.transpose();
  return dense_forward(net, in).row(0).transpose();
}

Matrix mel_field_forward(const FieldNet& net, const Matrix& x_t, double t, const Vector& style,
                         const Vector& f_r, const Matrix& content_enc) {
  if (t < 0.0 || t > 1.0) throw std::invalid_argument("mel_field_forward: t out of [0, 1]");
  const Matrix in = mel_field_input(net.config, x_t, t, style, f_r, content_enc);
  return dense_forward(net, in).transpose();
}

NetVars bind_net_vars(const ParamVars& pv, const std::string& prefix, const FieldNetConfig& config) {
  NetVars nv;
  nv.config = &config;
  for (int l = 0; l < config.n_layers; ++l) {
    nv.weights.push_back(pv.at(prefix + ".W" + std::to_string(l)));
    nv.biases.push_back(pv.at(prefix + ".b" + std::to_string(l)));
  }
  return nv;
}

void merge_params(ParamSet& dst, const std::string& prefix, const ParamSet& src) {
  for (const auto& kv : src.tensors) dst.add(prefix + "." + kv.first, kv.second);
}

void scatter_params(const ParamSet& src, const std::string& prefix, ParamSet& dst) {
  for (auto& kv : dst.tensors) kv.second = src.at(prefix + "." + kv.first);
}

Var dense_forward_var(Tape& tape, const NetVars& net, Var input) {
  Var h = input;
  const int n_layers = net.config->n_layers;
  for (int l = 0; l < n_layers; ++l) {
    Var z = add_colwise(matmul(net.weights[static_cast<std::size_t>(l)], h),
                        net.biases[static_cast<std::size_t>(l)]);
    h = (l + 1 < n_layers) ? tanh_op(z) : z;
  }
  return h;
}

Var pitch_encoder_forward_var(Tape& tape, const NetVars& net, const Matrix& content_enc,
                              const Vector& style, const Vector& src_logf0) {
  const Matrix in = pitch_encoder_input(*net.config, content_enc, style, src_logf0);
  return dense_forward_var(tape, net, constant(tape, in));
}

Var pitch_field_forward_var(Tape& tape, const NetVars& net, const Vector& z_t, double t,
                            const Vector& style, Var pitch_cond) {
  if (pitch_cond.value().rows() != 1 || pitch_cond.value().cols() != z_t.size())
    throw std::invalid_argument("pitch_field_forward_var: pitch_cond must be 1 x T");
  const Matrix head = pitch_field_const_input(*net.config, z_t, t, style);
  Var in = vstack({constant(tape, head), pitch_cond});
  return dense_forward_var(tape, net, in);
}

Var mel_field_forward_var(Tape& tape, const NetVars& net, const Matrix& x_t, double t,
                          const Vector& style, const Vector& f_r, const Matrix& content_enc) {
  const Matrix in = mel_field_input(*net.config, x_t, t, style, f_r, content_enc);
  return dense_forward_var(tape, net, constant(tape, in));
}

}  // namespace cycleflow
