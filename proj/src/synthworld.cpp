#include "cycleflow/synthworld.hpp"

#include <cmath>
#include <stdexcept>
#include <Eigen/Dense>
#include <Eigen/SVD>

#include "cycleflow/arrayio.hpp"

namespace cycleflow {

static constexpr double kRankTol = 1e-8;

void WorldConfig::validate() const {
  if (V < 2) throw std::invalid_argument("WorldConfig: V must be >= 2");
  if (T < 1 || d_s < 1 || d_c < 1 || d_x < 1)
    throw std::invalid_argument("WorldConfig: dimensions must be >= 1");
  if (n_speakers < 2) throw std::invalid_argument("WorldConfig: n_speakers must be >= 2");
  if (noise_std < 0.0) throw std::invalid_argument("WorldConfig: noise_std must be >= 0");
  if (alpha_min <= 0.0 || alpha_max < alpha_min)
    throw std::invalid_argument("WorldConfig: bad alpha range");
  if (beta_max < beta_min) throw std::invalid_argument("WorldConfig: bad beta range");
  if (contour_std < 0.0) throw std::invalid_argument("WorldConfig: contour_std must be >= 0");
}

const SpeakerSpec& World::speaker(int id) const {
  if (id < 0 || id >= static_cast<int>(speakers.size()))
    throw std::invalid_argument("World: invalid speaker id " + std::to_string(id));
  return speakers[static_cast<std::size_t>(id)];
}

Matrix World::clean_frames(const std::vector<int>& tokens, const Vector& log_f0,
                           const Vector& style) const {
  const int T = static_cast<int>(tokens.size());
  if (static_cast<int>(log_f0.size()) != T)
    throw std::invalid_argument("World: tokens/log_f0 length mismatch");
  Matrix frames(T, cfg.d_x);
  const Vector style_part = mix_style * style;
  for (int t = 0; t < T; ++t) {
    const int v = tokens[static_cast<std::size_t>(t)];
    if (v < 0 || v >= cfg.V) throw std::invalid_argument("World: token out of range");
    frames.row(t) = (mix_content * token_embeds.row(v).transpose() + mix_pitch * log_f0(t) +
                     style_part)
                        .transpose();
  }
  return frames;
}

// Small helpers shared by the probes: the pitch+style regressor
// B = [W_p | W_s], its pseudo-inverse, and the projector onto the orthogonal
// complement of span(B).
namespace {

struct ProbeOps {
  Matrix B;           // d_x x (1 + d_s)
  Matrix pinv_B;      // (1 + d_s) x d_x
  Matrix perp;        // d_x x d_x, I - B pinv_B
  Matrix content_cols;  // d_x x V, W_c e_v per column

  explicit ProbeOps(const World& w) {
    const int d_x = w.cfg.d_x;
    B.resize(d_x, 1 + w.cfg.d_s);
    B.col(0) = w.mix_pitch.col(0);
    B.rightCols(w.cfg.d_s) = w.mix_style;
    pinv_B = (B.transpose() * B).ldlt().solve(B.transpose());
    perp = Matrix::Identity(d_x, d_x) - B * pinv_B;
    content_cols = w.mix_content * w.token_embeds.transpose();
  }
};

bool mixing_is_identifiable(const World& w) {
  const int d_x = w.cfg.d_x;
  Matrix stacked(d_x, w.cfg.d_c + 1 + w.cfg.d_s);
  stacked.leftCols(w.cfg.d_c) = w.mix_content;
  stacked.col(w.cfg.d_c) = w.mix_pitch.col(0);
  stacked.rightCols(w.cfg.d_s) = w.mix_style;
  Eigen::JacobiSVD<Matrix> svd(stacked);
  if (svd.singularValues().minCoeff() <= kRankTol) return false;

  Matrix b(d_x, 1 + w.cfg.d_s);
  b.col(0) = w.mix_pitch.col(0);
  b.rightCols(w.cfg.d_s) = w.mix_style;
  Eigen::JacobiSVD<Matrix> svd_b(b);
  if (static_cast<int>(b.cols()) > d_x) return false;
  if (svd_b.singularValues().minCoeff() <= kRankTol) return false;

  // Distinct tokens must stay distinguishable after the pitch/style
  // subspace is projected out, otherwise the content probe is ill-posed.
  ProbeOps ops(w);
  const Matrix projected = ops.perp * ops.content_cols;
  for (int u = 0; u < w.cfg.V; ++u)
    for (int v = u + 1; v < w.cfg.V; ++v)
      if ((projected.col(u) - projected.col(v)).norm() <= kRankTol) return false;
  return true;
}

World generate_world(std::uint64_t seed, const WorldConfig& cfg, Rng& rng) {
  World w;
  w.cfg = cfg;
  w.seed = seed;
  w.noise_std = cfg.noise_std;
  w.token_contours = Vector(cfg.V);
  for (int v = 0; v < cfg.V; ++v) w.token_contours(v) = cfg.contour_mean + cfg.contour_std * rng.normal();
  w.token_embeds = rng.normal_matrix(cfg.V, cfg.d_c);
  w.mix_content = rng.normal_matrix(cfg.d_x, cfg.d_c) / std::sqrt(static_cast<double>(cfg.d_c));
  w.mix_pitch = rng.normal_matrix(cfg.d_x, 1);
  w.mix_pitch /= w.mix_pitch.norm();
  w.mix_style = rng.normal_matrix(cfg.d_x, cfg.d_s) / std::sqrt(static_cast<double>(cfg.d_s));
  for (int i = 0; i < cfg.n_speakers; ++i) {
    SpeakerSpec s;
    s.id = i;
    s.style = rng.normal_vector(cfg.d_s);
    s.style /= s.style.norm();
    s.pitch_scale = rng.uniform(cfg.alpha_min, cfg.alpha_max);
    s.pitch_offset = rng.uniform(cfg.beta_min, cfg.beta_max);
    w.speakers.push_back(std::move(s));
  }
  return w;
}

}  // namespace

World make_world(std::uint64_t seed, const WorldConfig& cfg) {
  cfg.validate();
  for (int attempt = 0; attempt < 10; ++attempt) {
    Rng rng = Rng(seed).fork(static_cast<std::uint64_t>(attempt));
    World w = generate_world(seed, cfg, rng);
    if (mixing_is_identifiable(w)) return w;
  }
  throw std::runtime_error("make_world: mixing maps rank-deficient after 10 attempts");
}

Utterance sample_utterance(const World& world, int speaker_id, Rng& rng) {
  const SpeakerSpec& sp = world.speaker(speaker_id);
  const int T = world.cfg.T;
  Utterance u;
  u.speaker_id = speaker_id;
  u.tokens.resize(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) u.tokens[static_cast<std::size_t>(t)] = rng.uniform_int(world.cfg.V);
  u.log_f0 = Vector(T);
  for (int t = 0; t < T; ++t)
    u.log_f0(t) = sp.pitch_scale * world.token_contours(u.tokens[static_cast<std::size_t>(t)]) +
                  sp.pitch_offset + world.noise_std * rng.normal();
  u.frames = world.clean_frames(u.tokens, u.log_f0, sp.style) +
             world.noise_std * rng.normal_matrix(T, world.cfg.d_x);
  return u;
}

Utterance oracle_convert(const World& world, const Utterance& utt, int target_id) {
  const SpeakerSpec& sp = world.speaker(target_id);
  Utterance out;
  out.speaker_id = target_id;
  out.tokens = utt.tokens;
  const int T = static_cast<int>(utt.tokens.size());
  out.log_f0 = Vector(T);
  for (int t = 0; t < T; ++t)
    out.log_f0(t) =
        sp.pitch_scale * world.token_contours(utt.tokens[static_cast<std::size_t>(t)]) + sp.pitch_offset;
  out.frames = world.clean_frames(out.tokens, out.log_f0, sp.style);
  return out;
}

Vector probe_style(const World& world, const Matrix& frames) {
  if (frames.rows() < 1) throw std::invalid_argument("probe_style: frames must be nonempty");
  if (frames.cols() != world.cfg.d_x) throw std::invalid_argument("probe_style: frame width mismatch");
  if (frames.isZero(0.0)) throw std::runtime_error("probe_style: degenerate all-zero frames");
  ProbeOps ops(world);
  const Matrix projected_content = ops.perp * ops.content_cols;  // d_x x V
  Vector acc = Vector::Zero(world.cfg.d_s);
  for (Eigen::Index t = 0; t < frames.rows(); ++t) {
    const Vector frame = frames.row(t).transpose();
    const Vector q = ops.perp * frame;
    int best_v = 0;
    double best = (q - projected_content.col(0)).squaredNorm();
    for (int v = 1; v < world.cfg.V; ++v) {
      const double d = (q - projected_content.col(v)).squaredNorm();
      if (d < best) {
        best = d;
        best_v = v;
      }
    }
    const Vector coord = ops.pinv_B * (frame - ops.content_cols.col(best_v));
    acc += coord.tail(world.cfg.d_s);
  }
  return acc / static_cast<double>(frames.rows());
}

std::vector<int> probe_content(const World& world, const Matrix& frames, const Vector& log_f0) {
  if (frames.rows() != log_f0.size())
    throw std::invalid_argument("probe_content: frames/log_f0 length mismatch");
  if (frames.rows() == 0) return {};
  if (frames.cols() != world.cfg.d_x)
    throw std::invalid_argument("probe_content: frame width mismatch");
  ProbeOps ops(world);
  const Vector style_part = world.mix_style * probe_style(world, frames);
  std::vector<int> tokens(static_cast<std::size_t>(frames.rows()));
  for (Eigen::Index t = 0; t < frames.rows(); ++t) {
    const Vector r = frames.row(t).transpose() - world.mix_pitch.col(0) * log_f0(t) - style_part;
    int best_v = 0;
    double best = (r - ops.content_cols.col(0)).squaredNorm();
    for (int v = 1; v < world.cfg.V; ++v) {
      const double d = (r - ops.content_cols.col(v)).squaredNorm();
      if (d < best) {
        best = d;
        best_v = v;
      }
    }
    tokens[static_cast<std::size_t>(t)] = best_v;
  }
  return tokens;
}

void save_world(const World& w, const std::string& path) {
  ArrayFile f;
  f.set_meta("kind", "world");
  f.set_meta_int("world_version", 1);
  f.set_meta_int("seed", static_cast<long long>(w.seed));
  f.set_meta_int("V", w.cfg.V);
  f.set_meta_int("T", w.cfg.T);
  f.set_meta_int("d_s", w.cfg.d_s);
  f.set_meta_int("d_c", w.cfg.d_c);
  f.set_meta_int("d_x", w.cfg.d_x);
  f.set_meta_int("n_speakers", w.cfg.n_speakers);
  f.set_meta_double("noise_std", w.noise_std);
  f.set_meta_double("contour_mean", w.cfg.contour_mean);
  f.set_meta_double("contour_std", w.cfg.contour_std);
  f.set_meta_double("alpha_min", w.cfg.alpha_min);
  f.set_meta_double("alpha_max", w.cfg.alpha_max);
  f.set_meta_double("beta_min", w.cfg.beta_min);
  f.set_meta_double("beta_max", w.cfg.beta_max);
  f.add_array("token_contours", w.token_contours);
  f.add_array("token_embeds", w.token_embeds);
  f.add_array("mix_content", w.mix_content);
  f.add_array("mix_pitch", w.mix_pitch);
  f.add_array("mix_style", w.mix_style);
  Vector alpha(w.speakers.size()), beta(w.speakers.size());
  Matrix styles(static_cast<Eigen::Index>(w.speakers.size()), w.cfg.d_s);
  for (std::size_t i = 0; i < w.speakers.size(); ++i) {
    alpha(static_cast<Eigen::Index>(i)) = w.speakers[i].pitch_scale;
    beta(static_cast<Eigen::Index>(i)) = w.speakers[i].pitch_offset;
    styles.row(static_cast<Eigen::Index>(i)) = w.speakers[i].style.transpose();
  }
  f.add_array("speaker_alpha", alpha);
  f.add_array("speaker_beta", beta);
  f.add_array("speaker_style", styles);
  write_array_file(f, path);
}

World load_world(const std::string& path) {
  const ArrayFile f = read_array_file(path);
  if (!f.has_meta("kind") || f.get_meta("kind") != "world")
    throw std::runtime_error("load_world: '" + path + "' is not a world file");
  if (f.get_meta_int("world_version") != 1)
    throw std::runtime_error("load_world: unsupported world version");
  World w;
  w.seed = static_cast<std::uint64_t>(f.get_meta_int("seed"));
  w.cfg.V = static_cast<int>(f.get_meta_int("V"));
  w.cfg.T = static_cast<int>(f.get_meta_int("T"));
  w.cfg.d_s = static_cast<int>(f.get_meta_int("d_s"));
  w.cfg.d_c = static_cast<int>(f.get_meta_int("d_c"));
  w.cfg.d_x = static_cast<int>(f.get_meta_int("d_x"));
  w.cfg.n_speakers = static_cast<int>(f.get_meta_int("n_speakers"));
  w.cfg.noise_std = f.get_meta_double("noise_std");
  w.cfg.contour_mean = f.get_meta_double("contour_mean");
  w.cfg.contour_std = f.get_meta_double("contour_std");
  w.cfg.alpha_min = f.get_meta_double("alpha_min");
  w.cfg.alpha_max = f.get_meta_double("alpha_max");
  w.cfg.beta_min = f.get_meta_double("beta_min");
  w.cfg.beta_max = f.get_meta_double("beta_max");
  w.noise_std = w.cfg.noise_std;
  w.token_contours = f.get_array("token_contours");
  w.token_embeds = f.get_array("token_embeds");
  w.mix_content = f.get_array("mix_content");
  w.mix_pitch = f.get_array("mix_pitch");
  w.mix_style = f.get_array("mix_style");
  const Matrix& alpha = f.get_array("speaker_alpha");
  const Matrix& beta = f.get_array("speaker_beta");
  const Matrix& styles = f.get_array("speaker_style");
  for (int i = 0; i < w.cfg.n_speakers; ++i) {
    SpeakerSpec s;
    s.id = i;
    s.style = styles.row(i).transpose();
    s.pitch_scale = alpha(i, 0);
    s.pitch_offset = beta(i, 0);
    w.speakers.push_back(std::move(s));
  }
  return w;
}

}  // namespace cycleflow
