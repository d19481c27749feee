#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "diver/core.hpp"
#include "diver/scene.hpp"

namespace diver {

// Named parameter block with a gradient buffer. Row-major for 2D shapes.
struct Tensor {
  std::string name;
  std::vector<size_t> shape;
  std::vector<double> w;
  std::vector<double> g;

  size_t size() const { return w.size(); }
  size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }
};

struct DenoiserConfig {
  int embed_dim = 64;  // divisible by 8 and by heads
  int heads = 4;
  int horizon = 6;
  int modes = 6;
  double norm_scale = 30.0;
  double feature_cell = 2.0;  // scene feature grid resolution, meters

  void validate() const;
};

struct AttnParams {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
};
struct LnParams {
  Tensor gamma, beta;
};
struct MlpParams {
  Tensor w1, b1, w2, b2;
};

// Fixed architecture: a shared trajectory encoder (sine embeddings, one
// self-attention + feed-forward block, mean pool), a waypoint feature pooler
// over the scene grid, three cross-attention blocks (agents, map, per-mode
// guidance tokens), a residual feed-forward, and a two-layer regression head.
struct DenoiserParams {
  DenoiserConfig cfg;
  LnParams enc_ln1, enc_ln2;
  AttnParams enc_attn;
  MlpParams enc_ffn;
  Tensor pool_alpha_w, pool_alpha_b;
  MlpParams pool_mlp;
  AttnParams dec_agent, dec_map, dec_nav;
  LnParams dec_ln;
  MlpParams dec_ffn;
  MlpParams head;
  Tensor mode_embed;  // modes x d, learned per-mode query

  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;
  void zero_grads();
  size_t param_count() const;
};

// Uniform +-1/sqrt(fan_in) weights, zero biases, unit LayerNorm gains.
DenoiserParams init_denoiser(const DenoiserConfig& cfg, uint64_t seed);

// Interleaved sin/cos embedding, base 10^4. dim must be even (InvalidDim).
std::vector<double> sine_embed(double pos, int dim);

// Analytic per-cell scene features (clearance + lane offset embeddings);
// nothing in the grid is learned.
struct FeatureGrid {
  Waypoint origin;  // center of cell (0,0)
  double cell = 2.0;
  size_t rows = 0, cols = 0, dim = 0;
  std::vector<double> data;  // rows * cols * dim

  const double* at(size_t r, size_t c) const {
    return data.data() + (r * cols + c) * dim;
  }
  // bilinear over cell centers, clamped at the border
  void sample(const Waypoint& p, double* out, bool* clamped = nullptr) const;
};

// Weight-independent conditioning tokens, reusable across a whole training
// run for one scene.
struct SceneTokens {
  std::vector<std::vector<double>> agent_tokens, agent_pos;       // N_a x d
  std::vector<std::vector<double>> map_tokens, map_pos;           // N_m x d
  std::vector<std::vector<std::vector<double>>> nav_tokens;       // mode x T x d
  FeatureGrid grid;
};

SceneTokens build_scene_tokens(const Scene& scene, const DenoiserConfig& cfg);

// ---- forward caches (consumed by backward_mode) ----

struct LnCache {
  std::vector<double> xhat;
  double inv_std = 0.0;
};

struct EncCache {
  std::vector<std::vector<double>> tok, a, qp, kp, vp, ctx, u, f, hpre;
  std::vector<LnCache> ln1, ln2;
  std::vector<std::vector<std::vector<double>>> attn;  // head x T x T
};

struct PoolCache {
  std::vector<std::vector<double>> feats;  // T x d
  std::vector<double> inst, logits, alpha, fused, hpre;
  int clamped = 0;
};

struct CrossAttnCache {
  bool skipped = false;
  std::vector<double> q_in, qp, ctx;
  std::vector<std::vector<double>> k_in, v_in, kp, vp;  // N x d
  std::vector<std::vector<double>> attn;                // heads x N
};

struct DecodeCache {
  int mode = 0;
  std::vector<double> q, q1, q2, f_traj, f_agent, f_map, f_nav, ln_out, hpre;
  CrossAttnCache agent, map, nav;
  LnCache ln;
};

struct HeadCache {
  std::vector<double> f_out, hpre;
};

struct ModeCache {
  bool valid = false;
  int mode = 0;
  EncCache enc_noisy, enc_ref;
  std::vector<double> f_inst, f_traj, f_out;
  PoolCache pool;
  DecodeCache dec;
  HeadCache head;
  double traj_dt = 0.5;
};

// ---- operations ----

// Per-waypoint sine embeddings plus index encodings through the shared
// block, mean-pooled to a d-vector. Input is an absolute trajectory in
// normalized units.
std::vector<double> encode_trajectory(const DenoiserParams& p,
                                      const Trajectory& traj_norm,
                                      EncCache* cache = nullptr);

// Waypoint displacements -> absolute positions (cumulative_sum) -> bilinear
// grid features, attention-weighted by a projection of the instance feature,
// fused through an MLP with a residual on the instance feature.
std::vector<double> traj_pool(const DenoiserParams& p, const Trajectory& deltas_norm,
                              const std::vector<double>& inst_feature,
                              const FeatureGrid& grid, PoolCache* cache = nullptr);

// Cross-attention cascade: agents, then map, then the mode's guidance
// tokens, then LayerNorm + feed-forward with a residual connection. An empty
// agent or map token set passes the query through unchanged.
std::vector<double> decode(const DenoiserParams& p, const std::vector<double>& f_traj,
                           int mode, const SceneTokens& tokens,
                           DecodeCache* cache = nullptr);

// Two-layer MLP to 2T reals, reshaped to T waypoints downstream.
std::vector<double> regress_head(const DenoiserParams& p,
                                 const std::vector<double>& f_out,
                                 HeadCache* cache = nullptr);

// Full single-mode pass: noisy normalized trajectory + its guidance
// trajectory (normalized) -> predicted clean normalized trajectory.
Trajectory forward_mode(const DenoiserParams& p, const SceneTokens& tokens,
                        const Trajectory& noisy_norm, const Trajectory& ref_norm,
                        int mode, ModeCache* cache = nullptr);

// Reverse pass. dpred is dLoss/d(prediction) flattened (2T, normalized
// space); gradients accumulate into the tensors' g buffers. Throws
// StaleCache when the cache was never filled by forward_mode.
void backward_mode(DenoiserParams& p, const SceneTokens& tokens,
                   const ModeCache& cache, const std::vector<double>& dpred);

// ---- optimizer ----

double global_grad_norm(const DenoiserParams& p);
// scales gradients so their global norm is at most max_norm; returns the
// pre-clip norm
double clip_gradients(DenoiserParams& p, double max_norm);

struct Adam {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long t = 0;
  std::vector<std::vector<double>> m, v;

  void init(const DenoiserParams& p);
  void step(DenoiserParams& p, double lr);
};

}  // namespace diver
