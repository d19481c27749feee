#include "diver/denoiser.hpp"

#include <algorithm>
#include <cmath>

#include "diver/rng.hpp"

namespace diver {
namespace {

using Vec = std::vector<double>;

constexpr double kLnEps = 1e-5;

Tensor make_tensor(const std::string& name, std::vector<size_t> shape) {
  Tensor t;
  t.name = name;
  t.shape = std::move(shape);
  size_t n = 1;
  for (size_t s : t.shape) n *= s;
  t.w.assign(n, 0.0);
  t.g.assign(n, 0.0);
  return t;
}

// y = W x + b
void linear(const Tensor& W, const Tensor& b, const Vec& x, Vec& y) {
  size_t out = W.rows(), in = W.cols();
  y.assign(out, 0.0);
  for (size_t i = 0; i < out; ++i) {
    double acc = b.w[i];
    const double* row = W.w.data() + i * in;
    for (size_t j = 0; j < in; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
}

// dW += dy x^T, db += dy, and optionally dx += W^T dy
void linear_bwd(Tensor& W, Tensor& b, const Vec& x, const Vec& dy, Vec* dx) {
  size_t out = W.rows(), in = W.cols();
  for (size_t i = 0; i < out; ++i) {
    double d = dy[i];
    b.g[i] += d;
    double* grow = W.g.data() + i * in;
    for (size_t j = 0; j < in; ++j) grow[j] += d * x[j];
  }
  if (dx) {
    for (size_t i = 0; i < out; ++i) {
      double d = dy[i];
      const double* wrow = W.w.data() + i * in;
      for (size_t j = 0; j < in; ++j) (*dx)[j] += wrow[j] * d;
    }
  }
}

Vec ln_forward(const LnParams& ln, const Vec& x, LnCache& c) {
  size_t d = x.size();
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= double(d);
  double var = 0.0;
  for (double v : x) {
    double dv = v - mean;
    var += dv * dv;
  }
  var /= double(d);
  c.inv_std = 1.0 / std::sqrt(var + kLnEps);
  c.xhat.resize(d);
  Vec y(d);
  for (size_t i = 0; i < d; ++i) {
    c.xhat[i] = (x[i] - mean) * c.inv_std;
    y[i] = ln.gamma.w[i] * c.xhat[i] + ln.beta.w[i];
  }
  return y;
}

void ln_backward(LnParams& ln, const LnCache& c, const Vec& dy, Vec& dx) {
  size_t d = dy.size();
  Vec dxhat(d);
  for (size_t i = 0; i < d; ++i) {
    ln.gamma.g[i] += dy[i] * c.xhat[i];
    ln.beta.g[i] += dy[i];
    dxhat[i] = dy[i] * ln.gamma.w[i];
  }
  double m1 = 0.0, m2 = 0.0;
  for (size_t i = 0; i < d; ++i) {
    m1 += dxhat[i];
    m2 += dxhat[i] * c.xhat[i];
  }
  m1 /= double(d);
  m2 /= double(d);
  for (size_t i = 0; i < d; ++i)
    dx[i] += c.inv_std * (dxhat[i] - m1 - c.xhat[i] * m2);
}

void softmax_inplace(Vec& v) {
  double mx = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double& x : v) {
    x = std::exp(x - mx);
    s += x;
  }
  for (double& x : v) x /= s;
}

Vec softmax_bwd(const Vec& y, const Vec& dy) {
  double dot = 0.0;
  for (size_t i = 0; i < y.size(); ++i) dot += y[i] * dy[i];
  Vec out(y.size());
  for (size_t i = 0; i < y.size(); ++i) out[i] = y[i] * (dy[i] - dot);
  return out;
}

// [sine(x, d/2); sine(y, d/2)]
Vec wp_embed(const Waypoint& w, int d) {
  Vec out = sine_embed(w.x, d / 2);
  Vec ye = sine_embed(w.y, d / 2);
  out.insert(out.end(), ye.begin(), ye.end());
  return out;
}

void add_into(Vec& a, const Vec& b) {
  for (size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

Vec added(const Vec& a, const Vec& b) {
  Vec out = a;
  add_into(out, b);
  return out;
}

Vec relu(const Vec& x) {
  Vec y = x;
  for (double& v : y) v = v > 0.0 ? v : 0.0;
  return y;
}

// out = w2 relu(w1 x + b1) + b2, caching the pre-activation
Vec mlp_forward(const MlpParams& m, const Vec& x, Vec& hpre) {
  linear(m.w1, m.b1, x, hpre);
  Vec h = relu(hpre);
  Vec out;
  linear(m.w2, m.b2, h, out);
  return out;
}

// accumulates parameter grads and dx += d(mlp)/dx^T dout
void mlp_backward(MlpParams& m, const Vec& x, const Vec& hpre, const Vec& dout,
                  Vec* dx) {
  Vec h = relu(hpre);
  Vec dh(hpre.size(), 0.0);
  linear_bwd(m.w2, m.b2, h, dout, &dh);
  for (size_t i = 0; i < dh.size(); ++i)
    if (hpre[i] <= 0.0) dh[i] = 0.0;
  linear_bwd(m.w1, m.b1, x, dh, dx);
}

Vec cross_attn_forward(const AttnParams& ap, int heads, const Vec& q_in,
                       const std::vector<Vec>& k_in,
                       const std::vector<Vec>& v_in, CrossAttnCache& c) {
  size_t d = q_in.size(), N = k_in.size();
  size_t dh = d / size_t(heads);
  double scale = 1.0 / std::sqrt(double(dh));
  c.q_in = q_in;
  c.k_in = k_in;
  c.v_in = v_in;
  linear(ap.wq, ap.bq, q_in, c.qp);
  c.kp.assign(N, Vec());
  c.vp.assign(N, Vec());
  for (size_t i = 0; i < N; ++i) {
    linear(ap.wk, ap.bk, k_in[i], c.kp[i]);
    linear(ap.wv, ap.bv, v_in[i], c.vp[i]);
  }
  c.attn.assign(size_t(heads), Vec(N, 0.0));
  c.ctx.assign(d, 0.0);
  for (int h = 0; h < heads; ++h) {
    size_t lo = size_t(h) * dh;
    Vec s(N, 0.0);
    for (size_t i = 0; i < N; ++i) {
      double acc = 0.0;
      for (size_t t = 0; t < dh; ++t) acc += c.qp[lo + t] * c.kp[i][lo + t];
      s[i] = acc * scale;
    }
    softmax_inplace(s);
    c.attn[size_t(h)] = s;
    for (size_t i = 0; i < N; ++i)
      for (size_t t = 0; t < dh; ++t) c.ctx[lo + t] += s[i] * c.vp[i][lo + t];
  }
  Vec out;
  linear(ap.wo, ap.bo, c.ctx, out);
  return out;
}

void cross_attn_backward(AttnParams& ap, int heads, const CrossAttnCache& c,
                         const Vec& dout, Vec& dq_accum) {
  size_t d = c.q_in.size(), N = c.k_in.size();
  size_t dh = d / size_t(heads);
  double scale = 1.0 / std::sqrt(double(dh));
  Vec dctx(d, 0.0);
  linear_bwd(ap.wo, ap.bo, c.ctx, dout, &dctx);
  Vec dqp(d, 0.0);
  std::vector<Vec> dkp(N, Vec(d, 0.0)), dvp(N, Vec(d, 0.0));
  for (int h = 0; h < heads; ++h) {
    size_t lo = size_t(h) * dh;
    const Vec& attn = c.attn[size_t(h)];
    Vec dattn(N, 0.0);
    for (size_t i = 0; i < N; ++i) {
      double acc = 0.0;
      for (size_t t = 0; t < dh; ++t) {
        acc += dctx[lo + t] * c.vp[i][lo + t];
        dvp[i][lo + t] += attn[i] * dctx[lo + t];
      }
      dattn[i] = acc;
    }
    Vec ds = softmax_bwd(attn, dattn);
    for (size_t i = 0; i < N; ++i) {
      for (size_t t = 0; t < dh; ++t) {
        dqp[lo + t] += ds[i] * c.kp[i][lo + t] * scale;
        dkp[i][lo + t] += ds[i] * c.qp[lo + t] * scale;
      }
    }
  }
  linear_bwd(ap.wq, ap.bq, c.q_in, dqp, &dq_accum);
  for (size_t i = 0; i < N; ++i) {
    linear_bwd(ap.wk, ap.bk, c.k_in[i], dkp[i], nullptr);
    linear_bwd(ap.wv, ap.bv, c.v_in[i], dvp[i], nullptr);
  }
}

void encode_backward(DenoiserParams& p, const EncCache& c, const Vec& dF) {
  size_t T = c.tok.size();
  int heads = p.cfg.heads;
  size_t d = size_t(p.cfg.embed_dim);
  size_t dh = d / size_t(heads);
  double scale = 1.0 / std::sqrt(double(dh));

  Vec dz(d);
  for (size_t i = 0; i < d; ++i) dz[i] = dF[i] / double(T);

  std::vector<Vec> du(T, Vec(d, 0.0));
  for (size_t k = 0; k < T; ++k) {
    du[k] = dz;  // residual into u
    Vec df(d, 0.0);
    mlp_backward(p.enc_ffn, c.f[k], c.hpre[k], dz, &df);
    ln_backward(p.enc_ln2, c.ln2[k], df, du[k]);
  }

  std::vector<Vec> dctx(T, Vec(d, 0.0));
  for (size_t k = 0; k < T; ++k)
    linear_bwd(p.enc_attn.wo, p.enc_attn.bo, c.ctx[k], du[k], &dctx[k]);

  std::vector<Vec> dqp(T, Vec(d, 0.0)), dkp(T, Vec(d, 0.0)), dvp(T, Vec(d, 0.0));
  for (int h = 0; h < heads; ++h) {
    size_t lo = size_t(h) * dh;
    for (size_t k = 0; k < T; ++k) {
      const Vec& attn = c.attn[size_t(h)][k];
      Vec dattn(T, 0.0);
      for (size_t i = 0; i < T; ++i) {
        double acc = 0.0;
        for (size_t t = 0; t < dh; ++t) {
          acc += dctx[k][lo + t] * c.vp[i][lo + t];
          dvp[i][lo + t] += attn[i] * dctx[k][lo + t];
        }
        dattn[i] = acc;
      }
      Vec ds = softmax_bwd(attn, dattn);
      for (size_t i = 0; i < T; ++i) {
        for (size_t t = 0; t < dh; ++t) {
          dqp[k][lo + t] += ds[i] * c.kp[i][lo + t] * scale;
          dkp[i][lo + t] += ds[i] * c.qp[k][lo + t] * scale;
        }
      }
    }
  }

  Vec sink(d, 0.0);  // LN1 input grads are not needed further
  for (size_t k = 0; k < T; ++k) {
    Vec da(d, 0.0);
    linear_bwd(p.enc_attn.wq, p.enc_attn.bq, c.a[k], dqp[k], &da);
    linear_bwd(p.enc_attn.wk, p.enc_attn.bk, c.a[k], dkp[k], &da);
    linear_bwd(p.enc_attn.wv, p.enc_attn.bv, c.a[k], dvp[k], &da);
    ln_backward(p.enc_ln1, c.ln1[k], da, sink);
  }
}

void pool_backward(DenoiserParams& p, const PoolCache& c, const Vec& dout,
                   Vec& dinst) {
  add_into(dinst, dout);  // residual
  Vec dfused(c.fused.size(), 0.0);
  mlp_backward(p.pool_mlp, c.fused, c.hpre, dout, &dfused);
  size_t T = c.feats.size();
  Vec dalpha(T, 0.0);
  for (size_t k = 0; k < T; ++k) {
    double acc = 0.0;
    for (size_t j = 0; j < dfused.size(); ++j) acc += dfused[j] * c.feats[k][j];
    dalpha[k] = acc;
  }
  Vec dlogits = softmax_bwd(c.alpha, dalpha);
  linear_bwd(p.pool_alpha_w, p.pool_alpha_b, c.inst, dlogits, &dinst);
}

void decode_backward(DenoiserParams& p, const SceneTokens& tokens,
                     const DecodeCache& c, const Vec& dF_out, Vec& df_traj) {
  size_t d = size_t(p.cfg.embed_dim);
  int heads = p.cfg.heads;
  (void)tokens;

  Vec df_nav = dF_out;  // residual
  Vec dln(d, 0.0);
  mlp_backward(p.dec_ffn, c.ln_out, c.hpre, dF_out, &dln);
  ln_backward(p.dec_ln, c.ln, dln, df_nav);

  Vec df_map(d, 0.0);
  cross_attn_backward(p.dec_nav, heads, c.nav, df_nav, df_map);

  Vec dq2(d, 0.0);
  if (c.map.skipped)
    dq2 = df_map;
  else
    cross_attn_backward(p.dec_map, heads, c.map, df_map, dq2);

  Vec dq_total = dq2;
  Vec dq1(d, 0.0);
  if (c.agent.skipped)
    dq1 = dq2;  // pass-through handed the query on unchanged
  else
    cross_attn_backward(p.dec_agent, heads, c.agent, dq2, dq1);

  add_into(dq_total, dq1);
  df_traj = dq1;

  size_t mi = size_t(c.mode) % size_t(p.cfg.modes);
  for (size_t j = 0; j < d; ++j) p.mode_embed.g[mi * d + j] += dq_total[j];
}

void head_backward(DenoiserParams& p, const HeadCache& c, const Vec& dpred,
                   Vec& df_out) {
  mlp_backward(p.head, c.f_out, c.hpre, dpred, &df_out);
}

}  // namespace

void DenoiserConfig::validate() const {
  if (embed_dim < 8 || embed_dim % 8 != 0)
    throw InvalidDim("embed_dim must be a positive multiple of 8");
  if (heads < 1 || embed_dim % heads != 0)
    throw InvalidDim("embed_dim must divide evenly into heads");
  if (horizon < 1) throw InvalidDim("horizon must be positive");
  if (modes < 1) throw InvalidDim("modes must be positive");
  if (!(norm_scale > 0.0)) throw InvalidScale("norm_scale must be positive");
  if (!(feature_cell > 0.0)) throw InvalidDim("feature_cell must be positive");
}

std::vector<double> sine_embed(double pos, int dim) {
  if (dim <= 0 || dim % 2 != 0) throw InvalidDim("embedding dim must be even");
  Vec out(static_cast<size_t>(dim), 0.0);
  for (int i = 0; i < dim / 2; ++i) {
    double freq = std::pow(10000.0, -2.0 * double(i) / double(dim));
    out[size_t(2 * i)] = std::sin(pos * freq);
    out[size_t(2 * i + 1)] = std::cos(pos * freq);
  }
  return out;
}

std::vector<Tensor*> DenoiserParams::tensors() {
  return {
      &enc_ln1.gamma, &enc_ln1.beta,
      &enc_attn.wq, &enc_attn.bq, &enc_attn.wk, &enc_attn.bk,
      &enc_attn.wv, &enc_attn.bv, &enc_attn.wo, &enc_attn.bo,
      &enc_ln2.gamma, &enc_ln2.beta,
      &enc_ffn.w1, &enc_ffn.b1, &enc_ffn.w2, &enc_ffn.b2,
      &pool_alpha_w, &pool_alpha_b,
      &pool_mlp.w1, &pool_mlp.b1, &pool_mlp.w2, &pool_mlp.b2,
      &dec_agent.wq, &dec_agent.bq, &dec_agent.wk, &dec_agent.bk,
      &dec_agent.wv, &dec_agent.bv, &dec_agent.wo, &dec_agent.bo,
      &dec_map.wq, &dec_map.bq, &dec_map.wk, &dec_map.bk,
      &dec_map.wv, &dec_map.bv, &dec_map.wo, &dec_map.bo,
      &dec_nav.wq, &dec_nav.bq, &dec_nav.wk, &dec_nav.bk,
      &dec_nav.wv, &dec_nav.bv, &dec_nav.wo, &dec_nav.bo,
      &dec_ln.gamma, &dec_ln.beta,
      &dec_ffn.w1, &dec_ffn.b1, &dec_ffn.w2, &dec_ffn.b2,
      &head.w1, &head.b1, &head.w2, &head.b2,
      &mode_embed,
  };
}

std::vector<const Tensor*> DenoiserParams::tensors() const {
  auto list = const_cast<DenoiserParams*>(this)->tensors();
  return std::vector<const Tensor*>(list.begin(), list.end());
}

void DenoiserParams::zero_grads() {
  for (Tensor* t : tensors()) std::fill(t->g.begin(), t->g.end(), 0.0);
}

size_t DenoiserParams::param_count() const {
  size_t n = 0;
  for (const Tensor* t : tensors()) n += t->size();
  return n;
}

DenoiserParams init_denoiser(const DenoiserConfig& cfg, uint64_t seed) {
  cfg.validate();
  size_t d = size_t(cfg.embed_dim);
  size_t hid = 2 * d;
  size_t T = size_t(cfg.horizon);
  size_t M = size_t(cfg.modes);

  DenoiserParams p;
  p.cfg = cfg;
  auto attn = [&](const std::string& prefix) {
    AttnParams a;
    a.wq = make_tensor(prefix + ".wq", {d, d});
    a.bq = make_tensor(prefix + ".bq", {d});
    a.wk = make_tensor(prefix + ".wk", {d, d});
    a.bk = make_tensor(prefix + ".bk", {d});
    a.wv = make_tensor(prefix + ".wv", {d, d});
    a.bv = make_tensor(prefix + ".bv", {d});
    a.wo = make_tensor(prefix + ".wo", {d, d});
    a.bo = make_tensor(prefix + ".bo", {d});
    return a;
  };
  auto lnp = [&](const std::string& prefix) {
    LnParams l;
    l.gamma = make_tensor(prefix + ".gamma", {d});
    l.beta = make_tensor(prefix + ".beta", {d});
    std::fill(l.gamma.w.begin(), l.gamma.w.end(), 1.0);
    return l;
  };
  auto mlp = [&](const std::string& prefix, size_t out_dim) {
    MlpParams m;
    m.w1 = make_tensor(prefix + ".w1", {hid, d});
    m.b1 = make_tensor(prefix + ".b1", {hid});
    m.w2 = make_tensor(prefix + ".w2", {out_dim, hid});
    m.b2 = make_tensor(prefix + ".b2", {out_dim});
    return m;
  };

  p.enc_ln1 = lnp("enc.ln1");
  p.enc_ln2 = lnp("enc.ln2");
  p.enc_attn = attn("enc.attn");
  p.enc_ffn = mlp("enc.ffn", d);
  p.pool_alpha_w = make_tensor("pool.alpha.w", {T, d});
  p.pool_alpha_b = make_tensor("pool.alpha.b", {T});
  p.pool_mlp = mlp("pool.mlp", d);
  p.dec_agent = attn("dec.agent");
  p.dec_map = attn("dec.map");
  p.dec_nav = attn("dec.nav");
  p.dec_ln = lnp("dec.ln");
  p.dec_ffn = mlp("dec.ffn", d);
  p.head = mlp("head", 2 * T);
  p.mode_embed = make_tensor("mode_embed", {M, d});

  Rng rng(derive_seed(seed, 0xd10de));
  for (Tensor* t : p.tensors()) {
    if (t->shape.size() == 2 && t->name != "mode_embed") {
      double bound = 1.0 / std::sqrt(double(t->cols()));
      for (double& x : t->w) x = rng.uniform(-bound, bound);
    }
  }
  double bound = 1.0 / std::sqrt(double(d));
  for (double& x : p.mode_embed.w) x = rng.uniform(-bound, bound);
  return p;
}

void FeatureGrid::sample(const Waypoint& p, double* out, bool* clamped) const {
  double gx = (p.x - origin.x) / cell;
  double gy = (p.y - origin.y) / cell;
  bool clip = false;
  if (gx < 0.0) { gx = 0.0; clip = true; }
  if (gy < 0.0) { gy = 0.0; clip = true; }
  if (gx > double(cols - 1)) { gx = double(cols - 1); clip = true; }
  if (gy > double(rows - 1)) { gy = double(rows - 1); clip = true; }
  if (clamped) *clamped = clip;
  size_t c0 = size_t(gx), r0 = size_t(gy);
  size_t c1 = std::min(c0 + 1, cols - 1);
  size_t r1 = std::min(r0 + 1, rows - 1);
  double fx = gx - double(c0), fy = gy - double(r0);
  const double* v00 = at(r0, c0);
  const double* v01 = at(r0, c1);
  const double* v10 = at(r1, c0);
  const double* v11 = at(r1, c1);
  for (size_t j = 0; j < dim; ++j) {
    double a = v00[j] * (1.0 - fx) + v01[j] * fx;
    double b = v10[j] * (1.0 - fx) + v11[j] * fx;
    out[j] = a * (1.0 - fy) + b * fy;
  }
}

SceneTokens build_scene_tokens(const Scene& scene, const DenoiserConfig& cfg) {
  cfg.validate();
  int d = cfg.embed_dim;
  SceneTokens tk;

  for (const auto& a : scene.agents) {
    Vec tok = sine_embed(a.position.x, d / 4);
    Vec part = sine_embed(a.position.y, d / 4);
    tok.insert(tok.end(), part.begin(), part.end());
    part = sine_embed(a.vx, d / 4);
    tok.insert(tok.end(), part.begin(), part.end());
    part = sine_embed(a.vy, d / 4);
    tok.insert(tok.end(), part.begin(), part.end());
    tk.agent_tokens.push_back(std::move(tok));
    tk.agent_pos.push_back(wp_embed(a.position, d));
  }

  for (size_t i = 0; i < scene.map_polylines.size(); ++i) {
    const auto& line = scene.map_polylines[i];
    if (line.empty()) continue;
    size_t n_tok = std::min<size_t>(4, line.size());
    for (size_t j = 0; j < n_tok; ++j) {
      size_t idx = n_tok == 1 ? 0 : (line.size() - 1) * j / (n_tok - 1);
      tk.map_tokens.push_back(wp_embed(line[idx], d));
      tk.map_pos.push_back(sine_embed(double(i), d));
    }
  }

  for (const auto& anchor : scene.anchors) {
    std::vector<Vec> toks;
    for (size_t k = 0; k < anchor.points.size(); ++k) {
      Vec t = wp_embed(anchor.points[k], d);
      add_into(t, sine_embed(double(k), d));
      toks.push_back(std::move(t));
    }
    tk.nav_tokens.push_back(std::move(toks));
  }

  // feature grid over the same rectangle the safety field covers
  const SafetyField& sf = scene.safety_field;
  double min_x = sf.origin.x - 0.5 * sf.cell;
  double min_y = sf.origin.y - 0.5 * sf.cell;
  double max_x = min_x + double(sf.cols) * sf.cell;
  double max_y = min_y + double(sf.rows) * sf.cell;
  FeatureGrid& g = tk.grid;
  g.cell = cfg.feature_cell;
  g.dim = size_t(d);
  g.cols = size_t(std::floor((max_x - min_x) / g.cell)) + 1;
  g.rows = size_t(std::floor((max_y - min_y) / g.cell)) + 1;
  g.origin = {min_x + 0.5 * g.cell, min_y + 0.5 * g.cell};
  g.data.assign(g.rows * g.cols * g.dim, 0.0);
  for (size_t r = 0; r < g.rows; ++r) {
    for (size_t c = 0; c < g.cols; ++c) {
      Waypoint p{g.origin.x + double(c) * g.cell, g.origin.y + double(r) * g.cell};
      double clearance = std::min(50.0, query_safety(sf, p));
      double lane = std::min(50.0, corridor_distance(scene, p));
      Vec feat = sine_embed(clearance, d / 2);
      Vec lf = sine_embed(lane, d / 2);
      feat.insert(feat.end(), lf.begin(), lf.end());
      std::copy(feat.begin(), feat.end(),
                g.data.begin() + long((r * g.cols + c) * g.dim));
    }
  }
  return tk;
}

std::vector<double> encode_trajectory(const DenoiserParams& p,
                                      const Trajectory& traj_norm,
                                      EncCache* cache) {
  size_t T = traj_norm.points.size();
  if (T == 0) throw InvalidTrajectory("cannot encode an empty trajectory");
  size_t d = size_t(p.cfg.embed_dim);
  int heads = p.cfg.heads;
  size_t dh = d / size_t(heads);
  double scale = 1.0 / std::sqrt(double(dh));

  EncCache local;
  EncCache& c = cache ? *cache : local;
  c.tok.assign(T, Vec());
  c.a.assign(T, Vec());
  c.ln1.assign(T, LnCache());
  c.qp.assign(T, Vec());
  c.kp.assign(T, Vec());
  c.vp.assign(T, Vec());
  c.ctx.assign(T, Vec(d, 0.0));
  c.u.assign(T, Vec());
  c.f.assign(T, Vec());
  c.ln2.assign(T, LnCache());
  c.hpre.assign(T, Vec());
  c.attn.assign(size_t(heads), std::vector<Vec>(T, Vec(T, 0.0)));

  for (size_t k = 0; k < T; ++k) {
    c.tok[k] = wp_embed(traj_norm.points[k], int(d));
    add_into(c.tok[k], sine_embed(double(k), int(d)));
    c.a[k] = ln_forward(p.enc_ln1, c.tok[k], c.ln1[k]);
    linear(p.enc_attn.wq, p.enc_attn.bq, c.a[k], c.qp[k]);
    linear(p.enc_attn.wk, p.enc_attn.bk, c.a[k], c.kp[k]);
    linear(p.enc_attn.wv, p.enc_attn.bv, c.a[k], c.vp[k]);
  }
  for (int h = 0; h < heads; ++h) {
    size_t lo = size_t(h) * dh;
    for (size_t k = 0; k < T; ++k) {
      Vec s(T, 0.0);
      for (size_t i = 0; i < T; ++i) {
        double acc = 0.0;
        for (size_t t = 0; t < dh; ++t) acc += c.qp[k][lo + t] * c.kp[i][lo + t];
        s[i] = acc * scale;
      }
      softmax_inplace(s);
      c.attn[size_t(h)][k] = s;
      for (size_t i = 0; i < T; ++i)
        for (size_t t = 0; t < dh; ++t)
          c.ctx[k][lo + t] += s[i] * c.vp[i][lo + t];
    }
  }
  Vec F(d, 0.0);
  for (size_t k = 0; k < T; ++k) {
    Vec att_out;
    linear(p.enc_attn.wo, p.enc_attn.bo, c.ctx[k], att_out);
    c.u[k] = added(c.tok[k], att_out);
    c.f[k] = ln_forward(p.enc_ln2, c.u[k], c.ln2[k]);
    Vec g = mlp_forward(p.enc_ffn, c.f[k], c.hpre[k]);
    for (size_t j = 0; j < d; ++j) F[j] += (c.u[k][j] + g[j]) / double(T);
  }
  return F;
}

std::vector<double> traj_pool(const DenoiserParams& p, const Trajectory& deltas_norm,
                              const std::vector<double>& inst_feature,
                              const FeatureGrid& grid, PoolCache* cache) {
  size_t T = deltas_norm.points.size();
  size_t d = size_t(p.cfg.embed_dim);
  if (grid.dim != d) throw InvalidDim("grid feature dim differs from embed dim");
  if (inst_feature.size() != d) throw InvalidDim("instance feature has wrong dim");
  if (p.pool_alpha_w.rows() != T)
    throw InvalidDim("pooling head sized for a different horizon");

  PoolCache local;
  PoolCache& c = cache ? *cache : local;
  c.inst = inst_feature;
  Trajectory abs = cumulative_sum(deltas_norm);
  c.feats.assign(T, Vec(d, 0.0));
  c.clamped = 0;
  for (size_t k = 0; k < T; ++k) {
    Waypoint pos{abs.points[k].x * p.cfg.norm_scale,
                 abs.points[k].y * p.cfg.norm_scale};
    bool clip = false;
    grid.sample(pos, c.feats[k].data(), &clip);
    if (clip) ++c.clamped;
  }
  linear(p.pool_alpha_w, p.pool_alpha_b, c.inst, c.logits);
  c.alpha = c.logits;
  softmax_inplace(c.alpha);
  c.fused.assign(d, 0.0);
  for (size_t k = 0; k < T; ++k)
    for (size_t j = 0; j < d; ++j) c.fused[j] += c.alpha[k] * c.feats[k][j];
  Vec out = mlp_forward(p.pool_mlp, c.fused, c.hpre);
  add_into(out, c.inst);
  return out;
}

std::vector<double> decode(const DenoiserParams& p, const std::vector<double>& f_traj,
                           int mode, const SceneTokens& tokens,
                           DecodeCache* cache) {
  size_t d = size_t(p.cfg.embed_dim);
  if (f_traj.size() != d) throw InvalidDim("trajectory feature has wrong dim");
  if (tokens.nav_tokens.empty())
    throw MissingAnchors("no guidance tokens for any mode");
  int heads = p.cfg.heads;

  DecodeCache local;
  DecodeCache& c = cache ? *cache : local;
  c.mode = mode;
  size_t mi = size_t(mode) % size_t(p.cfg.modes);
  c.q.assign(p.mode_embed.w.begin() + long(mi * d),
             p.mode_embed.w.begin() + long((mi + 1) * d));
  c.f_traj = f_traj;
  c.q1 = added(c.q, f_traj);

  if (tokens.agent_tokens.empty()) {
    c.agent.skipped = true;
    c.f_agent = c.q1;
  } else {
    std::vector<Vec> keys;
    keys.reserve(tokens.agent_tokens.size());
    for (size_t i = 0; i < tokens.agent_tokens.size(); ++i)
      keys.push_back(added(tokens.agent_tokens[i], tokens.agent_pos[i]));
    c.f_agent = cross_attn_forward(p.dec_agent, heads, c.q1, keys,
                                   tokens.agent_tokens, c.agent);
  }

  c.q2 = added(c.q, c.f_agent);
  if (tokens.map_tokens.empty()) {
    c.map.skipped = true;
    c.f_map = c.q2;
  } else {
    std::vector<Vec> keys;
    keys.reserve(tokens.map_tokens.size());
    for (size_t i = 0; i < tokens.map_tokens.size(); ++i)
      keys.push_back(added(tokens.map_tokens[i], tokens.map_pos[i]));
    c.f_map = cross_attn_forward(p.dec_map, heads, c.q2, keys,
                                 tokens.map_tokens, c.map);
  }

  const auto& nav = tokens.nav_tokens[size_t(mode) % tokens.nav_tokens.size()];
  if (nav.empty()) throw MissingAnchors("empty guidance token set");
  c.f_nav = cross_attn_forward(p.dec_nav, heads, c.f_map, nav, nav, c.nav);

  c.ln_out = ln_forward(p.dec_ln, c.f_nav, c.ln);
  Vec ffn = mlp_forward(p.dec_ffn, c.ln_out, c.hpre);
  Vec out = added(ffn, c.f_nav);
  return out;
}

std::vector<double> regress_head(const DenoiserParams& p,
                                 const std::vector<double>& f_out,
                                 HeadCache* cache) {
  if (f_out.size() != size_t(p.cfg.embed_dim))
    throw InvalidDim("decoder output has wrong dim");
  HeadCache local;
  HeadCache& c = cache ? *cache : local;
  c.f_out = f_out;
  return mlp_forward(p.head, f_out, c.hpre);
}

Trajectory forward_mode(const DenoiserParams& p, const SceneTokens& tokens,
                        const Trajectory& noisy_norm, const Trajectory& ref_norm,
                        int mode, ModeCache* cache) {
  if (noisy_norm.points.size() != size_t(p.cfg.horizon))
    throw InvalidDim("noisy trajectory length differs from configured horizon");
  ModeCache local;
  ModeCache& c = cache ? *cache : local;
  c.mode = mode;
  c.traj_dt = noisy_norm.dt;
  Vec fn = encode_trajectory(p, noisy_norm, &c.enc_noisy);
  Vec fr = encode_trajectory(p, ref_norm, &c.enc_ref);
  c.f_inst = added(fn, fr);
  Trajectory deltas = displacements(noisy_norm);
  c.f_traj = traj_pool(p, deltas, c.f_inst, tokens.grid, &c.pool);
  c.f_out = decode(p, c.f_traj, mode, tokens, &c.dec);
  Vec pred = regress_head(p, c.f_out, &c.head);
  c.valid = true;

  Trajectory out;
  out.dt = noisy_norm.dt;
  out.points.reserve(size_t(p.cfg.horizon));
  for (int k = 0; k < p.cfg.horizon; ++k)
    out.points.push_back({pred[size_t(2 * k)], pred[size_t(2 * k + 1)]});
  return out;
}

void backward_mode(DenoiserParams& p, const SceneTokens& tokens,
                   const ModeCache& c, const std::vector<double>& dpred) {
  if (!c.valid) throw StaleCache("backward called without forward cache");
  if (dpred.size() != size_t(2 * p.cfg.horizon))
    throw InvalidDim("loss gradient has wrong length");
  size_t d = size_t(p.cfg.embed_dim);
  Vec df_out(d, 0.0);
  head_backward(p, c.head, dpred, df_out);
  Vec df_traj(d, 0.0);
  decode_backward(p, tokens, c.dec, df_out, df_traj);
  Vec dinst(d, 0.0);
  pool_backward(p, c.pool, df_traj, dinst);
  encode_backward(p, c.enc_noisy, dinst);
  encode_backward(p, c.enc_ref, dinst);
}

double global_grad_norm(const DenoiserParams& p) {
  double s = 0.0;
  for (const Tensor* t : p.tensors())
    for (double g : t->g) s += g * g;
  return std::sqrt(s);
}

double clip_gradients(DenoiserParams& p, double max_norm) {
  double norm = global_grad_norm(p);
  if (norm > max_norm && norm > 0.0) {
    double scale = max_norm / norm;
    for (Tensor* t : p.tensors())
      for (double& g : t->g) g *= scale;
  }
  return norm;
}

void Adam::init(const DenoiserParams& p) {
  m.clear();
  v.clear();
  t = 0;
  for (const Tensor* tn : p.tensors()) {
    m.emplace_back(tn->size(), 0.0);
    v.emplace_back(tn->size(), 0.0);
  }
}

void Adam::step(DenoiserParams& p, double lr) {
  auto list = p.tensors();
  if (m.size() != list.size()) throw InvalidDim("optimizer state mismatch");
  ++t;
  double c1 = 1.0 - std::pow(beta1, double(t));
  double c2 = 1.0 - std::pow(beta2, double(t));
  for (size_t i = 0; i < list.size(); ++i) {
    Tensor& tn = *list[i];
    for (size_t j = 0; j < tn.size(); ++j) {
      double g = tn.g[j];
      m[i][j] = beta1 * m[i][j] + (1.0 - beta1) * g;
      v[i][j] = beta2 * v[i][j] + (1.0 - beta2) * g * g;
      double mhat = m[i][j] / c1;
      double vhat = v[i][j] / c2;
      tn.w[j] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

}  // namespace diver
