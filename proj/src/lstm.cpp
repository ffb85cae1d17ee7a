#include "guidecap/lstm.hpp"

#include "guidecap/errors.hpp"

namespace guidecap {

using numeric::Array;
using numeric::Graph;
using numeric::Param;
using numeric::Var;

void validate_lm_config(const LmConfig& cfg) {
  if (cfg.vocab_size < 3) throw ConfigError("vocab_size must cover the special tokens");
  if (cfg.embed_dim < 1) throw ConfigError("embed_dim must be positive");
  if (cfg.hidden_dim < 1) throw ConfigError("hidden_dim must be positive");
  if (cfg.feature_dim < 1) throw ConfigError("feature_dim must be positive");
}

LmParams::LmParams(const LmConfig& config, const std::string& prefix) : cfg(config) {
  validate_lm_config(cfg);
  const int v = cfg.vocab_size;
  const int e = cfg.embed_dim;
  const int h = cfg.hidden_dim;
  const int d = cfg.feature_dim;
  const auto mat = [&](const char* name, int rows, int cols) {
    return Param(prefix + "/" + name, Array::zeros({rows, cols}));
  };
  const auto vec = [&](const char* name, int n) { return Param(prefix + "/" + name, Array::zeros({n})); };
  embed = mat("embed", v, e);
  image_proj = mat("image_proj", e, d);
  w_i = mat("w_i", h, e + h);
  b_i = vec("b_i", h);
  w_f = mat("w_f", h, e + h);
  b_f = vec("b_f", h);
  w_o = mat("w_o", h, e + h);
  b_o = vec("b_o", h);
  w_c = mat("w_c", h, e + h);
  b_c = vec("b_c", h);
  out_w = mat("out_w", v, h);
  out_b = vec("out_b", v);
}

std::vector<Param*> LmParams::all() {
  return {&embed, &image_proj, &w_i, &b_i, &w_f, &b_f, &w_o, &b_o, &w_c, &b_c, &out_w, &out_b};
}

std::vector<const Param*> LmParams::all() const {
  return {&embed, &image_proj, &w_i, &b_i, &w_f, &b_f, &w_o, &b_o, &w_c, &b_c, &out_w, &out_b};
}

void init_lm_params(LmParams& p, Rng& rng) {
  const auto uniform = [&](Param& param) {
    for (std::size_t i = 0; i < param.value.numel(); ++i) {
      param.value.data()[i] = rng.uniform_real(-0.08, 0.08);
    }
  };
  uniform(p.embed);
  uniform(p.image_proj);
  uniform(p.w_i);
  uniform(p.w_f);
  uniform(p.w_o);
  uniform(p.w_c);
  uniform(p.out_w);
  p.b_i.value.fill(0.0);
  p.b_f.value.fill(1.0);
  p.b_o.value.fill(0.0);
  p.b_c.value.fill(0.0);
  p.out_b.value.fill(0.0);
}

LmVars bind_lm(Graph& g, LmParams& p) {
  LmVars v;
  v.p = &p;
  v.image_proj = g.param(p.image_proj);
  v.w_i = g.param(p.w_i);
  v.b_i = g.param(p.b_i);
  v.w_f = g.param(p.w_f);
  v.b_f = g.param(p.b_f);
  v.w_o = g.param(p.w_o);
  v.b_o = g.param(p.b_o);
  v.w_c = g.param(p.w_c);
  v.b_c = g.param(p.b_c);
  v.out_w = g.param(p.out_w);
  v.out_b = g.param(p.out_b);
  return v;
}

LstmState zero_state(Graph& g, const LmParams& p) {
  LstmState s;
  s.h = g.constant(Array::zeros({p.cfg.hidden_dim}));
  s.c = g.constant(Array::zeros({p.cfg.hidden_dim}));
  return s;
}

Var image_embedding(Graph& g, const LmVars& v, const Array& features) {
  if (features.rank() != 1 || features.dim(0) != v.p->cfg.feature_dim) {
    throw DimensionError("scene features must be a vector of length " +
                         std::to_string(v.p->cfg.feature_dim));
  }
  return g.matmul(v.image_proj, g.constant(features));
}

Var token_embedding(Graph& g, const LmVars& v, int token_id) {
  return g.embedding_lookup(v.p->embed, token_id);
}

LstmState lstm_step(Graph& g, const LmVars& v, const LstmState& s, Var x) {
  Var z = g.concat(x, s.h);
  Var i = g.sigmoid(g.add(g.matmul(v.w_i, z), v.b_i));
  Var f = g.sigmoid(g.add(g.matmul(v.w_f, z), v.b_f));
  Var o = g.sigmoid(g.add(g.matmul(v.w_o, z), v.b_o));
  Var cand = g.tanh(g.add(g.matmul(v.w_c, z), v.b_c));
  LstmState next;
  next.c = g.add(g.mul(f, s.c), g.mul(i, cand));
  next.h = g.mul(o, g.tanh(next.c));
  return next;
}

Var token_logits(Graph& g, const LmVars& v, const LstmState& s) {
  return g.add(g.matmul(v.out_w, s.h), v.out_b);
}

LstmState initial_state(Graph& g, const LmVars& v, const Array& features) {
  return lstm_step(g, v, zero_state(g, *v.p), image_embedding(g, v, features));
}

}  // namespace guidecap
