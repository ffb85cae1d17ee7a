#pragma once

#include <string>
#include <vector>

#include "guidecap/graph.hpp"
#include "guidecap/rng.hpp"

namespace guidecap {

struct LmConfig {
  int vocab_size = 0;
  int embed_dim = 48;
  int hidden_dim = 64;
  int feature_dim = 32;
};

void validate_lm_config(const LmConfig& cfg);

// One direction's language model. `prefix` namespaces the tensor names in
// checkpoints; the two decoding directions use "lstm_l" and "lstm_r".
struct LmParams {
  LmConfig cfg;
  numeric::Param embed;       // [V, E]
  numeric::Param image_proj;  // [E, D], projects scene features to a pseudo-token
  numeric::Param w_i, b_i;    // gates read concat(x, h): [H, E+H] and [H]
  numeric::Param w_f, b_f;
  numeric::Param w_o, b_o;
  numeric::Param w_c, b_c;
  numeric::Param out_w, out_b;  // token logits: [V, H] and [V]

  LmParams(const LmConfig& cfg, const std::string& prefix);

  std::vector<numeric::Param*> all();
  std::vector<const numeric::Param*> all() const;
};

// Small uniform weights; biases zero except the forget gate, which starts
// open at one so early training does not erase the cell state.
void init_lm_params(LmParams& p, Rng& rng);

struct LstmState {
  numeric::Var h;
  numeric::Var c;
};

// Parameter leaves registered once on a graph, so repeated steps share one
// tape node per tensor instead of copying the matrices every timestep.
struct LmVars {
  LmParams* p = nullptr;
  numeric::Var image_proj;
  numeric::Var w_i, b_i, w_f, b_f, w_o, b_o, w_c, b_c;
  numeric::Var out_w, out_b;
};

LmVars bind_lm(numeric::Graph& g, LmParams& p);

LstmState zero_state(numeric::Graph& g, const LmParams& p);

// Scene features mapped into the embedding space; fed as the very first
// input, so the model's step 0 prediction is conditioned on the image alone.
numeric::Var image_embedding(numeric::Graph& g, const LmVars& v, const numeric::Array& features);

numeric::Var token_embedding(numeric::Graph& g, const LmVars& v, int token_id);

LstmState lstm_step(numeric::Graph& g, const LmVars& v, const LstmState& s, numeric::Var x);

numeric::Var token_logits(numeric::Graph& g, const LmVars& v, const LstmState& s);

// zero state advanced by the image embedding.
LstmState initial_state(numeric::Graph& g, const LmVars& v, const numeric::Array& features);

}  // namespace guidecap
