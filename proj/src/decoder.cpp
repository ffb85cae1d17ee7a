#include "guidecap/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "guidecap/errors.hpp"

namespace guidecap {

using numeric::Array;
using numeric::Graph;
using numeric::Var;

namespace {

int resolve_encode_id(const Vocab& vocab, const std::string& word) {
  const int id = vocab.id_of(word);
  if (id >= 0) return id;
  const int cat = vocab.category_index(word);
  if (cat < 0) {
    throw DataError("word '" + word + "' is neither in the vocabulary nor a registered category");
  }
  const std::string& similar = vocab.categories()[static_cast<std::size_t>(cat)].similar;
  if (similar.empty()) {
    throw DataError("novel category '" + word + "' has no similar word to borrow an embedding from");
  }
  const int sim_id = vocab.id_of(similar);
  if (sim_id < 0) {
    throw DataError("similar word '" + similar + "' for novel category '" + word +
                    "' is not in the vocabulary");
  }
  return sim_id;
}

// Pool ordering used both while pruning and for the final ranking within the
// finished / capped classes: score descending, finished before unfinished,
// then token sequence ascending. With the end token holding the smallest
// non-banned id, this reproduces greedy's smallest-id tie rule at beam one.
struct RankEntry {
  std::vector<int> seq;
  double score = 0.0;
  bool finished = false;
};

bool rank_less(const RankEntry& a, const RankEntry& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.finished != b.finished) return a.finished;
  return a.seq < b.seq;
}

}  // namespace

GuidingSpec make_guiding_spec(const Vocab& vocab, const std::vector<std::string>& s_words,
                              const std::string& guiding) {
  if (guiding.empty()) throw DataError("guiding word must not be empty");
  GuidingSpec spec;
  for (const auto& w : s_words) spec.s_ids.push_back(resolve_encode_id(vocab, w));
  spec.guiding_encode_id = resolve_encode_id(vocab, guiding);
  spec.guiding_vocab_id = vocab.id_of(guiding);
  spec.guiding_surface = guiding;
  return spec;
}

void validate_decode_config(const DecodeConfig& cfg) {
  if (cfg.max_left < 0 || cfg.max_right < 0 || cfg.max_unguided < 0) {
    throw ConfigError("generation caps must not be negative");
  }
  if (cfg.beam < 1) throw ConfigError("beam width must be at least one");
}

LstmState encode_guidance(Graph& g, const LmVars& v, const Array& features, const GuidingSpec& spec,
                          bool reverse_s) {
  LstmState s = initial_state(g, v, features);
  std::vector<int> order = spec.s_ids;
  if (reverse_s) std::reverse(order.begin(), order.end());
  for (int id : order) s = lstm_step(g, v, s, token_embedding(g, v, id));
  if (spec.guiding_encode_id < 0) throw DataError("guidance has no encode id for the guiding word");
  return lstm_step(g, v, s, token_embedding(g, v, spec.guiding_encode_id));
}

namespace {

std::vector<double> step_logprobs(Graph& g, const LmVars& v, const LstmState& s,
                                  const std::set<int>& banned) {
  std::vector<double> lp = numeric::log_softmax(g.value(token_logits(g, v, s)));
  for (int id : banned) {
    if (id >= 0 && static_cast<std::size_t>(id) < lp.size()) {
      lp[static_cast<std::size_t>(id)] = -std::numeric_limits<double>::infinity();
    }
  }
  return lp;
}

}  // namespace

BeamCandidate greedy_decode(Graph& g, const LmVars& v, LstmState state, int max_len,
                            const std::vector<int>& banned) {
  std::set<int> ban(banned.begin(), banned.end());
  ban.insert(Vocab::kStart);
  BeamCandidate out;
  while (static_cast<int>(out.seq.size()) < max_len) {
    const auto lp = step_logprobs(g, v, state, ban);
    int best = -1;
    for (std::size_t t = 0; t < lp.size(); ++t) {
      if (best < 0 || lp[t] > lp[static_cast<std::size_t>(best)]) best = static_cast<int>(t);
    }
    if (best < 0 || lp[static_cast<std::size_t>(best)] == -std::numeric_limits<double>::infinity()) {
      throw ContractError("no token available to generate");
    }
    out.score += lp[static_cast<std::size_t>(best)];
    if (best == Vocab::kEnd) {
      out.finished = true;
      return out;
    }
    out.seq.push_back(best);
    state = lstm_step(g, v, state, token_embedding(g, v, best));
  }
  return out;  // capped
}

std::vector<BeamCandidate> beam_search(Graph& g, const LmVars& v, LstmState state, int max_len,
                                       int beam, const std::vector<int>& banned) {
  if (beam < 1) throw ConfigError("beam width must be at least one");
  std::set<int> ban(banned.begin(), banned.end());
  ban.insert(Vocab::kStart);

  struct Hyp {
    std::vector<int> seq;
    double score = 0.0;
    LstmState state;
  };
  std::vector<Hyp> active = {{{}, 0.0, state}};
  std::vector<RankEntry> finished;

  for (int step = 0; step < max_len && !active.empty(); ++step) {
    struct PoolEntry {
      RankEntry rank;
      int parent = -1;
      int token = -1;  // -1 marks the end token
    };
    std::vector<PoolEntry> pool;
    for (std::size_t a = 0; a < active.size(); ++a) {
      const auto lp = step_logprobs(g, v, active[a].state, ban);
      for (std::size_t t = 0; t < lp.size(); ++t) {
        if (lp[t] == -std::numeric_limits<double>::infinity()) continue;
        PoolEntry e;
        e.parent = static_cast<int>(a);
        e.rank.score = active[a].score + lp[t];
        if (static_cast<int>(t) == Vocab::kEnd) {
          e.rank.seq = active[a].seq;
          e.rank.finished = true;
          e.token = -1;
        } else {
          e.rank.seq = active[a].seq;
          e.rank.seq.push_back(static_cast<int>(t));
          e.token = static_cast<int>(t);
        }
        pool.push_back(std::move(e));
      }
    }
    std::sort(pool.begin(), pool.end(),
              [](const PoolEntry& a, const PoolEntry& b) { return rank_less(a.rank, b.rank); });
    if (pool.size() > static_cast<std::size_t>(beam)) pool.resize(static_cast<std::size_t>(beam));

    std::vector<Hyp> next;
    for (const auto& e : pool) {
      if (e.token < 0) {
        finished.push_back(e.rank);
      } else {
        Hyp h;
        h.seq = e.rank.seq;
        h.score = e.rank.score;
        h.state = lstm_step(g, v, active[static_cast<std::size_t>(e.parent)].state,
                            token_embedding(g, v, e.token));
        next.push_back(std::move(h));
      }
    }
    active = std::move(next);
  }

  // Finished hypotheses outrank capped ones regardless of score.
  std::sort(finished.begin(), finished.end(), rank_less);
  std::vector<RankEntry> capped;
  for (const auto& h : active) capped.push_back({h.seq, h.score, false});
  std::sort(capped.begin(), capped.end(), rank_less);

  std::vector<BeamCandidate> out;
  for (const auto& e : finished) out.push_back({e.seq, e.score, true});
  for (const auto& e : capped) out.push_back({e.seq, e.score, false});
  if (out.empty()) throw ContractError("beam search produced no candidates");
  return out;
}

std::vector<std::string> ids_to_surfaces(const Vocab& vocab, const std::vector<int>& ids) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(vocab.surface_of(id));
  return out;
}

CaptionResult caption_with_guidance(LmParams& lstm_l, LmParams& lstm_r, const Vocab& vocab,
                                    const Array& features, const GuidingSpec& spec,
                                    const DecodeConfig& cfg) {
  validate_decode_config(cfg);
  CaptionResult res;
  res.guiding_surface = spec.guiding_surface;
  res.guiding_vocab_id = spec.guiding_vocab_id;

  {
    Graph g;
    LmVars v = bind_lm(g, lstm_l);
    LstmState s = encode_guidance(g, v, features, spec, cfg.reverse_s);
    BeamCandidate best = beam_search(g, v, s, cfg.max_left, cfg.beam, {}).front();
    res.left.assign(best.seq.rbegin(), best.seq.rend());  // generated right-to-left
    res.score += best.score;
    res.left_capped = !best.finished;
  }
  {
    Graph g;
    LmVars v = bind_lm(g, lstm_r);
    // The right model re-reads the realized prefix in reading order; the
    // guiding word itself is forced through its encode embedding.
    GuidingSpec prefix;
    prefix.s_ids = res.left;
    prefix.guiding_encode_id = spec.guiding_encode_id;
    LstmState s = encode_guidance(g, v, features, prefix, false);
    BeamCandidate best = beam_search(g, v, s, cfg.max_right, cfg.beam, {}).front();
    res.right = best.seq;
    res.score += best.score;
    res.right_capped = !best.finished;
  }

  res.surface = ids_to_surfaces(vocab, res.left);
  res.surface.push_back(spec.guiding_surface);
  const auto right_surfaces = ids_to_surfaces(vocab, res.right);
  res.surface.insert(res.surface.end(), right_surfaces.begin(), right_surfaces.end());
  return res;
}

CaptionResult caption_unguided(LmParams& lstm_r, const Vocab& vocab, const Array& features,
                               const DecodeConfig& cfg) {
  validate_decode_config(cfg);
  CaptionResult res;
  Graph g;
  LmVars v = bind_lm(g, lstm_r);
  LstmState s = initial_state(g, v, features);
  BeamCandidate best = beam_search(g, v, s, cfg.max_unguided, cfg.beam, {}).front();
  res.right = best.seq;
  res.score = best.score;
  res.right_capped = !best.finished;
  res.surface = ids_to_surfaces(vocab, res.right);
  return res;
}

}  // namespace guidecap
