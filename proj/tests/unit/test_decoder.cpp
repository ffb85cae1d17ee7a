#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "guidecap/decoder.hpp"
#include "guidecap/errors.hpp"
#include "guidecap/rng.hpp"
#include "support/hand_lstm.hpp"

using namespace guidecap;
using numeric::Array;
using numeric::Graph;
using numeric::Var;
using testing_support::hand_embed_row;
using testing_support::hand_image_start;
using testing_support::hand_log_softmax;
using testing_support::hand_logits;
using testing_support::hand_step;
using testing_support::HandState;

namespace {

LmParams small_model(std::uint64_t seed, double gain) {
  LmConfig cfg;
  cfg.vocab_size = 5;
  cfg.embed_dim = 3;
  cfg.hidden_dim = 4;
  cfg.feature_dim = 2;
  LmParams p(cfg, "m");
  Rng rng(seed);
  init_lm_params(p, rng);
  for (auto* prm : p.all()) {
    for (std::size_t i = 0; i < prm->value.numel(); ++i) prm->value.data()[i] *= gain;
  }
  return p;
}

// Exhaustive reference decoder over every sequence the step rules allow: the
// end token may be chosen while fewer than max_len tokens are out, anything
// else extends the sequence up to the cap. Banned: the start token.
struct OracleEntry {
  std::vector<int> seq;
  double score = 0.0;
  bool finished = false;
};

void enumerate(const LmParams& p, const HandState& s, std::vector<int>& seq, double score, int max_len,
               std::vector<OracleEntry>& fin, std::vector<OracleEntry>& capped) {
  if (static_cast<int>(seq.size()) == max_len) {
    capped.push_back({seq, score, false});
    return;
  }
  const auto lp = hand_log_softmax(hand_logits(p, s));
  fin.push_back({seq, score + lp[Vocab::kEnd], true});
  for (int t = 0; t < p.cfg.vocab_size; ++t) {
    if (t == Vocab::kStart || t == Vocab::kEnd) continue;
    seq.push_back(t);
    enumerate(p, hand_step(p, s, hand_embed_row(p, t)), seq, score + lp[static_cast<std::size_t>(t)],
              max_len, fin, capped);
    seq.pop_back();
  }
}

bool rank_before(const OracleEntry& a, const OracleEntry& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.seq < b.seq;
}

std::vector<OracleEntry> oracle_ranking(const LmParams& p, const HandState& start, int max_len) {
  std::vector<OracleEntry> fin;
  std::vector<OracleEntry> capped;
  std::vector<int> seq;
  enumerate(p, start, seq, 0.0, max_len, fin, capped);
  std::sort(fin.begin(), fin.end(), rank_before);
  std::sort(capped.begin(), capped.end(), rank_before);
  fin.insert(fin.end(), capped.begin(), capped.end());
  return fin;
}

// Small vocabulary with one novel category ("zeb" borrows dog's embedding).
Vocab small_vocab() {
  Scene s;
  s.id = 0;
  s.objects = {"cat", "dog"};
  s.features = {0.0};
  s.captions = {{"a", "cat", "sits"}, {"a", "dog", "sits"}};
  return build_vocab({s}, 1, {"cat", "dog", "zeb"}, {{"zeb", "dog"}, {"cat", "dog"}});
}

}  // namespace

TEST_CASE("guidance resolution maps known words to themselves and novel words to stand-ins") {
  Vocab vocab = small_vocab();
  const int dog = vocab.id_of("dog");
  const int cat = vocab.id_of("cat");
  REQUIRE(dog > 0);
  REQUIRE(cat > 0);

  GuidingSpec spec = make_guiding_spec(vocab, {"cat", "dog"}, "dog");
  CHECK(spec.s_ids == std::vector<int>{cat, dog});
  CHECK(spec.guiding_encode_id == dog);
  CHECK(spec.guiding_vocab_id == dog);
  CHECK(spec.guiding_surface == "dog");

  GuidingSpec novel = make_guiding_spec(vocab, {}, "zeb");
  CHECK(novel.guiding_encode_id == dog);  // borrowed embedding
  CHECK(novel.guiding_vocab_id == -1);
  CHECK(novel.guiding_surface == "zeb");

  // Novel words are legal in the conditioning sequence too.
  GuidingSpec mixed = make_guiding_spec(vocab, {"zeb"}, "cat");
  CHECK(mixed.s_ids == std::vector<int>{dog});

  CHECK_THROWS_AS(make_guiding_spec(vocab, {}, "unicorn"), DataError);
  CHECK_THROWS_AS(make_guiding_spec(vocab, {"unicorn"}, "dog"), DataError);
  CHECK_THROWS_AS(make_guiding_spec(vocab, {}, ""), DataError);

  // A novel category with no usable stand-in cannot guide.
  Scene s;
  s.id = 0;
  s.objects = {"dog"};
  s.features = {0.0};
  s.captions = {{"a", "dog"}};
  Vocab bare = build_vocab({s}, 1, {"dog", "zeb", "yak"}, {{"yak", "zeb"}});
  CHECK_THROWS_AS(make_guiding_spec(bare, {}, "zeb"), DataError);  // no similar word at all
  CHECK_THROWS_AS(make_guiding_spec(bare, {}, "yak"), DataError);  // stand-in itself unseen
}

TEST_CASE("guidance encoding consumes the object sequence in the configured order") {
  LmParams p = small_model(11, 4.0);
  Array feat = Array::from_vector({0.7, -0.4});
  GuidingSpec spec;
  spec.s_ids = {3, 4};
  spec.guiding_encode_id = 2;

  const auto run = [&](bool reverse_s) {
    Graph g;
    LmVars v = bind_lm(g, p);
    LstmState s = encode_guidance(g, v, feat, spec, reverse_s);
    std::vector<double> h;
    for (int r = 0; r < p.cfg.hidden_dim; ++r) h.push_back(g.value(s.h).at(r));
    return h;
  };

  HandState hs = hand_image_start(p, {0.7, -0.4});
  HandState reversed = hand_step(p, hs, hand_embed_row(p, 4));
  reversed = hand_step(p, reversed, hand_embed_row(p, 3));
  reversed = hand_step(p, reversed, hand_embed_row(p, 2));
  HandState forward = hand_step(p, hs, hand_embed_row(p, 3));
  forward = hand_step(p, forward, hand_embed_row(p, 4));
  forward = hand_step(p, forward, hand_embed_row(p, 2));

  const auto got_rev = run(true);
  const auto got_fwd = run(false);
  for (int r = 0; r < p.cfg.hidden_dim; ++r) {
    CHECK(got_rev[static_cast<std::size_t>(r)] ==
          doctest::Approx(reversed.h[static_cast<std::size_t>(r)]).epsilon(1e-12));
    CHECK(got_fwd[static_cast<std::size_t>(r)] ==
          doctest::Approx(forward.h[static_cast<std::size_t>(r)]).epsilon(1e-12));
  }
}

TEST_CASE("beam search with a saturating width reproduces exhaustive enumeration") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL, 5ULL}) {
    CAPTURE(seed);
    LmParams p = small_model(seed, 6.0);
    Rng rng(seed + 100);
    Array feat = Array::from_vector({rng.normal(), rng.normal()});

    GuidingSpec spec;
    spec.s_ids = {3};
    spec.guiding_encode_id = 4;

    Graph g;
    LmVars v = bind_lm(g, p);
    LstmState start = encode_guidance(g, v, feat, spec, true);
    auto got = beam_search(g, v, start, 3, 125, {});

    HandState hs = hand_image_start(p, {feat.at(0), feat.at(1)});
    hs = hand_step(p, hs, hand_embed_row(p, 3));
    hs = hand_step(p, hs, hand_embed_row(p, 4));
    auto want = oracle_ranking(p, hs, 3);

    REQUIRE(got.size() == want.size());  // 1 + 3 + 9 finished, 27 capped
    for (std::size_t i = 0; i < want.size(); ++i) {
      CAPTURE(i);
      CHECK(got[i].seq == want[i].seq);
      CHECK(got[i].finished == want[i].finished);
      CHECK(got[i].score == doctest::Approx(want[i].score).epsilon(1e-9));
    }
  }
}

TEST_CASE("a beam of one reproduces greedy decoding") {
  for (std::uint64_t seed : {10ULL, 20ULL, 30ULL, 40ULL}) {
    CAPTURE(seed);
    LmParams p = small_model(seed, 5.0);
    Array feat = Array::from_vector({0.3, 0.9});
    const auto run_greedy = [&]() {
      Graph g;
      LmVars v = bind_lm(g, p);
      return greedy_decode(g, v, initial_state(g, v, feat), 6, {});
    };
    const auto run_beam = [&]() {
      Graph g;
      LmVars v = bind_lm(g, p);
      return beam_search(g, v, initial_state(g, v, feat), 6, 1, {}).front();
    };
    BeamCandidate a = run_greedy();
    BeamCandidate b = run_beam();
    CHECK(a.seq == b.seq);
    CHECK(a.finished == b.finished);
    CHECK(a.score == doctest::Approx(b.score).epsilon(1e-12));
  }
}

TEST_CASE("uniform logits rank candidates lexicographically with finished first") {
  LmConfig cfg;
  cfg.vocab_size = 5;
  cfg.embed_dim = 3;
  cfg.hidden_dim = 4;
  cfg.feature_dim = 2;
  LmParams p(cfg, "m");  // all zeros: every distribution is uniform
  Array feat = Array::from_vector({1.0, -1.0});

  Graph g;
  LmVars v = bind_lm(g, p);
  auto got = beam_search(g, v, initial_state(g, v, feat), 2, 125, {});
  REQUIRE(got.size() == 13);  // 1 + 3 finished, 9 capped
  CHECK(got[0].seq == std::vector<int>{});
  CHECK(got[0].finished);
  CHECK(got[1].seq == std::vector<int>{2});
  CHECK(got[2].seq == std::vector<int>{3});
  CHECK(got[3].seq == std::vector<int>{4});
  CHECK(got[4].seq == std::vector<int>{2, 2});
  CHECK_FALSE(got[4].finished);
  CHECK(got[12].seq == std::vector<int>{4, 4});
  const double step_lp = -std::log(5.0);
  CHECK(got[0].score == doctest::Approx(step_lp));
  CHECK(got[1].score == doctest::Approx(2 * step_lp));

  // Greedy on the untrained model stops immediately: the end token holds the
  // smallest non-banned id and wins the tie.
  Graph g2;
  LmVars v2 = bind_lm(g2, p);
  BeamCandidate c = greedy_decode(g2, v2, initial_state(g2, v2, feat), 4, {});
  CHECK(c.seq.empty());
  CHECK(c.finished);
}

TEST_CASE("guided captions place the guiding word exactly after the left context") {
  Vocab vocab = small_vocab();
  LmConfig cfg;
  cfg.vocab_size = vocab.size();
  cfg.embed_dim = 4;
  cfg.hidden_dim = 5;
  cfg.feature_dim = 3;
  LmParams lstm_l(cfg, "lstm_l");
  LmParams lstm_r(cfg, "lstm_r");
  Rng rl(21);
  Rng rr(22);
  init_lm_params(lstm_l, rl);
  init_lm_params(lstm_r, rr);
  for (auto* prm : lstm_l.all()) {
    for (std::size_t i = 0; i < prm->value.numel(); ++i) prm->value.data()[i] *= 12.0;
  }
  for (auto* prm : lstm_r.all()) {
    for (std::size_t i = 0; i < prm->value.numel(); ++i) prm->value.data()[i] *= 12.0;
  }

  DecodeConfig dc;
  dc.max_left = 4;
  dc.max_right = 5;
  dc.beam = 2;

  Rng rf(7);
  for (int trial = 0; trial < 25; ++trial) {
    Array feat = Array::from_vector({rf.normal(), rf.normal(), rf.normal()});
    const std::string guiding = (trial % 2 == 0) ? "dog" : "zeb";
    GuidingSpec spec = make_guiding_spec(vocab, {"cat"}, guiding);
    CaptionResult res = caption_with_guidance(lstm_l, lstm_r, vocab, feat, spec, dc);

    REQUIRE(res.surface.size() == res.left.size() + 1 + res.right.size());
    CHECK(res.surface[res.left.size()] == guiding);
    CHECK(static_cast<int>(res.left.size()) <= dc.max_left);
    CHECK(static_cast<int>(res.right.size()) <= dc.max_right);
    for (int id : res.left) {
      CHECK(id != Vocab::kStart);
      CHECK(id != Vocab::kEnd);
    }
    for (int id : res.right) {
      CHECK(id != Vocab::kStart);
      CHECK(id != Vocab::kEnd);
    }
    for (const auto& w : res.surface) CHECK(w != "<start>");
  }

  // Untrained models emit the end token immediately on both sides, leaving
  // the guiding word alone at index zero.
  LmParams zl(cfg, "lstm_l");
  LmParams zr(cfg, "lstm_r");
  Array feat = Array::from_vector({0.5, 0.5, 0.5});
  CaptionResult bare = caption_with_guidance(zl, zr, vocab, feat, make_guiding_spec(vocab, {}, "dog"), dc);
  CHECK(bare.left.empty());
  CHECK(bare.right.empty());
  CHECK(bare.surface == std::vector<std::string>{"dog"});
}

TEST_CASE("unguided captions come from the right model alone") {
  Vocab vocab = small_vocab();
  LmConfig cfg;
  cfg.vocab_size = vocab.size();
  cfg.embed_dim = 4;
  cfg.hidden_dim = 5;
  cfg.feature_dim = 3;
  LmParams lstm_r(cfg, "lstm_r");
  Rng rng(5);
  init_lm_params(lstm_r, rng);
  for (auto* prm : lstm_r.all()) {
    for (std::size_t i = 0; i < prm->value.numel(); ++i) prm->value.data()[i] *= 10.0;
  }
  DecodeConfig dc;
  dc.max_unguided = 6;
  dc.beam = 3;
  Array feat = Array::from_vector({1.0, 0.0, -1.0});
  CaptionResult res = caption_unguided(lstm_r, vocab, feat, dc);
  CHECK(res.left.empty());
  CHECK(res.guiding_surface.empty());
  CHECK(res.surface.size() == res.right.size());
  CHECK(static_cast<int>(res.right.size()) <= dc.max_unguided);
  CaptionResult again = caption_unguided(lstm_r, vocab, feat, dc);
  CHECK(again.right == res.right);
  CHECK(again.score == res.score);
}

TEST_CASE("decode configuration is validated") {
  DecodeConfig dc;
  dc.beam = 0;
  CHECK_THROWS_AS(validate_decode_config(dc), ConfigError);
  dc = DecodeConfig{};
  dc.max_left = -1;
  CHECK_THROWS_AS(validate_decode_config(dc), ConfigError);
  CHECK_NOTHROW(validate_decode_config(DecodeConfig{}));
}
