#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "extrap/episode_codec.hpp"
#include "extrap/jsonl.hpp"
#include "extrap/rng.hpp"
#include "extrap/sequence_ops.hpp"

using namespace extrap;

namespace {

Vocabulary test_vocab(int content = 4, int max_states = 10, int bins = 32) {
  std::vector<std::string> labels;
  for (int i = 0; i < content; ++i) labels.push_back(std::string(1, char('A' + i)));
  return Vocabulary::build(labels, max_states, bins);
}

Episode random_episode(RngStream& rng, int content, int L, int max_n,
                       double lo, double hi) {
  Episode ep;
  int n = 1 + static_cast<int>(rng.uniform_int(max_n));
  for (int i = 0; i <= n; ++i) {
    TokenSeq x(L);
    for (auto& t : x) t = static_cast<int>(rng.uniform_int(content));
    ep.states.push_back(std::move(x));
  }
  for (int i = 0; i < n; ++i) ep.scores.push_back(rng.uniform(lo, hi));
  ep.strategy = "test";
  return ep;
}

}  // namespace

TEST_CASE("vocabulary ids and labels round-trip") {
  auto v = test_vocab(4, 3, 8);
  CHECK(v.content_size() == 4);
  CHECK(v.size() == 4 + 4 + 1 + 8);
  for (int id = 0; id < v.size(); ++id) {
    CHECK(v.id(v.label(id)) == id);
  }
  CHECK(v.is_seq(v.seq_token(0)));
  CHECK(v.is_stop(v.stop_token()));
  CHECK(v.is_score(v.score_token(7)));
  CHECK(v.score_bin(v.score_token(5)) == 5);
  CHECK_THROWS_AS(v.seq_token(4), ContractError);
  CHECK_THROWS_AS(Vocabulary::build({"x"}, 2, 2), ContractError);
  CHECK_THROWS_AS(Vocabulary::build({"x", "x"}, 2, 2), ContractError);
}

TEST_CASE("rng determinism and derivation") {
  RngStream a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
  RngStream c(42);
  auto d0 = c.derive(0), d1 = c.derive(1);
  CHECK(d0.seed() != d1.seed());
  CHECK(d0.seed() == RngStream(42).derive(0).seed());
  double u = RngStream(7).uniform01();
  CHECK(u >= 0.0);
  CHECK(u < 1.0);
  // uniform_int covers the range
  RngStream r(3);
  std::vector<int> seen(5, 0);
  for (int i = 0; i < 3000; ++i) seen[r.uniform_int(5)]++;
  for (int s : seen) CHECK(s > 400);
}

TEST_CASE("hamming") {
  TokenSeq x{0, 0, 0, 0};
  CHECK(hamming(x, x) == 0);
  CHECK(hamming({0, 0, 0, 0}, {0, 1, 0, 1}) == 2);
  CHECK_THROWS_AS(hamming({0, 1}, {0, 1, 0}), ContractError);

  // mean distance of random binary pairs of length 16 is 8
  RngStream rng(99);
  double total = 0;
  const int kPairs = 10000;
  for (int i = 0; i < kPairs; ++i) {
    TokenSeq a(16), b(16);
    for (auto& t : a) t = static_cast<int>(rng.uniform_int(2));
    for (auto& t : b) t = static_cast<int>(rng.uniform_int(2));
    total += hamming(a, b);
  }
  CHECK(total / kPairs == doctest::Approx(8.0).epsilon(0.025));
}

TEST_CASE("episode encoding: layout without scores") {
  auto v = test_vocab(2);
  ScoreBinner binner(0.0, 1.0, 32);
  Episode ep;
  ep.states = {{0, 0}, {0, 1}};
  ep.scores = {0.5};
  auto toks = encode_episode(ep, v, binner, RewardMode::kNone);
  std::vector<int> want{0, 0, v.seq_token(0), 0, 1, v.stop_token()};
  CHECK(toks == want);
}

TEST_CASE("episode encoding: scored layout for n=2") {
  auto v = test_vocab(2);
  ScoreBinner binner(0.0, 1.0, 32);
  Episode ep;
  ep.states = {{0, 0}, {0, 1}, {1, 1}};
  ep.scores = {0.25, 0.75};
  auto toks = encode_episode(ep, v, binner, RewardMode::kPredicted);
  std::vector<int> want{0, 0, v.seq_token(0),
                        0, 1, v.seq_token(1), v.score_token(binner.bin(0.25)),
                        1, 1, v.score_token(binner.bin(0.75)),
                        v.stop_token()};
  CHECK(toks == want);
}

TEST_CASE("episode encoding: clamped scores count, never throw") {
  auto v = test_vocab(2);
  ScoreBinner binner(0.0, 1.0, 8);
  Episode ep;
  ep.states = {{0, 0}, {1, 1}};
  ep.scores = {2.5};  // above the fitted range
  EncodeStats stats;
  auto toks = encode_episode(ep, v, binner, RewardMode::kReal, &stats);
  CHECK(stats.clamped_scores == 1);
  CHECK(toks[5] == v.score_token(7));  // clamped to the extreme bin
}

TEST_CASE("episode grammar: n separators, one trailing stop") {
  auto v = test_vocab(4);
  ScoreBinner binner(-3.0, 5.0, 32);
  RngStream rng(1);
  for (int it = 0; it < 100; ++it) {
    auto ep = random_episode(rng, 4, 6, 8, -3.0, 5.0);
    for (auto mode : {RewardMode::kNone, RewardMode::kReal, RewardMode::kPredicted}) {
      auto toks = encode_episode(ep, v, binner, mode);
      long seps = 0, stops = 0;
      for (int t : toks) {
        seps += v.is_seq(t);
        stops += v.is_stop(t);
      }
      CHECK(seps == ep.revised());
      CHECK(stops == 1);
      CHECK(v.is_stop(toks.back()));
    }
  }
}

TEST_CASE("decode inverts encode; scores become bin midpoints") {
  auto v = test_vocab(4);
  ScoreBinner binner(-3.0, 5.0, 32);
  RngStream rng(2);
  for (int it = 0; it < 100; ++it) {
    auto ep = random_episode(rng, 4, 5, 6, -3.0, 5.0);
    auto toks = encode_episode(ep, v, binner, RewardMode::kPredicted);
    auto dec = decode_episode(toks, v, binner);
    CHECK(!dec.truncated);
    CHECK(dec.dropped_tokens == 0);
    REQUIRE(dec.episode.states.size() == ep.states.size());
    CHECK(dec.episode.states == ep.states);
    for (std::size_t i = 0; i < ep.scores.size(); ++i) {
      CHECK(dec.episode.scores[i] ==
            doctest::Approx(binner.midpoint(binner.bin(ep.scores[i]))));
    }
    // mode none: states survive, scores are unknown
    auto toks2 = encode_episode(ep, v, binner, RewardMode::kNone);
    auto dec2 = decode_episode(toks2, v, binner);
    CHECK(dec2.episode.states == ep.states);
    for (double s : dec2.episode.scores) CHECK(std::isnan(s));
  }
}

TEST_CASE("decode: truncation fuzz never throws after a complete x1") {
  auto v = test_vocab(4);
  ScoreBinner binner(0.0, 1.0, 16);
  RngStream rng(3);
  long truncated_seen = 0;
  for (int it = 0; it < 1000; ++it) {
    auto ep = random_episode(rng, 4, 5, 6, 0.0, 1.0);
    auto toks = encode_episode(ep, v, binner, RewardMode::kPredicted);
    // keep at least x0 <seq0> x1 <boundary> so one state is decodable
    std::size_t min_len = 2 * 5 + 2;
    std::size_t cut = min_len + rng.uniform_int(toks.size() - min_len + 1);
    std::vector<int> prefix(toks.begin(), toks.begin() + cut);
    auto dec = decode_episode(prefix, v, binner);
    truncated_seen += dec.truncated;
    CHECK(dec.episode.states.size() >= 2);
    CHECK(dec.episode.states.size() <= ep.states.size());
    // complete states decode to the originals
    for (std::size_t i = 0; i < dec.episode.states.size(); ++i) {
      CHECK(dec.episode.states[i] == ep.states[i]);
    }
  }
  CHECK(truncated_seen > 0);
}

TEST_CASE("decode: structural errors") {
  auto v = test_vocab(4);
  ScoreBinner binner(0.0, 1.0, 16);
  CHECK_THROWS_AS(decode_episode({}, v, binner), StructuralError);
  // no separator after content
  CHECK_THROWS_AS(decode_episode({0, 1, 2}, v, binner), StructuralError);
  // separator with no x0 content
  CHECK_THROWS_AS(decode_episode({v.seq_token(0), 0, 1}, v, binner), StructuralError);
}

TEST_CASE("token roles partition the encoding") {
  auto v = test_vocab(4);
  ScoreBinner binner(0.0, 1.0, 16);
  Episode ep;
  ep.states = {{0, 1}, {2, 3}, {1, 1}};
  ep.scores = {0.2, 0.8};
  auto toks = encode_episode(ep, v, binner, RewardMode::kReal);
  auto roles = token_roles(toks, v);
  REQUIRE(roles.size() == toks.size());
  CHECK(roles[0] == TokenRole::kX0);
  CHECK(roles[1] == TokenRole::kX0);
  CHECK(roles[2] == TokenRole::kSeparator);
  CHECK(roles[3] == TokenRole::kContent);
  CHECK(roles[5] == TokenRole::kSeparator);
  CHECK(roles[6] == TokenRole::kScore);
  CHECK(roles.back() == TokenRole::kStop);
}

TEST_CASE("chain and episode jsonl round-trip is the identity") {
  RngStream rng(4);
  std::vector<ChainRecord> chains;
  for (int c = 0; c < 20; ++c) {
    ChainRecord rec;
    rec.task = "test";
    rec.seed = rng.next_u64();
    int len = 2 + static_cast<int>(rng.uniform_int(30));
    for (int t = 0; t < len; ++t) {
      TokenSeq x(6);
      for (auto& tok : x) tok = static_cast<int>(rng.uniform_int(4));
      rec.states.push_back(std::move(x));
      rec.scores.push_back(rng.normal() * 3.0);
      if (t > 0) rec.accepted.push_back(rng.bernoulli(0.5));
    }
    rec.proposal = {{"kind", "test"}, {"rate", 0.25}};
    chains.push_back(std::move(rec));
  }
  auto dir = std::filesystem::temp_directory_path() / "extrap_core_test";
  std::filesystem::create_directories(dir);
  auto path = (dir / "chains.jsonl").string();
  ArtifactHeader h{"chains", "cafe0123", 42};
  write_chains(path, h, chains);
  ArtifactHeader h2;
  auto back = read_chains(path, &h2);
  CHECK(h2.config_hash == h.config_hash);
  CHECK(h2.seed == h.seed);
  REQUIRE(back.size() == chains.size());
  for (std::size_t i = 0; i < chains.size(); ++i) {
    CHECK(back[i].task == chains[i].task);
    CHECK(back[i].seed == chains[i].seed);
    CHECK(back[i].states == chains[i].states);
    CHECK(back[i].scores == chains[i].scores);  // exact: doubles round-trip
    CHECK(back[i].accepted == chains[i].accepted);
  }

  std::vector<Episode> eps;
  for (int i = 0; i < 20; ++i) eps.push_back(random_episode(rng, 4, 5, 6, -2, 2));
  auto epath = (dir / "episodes.jsonl").string();
  write_episodes(epath, ArtifactHeader{"episodes", "cafe0123", 42}, eps);
  auto eback = read_episodes(epath);
  REQUIRE(eback.size() == eps.size());
  for (std::size_t i = 0; i < eps.size(); ++i) {
    CHECK(eback[i].states == eps[i].states);
    CHECK(eback[i].scores == eps[i].scores);
    CHECK(eback[i].strategy == eps[i].strategy);
  }

  // wrong artifact kind is rejected
  CHECK_THROWS_AS(read_episodes(path), ArtifactError);
}

TEST_CASE("score binner") {
  std::vector<double> scores{1.0, 2.0, 5.0, 3.0};
  auto b = ScoreBinner::fit(scores, 8);
  CHECK(b.lo() == 1.0);
  CHECK(b.hi() == 5.0);
  CHECK(b.bin(1.0) == 0);
  CHECK(b.bin(5.0) == 7);   // top edge clamps into the last bin
  bool clamped = false;
  CHECK(b.bin(-10.0, &clamped) == 0);
  CHECK(clamped);
  CHECK(b.bin(99.0, &clamped) == 7);
  CHECK(clamped);
  for (int i = 0; i < 8; ++i) {
    CHECK(b.bin(b.midpoint(i)) == i);  // midpoints land in their own bin
  }
  // degenerate range stays usable
  std::vector<double> flat{2.0, 2.0};
  auto bf = ScoreBinner::fit(flat, 4);
  CHECK(bf.bin(2.0) == 0);
}
