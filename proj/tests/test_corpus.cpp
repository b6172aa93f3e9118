#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "xaw/corpus.hpp"
#include "xaw/errors.hpp"

using namespace xaw;

namespace {

std::string write_temp(const std::string& name, const std::string& text) {
  std::ofstream(name) << text;
  return name;
}

MaskingPolicy policy(double rate, int vocab = 50) {
  MaskingPolicy p;
  p.rate = rate;
  p.vocab_size = vocab;
  return p;
}

std::string serialize(const SyntheticCorpus& c) {
  std::ostringstream os;
  for (std::size_t k = 0; k < c.pairs.size(); ++k) {
    for (int t : c.pairs[k].src) os << t << ' ';
    os << "|";
    for (int t : c.pairs[k].tgt) os << t << ' ';
    os << "|" << to_pharaoh(c.alignments[k]) << '\n';
  }
  return os.str();
}

}  // namespace

TEST_CASE("vocab ids are dense and round-trip") {
  Vocab v;
  CHECK(v.size() == Vocab::num_special);
  const int a = v.add("hello");
  CHECK(v.add("hello") == a);
  CHECK(v.lookup(v.token_of(a)) == a);
  CHECK(v.lookup("missing") == Vocab::unk_id);
  for (int id = 0; id < v.size(); ++id) CHECK(v.lookup(v.token_of(id)) == id);
  CHECK_THROWS_AS(v.token_of(99), InputError);
}

TEST_CASE("vocab save and load") {
  Vocab v;
  v.add("a");
  v.add("b");
  v.save("corpus_vocab.txt");
  const Vocab w = Vocab::load("corpus_vocab.txt");
  CHECK(w.tokens() == v.tokens());
}

TEST_CASE("mask_pair is deterministic and masks at least one position") {
  SentencePair pair;
  for (int k = 0; k < 10; ++k) pair.src.push_back(5 + k), pair.tgt.push_back(20 + k);
  Rng r1(42), r2(42);
  const MaskedPair a = mask_pair(pair, policy(0.15), r1);
  const MaskedPair b = mask_pair(pair, policy(0.15), r2);
  CHECK(a.perturbed == b.perturbed);
  CHECK(a.masked_positions == b.masked_positions);
  CHECK(a.masked_positions.size() >= 1);
  CHECK(a.masked_positions.size() <= 20);
  CHECK(a.original_tokens.size() == a.masked_positions.size());
}

TEST_CASE("masking never alters unselected positions") {
  SentencePair pair;
  for (int k = 0; k < 30; ++k) pair.src.push_back(5 + k % 7), pair.tgt.push_back(12 + k % 11);
  const auto concat = pair.concatenated();
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const MaskedPair mp = mask_pair(pair, policy(0.3), rng);
    REQUIRE(!mp.masked_positions.empty());
    for (std::size_t p = 0; p < concat.size(); ++p) {
      if (mp.is_masked(p)) {
        CHECK(mp.original_tokens.at(p) == concat[p]);
      } else {
        CHECK(mp.perturbed[p] == concat[p]);
      }
    }
  }
}

TEST_CASE("a single token at minimal rate is still masked") {
  Rng rng(3);
  const MaskedPair mp = mask_sequence({7}, policy(1e-9), rng);
  REQUIRE(mp.masked_positions.size() == 1);
  CHECK(mp.masked_positions[0] == 0);
}

TEST_CASE("masking rate matches in expectation") {
  // Monte-Carlo over seeds: 1000 tokens at rate 0.15.
  std::vector<int> tokens(1000, 9);
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    total += static_cast<double>(mask_sequence(tokens, policy(0.15), rng).masked_positions.size()) / 1000.0;
  }
  const double mean = total / 100.0;
  CHECK(mean >= 0.13);
  CHECK(mean <= 0.17);
}

TEST_CASE("mask_pair rejects empty input and bad rates") {
  Rng rng(1);
  SentencePair empty;
  CHECK_THROWS_AS(mask_pair(empty, policy(0.15), rng), InputError);
  SentencePair pair{{5}, {6}, {}, {}};
  CHECK_THROWS_AS(mask_pair(pair, policy(0.0), rng), InputError);
  CHECK_THROWS_AS(mask_pair(pair, policy(1.0), rng), InputError);
}

TEST_CASE("synthetic identity corpus aligns the diagonal") {
  SyntheticSpec spec;
  spec.reordering = Reordering::identity;
  spec.min_len = spec.max_len = 3;
  spec.pairs = 4;
  const auto c = gen_synthetic_corpus(spec);
  for (const auto& a : c.alignments) CHECK(a == AlignSet{{0, 0}, {1, 1}, {2, 2}});
  for (const auto& p : c.pairs)
    for (std::size_t i = 0; i < 3; ++i) {
      const int word = std::stoi(c.vocab.token_of(p.src[i]).substr(1));
      CHECK(c.vocab.token_of(p.tgt[i]) == "t" + std::to_string(c.bijection[static_cast<std::size_t>(word)]));
    }
}

TEST_CASE("forced adjacent swap on a length-2 sentence") {
  SyntheticSpec spec;
  spec.swap_prob = 1.0;
  spec.min_len = spec.max_len = 2;
  spec.pairs = 3;
  const auto c = gen_synthetic_corpus(spec);
  for (const auto& a : c.alignments) CHECK(a == AlignSet{{0, 1}, {1, 0}});
}

TEST_CASE("synthetic corpora are reproducible and perfect matchings") {
  SyntheticSpec spec;
  spec.seed = 7;
  spec.pairs = 200;
  const auto a = gen_synthetic_corpus(spec);
  const auto b = gen_synthetic_corpus(spec);
  CHECK(serialize(a) == serialize(b));
  spec.seed = 8;
  CHECK(serialize(gen_synthetic_corpus(spec)) != serialize(a));

  for (std::size_t k = 0; k < a.pairs.size(); ++k) {
    const auto n = a.pairs[k].n();
    std::vector<int> src_hits(n, 0), tgt_hits(n, 0);
    for (const Link& l : a.alignments[k].links) ++src_hits[static_cast<std::size_t>(l.src)], ++tgt_hits[static_cast<std::size_t>(l.tgt)];
    for (std::size_t i = 0; i < n; ++i) CHECK((src_hits[i] == 1 && tgt_hits[i] == 1));
  }
}

TEST_CASE("synthetic vocabulary smaller than 2 is rejected") {
  SyntheticSpec spec;
  spec.vocab_size = 1;
  CHECK_THROWS_AS(gen_synthetic_corpus(spec), InputError);
}

TEST_CASE("read_bitext parses pairs in order") {
  Vocab v;
  const auto pairs = read_bitext(write_temp("corpus_ok.txt", "a b ||| x y\nc ||| z\nd e f ||| u v\n"), v);
  REQUIRE(pairs.size() == 3);
  CHECK(pairs[0].n() == 2);
  CHECK(pairs[0].m() == 2);
  CHECK(pairs[1].n() == 1);
  CHECK(pairs[2].n() == 3);
  CHECK(v.token_of(pairs[2].tgt[1]) == "v");
}

TEST_CASE("read_bitext reports the malformed line") {
  Vocab v;
  try {
    read_bitext(write_temp("corpus_bad.txt", "a b x y\n"), v);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 1);
  }
  try {
    read_bitext(write_temp("corpus_bad2.txt", "a ||| b\nc d\n"), v);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("read_bitext without vocab extension maps unknown tokens to unk") {
  Vocab v;
  v.add("a");
  const auto pairs = read_bitext(write_temp("corpus_unk.txt", "a q ||| a\n"), v, false);
  CHECK(pairs[0].src[1] == Vocab::unk_id);
}

TEST_CASE("word maps attach and are validated") {
  Vocab v;
  auto pairs = read_bitext(write_temp("corpus_wm.txt", "a b c ||| x y\n"), v);
  read_word_maps(write_temp("corpus_wm.map", "0 0 1 ||| 0 1\n"), pairs);
  CHECK(*pairs[0].src_word_map == std::vector<int>{0, 0, 1});
  CHECK_THROWS_AS(read_word_maps(write_temp("corpus_wm_bad.map", "1 0 1 ||| 0 1\n"), pairs), ParseError);
  CHECK_THROWS_AS(read_word_maps(write_temp("corpus_wm_short.map", "0 1 ||| 0 1\n"), pairs), ParseError);
}

TEST_CASE("bitext write then read round-trips") {
  SyntheticSpec spec;
  spec.pairs = 20;
  const auto c = gen_synthetic_corpus(spec);
  write_bitext("corpus_rt.txt", c.pairs, c.vocab);
  Vocab v = c.vocab;
  const auto back = read_bitext("corpus_rt.txt", v, false);
  CHECK(back == c.pairs);
}
