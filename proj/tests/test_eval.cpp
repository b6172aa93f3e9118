#include <doctest.h>

#include <fstream>

#include "oracles.hpp"
#include "xaw/errors.hpp"
#include "xaw/eval.hpp"
#include "xaw/rng.hpp"

using namespace xaw;

namespace {

using PairSet = std::set<std::pair<int, int>>;

AlignSet to_align(const PairSet& s) {
  AlignSet a;
  for (auto [i, j] : s) a.insert({i, j});
  return a;
}

PairSet random_subset(Rng& rng, int n, int m, double p) {
  PairSet s;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      if (bernoulli(rng, p)) s.insert({i, j});
  return s;
}

std::string write_temp(const std::string& name, const std::string& text) {
  std::ofstream(name) << text;
  return name;
}

}  // namespace

TEST_CASE("perfect alignment has zero AER") {
  GoldAlignment g;
  g.add_sure({0, 0});
  g.add_sure({1, 1});
  const auto r = compute_aer({{0, 0}, {1, 1}}, g);
  CHECK(r.aer == 0.0);
  CHECK(r.precision == 1.0);
  CHECK(r.recall == 1.0);
}

TEST_CASE("worked AER example is exactly one third") {
  GoldAlignment g;
  g.add_sure({0, 0});
  g.add_possible({1, 2});
  const auto r = compute_aer({{0, 0}, {1, 1}}, g);
  CHECK(r.counts.hyp == 2);
  CHECK(r.counts.sure == 1);
  CHECK(r.counts.hyp_and_sure == 1);
  CHECK(r.counts.hyp_and_possible == 1);
  CHECK(r.aer == 1.0 / 3.0);
  CHECK(r.precision == 0.5);
  CHECK(r.recall == 1.0);
}

TEST_CASE("degenerate denominators") {
  GoldAlignment g;
  g.add_sure({0, 0});
  const auto empty_hyp = compute_aer({}, g);
  CHECK(empty_hyp.aer == 1.0);
  CHECK(empty_hyp.precision == 1.0);
  CHECK(empty_hyp.recall == 0.0);
  const auto nothing = compute_aer({}, GoldAlignment{});
  CHECK(nothing.aer == 0.0);
  const auto no_gold = compute_aer({{0, 0}}, GoldAlignment{});
  CHECK(no_gold.aer == 1.0);
  CHECK(no_gold.recall == 1.0);
  CHECK(no_gold.precision == 0.0);
}

TEST_CASE("compute_aer agrees with the enumeration oracle") {
  Rng rng(99);
  for (int t = 0; t < 1000; ++t) {
    const int n = 1 + static_cast<int>(uniform_index(rng, 6));
    const int m = 1 + static_cast<int>(uniform_index(rng, 6));
    const PairSet a = random_subset(rng, n, m, 0.3);
    const PairSet s = random_subset(rng, n, m, 0.2);
    PairSet p = s;
    for (auto x : random_subset(rng, n, m, 0.2)) p.insert(x);
    GoldAlignment g;
    for (auto [i, j] : p) g.add_possible({i, j});
    for (auto [i, j] : s) g.add_sure({i, j});
    const auto ours = compute_aer(to_align(a), g);
    const auto ref = oracle::naive_aer(a, s, p, n, m);
    CHECK(ours.aer == doctest::Approx(ref.aer).epsilon(1e-15));
    CHECK(ours.precision == doctest::Approx(ref.precision).epsilon(1e-15));
    CHECK(ours.recall == doctest::Approx(ref.recall).epsilon(1e-15));
    CHECK(ours.aer >= 0.0);
    CHECK(ours.aer <= 1.0);
  }
}

TEST_CASE("with S = P the AER is one minus F1") {
  Rng rng(4);
  int checked = 0;
  while (checked < 100) {
    const PairSet a = random_subset(rng, 6, 6, 0.3);
    const PairSet s = random_subset(rng, 6, 6, 0.3);
    if (a.empty() || s.empty()) continue;
    const auto r = compute_aer(to_align(a), GoldAlignment::all_sure(to_align(s)));
    const double f1 = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    CHECK(std::abs(r.aer - (1.0 - f1)) < 1e-12);
    ++checked;
  }
}

TEST_CASE("corpus AER sums counts rather than averaging") {
  GoldAlignment g1 = GoldAlignment::all_sure({{0, 0}});
  GoldAlignment g2 = GoldAlignment::all_sure({{0, 0}, {1, 1}, {2, 2}});
  const auto r = corpus_aer({{{0, 0}}, {{0, 1}, {1, 1}, {2, 2}}}, {g1, g2});
  CHECK(r.pairs == 2);
  CHECK(r.aer == doctest::Approx(1.0 - 6.0 / 8.0));
  CHECK_THROWS_AS(corpus_aer({{}}, {}), InputError);
}

TEST_CASE("subword projection examples") {
  const AlignSet hyp{{0, 0}, {1, 2}, {2, 1}};
  CHECK(project_subword_to_word(hyp, {0, 1, 2}, {0, 1, 2}) == hyp);
  CHECK(project_subword_to_word({{0, 0}, {1, 0}}, {0, 0}, {0}) == AlignSet{{0, 0}});
  CHECK(project_subword_to_word({{0, 1}, {1, 2}}, {0, 0}, {0, 1, 1}) == AlignSet{{0, 1}});
  try {
    project_subword_to_word({{3, 0}}, {0, 0}, {0});
    FAIL("expected rejection");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find('3') != std::string::npos);
  }
}

TEST_CASE("projection is idempotent with identity maps") {
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    const AlignSet a = to_align(random_subset(rng, 5, 5, 0.3));
    const AlignSet once = project_subword_to_word(a, {0, 1, 2, 3, 4}, {0, 1, 2, 3, 4});
    CHECK(project_subword_to_word(once, {0, 1, 2, 3, 4}, {0, 1, 2, 3, 4}) == once);
  }
}

TEST_CASE("parse_gold examples") {
  auto golds = parse_gold(write_temp("gold_a.txt", "1 1 1 S\n"));
  REQUIRE(golds.count(1) == 1);
  CHECK(golds[1].sure == AlignSet{{0, 0}});

  golds = parse_gold(write_temp("gold_b.txt", "1 2 3 P\n"));
  CHECK(golds[1].sure.empty());
  CHECK(golds[1].possible == AlignSet{{1, 2}});

  golds = parse_gold(write_temp("gold_c.txt", "4 1 1 S\n4 2 2 P\n3 1 2\n"));
  CHECK(golds[4].sure == AlignSet{{0, 0}});
  CHECK(golds[4].possible == AlignSet{{0, 0}, {1, 1}});
  CHECK(golds[3].sure == AlignSet{{0, 1}});

  golds = parse_gold(write_temp("gold_d.txt", "0 0 0 S\n"), Indexing::zero_based);
  CHECK(golds[0].sure == AlignSet{{0, 0}});
}

TEST_CASE("parse_gold rejects malformed lines with their number") {
  try {
    parse_gold(write_temp("gold_bad.txt", "1 1 1 S\n1 x 1\n"));
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse_gold(write_temp("gold_bad2.txt", "1 1 1 Q\n")), ParseError);
  CHECK_THROWS_AS(parse_gold(write_temp("gold_bad3.txt", "1 0 1 S\n")), ParseError);
}

TEST_CASE("gold and pharaoh files round-trip") {
  Rng rng(12);
  std::vector<GoldAlignment> golds(5);
  std::vector<AlignSet> hyps(5);
  for (std::size_t k = 0; k < golds.size(); ++k) {
    for (auto [i, j] : random_subset(rng, 5, 5, 0.2)) golds[k].add_possible({i, j});
    for (auto [i, j] : random_subset(rng, 5, 5, 0.2)) golds[k].add_sure({i, j});
    hyps[k] = to_align(random_subset(rng, 5, 5, 0.3));
  }
  golds[2] = {};
  write_gold("gold_rt.txt", golds);
  const auto back = parse_gold("gold_rt.txt");
  for (std::size_t k = 0; k < golds.size(); ++k) {
    const long id = static_cast<long>(k) + 1;
    if (golds[k].possible.empty()) {
      CHECK(back.count(id) == 0);
      continue;
    }
    CHECK(back.at(id).sure == golds[k].sure);
    CHECK(back.at(id).possible == golds[k].possible);
  }
  write_pharaoh("hyp_rt.txt", hyps);
  CHECK(read_pharaoh("hyp_rt.txt") == hyps);
}

TEST_CASE("pharaoh lines are sorted and validated") {
  CHECK(to_pharaoh({{1, 0}, {0, 2}, {0, 1}}) == "0-1 0-2 1-0");
  CHECK(to_pharaoh({{0, 0}}, Indexing::one_based) == "1-1");
  CHECK(parse_pharaoh_line("2-3 0-1") == AlignSet{{0, 1}, {2, 3}});
  CHECK(parse_pharaoh_line("") == AlignSet{});
  CHECK_THROWS_AS(parse_pharaoh_line("0-"), ParseError);
  CHECK_THROWS_AS(parse_pharaoh_line("a-1"), ParseError);
  CHECK_THROWS_AS(parse_pharaoh_line("0-0", Indexing::one_based), ParseError);
}

TEST_CASE("summary line uses fixed keys") {
  EvalReport r;
  r.aer = 1.0 / 3.0;
  r.precision = 0.5;
  r.recall = 1.0;
  r.pairs = 1;
  CHECK(format_summary(r) == "aer=0.3333 precision=0.5000 recall=1.0000 pairs=1");
}
