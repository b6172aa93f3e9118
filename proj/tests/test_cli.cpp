#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "xaw/checkpoint.hpp"
#include "xaw/cli.hpp"
#include "xaw/emb1.hpp"
#include "xaw/errors.hpp"
#include "xaw/trainer.hpp"

using namespace xaw;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void put(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

EmbeddingFile embeddings_for(const std::vector<std::pair<int, int>>& shapes, std::uint32_t dim) {
  EmbeddingFile f;
  f.dim = dim;
  Rng rng(3);
  for (auto [n, m] : shapes) {
    PairEmbeddings p{Matrix(n, dim), Matrix(m, dim)};
    for (Eigen::Index k = 0; k < p.src.size(); ++k) p.src.data()[k] = static_cast<float>(normal01(rng));
    for (Eigen::Index k = 0; k < p.tgt.size(); ++k) p.tgt.data()[k] = static_cast<float>(normal01(rng));
    f.pairs.push_back(p);
  }
  return f;
}

}  // namespace

TEST_CASE("gen-synth is reproducible") {
  const auto a = run({"gen-synth", "--seed", "7", "--pairs", "30", "--out", "cli_gen_a"});
  const auto b = run({"gen-synth", "--seed", "7", "--pairs", "30", "--out", "cli_gen_b"});
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(slurp("cli_gen_a.bitext") == slurp("cli_gen_b.bitext"));
  CHECK(slurp("cli_gen_a.gold") == slurp("cli_gen_b.gold"));
  CHECK(slurp("cli_gen_a.seed").find("seed = 7") != std::string::npos);
  CHECK(!slurp("cli_gen_a.bitext").empty());
}

TEST_CASE("emb1 files round-trip") {
  const auto f = embeddings_for({{2, 3}, {1, 1}}, 4);
  write_emb1("cli_rt.emb", f);
  const auto g = read_emb1("cli_rt.emb");
  CHECK(g.dim == 4);
  REQUIRE(g.pairs.size() == 2);
  CHECK(g.pairs[0].src == f.pairs[0].src);
  CHECK(g.pairs[1].tgt == f.pairs[1].tgt);
  const std::string bytes = slurp("cli_rt.emb");
  CHECK(bytes.substr(0, 4) == "EMB1");
  CHECK(bytes.size() == 8 + 2 * 8 + (2 + 3 + 1 + 1) * 4 * 4);
  std::ofstream("cli_trunc.emb", std::ios::binary) << bytes.substr(0, bytes.size() - 3);
  CHECK_THROWS_AS(read_emb1("cli_trunc.emb"), ParseError);
}

TEST_CASE("align with embeddings writes one line per pair") {
  put("cli_align.bitext", "a b ||| x y z\nc ||| w\nd e ||| u v\n");
  write_emb1("cli_align.emb", embeddings_for({{2, 3}, {1, 1}, {2, 2}}, 5));
  const auto r = run({"align", "--bitext", "cli_align.bitext", "--embeddings", "cli_align.emb", "--mu", "1.0",
                      "--sinkhorn-iters", "2", "--filter-iters", "2", "--alpha", "0.9"});
  REQUIRE(r.code == 0);
  std::istringstream lines(r.out);
  std::vector<std::string> rows;
  for (std::string l; std::getline(lines, l);) rows.push_back(l);
  CHECK(rows.size() == 3);
  CHECK(rows[1] == "0-0");

  const auto defaults = run({"align", "--bitext", "cli_align.bitext", "--embeddings", "cli_align.emb"});
  CHECK(defaults.out == r.out);
}

TEST_CASE("align output is independent of threading") {
  std::string bitext;
  std::vector<std::pair<int, int>> shapes;
  for (int k = 0; k < 40; ++k) {
    bitext += "a b c ||| x y z w\n";
    shapes.push_back({3, 4});
  }
  put("cli_many.bitext", bitext);
  const auto emb = embeddings_for(shapes, 6);
  write_emb1("cli_many.emb", emb);
  const auto r = run({"align", "--bitext", "cli_many.bitext", "--embeddings", "cli_many.emb"});
  REQUIRE(r.code == 0);
  std::vector<SentencePair> pairs(40, SentencePair{{5, 6, 7}, {8, 9, 10, 11}, {}, {}});
  std::string expected;
  for (const auto& a : cli::align_with_embeddings(pairs, emb, AlignerConfig{})) expected += to_pharaoh(a) + "\n";
  CHECK(r.out == expected);
}

TEST_CASE("align reports mismatched pair counts") {
  put("cli_mis.bitext", "a ||| x\nb ||| y\nc ||| z\n");
  write_emb1("cli_mis.emb", embeddings_for({{1, 1}, {1, 1}}, 3));
  const auto r = run({"align", "--bitext", "cli_mis.bitext", "--embeddings", "cli_mis.emb"});
  CHECK(r.code == cli::data_error);
  CHECK(r.err.find("pairs: bitext=3 embeddings=2") != std::string::npos);
}

TEST_CASE("align needs exactly one hidden-state source") {
  put("cli_src.bitext", "a ||| x\n");
  CHECK(run({"align", "--bitext", "cli_src.bitext"}).code == cli::usage_error);
  CHECK(run({"align", "--bitext", "cli_src.bitext", "--embeddings", "e", "--checkpoint", "c"}).code ==
        cli::usage_error);
}

TEST_CASE("align projects subwords to words") {
  put("cli_wm.bitext", "a b ||| x\n");
  put("cli_wm.map", "0 0 ||| 0\n");
  write_emb1("cli_wm.emb", embeddings_for({{2, 1}}, 3));
  const auto r = run({"align", "--bitext", "cli_wm.bitext", "--embeddings", "cli_wm.emb", "--word-maps", "cli_wm.map"});
  REQUIRE(r.code == 0);
  CHECK(r.out == "0-0\n");
}

TEST_CASE("eval-aer summaries") {
  put("cli_gold.txt", "1 1 1 S\n1 2 2 S\n");
  put("cli_hyp_perfect.txt", "0-0 1-1\n");
  auto r = run({"eval-aer", "--hyp", "cli_hyp_perfect.txt", "--gold", "cli_gold.txt"});
  CHECK(r.code == 0);
  CHECK(r.out == "aer=0.0000 precision=1.0000 recall=1.0000 pairs=1\n");

  put("cli_gold2.txt", "1 1 1 S\n1 2 3 P\n");
  r = run({"eval-aer", "--hyp", "cli_hyp_perfect.txt", "--gold", "cli_gold2.txt"});
  CHECK(r.out.starts_with("aer=0.3333 "));

  put("cli_hyp_empty.txt", "");
  r = run({"eval-aer", "--hyp", "cli_hyp_empty.txt", "--gold", "cli_gold.txt"});
  CHECK(r.code == 0);
  CHECK(r.out == "aer=1.0000 precision=1.0000 recall=0.0000 pairs=1\n");
}

TEST_CASE("eval-aer per-pair output and parse errors") {
  put("cli_gold3.txt", "1 1 1 S\n2 1 1 S\n");
  put("cli_hyp3.txt", "0-0\n0-1\n");
  auto r = run({"eval-aer", "--hyp", "cli_hyp3.txt", "--gold", "cli_gold3.txt", "--per-pair", "cli_pp.tsv"});
  CHECK(r.code == 0);
  CHECK(r.out.find("pairs=2") != std::string::npos);
  const std::string tsv = slurp("cli_pp.tsv");
  CHECK(tsv.find("1\t0\t1\t1") != std::string::npos);
  CHECK(tsv.find("2\t1\t0\t0") != std::string::npos);

  put("cli_gold_bad.txt", "1 1 1 S\n1 1\n");
  r = run({"eval-aer", "--hyp", "cli_hyp3.txt", "--gold", "cli_gold_bad.txt"});
  CHECK(r.code == cli::data_error);
  CHECK(r.err.find("line 2") != std::string::npos);
}

TEST_CASE("train with zero steps writes the cold start") {
  put("cli_train.cfg",
      "steps = 0\nwarmup_steps = 0\ncold_start_steps = 3\nbatch_size = 2\noutput_prefix = cli_train\n"
      "hidden = 8\nheads = 2\nffn = 16\nmax_len = 32\n"
      "synth_vocab_size = 10\nsynth_pairs = 20\nsynth_min_len = 2\nsynth_max_len = 4\n"
      "heldout_pairs = 5\n");
  const auto r = run({"train", "--config", "cli_train.cfg"});
  REQUIRE(r.code == 0);
  const TrainConfig cfg = load_train_config("cli_train.cfg");
  const TrainData data = build_train_data(cfg);
  Trainer t(cfg, data);
  t.cold_start();
  const auto ck = load_checkpoint("cli_train.xaw");
  CHECK(ck.params.values == t.params().values);
  CHECK(ck.step == 0);
}

TEST_CASE("train then align then eval on a planted corpus") {
  put("cli_pipe.cfg",
      "steps = 5\nwarmup_steps = 1\ncold_start_steps = 5\nbatch_size = 2\noutput_prefix = cli_pipe\n"
      "hidden = 8\nheads = 2\nffn = 16\nmax_len = 32\n"
      "synth_vocab_size = 10\nsynth_pairs = 20\nsynth_min_len = 2\nsynth_max_len = 4\n"
      "heldout_pairs = 5\n");
  REQUIRE(run({"train", "--config", "cli_pipe.cfg"}).code == 0);
  REQUIRE(run({"gen-synth", "--vocab-size", "10", "--pairs", "20", "--min-len", "2", "--max-len", "4", "--out",
               "cli_pipe_data"})
              .code == 0);
  const auto a = run({"align", "--bitext", "cli_pipe_data.bitext", "--checkpoint", "cli_pipe.xaw", "--output",
                      "cli_pipe.hyp"});
  REQUIRE(a.code == 0);
  const auto e = run({"eval-aer", "--hyp", "cli_pipe.hyp", "--gold", "cli_pipe_data.gold"});
  CHECK(e.code == 0);
  CHECK(e.out.find("pairs=20") != std::string::npos);
}

TEST_CASE("export-config round-trips through the parser") {
  const auto r = run({"export-config"});
  REQUIRE(r.code == 0);
  std::istringstream in(r.out);
  CHECK(format_train_config(parse_train_config(in)) == r.out);
  CHECK(r.out.find("alpha = 0.9") != std::string::npos);
}

TEST_CASE("usage errors and help") {
  CHECK(run({}).code == cli::usage_error);
  CHECK(run({"frobnicate"}).code == cli::usage_error);
  CHECK(run({"eval-aer", "--hyp", "x", "--gold", "y", "--bogus"}).code == cli::usage_error);
  const auto h = run({"align", "--help"});
  CHECK(h.code == 0);
  for (const char* flag : {"--bitext", "--embeddings", "--checkpoint", "--vocab", "--word-maps", "--output", "--mu",
                           "--epsilon", "--sinkhorn-iters", "--filter-iters", "--alpha", "--layer", "--no-filter"})
    CHECK(h.out.find(flag) != std::string::npos);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("the binary maps errors to exit codes") {
  const std::string bin = XAW_BINARY;
  CHECK(std::system((bin + " eval-aer --hyp cli_hyp_perfect.txt --gold cli_gold.txt > /dev/null").c_str()) == 0);
  const int usage = std::system((bin + " nonsense > /dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(usage) == 2);
  const int data = std::system((bin + " eval-aer --hyp missing.txt --gold cli_gold.txt > /dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(data) == 3);
}
