#include "xaw/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "xaw/checkpoint.hpp"
#include "xaw/errors.hpp"
#include "xaw/eval.hpp"
#include "xaw/trainer.hpp"

namespace xaw::cli {

namespace {

/// Runs fn(k) for k in [0, count) on up to hardware_concurrency threads.
/// Results are written by index, so output order never depends on scheduling.
template <typename Fn>
void parallel_for(std::size_t count, Fn fn) {
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(), count));
  if (workers <= 1) {
    for (std::size_t k = 0; k < count; ++k) fn(k);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        for (std::size_t k = w; k < count; k += workers) fn(k);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::string strip_suffix(std::string path, const std::string& suffix) {
  if (path.ends_with(suffix)) path.resize(path.size() - suffix.size());
  return path;
}

}  // namespace

std::vector<AlignSet> align_with_embeddings(const std::vector<SentencePair>& pairs, const EmbeddingFile& emb,
                                            const AlignerConfig& cfg) {
  if (pairs.size() != emb.pairs.size())
    throw InputError("pairs: bitext=" + std::to_string(pairs.size()) + " embeddings=" + std::to_string(emb.pairs.size()));
  std::vector<AlignSet> out(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t k) {
    const auto& e = emb.pairs[k];
    if (static_cast<std::size_t>(e.src.rows()) != pairs[k].n() || static_cast<std::size_t>(e.tgt.rows()) != pairs[k].m())
      throw InputError("pair " + std::to_string(k + 1) + ": bitext has " + std::to_string(pairs[k].n()) + "x" +
                       std::to_string(pairs[k].m()) + " tokens, embeddings have " + std::to_string(e.src.rows()) +
                       "x" + std::to_string(e.tgt.rows()));
    Matrix hidden(e.src.rows() + e.tgt.rows(), e.src.cols());
    hidden << e.src, e.tgt;
    out[k] = self_label(pairs[k].n(), pairs[k].m(), hidden, cfg);
  });
  return out;
}

std::vector<AlignSet> align_with_encoder(const std::vector<SentencePair>& pairs, const EncoderParams& params,
                                         const AlignerConfig& cfg) {
  const int top = params.config().layers;
  const int layer = cfg.layer < 0 ? top : cfg.layer;
  if (layer > top) throw InputError("layer " + std::to_string(layer) + " exceeds encoder depth " + std::to_string(top));
  std::vector<AlignSet> out(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t k) {
    const auto tokens = pairs[k].concatenated();
    EncodeOptions opts;
    opts.segment_split = pairs[k].n();
    opts.cache = false;
    opts.max_layer = layer;
    const ForwardTrace tr = encode(params, tokens, opts);
    out[k] = self_label(pairs[k].n(), pairs[k].m(), tr.hidden[static_cast<std::size_t>(layer)], cfg);
  });
  return out;
}

std::vector<AlignSet> project_to_words(const std::vector<AlignSet>& hyps, const std::vector<SentencePair>& pairs) {
  std::vector<AlignSet> out;
  out.reserve(hyps.size());
  for (std::size_t k = 0; k < hyps.size(); ++k) {
    const auto& p = pairs[k];
    if (!p.src_word_map || !p.tgt_word_map) throw InputError("pair " + std::to_string(k + 1) + " has no word maps");
    out.push_back(project_subword_to_word(hyps[k], *p.src_word_map, *p.tgt_word_map));
  }
  return out;
}

namespace {

Indexing parse_indexing(const std::string& s) { return s == "one" ? Indexing::one_based : Indexing::zero_based; }

int cmd_align(const std::string& bitext, const std::string& embeddings, const std::string& checkpoint,
              std::string vocab_path, const std::string& word_maps, const std::string& output,
              const AlignerConfig& cfg, std::ostream& out) {
  cfg.validate();
  std::vector<AlignSet> hyps;
  std::vector<SentencePair> pairs;
  if (!embeddings.empty()) {
    Vocab vocab;
    pairs = read_bitext(bitext, vocab, true);
    hyps = align_with_embeddings(pairs, read_emb1(embeddings), cfg);
  } else {
    if (vocab_path.empty()) vocab_path = strip_suffix(checkpoint, ".xaw") + ".vocab";
    Vocab vocab = Vocab::load(vocab_path);
    pairs = read_bitext(bitext, vocab, false);
    const Checkpoint ck = load_checkpoint(checkpoint);
    if (ck.params.config().vocab_size != vocab.size())
      throw InputError("vocab " + vocab_path + " has " + std::to_string(vocab.size()) + " entries, checkpoint expects " +
                       std::to_string(ck.params.config().vocab_size));
    hyps = align_with_encoder(pairs, ck.params, cfg);
  }
  if (!word_maps.empty()) {
    read_word_maps(word_maps, pairs);
    hyps = project_to_words(hyps, pairs);
  }
  if (output.empty() || output == "-") {
    for (const auto& h : hyps) out << to_pharaoh(h) << '\n';
  } else {
    write_pharaoh(output, hyps);
  }
  return ok;
}

int cmd_eval(const std::string& hyp_path, const std::string& gold_path, const std::string& gold_indexing,
             const std::string& hyp_indexing, long first_id, const std::string& per_pair, std::ostream& out) {
  const auto hyps = read_pharaoh(hyp_path, parse_indexing(hyp_indexing));
  const auto gold = parse_gold(gold_path, parse_indexing(gold_indexing));
  std::size_t count = hyps.size();
  for (const auto& [id, g] : gold) {
    if (id < first_id) throw ParseError("gold sentence id " + std::to_string(id) + " precedes first id");
    count = std::max(count, static_cast<std::size_t>(id - first_id + 1));
  }
  std::vector<AlignSet> hyp_all(count);
  std::copy(hyps.begin(), hyps.end(), hyp_all.begin());
  std::vector<GoldAlignment> gold_all(count);
  for (const auto& [id, g] : gold) gold_all[static_cast<std::size_t>(id - first_id)] = g;

  const EvalReport report = corpus_aer(hyp_all, gold_all);
  out << format_summary(report) << '\n';
  if (!per_pair.empty()) {
    std::ofstream tsv(per_pair);
    if (!tsv) throw std::runtime_error("cannot write " + per_pair);
    tsv << "sent_id\taer\tprecision\trecall\thyp\tsure\thyp_and_sure\thyp_and_possible\n";
    for (std::size_t k = 0; k < count; ++k) {
      const EvalReport r = compute_aer(hyp_all[k], gold_all[k]);
      tsv << first_id + static_cast<long>(k) << '\t' << r.aer << '\t' << r.precision << '\t' << r.recall << '\t'
          << r.counts.hyp << '\t' << r.counts.sure << '\t' << r.counts.hyp_and_sure << '\t'
          << r.counts.hyp_and_possible << '\n';
    }
  }
  return ok;
}

int cmd_gen_synth(const SyntheticSpec& spec, const std::string& prefix, std::ostream& out) {
  const SyntheticCorpus corpus = gen_synthetic_corpus(spec);
  write_bitext(prefix + ".bitext", corpus.pairs, corpus.vocab);
  std::vector<GoldAlignment> golds;
  for (const auto& a : corpus.alignments) golds.push_back(GoldAlignment::all_sure(a));
  write_gold(prefix + ".gold", golds, Indexing::one_based);
  std::ofstream seed(prefix + ".seed");
  if (!seed) throw std::runtime_error("cannot write " + prefix + ".seed");
  seed << "seed = " << spec.seed << "\nbijection_seed = " << spec.bijection_seed << '\n';
  out << "wrote " << corpus.pairs.size() << " pairs to " << prefix << ".bitext\n";
  return ok;
}

int cmd_train(const std::string& config_path, std::ostream& out) {
  const TrainConfig cfg = load_train_config(config_path);
  const TrainData data = build_train_data(cfg);
  const TrainResult result = train(cfg, data);
  if (!result.log.records.empty()) {
    const auto& last = result.log.records.back();
    out << "steps=" << last.step << " mlm=" << last.mlm << " tlm=" << last.tlm << " dwa=" << last.dwa;
    if (!std::isnan(last.heldout_aer)) out << " heldout_aer=" << last.heldout_aer;
    out << '\n';
  }
  if (!result.checkpoint_path.empty()) out << "checkpoint " << result.checkpoint_path << '\n';
  return ok;
}

void add_aligner_flags(CLI::App* app, AlignerConfig& cfg, bool& no_filter) {
  app->add_option("--mu", cfg.mu, "Entropic regularization weight")->capture_default_str();
  app->add_option("--epsilon", cfg.epsilon, "Similarity clamp before the log")->capture_default_str();
  app->add_option("--sinkhorn-iters", cfg.sinkhorn_iters, "Sinkhorn iterations")->capture_default_str();
  app->add_option("--filter-iters", cfg.filter_iters, "Alignment filtering iterations")->capture_default_str();
  app->add_option("--alpha", cfg.alpha, "Filtering discount factor")->capture_default_str();
  app->add_option("--layer", cfg.layer, "Encoder layer for hidden states (-1 = top; checkpoint mode)")
      ->capture_default_str();
  app->add_flag("--no-filter", no_filter, "Use the union of forward and backward links instead of filtering");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"xaw: optimal-transport word alignment, AER evaluation and DWA pre-training"};
  app.require_subcommand(1);

  AlignerConfig align_cfg;
  bool no_filter = false;
  std::string bitext, embeddings, checkpoint, vocab_path, word_maps, output = "-";
  auto* align = app.add_subcommand("align", "Self-label a bitext; writes Pharaoh links, one line per pair");
  align->add_option("--bitext", bitext, "Bitext file, 'src ||| tgt' per line")->required();
  auto* emb_opt = align->add_option("--embeddings", embeddings, "EMB1 file with per-token vectors");
  auto* ck_opt = align->add_option("--checkpoint", checkpoint, "XAW1 checkpoint to encode the bitext with");
  emb_opt->excludes(ck_opt);
  align->add_option("--vocab", vocab_path, "Vocabulary for --checkpoint (default: <checkpoint>.vocab)");
  align->add_option("--word-maps", word_maps, "Word-map sidecar; projects subword links to words");
  align->add_option("--output", output, "Output Pharaoh file ('-' = stdout)")->capture_default_str();
  add_aligner_flags(align, align_cfg, no_filter);

  std::string hyp_path, gold_path, gold_indexing = "one", hyp_indexing = "zero", per_pair;
  long first_id = 1;
  auto* eval = app.add_subcommand("eval-aer", "Score Pharaoh hypotheses against a sure/possible gold file");
  eval->add_option("--hyp", hyp_path, "Hypothesis Pharaoh file")->required();
  eval->add_option("--gold", gold_path, "Gold file, 'sent_id i j [S|P]' per line")->required();
  eval->add_option("--gold-indexing", gold_indexing, "Gold token indexing")
      ->check(CLI::IsMember({"one", "zero"}))
      ->capture_default_str();
  eval->add_option("--hyp-indexing", hyp_indexing, "Hypothesis token indexing")
      ->check(CLI::IsMember({"one", "zero"}))
      ->capture_default_str();
  eval->add_option("--first-id", first_id, "Gold sentence id of the first hypothesis line")->capture_default_str();
  eval->add_option("--per-pair", per_pair, "Also write per-pair scores as TSV");

  std::string config_path;
  auto* trn = app.add_subcommand("train", "Cold start plus the EM pre-training loop");
  trn->add_option("--config", config_path, "Config file of 'key = value' lines")->required();

  SyntheticSpec spec;
  std::string reordering = "adjacent-swap", prefix;
  auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic bitext with planted alignments");
  gen->add_option("--vocab-size", spec.vocab_size, "Words per language")->capture_default_str();
  gen->add_option("--min-len", spec.min_len, "Minimum sentence length")->capture_default_str();
  gen->add_option("--max-len", spec.max_len, "Maximum sentence length")->capture_default_str();
  gen->add_option("--reordering", reordering, "identity | adjacent-swap")
      ->check(CLI::IsMember({"identity", "adjacent-swap"}))
      ->capture_default_str();
  gen->add_option("--swap-prob", spec.swap_prob, "Adjacent-swap probability")->capture_default_str();
  gen->add_option("--pairs", spec.pairs, "Number of pairs")->capture_default_str();
  gen->add_option("--seed", spec.seed, "Corpus seed")->capture_default_str();
  gen->add_option("--bijection-seed", spec.bijection_seed, "Seed of the word bijection")->capture_default_str();
  gen->add_option("--out", prefix, "Output prefix: writes .bitext, .gold and .seed")->required();

  std::string export_path;
  auto* exp = app.add_subcommand("export-config", "Print the default training config");
  exp->add_option("--output", export_path, "Write to this file instead of stdout");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? ok : usage_error;
  }

  try {
    if (*align) {
      if (embeddings.empty() == checkpoint.empty()) {
        err << "align: exactly one of --embeddings or --checkpoint is required\n";
        return usage_error;
      }
      align_cfg.filtering = !no_filter;
      return cmd_align(bitext, embeddings, checkpoint, vocab_path, word_maps, output, align_cfg, out);
    }
    if (*eval) return cmd_eval(hyp_path, gold_path, gold_indexing, hyp_indexing, first_id, per_pair, out);
    if (*trn) return cmd_train(config_path, out);
    if (*gen) {
      spec.reordering = reordering == "identity" ? Reordering::identity : Reordering::adjacent_swap;
      return cmd_gen_synth(spec, prefix, out);
    }
    if (*exp) {
      const std::string text = format_train_config(TrainConfig{});
      if (export_path.empty()) {
        out << text;
      } else {
        std::ofstream f(export_path);
        if (!f) throw std::runtime_error("cannot write " + export_path);
        f << text;
      }
      return ok;
    }
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return numerical_error;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return usage_error;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return data_error;
  }
  return usage_error;
}

}  // namespace xaw::cli
