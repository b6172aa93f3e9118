#include "xaw/trainer.hpp"

#include <charconv>

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "text_util.hpp"
#include "xaw/checkpoint.hpp"
#include "xaw/errors.hpp"

namespace xaw {

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw InputError("learning rate must be positive");
  if (warmup_steps > steps) throw InputError("warmup_steps exceeds the step budget");
  if (batch_size < 1) throw InputError("batch_size must be at least 1");
  if (!(masking.rate > 0.0 && masking.rate < 1.0)) throw InputError("mask_rate must lie in (0, 1)");
  aligner.validate();
}

namespace {

// ---- config file ----------------------------------------------------------

struct KeyHandler {
  std::function<void(TrainConfig&, std::string_view)> set;
  std::function<std::string(const TrainConfig&)> get;
};

template <typename T>
T parse_value(std::string_view s, const std::string& key) {
  if constexpr (std::is_same_v<T, bool>) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw InputError("key '" + key + "' expects true/false");
  } else if constexpr (std::is_same_v<T, std::string>) {
    return std::string(s);
  } else if constexpr (std::is_floating_point_v<T>) {
    try {
      std::size_t used = 0;
      const double v = std::stod(std::string(s), &used);
      if (used != s.size()) throw std::invalid_argument("trailing");
      return static_cast<T>(v);
    } catch (const std::exception&) {
      throw InputError("key '" + key + "' expects a number");
    }
  } else {
    auto v = detail::parse_number<T>(s);
    if (!v) throw InputError("key '" + key + "' expects an integer");
    return *v;
  }
}

template <typename T>
std::string show(const T& v) {
  if constexpr (std::is_same_v<T, bool>) {
    return v ? "true" : "false";
  } else if constexpr (std::is_same_v<T, std::string>) {
    return v;
  } else {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
  }
}

template <typename T>
KeyHandler field(T TrainConfig::*member) {
  return {[member](TrainConfig& c, std::string_view s) { c.*member = parse_value<T>(s, ""); },
          [member](const TrainConfig& c) { return show(c.*member); }};
}

template <typename Outer, typename T>
KeyHandler nested(Outer TrainConfig::*outer, T Outer::*member) {
  return {[outer, member](TrainConfig& c, std::string_view s) { (c.*outer).*member = parse_value<T>(s, ""); },
          [outer, member](const TrainConfig& c) { return show((c.*outer).*member); }};
}

const std::vector<std::pair<std::string, KeyHandler>>& config_keys() {
  static const std::vector<std::pair<std::string, KeyHandler>> keys = [] {
    std::vector<std::pair<std::string, KeyHandler>> k;
    k.emplace_back("steps", field(&TrainConfig::steps));
    k.emplace_back("batch_size", field(&TrainConfig::batch_size));
    k.emplace_back("lr", field(&TrainConfig::lr));
    k.emplace_back("adam_beta1", nested(&TrainConfig::adam, &AdamConfig::beta1));
    k.emplace_back("adam_beta2", nested(&TrainConfig::adam, &AdamConfig::beta2));
    k.emplace_back("adam_eps", nested(&TrainConfig::adam, &AdamConfig::eps));
    k.emplace_back("weight_decay", nested(&TrainConfig::adam, &AdamConfig::weight_decay));
    k.emplace_back("warmup_steps", field(&TrainConfig::warmup_steps));
    k.emplace_back("clip_norm", field(&TrainConfig::clip_norm));
    k.emplace_back("seed", field(&TrainConfig::seed));
    k.emplace_back("cold_start_checkpoint", field(&TrainConfig::cold_start_checkpoint));
    k.emplace_back("cold_start_steps", field(&TrainConfig::cold_start_steps));
    k.emplace_back("layers", nested(&TrainConfig::encoder, &EncoderConfig::layers));
    k.emplace_back("hidden", nested(&TrainConfig::encoder, &EncoderConfig::hidden));
    k.emplace_back("heads", nested(&TrainConfig::encoder, &EncoderConfig::heads));
    k.emplace_back("ffn", nested(&TrainConfig::encoder, &EncoderConfig::ffn));
    k.emplace_back("max_len", nested(&TrainConfig::encoder, &EncoderConfig::max_len));
    k.emplace_back("dropout", nested(&TrainConfig::encoder, &EncoderConfig::dropout));
    k.emplace_back("init_std", nested(&TrainConfig::encoder, &EncoderConfig::init_std));
    k.emplace_back("reset_target_positions", nested(&TrainConfig::encoder, &EncoderConfig::reset_target_positions));
    k.emplace_back("precision",
                   KeyHandler{[](TrainConfig& c, std::string_view s) {
                                if (s == "f32") c.encoder.precision = Precision::f32;
                                else if (s == "f64") c.encoder.precision = Precision::f64;
                                else throw InputError("precision must be f32 or f64");
                              },
                              [](const TrainConfig& c) {
                                return std::string(c.encoder.precision == Precision::f32 ? "f32" : "f64");
                              }});
    k.emplace_back("mu", nested(&TrainConfig::aligner, &AlignerConfig::mu));
    k.emplace_back("epsilon", nested(&TrainConfig::aligner, &AlignerConfig::epsilon));
    k.emplace_back("sinkhorn_iters", nested(&TrainConfig::aligner, &AlignerConfig::sinkhorn_iters));
    k.emplace_back("filter_iters", nested(&TrainConfig::aligner, &AlignerConfig::filter_iters));
    k.emplace_back("alpha", nested(&TrainConfig::aligner, &AlignerConfig::alpha));
    k.emplace_back("self_label_layer", nested(&TrainConfig::aligner, &AlignerConfig::layer));
    k.emplace_back("filtering", nested(&TrainConfig::aligner, &AlignerConfig::filtering));
    k.emplace_back("dwa_layer", field(&TrainConfig::dwa_layer));
    k.emplace_back("mask_rate", nested(&TrainConfig::masking, &MaskingPolicy::rate));
    k.emplace_back("weight_mlm", field(&TrainConfig::weight_mlm));
    k.emplace_back("weight_tlm", field(&TrainConfig::weight_tlm));
    k.emplace_back("weight_dwa", field(&TrainConfig::weight_dwa));
    k.emplace_back("disable_dwa", field(&TrainConfig::disable_dwa));
    k.emplace_back("disable_tlm", field(&TrainConfig::disable_tlm));
    k.emplace_back("query_policy",
                   KeyHandler{[](TrainConfig& c, std::string_view s) {
                                if (s == "masked") c.query_policy = QueryPolicy::masked;
                                else if (s == "unmasked") c.query_policy = QueryPolicy::unmasked;
                                else if (s == "all-aligned") c.query_policy = QueryPolicy::all_aligned;
                                else if (s == "none") c.query_policy = QueryPolicy::none;
                                else throw InputError("query_policy must be masked|unmasked|all-aligned|none");
                              },
                              [](const TrainConfig& c) {
                                switch (c.query_policy) {
                                  case QueryPolicy::masked: return std::string("masked");
                                  case QueryPolicy::unmasked: return std::string("unmasked");
                                  case QueryPolicy::all_aligned: return std::string("all-aligned");
                                  case QueryPolicy::none: break;
                                }
                                return std::string("none");
                              }});
    k.emplace_back("output_prefix", field(&TrainConfig::output_prefix));
    k.emplace_back("checkpoint_every", field(&TrainConfig::checkpoint_every));
    k.emplace_back("eval_every", field(&TrainConfig::eval_every));
    k.emplace_back("resume", field(&TrainConfig::resume));
    k.emplace_back("synth_vocab_size", nested(&TrainConfig::synthetic, &SyntheticSpec::vocab_size));
    k.emplace_back("synth_min_len", nested(&TrainConfig::synthetic, &SyntheticSpec::min_len));
    k.emplace_back("synth_max_len", nested(&TrainConfig::synthetic, &SyntheticSpec::max_len));
    k.emplace_back("synth_bijection_seed", nested(&TrainConfig::synthetic, &SyntheticSpec::bijection_seed));
    k.emplace_back("synth_reordering",
                   KeyHandler{[](TrainConfig& c, std::string_view s) {
                                if (s == "identity") c.synthetic.reordering = Reordering::identity;
                                else if (s == "adjacent-swap") c.synthetic.reordering = Reordering::adjacent_swap;
                                else throw InputError("synth_reordering must be identity|adjacent-swap");
                              },
                              [](const TrainConfig& c) {
                                return std::string(c.synthetic.reordering == Reordering::identity ? "identity"
                                                                                                  : "adjacent-swap");
                              }});
    k.emplace_back("synth_swap_prob", nested(&TrainConfig::synthetic, &SyntheticSpec::swap_prob));
    k.emplace_back("synth_pairs", nested(&TrainConfig::synthetic, &SyntheticSpec::pairs));
    k.emplace_back("synth_seed", nested(&TrainConfig::synthetic, &SyntheticSpec::seed));
    k.emplace_back("heldout_pairs", field(&TrainConfig::heldout_pairs));
    k.emplace_back("bitext", field(&TrainConfig::bitext));
    k.emplace_back("gold", field(&TrainConfig::gold));
    k.emplace_back("heldout_bitext", field(&TrainConfig::heldout_bitext));
    k.emplace_back("heldout_gold", field(&TrainConfig::heldout_gold));
    return k;
  }();
  return keys;
}

}  // namespace

TrainConfig parse_train_config(std::istream& in) {
  std::map<std::string, const KeyHandler*> index;
  for (const auto& [name, h] : config_keys()) index[name] = &h;
  TrainConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view body = line;
    if (auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
    body = detail::trim(body);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected 'key = value'", line_no);
    const std::string key(detail::trim(body.substr(0, eq)));
    const std::string_view value = detail::trim(body.substr(eq + 1));
    auto it = index.find(key);
    if (it == index.end()) throw ParseError("unknown config key '" + key + "'", line_no);
    try {
      it->second->set(cfg, value);
    } catch (const InputError& e) {
      throw ParseError(std::string(e.what()) + " [" + key + "]", line_no);
    }
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  return parse_train_config(in);
}

std::string format_train_config(const TrainConfig& cfg) {
  std::string out;
  for (const auto& [name, h] : config_keys()) out += name + " = " + h.get(cfg) + "\n";
  return out;
}

// ---- data -------------------------------------------------------------------

TrainData build_train_data(const TrainConfig& cfg) {
  TrainData data;
  if (cfg.bitext.empty()) {
    SyntheticCorpus corpus = gen_synthetic_corpus(cfg.synthetic);
    SyntheticSpec held = cfg.synthetic;
    held.pairs = cfg.heldout_pairs;
    held.seed = cfg.synthetic.seed ^ 0x9E3779B97F4A7C15ULL;
    SyntheticCorpus heldout = gen_synthetic_corpus(held);
    data.vocab = std::move(corpus.vocab);
    data.pairs = std::move(corpus.pairs);
    data.truth = std::move(corpus.alignments);
    data.heldout = std::move(heldout.pairs);
    for (const auto& a : heldout.alignments) data.heldout_gold.push_back(GoldAlignment::all_sure(a));
  } else {
    data.pairs = read_bitext(cfg.bitext, data.vocab, true);
    if (!cfg.gold.empty()) {
      const auto gold = parse_gold(cfg.gold, Indexing::one_based);
      for (std::size_t k = 0; k < data.pairs.size(); ++k) {
        auto it = gold.find(static_cast<long>(k + 1));
        data.truth.push_back(it == gold.end() ? AlignSet{} : it->second.sure);
      }
    }
    if (!cfg.heldout_bitext.empty()) {
      data.heldout = read_bitext(cfg.heldout_bitext, data.vocab, true);
      if (cfg.heldout_gold.empty()) throw InputError("heldout_bitext requires heldout_gold");
      const auto gold = parse_gold(cfg.heldout_gold, Indexing::one_based);
      for (std::size_t k = 0; k < data.heldout.size(); ++k) {
        auto it = gold.find(static_cast<long>(k + 1));
        data.heldout_gold.push_back(it == gold.end() ? GoldAlignment{} : it->second);
      }
    }
  }
  for (const auto& p : data.pairs) data.mono.push_back(p.src);
  return data;
}

// ---- log ----------------------------------------------------------------------

const char* TrainLog::tsv_header() {
  return "step\tmlm\ttlm\tdwa\tlabels\tqueries\tmulti_link\tbatch_aer\theldout_aer\tlr\tgrad_norm\telapsed_ms";
}

void TrainLog::write_tsv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write train log " + path);
  out << tsv_header() << '\n';
  out.precision(8);
  for (const auto& r : records) {
    out << r.step << '\t' << r.mlm << '\t' << r.tlm << '\t' << r.dwa << '\t' << r.labels << '\t' << r.queries << '\t'
        << r.multi_link << '\t' << r.batch_aer << '\t' << r.heldout_aer << '\t' << r.lr << '\t' << r.grad_norm << '\t'
        << r.elapsed_ms << '\n';
  }
}

// ---- trainer ------------------------------------------------------------------

namespace {

EncoderConfig with_vocab(EncoderConfig c, const Vocab& v) {
  c.vocab_size = v.size();
  return c;
}

}  // namespace

Trainer::Trainer(TrainConfig cfg, const TrainData& data)
    : cfg_(std::move(cfg)),
      data_(data),
      params_(with_vocab(cfg_.encoder, data.vocab)),
      rng_(cfg_.seed),
      optimizer_(params_.size(), cfg_.adam, decay_mask(params_.layout())) {
  cfg_.validate();
  if (data_.pairs.empty()) throw InputError("training needs at least one parallel pair");
  cfg_.encoder.vocab_size = data.vocab.size();
  cfg_.masking.vocab_size = data.vocab.size();
  params_.init(rng_);
}

int Trainer::resolve_layer(int layer) const {
  const int top = params_.config().layers;
  if (layer < 0) return top;
  if (layer > top) throw InputError("layer index " + std::to_string(layer) + " exceeds encoder depth");
  return layer;
}

void Trainer::cold_start(TrainLog* log) {
  if (!cfg_.cold_start_checkpoint.empty()) {
    Checkpoint ck = load_checkpoint(cfg_.cold_start_checkpoint);
    if (!same_architecture(ck.params.config(), params_.config()))
      throw InputError("cold-start checkpoint config does not match the training config");
    params_.values = ck.params.values;
    params_.zero_grad();
    return;
  }
  if (cfg_.cold_start_steps == 0) {
    std::cerr << "warning: no cold-start checkpoint and zero warmup steps; self-labeling starts from random "
                 "parameters\n";
    return;
  }
  AdamW opt(params_.size(), cfg_.adam, decay_mask(params_.layout()));
  const std::size_t total = cfg_.cold_start_steps;
  for (std::size_t s = 0; s < total; ++s) {
    TrainRecord rec = run_step(Phase::cold_start, s, total, opt);
    rec.step = s + 1;
    if (log) log->records.push_back(rec);
  }
}

void Trainer::resume(const std::string& checkpoint_path) {
  Checkpoint ck = load_checkpoint(checkpoint_path);
  if (!same_architecture(ck.params.config(), params_.config()))
    throw InputError("resume checkpoint config does not match the training config");
  params_.values = ck.params.values;
  params_.zero_grad();
  set_rng_state(rng_, ck.rng_state);
  std::string opt_path = checkpoint_path;
  if (opt_path.size() > 4 && opt_path.ends_with(".xaw")) opt_path.resize(opt_path.size() - 4);
  OptimizerState st = load_optimizer_state(opt_path + ".opt");
  if (st.step != ck.step) throw InputError("optimizer state step does not match checkpoint step");
  optimizer_.set_state(std::move(st));
  step_ = ck.step;
}

void Trainer::save(const std::string& checkpoint_path) const {
  save_checkpoint(checkpoint_path, params_, step_, rng_);
  std::string opt_path = checkpoint_path;
  if (opt_path.ends_with(".xaw")) opt_path.resize(opt_path.size() - 4);
  save_optimizer_state(opt_path + ".opt", optimizer_.state());
}

AlignSet Trainer::self_label_pair(const SentencePair& pair) const {
  const int layer = resolve_layer(cfg_.aligner.layer);
  const std::vector<int> tokens = pair.concatenated();
  EncodeOptions opts;
  opts.segment_split = pair.n();
  opts.cache = false;
  opts.max_layer = layer;
  const ForwardTrace tr = encode(params_, tokens, opts);
  return self_label(pair.n(), pair.m(), tr.hidden[static_cast<std::size_t>(layer)], cfg_.aligner);
}

EvalReport Trainer::heldout_aer() const {
  std::vector<AlignSet> hyps;
  hyps.reserve(data_.heldout.size());
  for (const auto& p : data_.heldout) hyps.push_back(self_label_pair(p));
  return corpus_aer(hyps, data_.heldout_gold);
}

TrainRecord Trainer::step(Phase phase) {
  if (phase == Phase::cold_start) throw UsageError("use cold_start() for the warmup phase");
  TrainRecord rec = run_step(phase, step_, cfg_.steps, optimizer_);
  ++step_;
  rec.step = step_;
  if (!data_.heldout.empty() && cfg_.eval_every > 0 && (step_ % cfg_.eval_every == 0 || step_ == cfg_.steps))
    rec.heldout_aer = heldout_aer().aer;
  return rec;
}

TrainRecord Trainer::run_step(Phase phase, std::size_t sched_step, std::size_t sched_total, AdamW& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  const bool em = phase == Phase::em;
  const bool use_dwa = em && !cfg_.disable_dwa && cfg_.query_policy != QueryPolicy::none;
  const bool use_tlm = !cfg_.disable_tlm;
  const int dwa_layer = resolve_layer(cfg_.dwa_layer);
  const std::size_t batch = cfg_.batch_size;
  const double per_example = 1.0 / static_cast<double>(batch);
  Rng* drop_rng = cfg_.encoder.dropout > 0.0 ? &rng_ : nullptr;

  TrainRecord rec;
  const std::size_t warmup = std::min(cfg_.warmup_steps, sched_total);
  rec.lr = linear_schedule(cfg_.lr, sched_step, warmup, sched_total);
  params_.zero_grad();
  std::span<double> grad(params_.grads);

  std::vector<std::size_t> pair_ids(batch), mono_ids(batch);
  for (auto& k : pair_ids) k = uniform_index(rng_, data_.pairs.size());
  for (auto& k : mono_ids) k = uniform_index(rng_, data_.mono.size());

  AlignCounts counts;
  bool have_truth = em && !data_.truth.empty();
  for (std::size_t b = 0; b < batch; ++b) {
    const SentencePair& pair = data_.pairs[pair_ids[b]];
    AlignSet labels;
    if (em) {
      // Expectation: labels from the clean pair under the current parameters.
      labels = self_label_pair(pair);
      rec.labels += labels.size();
      if (have_truth) counts += count_links(labels, GoldAlignment::all_sure(data_.truth[pair_ids[b]]));
    }
    const MaskedPair masked = mask_pair(pair, cfg_.masking, rng_);
    if (!use_tlm && !use_dwa) continue;
    EncodeOptions opts;
    opts.segment_split = pair.n();
    opts.dropout_rng = drop_rng;
    const ForwardTrace tr = encode(params_, masked.perturbed, opts);
    TraceGrad up = make_trace_grad(tr);
    if (use_tlm) rec.tlm += per_example * mlm_loss(params_, tr, masked.original_tokens, &up, grad, cfg_.weight_tlm * per_example);
    if (use_dwa) {
      const DwaResult r = dwa_loss(params_, tr, dwa_layer, labels, masked.masked_positions, pair.n(), pair.m(),
                                   cfg_.query_policy, &up, grad, cfg_.weight_dwa * per_example);
      rec.dwa += per_example * r.loss;
      rec.queries += r.queries;
      rec.multi_link += r.multi_link;
    }
    backward(params_, tr, up, grad);
  }
  if (have_truth) rec.batch_aer = report_from_counts(counts).aer;

  for (std::size_t b = 0; b < batch; ++b) {
    const auto& sent = data_.mono[mono_ids[b]];
    const MaskedPair masked = mask_sequence(sent, cfg_.masking, rng_);
    EncodeOptions opts;
    opts.dropout_rng = drop_rng;
    const ForwardTrace tr = encode(params_, masked.perturbed, opts);
    TraceGrad up = make_trace_grad(tr);
    rec.mlm += per_example * mlm_loss(params_, tr, masked.original_tokens, &up, grad, cfg_.weight_mlm * per_example);
    backward(params_, tr, up, grad);
  }

  const double total = cfg_.weight_mlm * rec.mlm + cfg_.weight_tlm * rec.tlm + cfg_.weight_dwa * rec.dwa;
  if (!std::isfinite(total)) {
    std::ostringstream dump;
    dump << "non-finite loss (mlm=" << rec.mlm << " tlm=" << rec.tlm << " dwa=" << rec.dwa << ") at step "
         << sched_step + 1 << "; batch pairs:";
    for (std::size_t k : pair_ids) dump << ' ' << k;
    dump << "; mono:";
    for (std::size_t k : mono_ids) dump << ' ' << k;
    throw NumericalError(dump.str(), sched_step + 1);
  }

  rec.grad_norm = clip_global_norm(grad, cfg_.clip_norm);
  opt.step(params_.values, params_.grads, rec.lr);
  params_.quantize();
  rec.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

TrainResult train(const TrainConfig& cfg, const TrainData& data) {
  Trainer trainer(cfg, data);
  TrainLog cold_log;
  if (!cfg.resume.empty()) {
    trainer.resume(cfg.resume);
  } else {
    trainer.cold_start(&cold_log);
  }
  const bool write = !cfg.output_prefix.empty();
  if (write) {
    data.vocab.save(cfg.output_prefix + ".vocab");
    if (!cold_log.records.empty()) cold_log.write_tsv(cfg.output_prefix + ".coldstart.tsv");
  }

  TrainResult result{trainer.params(), {}, {}};
  while (trainer.steps_done() < cfg.steps) {
    result.log.records.push_back(trainer.step());
    const std::size_t k = trainer.steps_done();
    if (write && cfg.checkpoint_every > 0 && k % cfg.checkpoint_every == 0 && k < cfg.steps)
      trainer.save(cfg.output_prefix + ".step" + std::to_string(k) + ".xaw");
  }
  if (write) {
    result.checkpoint_path = cfg.output_prefix + ".xaw";
    trainer.save(result.checkpoint_path);
    result.log.write_tsv(cfg.output_prefix + ".log.tsv");
  }
  result.params = trainer.params();
  return result;
}

}  // namespace xaw
