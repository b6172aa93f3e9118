#pragma once

// EM-style pre-training loop: every step self-labels the sampled parallel
// pairs with the current encoder (expectation), then takes one optimizer step
// on L_MLM(mono) + L_TLM(pair) + L_DWA(pair, labels) (maximization).

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "xaw/adam.hpp"
#include "xaw/corpus.hpp"
#include "xaw/eval.hpp"
#include "xaw/neural.hpp"
#include "xaw/ot_aligner.hpp"

namespace xaw {

struct TrainConfig {
  std::size_t steps = 1000;
  std::size_t batch_size = 32;
  double lr = 3e-3;
  AdamConfig adam;
  std::size_t warmup_steps = 50;
  double clip_norm = 1.0;
  std::uint64_t seed = 1;

  /// Cold start: load this checkpoint, or else run MLM+TLM-only steps.
  std::string cold_start_checkpoint;
  std::size_t cold_start_steps = 500;

  EncoderConfig encoder;
  AlignerConfig aligner;  // aligner.layer is the self-labeling layer
  int dwa_layer = -1;     // -1 = top layer
  MaskingPolicy masking;

  double weight_mlm = 1.0;
  double weight_tlm = 1.0;
  double weight_dwa = 1.0;
  bool disable_dwa = false;
  bool disable_tlm = false;
  QueryPolicy query_policy = QueryPolicy::masked;

  /// Outputs: <prefix>.xaw, <prefix>.opt, <prefix>.vocab, <prefix>.log.tsv
  std::string output_prefix;
  std::size_t checkpoint_every = 0;
  std::size_t eval_every = 50;
  /// Resume from this checkpoint (its .opt sidecar must sit next to it).
  std::string resume;

  /// Corpus: synthetic unless `bitext` is set.
  SyntheticSpec synthetic;
  std::size_t heldout_pairs = 200;
  std::string bitext;
  std::string gold;
  std::string heldout_bitext;
  std::string heldout_gold;

  void validate() const;
};

/// Parses `key = value` lines; `#` starts a comment; unknown keys are rejected.
TrainConfig parse_train_config(std::istream& in);
TrainConfig load_train_config(const std::string& path);
/// Every key with its current value, in parse_train_config syntax.
std::string format_train_config(const TrainConfig& cfg);

struct TrainData {
  Vocab vocab;
  std::vector<SentencePair> pairs;
  /// Ground truth per training pair, when known (empty otherwise).
  std::vector<AlignSet> truth;
  std::vector<SentencePair> heldout;
  std::vector<GoldAlignment> heldout_gold;
  /// Monolingual stream for L_MLM.
  std::vector<std::vector<int>> mono;
};

/// Synthetic corpus, or bitext/gold files, per the config.
TrainData build_train_data(const TrainConfig& cfg);

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct TrainRecord {
  std::size_t step = 0;
  double mlm = 0.0;
  double tlm = 0.0;
  double dwa = 0.0;
  std::size_t labels = 0;   // total |A| over the batch
  std::size_t queries = 0;  // total |P|
  std::size_t multi_link = 0;
  double batch_aer = kNaN;    // self-labels vs known truth
  double heldout_aer = kNaN;  // evaluated every eval_every steps
  double lr = 0.0;
  double grad_norm = 0.0;
  double elapsed_ms = 0.0;
};

struct TrainLog {
  std::vector<TrainRecord> records;
  static const char* tsv_header();
  void write_tsv(const std::string& path) const;
};

/// Owns parameters, optimizer and RNG for one run.
class Trainer {
 public:
  enum class Phase { cold_start, em };

  Trainer(TrainConfig cfg, const TrainData& data);

  /// Cold start per config: checkpoint load or MLM+TLM-only warmup.
  void cold_start(TrainLog* log = nullptr);
  /// Replaces parameters, RNG and optimizer state with a saved run at `step`.
  void resume(const std::string& checkpoint_path);

  /// One iteration of the EM loop (or of the cold-start warmup).
  TrainRecord step(Phase phase = Phase::em);

  /// Self-labels the held-out pairs and scores them against their gold.
  EvalReport heldout_aer() const;
  /// Self-labels one pair with the current parameters.
  AlignSet self_label_pair(const SentencePair& pair) const;

  void save(const std::string& checkpoint_path) const;

  EncoderParams& params() { return params_; }
  const EncoderParams& params() const { return params_; }
  const TrainConfig& config() const { return cfg_; }
  std::size_t steps_done() const { return step_; }

 private:
  TrainRecord run_step(Phase phase, std::size_t sched_step, std::size_t sched_total, AdamW& opt);
  int resolve_layer(int layer) const;

  TrainConfig cfg_;
  const TrainData& data_;
  EncoderParams params_;
  Rng rng_;
  AdamW optimizer_;
  std::size_t step_ = 0;
};

struct TrainResult {
  EncoderParams params;
  TrainLog log;
  std::string checkpoint_path;
};

/// Cold start (or resume), then exactly cfg.steps EM steps. Writes periodic
/// and final checkpoints plus the TSV log when output_prefix is set.
TrainResult train(const TrainConfig& cfg, const TrainData& data);

}  // namespace xaw
