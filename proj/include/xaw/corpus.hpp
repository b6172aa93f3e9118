#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "xaw/align_set.hpp"
#include "xaw/rng.hpp"

namespace xaw {

/// Dense token universe. Ids 0..4 are reserved for the special tokens.
class Vocab {
 public:
  static constexpr int pad_id = 0;
  static constexpr int mask_id = 1;
  static constexpr int unk_id = 2;
  static constexpr int bos_id = 3;
  static constexpr int eos_id = 4;
  static constexpr int num_special = 5;

  Vocab();

  /// Returns the id of `token`, adding it if absent.
  int add(std::string_view token);
  /// Returns the id of `token` or unk_id.
  int lookup(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token_of(int id) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct SentencePair {
  std::vector<int> src;
  std::vector<int> tgt;
  /// Per-token word index, nondecreasing; used to project subword links.
  std::optional<std::vector<int>> src_word_map;
  std::optional<std::vector<int>> tgt_word_map;

  std::size_t n() const { return src.size(); }
  std::size_t m() const { return tgt.size(); }
  /// Source tokens followed by target tokens.
  std::vector<int> concatenated() const;
  /// Throws InputError when an invariant is violated.
  void validate() const;

  bool operator==(const SentencePair&) const = default;
};

struct MaskingPolicy {
  double rate = 0.15;
  /// Of the selected positions: replaced by mask / by a random token / kept.
  double mask_frac = 0.8;
  double random_frac = 0.1;
  /// Random replacements are drawn from [Vocab::num_special, vocab_size).
  int vocab_size = 0;
};

struct MaskedPair {
  /// Perturbed concatenation (source then target for a pair).
  std::vector<int> perturbed;
  /// Sorted masked positions into `perturbed`.
  std::vector<std::size_t> masked_positions;
  std::map<std::size_t, int> original_tokens;

  bool is_masked(std::size_t pos) const { return original_tokens.count(pos) > 0; }
};

/// Masks a single token sequence. At least one position is always selected.
MaskedPair mask_sequence(const std::vector<int>& tokens, const MaskingPolicy& policy, Rng& rng);

/// Masks the concatenation [src, tgt] of a pair.
MaskedPair mask_pair(const SentencePair& pair, const MaskingPolicy& policy, Rng& rng);

enum class Reordering { identity, adjacent_swap };

struct SyntheticSpec {
  /// Size of each language's vocabulary (source words s0.., target words t0..).
  int vocab_size = 200;
  int min_len = 5;
  int max_len = 12;
  std::uint64_t bijection_seed = 1;
  Reordering reordering = Reordering::adjacent_swap;
  double swap_prob = 0.3;
  std::size_t pairs = 2000;
  std::uint64_t seed = 7;

  void validate() const;
};

struct SyntheticCorpus {
  Vocab vocab;
  std::vector<SentencePair> pairs;
  /// Planted ground truth, one perfect matching per pair.
  std::vector<AlignSet> alignments;
  /// target word index = bijection[source word index]
  std::vector<int> bijection;
};

SyntheticCorpus gen_synthetic_corpus(const SyntheticSpec& spec);

/// Writes `src ||| tgt` lines.
void write_bitext(const std::string& path, const std::vector<SentencePair>& pairs, const Vocab& vocab);

/// Reads `src ||| tgt` lines, whitespace-tokenized. When `extend_vocab` is
/// false, unseen tokens map to unk.
std::vector<SentencePair> read_bitext(const std::string& path, Vocab& vocab, bool extend_vocab = true);

/// Parses a single bitext line; exposed for tests and streaming callers.
SentencePair parse_bitext_line(std::string_view line, Vocab& vocab, bool extend_vocab, std::size_t line_no);

/// Attaches `src_map ||| tgt_map` word maps, one line per pair.
void read_word_maps(const std::string& path, std::vector<SentencePair>& pairs);

}  // namespace xaw
