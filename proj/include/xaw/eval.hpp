#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "xaw/align_set.hpp"

namespace xaw {

/// Sure links S and possible links P with S a subset of P.
struct GoldAlignment {
  AlignSet sure;
  AlignSet possible;

  void add_sure(Link l) {
    sure.insert(l);
    possible.insert(l);
  }
  void add_possible(Link l) { possible.insert(l); }

  /// Gold where every link is sure (S = P), e.g. a planted alignment.
  static GoldAlignment all_sure(const AlignSet& links);
};

struct AlignCounts {
  std::size_t hyp = 0;               // |A|
  std::size_t sure = 0;              // |S|
  std::size_t hyp_and_sure = 0;      // |A n S|
  std::size_t hyp_and_possible = 0;  // |A n P|

  AlignCounts& operator+=(const AlignCounts& o) {
    hyp += o.hyp;
    sure += o.sure;
    hyp_and_sure += o.hyp_and_sure;
    hyp_and_possible += o.hyp_and_possible;
    return *this;
  }
};

struct EvalReport {
  double aer = 0.0;
  double precision = 1.0;
  double recall = 1.0;
  AlignCounts counts;
  std::size_t pairs = 0;
};

AlignCounts count_links(const AlignSet& hyp, const GoldAlignment& gold);

/// AER = 1 - (|A n S| + |A n P|) / (|A| + |S|); precision = |A n P| / |A|,
/// recall = |A n S| / |S|. Empty denominators yield precision 1, recall 1 and AER 0.
EvalReport report_from_counts(const AlignCounts& counts, std::size_t pairs = 1);

EvalReport compute_aer(const AlignSet& hyp, const GoldAlignment& gold);

/// Corpus-level scores from summed counts. `hyps[k]` is scored against `golds[k]`.
EvalReport corpus_aer(const std::vector<AlignSet>& hyps, const std::vector<GoldAlignment>& golds);

/// Maps subword links to the words containing them, deduplicated.
AlignSet project_subword_to_word(const AlignSet& hyp, const std::vector<int>& src_word_map,
                                 const std::vector<int>& tgt_word_map);

/// Reads `sent_id i j [S|P]` lines; a missing tag means sure.
std::map<long, GoldAlignment> parse_gold(const std::string& path, Indexing indexing = Indexing::one_based);

/// Writes `sent_id i j S|P` lines with sentence ids starting at `first_id`.
void write_gold(const std::string& path, const std::vector<GoldAlignment>& golds,
                Indexing indexing = Indexing::one_based, long first_id = 1);

/// Fixed-key summary line: `aer=... precision=... recall=... pairs=...`.
std::string format_summary(const EvalReport& report);

}  // namespace xaw
