#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "xaw/corpus.hpp"
#include "xaw/emb1.hpp"
#include "xaw/neural.hpp"
#include "xaw/ot_aligner.hpp"

namespace xaw::cli {

enum ExitCode : int { ok = 0, usage_error = 2, data_error = 3, numerical_error = 4 };

/// Self-labels each pair from precomputed embeddings. Throws InputError with
/// "pairs: bitext=N embeddings=M" when the counts differ.
std::vector<AlignSet> align_with_embeddings(const std::vector<SentencePair>& pairs, const EmbeddingFile& emb,
                                            const AlignerConfig& cfg);

/// Self-labels each pair with hidden states of a local encoder.
std::vector<AlignSet> align_with_encoder(const std::vector<SentencePair>& pairs, const EncoderParams& params,
                                         const AlignerConfig& cfg);

/// Projects per-pair subword links to words using each pair's word maps.
std::vector<AlignSet> project_to_words(const std::vector<AlignSet>& hyps, const std::vector<SentencePair>& pairs);

/// Entry point behind the `xaw` binary. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace xaw::cli
