#include "xaw/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "text_util.hpp"
#include "xaw/errors.hpp"

namespace xaw {

Vocab::Vocab() {
  for (const char* s : {"<pad>", "<mask>", "<unk>", "<s>", "</s>"}) add(s);
}

int Vocab::add(std::string_view token) {
  std::string key(token);
  if (auto it = index_.find(key); it != index_.end()) return it->second;
  const int id = size();
  tokens_.push_back(key);
  index_.emplace(std::move(key), id);
  return id;
}

int Vocab::lookup(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? unk_id : it->second;
}

bool Vocab::contains(std::string_view token) const { return index_.count(std::string(token)) > 0; }

const std::string& Vocab::token_of(int id) const {
  if (id < 0 || id >= size()) throw InputError("token id out of range: " + std::to_string(id));
  return tokens_[static_cast<std::size_t>(id)];
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& t : tokens_) out << t << '\n';
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  Vocab v;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no <= static_cast<std::size_t>(num_special)) {
      if (line != v.tokens_[line_no - 1]) throw ParseError("vocab special token mismatch", line_no);
      continue;
    }
    if (v.contains(line)) throw ParseError("duplicate vocab entry '" + line + "'", line_no);
    v.add(line);
  }
  return v;
}

std::vector<int> SentencePair::concatenated() const {
  std::vector<int> out(src);
  out.insert(out.end(), tgt.begin(), tgt.end());
  return out;
}

namespace {

void check_word_map(const std::optional<std::vector<int>>& map, std::size_t len, const char* side) {
  if (!map) return;
  if (map->size() != len)
    throw InputError(std::string(side) + " word map length " + std::to_string(map->size()) +
                     " != token count " + std::to_string(len));
  if (!map->empty() && map->front() < 0) throw InputError(std::string(side) + " word map has negative index");
  if (!std::is_sorted(map->begin(), map->end()))
    throw InputError(std::string(side) + " word map is not nondecreasing");
}

}  // namespace

void SentencePair::validate() const {
  if (src.empty() || tgt.empty()) throw InputError("sentence pair has an empty side");
  check_word_map(src_word_map, src.size(), "source");
  check_word_map(tgt_word_map, tgt.size(), "target");
}

MaskedPair mask_sequence(const std::vector<int>& tokens, const MaskingPolicy& policy, Rng& rng) {
  if (tokens.empty()) throw InputError("cannot mask an empty sequence");
  if (!(policy.rate > 0.0 && policy.rate < 1.0)) throw InputError("masking rate must lie in (0, 1)");
  if (policy.vocab_size <= Vocab::num_special) throw InputError("masking policy needs a non-special vocabulary");

  MaskedPair out;
  out.perturbed = tokens;
  for (std::size_t p = 0; p < tokens.size(); ++p)
    if (bernoulli(rng, policy.rate)) out.masked_positions.push_back(p);
  if (out.masked_positions.empty()) out.masked_positions.push_back(uniform_index(rng, tokens.size()));

  const auto n_regular = static_cast<std::uint64_t>(policy.vocab_size - Vocab::num_special);
  for (std::size_t p : out.masked_positions) {
    out.original_tokens[p] = tokens[p];
    const double r = uniform01(rng);
    if (r < policy.mask_frac) {
      out.perturbed[p] = Vocab::mask_id;
    } else if (r < policy.mask_frac + policy.random_frac) {
      out.perturbed[p] = Vocab::num_special + static_cast<int>(uniform_index(rng, n_regular));
    }
  }
  return out;
}

MaskedPair mask_pair(const SentencePair& pair, const MaskingPolicy& policy, Rng& rng) {
  pair.validate();
  return mask_sequence(pair.concatenated(), policy, rng);
}

void SyntheticSpec::validate() const {
  if (vocab_size < 2) throw InputError("synthetic vocabulary must have at least 2 words");
  if (min_len < 1 || max_len < min_len) throw InputError("invalid synthetic sentence-length range");
  if (swap_prob < 0.0 || swap_prob > 1.0) throw InputError("swap probability must lie in [0, 1]");
}

SyntheticCorpus gen_synthetic_corpus(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticCorpus corpus;
  const auto v = static_cast<std::size_t>(spec.vocab_size);
  std::vector<int> src_ids(v), tgt_ids(v);
  for (std::size_t w = 0; w < v; ++w) src_ids[w] = corpus.vocab.add("s" + std::to_string(w));
  for (std::size_t w = 0; w < v; ++w) tgt_ids[w] = corpus.vocab.add("t" + std::to_string(w));

  corpus.bijection.resize(v);
  std::iota(corpus.bijection.begin(), corpus.bijection.end(), 0);
  Rng bij_rng(spec.bijection_seed);
  for (std::size_t i = v - 1; i > 0; --i) std::swap(corpus.bijection[i], corpus.bijection[uniform_index(bij_rng, i + 1)]);

  Rng rng(spec.seed);
  const auto len_span = static_cast<std::uint64_t>(spec.max_len - spec.min_len + 1);
  corpus.pairs.reserve(spec.pairs);
  corpus.alignments.reserve(spec.pairs);
  for (std::size_t k = 0; k < spec.pairs; ++k) {
    const std::size_t n = static_cast<std::size_t>(spec.min_len) + uniform_index(rng, len_span);
    std::vector<int> words(n);
    for (auto& w : words) w = static_cast<int>(uniform_index(rng, v));

    // perm[i] = target position of source token i
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    if (spec.reordering == Reordering::adjacent_swap) {
      for (std::size_t i = 0; i + 1 < n; ++i) {
        if (bernoulli(rng, spec.swap_prob)) {
          std::swap(perm[i], perm[i + 1]);
          ++i;
        }
      }
    }

    SentencePair pair;
    pair.src.resize(n);
    pair.tgt.resize(n);
    AlignSet truth;
    for (std::size_t i = 0; i < n; ++i) {
      pair.src[i] = src_ids[static_cast<std::size_t>(words[i])];
      pair.tgt[static_cast<std::size_t>(perm[i])] =
          tgt_ids[static_cast<std::size_t>(corpus.bijection[static_cast<std::size_t>(words[i])])];
      truth.insert({static_cast<int>(i), perm[i]});
    }
    corpus.pairs.push_back(std::move(pair));
    corpus.alignments.push_back(std::move(truth));
  }
  return corpus;
}

void write_bitext(const std::string& path, const std::vector<SentencePair>& pairs, const Vocab& vocab) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& p : pairs) {
    for (std::size_t i = 0; i < p.src.size(); ++i) out << (i ? " " : "") << vocab.token_of(p.src[i]);
    out << " |||";
    for (int t : p.tgt) out << ' ' << vocab.token_of(t);
    out << '\n';
  }
}

SentencePair parse_bitext_line(std::string_view line, Vocab& vocab, bool extend_vocab, std::size_t line_no) {
  const auto sides = detail::split_bitext(line);
  if (!sides) throw ParseError("missing ' ||| ' separator", line_no);
  SentencePair pair;
  for (auto tok : detail::split_ws(sides->first)) pair.src.push_back(extend_vocab ? vocab.add(tok) : vocab.lookup(tok));
  for (auto tok : detail::split_ws(sides->second)) pair.tgt.push_back(extend_vocab ? vocab.add(tok) : vocab.lookup(tok));
  if (pair.src.empty() || pair.tgt.empty()) throw ParseError("empty side in bitext pair", line_no);
  return pair;
}

std::vector<SentencePair> read_bitext(const std::string& path, Vocab& vocab, bool extend_vocab) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open bitext " + path);
  std::vector<SentencePair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) pairs.push_back(parse_bitext_line(line, vocab, extend_vocab, ++line_no));
  return pairs;
}

void read_word_maps(const std::string& path, std::vector<SentencePair>& pairs) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open word maps " + path);
  std::string line;
  std::size_t line_no = 0;
  auto parse_side = [&](std::string_view side) {
    std::vector<int> out;
    for (auto tok : detail::split_ws(side)) {
      auto v = detail::parse_number<int>(tok);
      if (!v) throw ParseError("bad word index '" + std::string(tok) + "'", line_no);
      out.push_back(*v);
    }
    return out;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no > pairs.size()) throw ParseError("more word-map lines than pairs", line_no);
    const auto sides = detail::split_bitext(line);
    if (!sides) throw ParseError("missing ' ||| ' separator", line_no);
    auto& pair = pairs[line_no - 1];
    pair.src_word_map = parse_side(sides->first);
    pair.tgt_word_map = parse_side(sides->second);
    try {
      pair.validate();
    } catch (const InputError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  if (line_no != pairs.size())
    throw ParseError("word maps cover " + std::to_string(line_no) + " pairs, bitext has " + std::to_string(pairs.size()));
}

}  // namespace xaw
