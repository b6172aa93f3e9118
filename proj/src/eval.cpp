#include "xaw/eval.hpp"

#include <cstdio>
#include <fstream>

#include "text_util.hpp"
#include "xaw/errors.hpp"

namespace xaw {

GoldAlignment GoldAlignment::all_sure(const AlignSet& links) {
  GoldAlignment g;
  for (const Link& l : links.links) g.add_sure(l);
  return g;
}

AlignCounts count_links(const AlignSet& hyp, const GoldAlignment& gold) {
  AlignCounts c;
  c.hyp = hyp.size();
  c.sure = gold.sure.size();
  for (const Link& l : hyp.links) {
    if (gold.sure.contains(l)) ++c.hyp_and_sure;
    if (gold.possible.contains(l)) ++c.hyp_and_possible;
  }
  return c;
}

EvalReport report_from_counts(const AlignCounts& counts, std::size_t pairs) {
  EvalReport r;
  r.counts = counts;
  r.pairs = pairs;
  // Counts are exact integers; the only rounding happens in the final division.
  const std::size_t denom = counts.hyp + counts.sure;
  if (denom > 0)
    r.aer = static_cast<double>(denom - counts.hyp_and_sure - counts.hyp_and_possible) / static_cast<double>(denom);
  if (counts.hyp > 0) r.precision = static_cast<double>(counts.hyp_and_possible) / static_cast<double>(counts.hyp);
  if (counts.sure > 0) r.recall = static_cast<double>(counts.hyp_and_sure) / static_cast<double>(counts.sure);
  return r;
}

EvalReport compute_aer(const AlignSet& hyp, const GoldAlignment& gold) {
  return report_from_counts(count_links(hyp, gold));
}

EvalReport corpus_aer(const std::vector<AlignSet>& hyps, const std::vector<GoldAlignment>& golds) {
  if (hyps.size() != golds.size())
    throw InputError("corpus_aer: " + std::to_string(hyps.size()) + " hypotheses vs " + std::to_string(golds.size()) +
                     " gold alignments");
  AlignCounts total;
  for (std::size_t k = 0; k < hyps.size(); ++k) total += count_links(hyps[k], golds[k]);
  return report_from_counts(total, hyps.size());
}

AlignSet project_subword_to_word(const AlignSet& hyp, const std::vector<int>& src_word_map,
                                 const std::vector<int>& tgt_word_map) {
  AlignSet out;
  out.direction = hyp.direction;
  for (const Link& l : hyp.links) {
    if (l.src < 0 || static_cast<std::size_t>(l.src) >= src_word_map.size())
      throw InputError("source subword index out of range: " + std::to_string(l.src));
    if (l.tgt < 0 || static_cast<std::size_t>(l.tgt) >= tgt_word_map.size())
      throw InputError("target subword index out of range: " + std::to_string(l.tgt));
    out.insert({src_word_map[static_cast<std::size_t>(l.src)], tgt_word_map[static_cast<std::size_t>(l.tgt)]});
  }
  return out;
}

std::map<long, GoldAlignment> parse_gold(const std::string& path, Indexing indexing) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open gold file " + path);
  const int base = indexing == Indexing::one_based ? 1 : 0;
  std::map<long, GoldAlignment> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = detail::split_ws(line);
    if (fields.empty()) continue;
    if (fields.size() < 3 || fields.size() > 4) throw ParseError("expected 'sent_id i j [S|P]'", line_no);
    const auto id = detail::parse_number<long>(fields[0]);
    const auto i = detail::parse_number<int>(fields[1]);
    const auto j = detail::parse_number<int>(fields[2]);
    if (!id || !i || !j) throw ParseError("non-integer field in gold line", line_no);
    if (*i < base || *j < base) throw ParseError("index below indexing base", line_no);
    const Link link{*i - base, *j - base};
    auto& gold = out[*id];
    if (fields.size() == 3 || fields[3] == "S") {
      gold.add_sure(link);
    } else if (fields[3] == "P") {
      gold.add_possible(link);
    } else {
      throw ParseError("unknown link tag '" + std::string(fields[3]) + "'", line_no);
    }
  }
  return out;
}

void write_gold(const std::string& path, const std::vector<GoldAlignment>& golds, Indexing indexing, long first_id) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  const int base = indexing == Indexing::one_based ? 1 : 0;
  for (std::size_t k = 0; k < golds.size(); ++k) {
    const long id = first_id + static_cast<long>(k);
    for (const Link& l : golds[k].possible.links) {
      out << id << ' ' << l.src + base << ' ' << l.tgt + base << ' ' << (golds[k].sure.contains(l) ? 'S' : 'P')
          << '\n';
    }
  }
}

std::string format_summary(const EvalReport& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "aer=%.4f precision=%.4f recall=%.4f pairs=%zu", r.aer, r.precision, r.recall,
                r.pairs);
  return buf;
}

}  // namespace xaw
