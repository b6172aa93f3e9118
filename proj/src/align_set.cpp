#include "xaw/align_set.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <ostream>

#include "text_util.hpp"
#include "xaw/errors.hpp"

namespace xaw {

AlignSet set_union(const AlignSet& a, const AlignSet& b) {
  AlignSet out;
  std::set_union(a.links.begin(), a.links.end(), b.links.begin(), b.links.end(),
                 std::inserter(out.links, out.links.end()));
  return out;
}

AlignSet set_intersection(const AlignSet& a, const AlignSet& b) {
  AlignSet out;
  std::set_intersection(a.links.begin(), a.links.end(), b.links.begin(), b.links.end(),
                        std::inserter(out.links, out.links.end()));
  return out;
}

std::string to_pharaoh(const AlignSet& set, Indexing indexing) {
  const int base = indexing == Indexing::one_based ? 1 : 0;
  std::string out;
  for (const Link& l : set.links) {
    if (!out.empty()) out += ' ';
    out += std::to_string(l.src + base);
    out += '-';
    out += std::to_string(l.tgt + base);
  }
  return out;
}

AlignSet parse_pharaoh_line(std::string_view line, Indexing indexing, std::size_t line_no) {
  const int base = indexing == Indexing::one_based ? 1 : 0;
  AlignSet out;
  for (std::string_view tok : detail::split_ws(line)) {
    const auto dash = tok.find('-');
    if (dash == std::string_view::npos) throw ParseError("expected i-j link, got '" + std::string(tok) + "'", line_no);
    const auto i = detail::parse_number<int>(tok.substr(0, dash));
    const auto j = detail::parse_number<int>(tok.substr(dash + 1));
    if (!i || !j || *i < base || *j < base)
      throw ParseError("bad link '" + std::string(tok) + "'", line_no);
    out.insert({*i - base, *j - base});
  }
  return out;
}

std::vector<AlignSet> read_pharaoh(const std::string& path, Indexing indexing) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<AlignSet> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) out.push_back(parse_pharaoh_line(line, indexing, ++line_no));
  return out;
}

void write_pharaoh(const std::string& path, const std::vector<AlignSet>& sets, Indexing indexing) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const AlignSet& s : sets) out << to_pharaoh(s, indexing) << '\n';
}

std::ostream& operator<<(std::ostream& os, const AlignSet& set) { return os << '{' << to_pharaoh(set) << '}'; }

}  // namespace xaw
