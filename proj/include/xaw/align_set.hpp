#pragma once

#include <compare>
#include <cstddef>
#include <iosfwd>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace xaw {

/// Source index i aligned to target index j, both 0-based.
struct Link {
  int src = 0;
  int tgt = 0;
  auto operator<=>(const Link&) const = default;
};

enum class Direction { forward, backward, bidirectional };

/// Sparse set of alignment links, ordered by (src, tgt).
struct AlignSet {
  Direction direction = Direction::bidirectional;
  std::set<Link> links;

  AlignSet() = default;
  AlignSet(std::initializer_list<Link> init, Direction dir = Direction::bidirectional)
      : direction(dir), links(init) {}

  bool insert(Link l) { return links.insert(l).second; }
  bool contains(Link l) const { return links.count(l) > 0; }
  std::size_t size() const { return links.size(); }
  bool empty() const { return links.empty(); }

  /// Set equality on links only; the direction tag is provenance.
  bool operator==(const AlignSet& other) const { return links == other.links; }
};

AlignSet set_union(const AlignSet& a, const AlignSet& b);
AlignSet set_intersection(const AlignSet& a, const AlignSet& b);

enum class Indexing { zero_based, one_based };

/// Pharaoh line: space-separated `i-j` links sorted by (i, j).
std::string to_pharaoh(const AlignSet& set, Indexing indexing = Indexing::zero_based);

/// Parses one Pharaoh line. `line_no` is only used for error messages.
AlignSet parse_pharaoh_line(std::string_view line, Indexing indexing = Indexing::zero_based,
                            std::size_t line_no = 0);

std::vector<AlignSet> read_pharaoh(const std::string& path, Indexing indexing = Indexing::zero_based);
void write_pharaoh(const std::string& path, const std::vector<AlignSet>& sets,
                   Indexing indexing = Indexing::zero_based);

std::ostream& operator<<(std::ostream& os, const AlignSet& set);

}  // namespace xaw
