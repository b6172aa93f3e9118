#pragma once

// EMB1 per-token embedding container, little-endian:
//   "EMB1", u32 dim, then per pair: u32 n, u32 m, n*dim f32 (source rows),
//   m*dim f32 (target rows). Pairs follow bitext order until end of file.

#include <cstdint>
#include <string>
#include <vector>

#include "xaw/ot_aligner.hpp"

namespace xaw {

struct PairEmbeddings {
  Matrix src;  // n x dim
  Matrix tgt;  // m x dim
};

struct EmbeddingFile {
  std::uint32_t dim = 0;
  std::vector<PairEmbeddings> pairs;
};

void write_emb1(const std::string& path, const EmbeddingFile& file);
EmbeddingFile read_emb1(const std::string& path);

}  // namespace xaw
