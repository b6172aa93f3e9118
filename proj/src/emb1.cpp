#include "xaw/emb1.hpp"

#include <fstream>

#include "binary_io.hpp"
#include "xaw/errors.hpp"

namespace xaw {

using namespace detail;

void write_emb1(const std::string& path, const EmbeddingFile& file) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write embeddings " + path);
  os.write("EMB1", 4);
  put_u32(os, file.dim);
  for (const auto& p : file.pairs) {
    if (p.src.cols() != file.dim || p.tgt.cols() != file.dim) throw InputError("embedding width differs from header");
    put_u32(os, static_cast<std::uint32_t>(p.src.rows()));
    put_u32(os, static_cast<std::uint32_t>(p.tgt.rows()));
    for (Eigen::Index k = 0; k < p.src.size(); ++k) put_f32(os, static_cast<float>(p.src.data()[k]));
    for (Eigen::Index k = 0; k < p.tgt.size(); ++k) put_f32(os, static_cast<float>(p.tgt.data()[k]));
  }
  if (!os) throw std::runtime_error("write failed for embeddings " + path);
}

EmbeddingFile read_emb1(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open embeddings " + path);
  const std::string what = "embeddings " + path;
  expect_magic(is, "EMB1", what);
  EmbeddingFile file;
  file.dim = get_u32(is, what);
  if (file.dim == 0) throw ParseError(what + ": zero dimension");
  const auto d = static_cast<Eigen::Index>(file.dim);
  while (is.peek() != std::char_traits<char>::eof()) {
    const std::string rec = what + " record " + std::to_string(file.pairs.size() + 1);
    PairEmbeddings p;
    const auto n = static_cast<Eigen::Index>(get_u32(is, rec));
    const auto m = static_cast<Eigen::Index>(get_u32(is, rec));
    p.src.resize(n, d);
    p.tgt.resize(m, d);
    for (Eigen::Index k = 0; k < p.src.size(); ++k) p.src.data()[k] = get_f32(is, rec);
    for (Eigen::Index k = 0; k < p.tgt.size(); ++k) p.tgt.data()[k] = get_f32(is, rec);
    file.pairs.push_back(std::move(p));
  }
  return file;
}

}  // namespace xaw
