#pragma once

// Word-alignment self-labeling by entropic optimal transport.
//
// Pipeline: cosine-style similarity log max(eps, h_i . h_j) on L2-normalized
// hidden vectors -> Sinkhorn scaling of K = exp(sim / mu) towards a doubly
// stochastic plan -> iterative intersection of row/column argmax with
// discounting of the rows and columns already used.

#include <cstddef>
#include <initializer_list>

#include <Eigen/Dense>

#include "xaw/align_set.hpp"

namespace xaw {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class MatrixRole { similarity, kernel, plan };

/// Dense n x m matrix tagged with what it holds.
struct AlignMatrix {
  MatrixRole role = MatrixRole::plan;
  Matrix values;

  AlignMatrix() = default;
  AlignMatrix(MatrixRole r, Matrix v) : role(r), values(std::move(v)) {}
  static AlignMatrix from_rows(MatrixRole role, std::initializer_list<std::initializer_list<double>> rows);

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return values(i, j); }
};

struct SinkhornState {
  Vector u;
  Vector v;
  std::size_t iterations = 0;
};

struct AlignerConfig {
  double mu = 1.0;
  double epsilon = 1e-4;
  std::size_t sinkhorn_iters = 2;
  std::size_t filter_iters = 2;
  double alpha = 0.9;
  /// Encoder layer whose hidden states feed the similarity; -1 = top layer.
  int layer = -1;
  /// When false, labels are the union of forward and backward argmax links.
  bool filtering = true;

  void validate() const;
};

/// Entry (i, j) = log max(eps, h_i . h_j) with rows of both inputs L2-normalized first.
/// Rows of `src_hidden` / `tgt_hidden` are token vectors.
AlignMatrix similarity_matrix(const Matrix& src_hidden, const Matrix& tgt_hidden, double epsilon);

struct SinkhornResult {
  AlignMatrix plan;
  SinkhornState state;
};

/// Runs `iters` rounds of u <- 1/(K v), v <- 1/(K^T u) from v = 1 and returns
/// diag(u) K diag(v). Throws NumericalError naming the failing iteration.
SinkhornResult sinkhorn(const AlignMatrix& sim, double mu, std::size_t iters);

/// Row-wise (forward) or column-wise (backward) argmax links; lowest index wins ties.
AlignSet extract_alignments(const AlignMatrix& plan, Direction direction);

/// Itermax-style filtering over a private copy of `plan`.
AlignSet itermax_filter(const AlignMatrix& plan, double alpha, std::size_t filter_iters);

/// Union of forward and backward argmax links (filtering disabled).
AlignSet union_alignments(const AlignMatrix& plan);

/// Full self-labeling for one pair. `hidden` holds n + m rows: source tokens
/// first, then target tokens, all from the same encoder layer.
AlignSet self_label(std::size_t n, std::size_t m, const Matrix& hidden, const AlignerConfig& cfg);

/// Entropy-regularized transport objective sum A f - mu A log A.
double ot_objective(const AlignMatrix& plan, const AlignMatrix& sim, double mu);

}  // namespace xaw
