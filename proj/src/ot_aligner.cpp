#include "xaw/ot_aligner.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "xaw/errors.hpp"

namespace xaw {

AlignMatrix AlignMatrix::from_rows(MatrixRole role, std::initializer_list<std::initializer_list<double>> rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto m = n ? static_cast<Eigen::Index>(rows.begin()->size()) : 0;
  Matrix values(n, m);
  Eigen::Index i = 0;
  for (const auto& row : rows) {
    if (static_cast<Eigen::Index>(row.size()) != m) throw InputError("ragged matrix literal");
    Eigen::Index j = 0;
    for (double x : row) values(i, j++) = x;
    ++i;
  }
  return {role, std::move(values)};
}

void AlignerConfig::validate() const {
  if (!(mu > 0.0)) throw InputError("mu must be positive");
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw InputError("epsilon must lie in (0, 1]");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InputError("alpha must lie in (0, 1]");
  if (sinkhorn_iters < 1 || filter_iters < 1) throw InputError("iteration counts must be at least 1");
}

namespace {

Matrix normalized_rows(const Matrix& h) {
  Matrix out = h;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double norm = out.row(i).norm();
    // A zero vector stays zero; its similarities all clamp to log(eps).
    if (norm > 0.0) out.row(i) /= norm;
  }
  return out;
}

void require_finite_positive(const Vector& x, const char* name, std::size_t iteration) {
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (!std::isfinite(x[k]) || !(x[k] > 0.0))
      throw NumericalError(std::string("sinkhorn: non-finite or non-positive ") + name + " at iteration " +
                               std::to_string(iteration),
                           iteration);
  }
}

}  // namespace

AlignMatrix similarity_matrix(const Matrix& src_hidden, const Matrix& tgt_hidden, double epsilon) {
  if (src_hidden.cols() != tgt_hidden.cols())
    throw InputError("hidden dimension mismatch: " + std::to_string(src_hidden.cols()) + " vs " +
                     std::to_string(tgt_hidden.cols()));
  if (!(epsilon > 0.0)) throw InputError("epsilon must be positive");
  const Matrix dots = normalized_rows(src_hidden) * normalized_rows(tgt_hidden).transpose();
  return {MatrixRole::similarity, dots.unaryExpr([epsilon](double x) { return std::log(std::max(epsilon, x)); })};
}

SinkhornResult sinkhorn(const AlignMatrix& sim, double mu, std::size_t iters) {
  if (!(mu > 0.0)) throw InputError("mu must be positive");
  if (iters < 1) throw InputError("sinkhorn needs at least one iteration");
  if (sim.rows() == 0 || sim.cols() == 0) throw InputError("sinkhorn on an empty matrix");

  const Matrix kernel = (sim.values / mu).unaryExpr([](double x) { return std::exp(x); });
  for (Eigen::Index k = 0; k < kernel.size(); ++k) {
    if (!std::isfinite(kernel.data()[k]) || !(kernel.data()[k] > 0.0))
      throw NumericalError("sinkhorn: kernel entry overflow/underflow at iteration 0", 0);
  }

  SinkhornState st;
  st.v = Vector::Ones(kernel.cols());
  for (std::size_t t = 1; t <= iters; ++t) {
    st.u = (kernel * st.v).cwiseInverse();
    require_finite_positive(st.u, "u", t);
    st.v = (kernel.transpose() * st.u).cwiseInverse();
    require_finite_positive(st.v, "v", t);
    st.iterations = t;
  }
  Matrix plan = st.u.asDiagonal() * kernel * st.v.asDiagonal();
  return {AlignMatrix(MatrixRole::plan, std::move(plan)), std::move(st)};
}

AlignSet extract_alignments(const AlignMatrix& plan, Direction direction) {
  AlignSet out;
  out.direction = direction;
  const auto& a = plan.values;
  if (direction == Direction::forward) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      Eigen::Index best = 0;
      for (Eigen::Index j = 1; j < a.cols(); ++j)
        if (a(i, j) > a(i, best)) best = j;
      out.insert({static_cast<int>(i), static_cast<int>(best)});
    }
  } else if (direction == Direction::backward) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      Eigen::Index best = 0;
      for (Eigen::Index i = 1; i < a.rows(); ++i)
        if (a(i, j) > a(best, j)) best = i;
      out.insert({static_cast<int>(best), static_cast<int>(j)});
    }
  } else {
    throw InputError("extract_alignments needs forward or backward");
  }
  return out;
}

AlignSet itermax_filter(const AlignMatrix& plan, double alpha, std::size_t filter_iters) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InputError("alpha must lie in (0, 1]");
  if (filter_iters < 1) throw InputError("filter_iters must be at least 1");

  AlignMatrix work = plan;
  const auto n = work.rows();
  const auto m = work.cols();
  AlignSet labels;
  std::vector<char> row_used(static_cast<std::size_t>(n), 0), col_used(static_cast<std::size_t>(m), 0);

  for (std::size_t it = 0; it < filter_iters; ++it) {
    const AlignSet fwd = extract_alignments(work, Direction::forward);
    const AlignSet bwd = extract_alignments(work, Direction::backward);
    for (const Link& l : set_intersection(fwd, bwd).links) {
      labels.insert(l);
      row_used[static_cast<std::size_t>(l.src)] = 1;
      col_used[static_cast<std::size_t>(l.tgt)] = 1;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) {
        if (labels.contains({static_cast<int>(i), static_cast<int>(j)})) {
          work.values(i, j) = 0.0;
        } else if (row_used[static_cast<std::size_t>(i)] || col_used[static_cast<std::size_t>(j)]) {
          work.values(i, j) *= alpha;
        }
      }
    }
  }
  labels.direction = Direction::bidirectional;
  return labels;
}

AlignSet union_alignments(const AlignMatrix& plan) {
  return set_union(extract_alignments(plan, Direction::forward), extract_alignments(plan, Direction::backward));
}

AlignSet self_label(std::size_t n, std::size_t m, const Matrix& hidden, const AlignerConfig& cfg) {
  cfg.validate();
  if (n == 0 || m == 0) throw InputError("self_label needs nonempty sentences");
  if (static_cast<std::size_t>(hidden.rows()) != n + m)
    throw InputError("hidden rows " + std::to_string(hidden.rows()) + " != n + m = " + std::to_string(n + m));
  const auto ni = static_cast<Eigen::Index>(n);
  const auto mi = static_cast<Eigen::Index>(m);
  const AlignMatrix sim = similarity_matrix(hidden.topRows(ni), hidden.bottomRows(mi), cfg.epsilon);
  const auto result = sinkhorn(sim, cfg.mu, cfg.sinkhorn_iters);
  return cfg.filtering ? itermax_filter(result.plan, cfg.alpha, cfg.filter_iters) : union_alignments(result.plan);
}

double ot_objective(const AlignMatrix& plan, const AlignMatrix& sim, double mu) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < plan.rows(); ++i) {
    for (Eigen::Index j = 0; j < plan.cols(); ++j) {
      const double a = plan(i, j);
      total += a * sim(i, j);
      if (a > 0.0) total -= mu * a * std::log(a);
    }
  }
  return total;
}

}  // namespace xaw
