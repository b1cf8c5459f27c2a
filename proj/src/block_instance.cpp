#include "oclb/block_instance.hpp"

#include <limits>
#include <stdexcept>

namespace oclb {

std::int64_t tuple_count(int n, int d) {
  if (n < 1 || d < 1) throw std::invalid_argument("tuple_count needs n >= 1 and d >= 1");
  std::int64_t count = 1;
  for (int k = 0; k + 1 < d; ++k) {
    if (count > std::numeric_limits<std::int64_t>::max() / n) throw std::overflow_error("n^(d-1) overflows");
    count *= n;
  }
  return count;
}

std::int64_t tuple_rank(std::span<const int> tuple, int n) {
  if (n < 1) throw std::invalid_argument("tuple_rank needs n >= 1");
  std::int64_t rank = 0;
  for (int j : tuple) {
    if (j < 1 || j > n) throw std::out_of_range("tuple entry outside [1, n]");
    rank = rank * n + (j - 1);
  }
  return rank;
}

std::vector<int> rank_tuple(std::int64_t rank, int n, int d) {
  const std::int64_t count = tuple_count(n, d);
  if (rank < 0 || rank >= count) throw std::out_of_range("tuple rank outside [0, n^(d-1))");
  std::vector<int> tuple(static_cast<std::size_t>(d - 1));
  for (auto it = tuple.rbegin(); it != tuple.rend(); ++it) {
    *it = static_cast<int>(rank % n) + 1;
    rank /= n;
  }
  return tuple;
}

namespace {

ChainInstance averaged_chain(const ProblemParams& params) {
  return ChainInstance(params, std::vector<int>(static_cast<std::size_t>(params.d - 1), 1));
}

}  // namespace

BlockInstance::BlockInstance(const ProblemParams& params)
    : params_(params),
      rates_(chain_rates(params.mu, params.lambda, params.n)),
      coeffs_(ChainCoefficients::from(params)),
      tuples_(tuple_count(params.n, params.d)),
      dim_(0),
      averaged_(averaged_chain(params)) {
  params_.validate();
  if (tuples_ > kMaxDim / params_.d) throw std::length_error("block instance exceeds the dimension cap");
  dim_ = static_cast<Eigen::Index>(tuples_) * params_.d;
  optimum_ = block_optimum(*this);
}

double BlockInstance::objective_smoothness() const {
  return (params_.mu - params_.lambda) / params_.n + params_.lambda;
}

OracleResponse BlockInstance::evaluate(int i, const Eigen::VectorXd& u) const {
  check_index(i);
  check_point(u);
  const Eigen::Index d = params_.d;
  OracleResponse out;
  out.gradient.resize(dim_);
  out.hessian.dim = dim_;
  out.hessian.diagonal_shift = params_.lambda;
  for (std::int64_t rank = 0; rank < tuples_; ++rank) {
    const std::vector<int> tuple = rank_tuple(rank, params_.n, params_.d);
    const Eigen::Index offset = static_cast<Eigen::Index>(rank) * d;
    const OracleResponse part = chain_component(coeffs_, tuple, i, u.segment(offset, d));
    out.value += part.value;
    out.gradient.segment(offset, d) = part.gradient;
    for (const auto& t : part.hessian.sparse_terms) {
      out.hessian.sparse_terms.emplace_back(t.row() + offset, t.col() + offset, t.value());
    }
  }
  return out;
}

double BlockInstance::objective(const Eigen::VectorXd& u) const {
  check_point(u);
  const Eigen::Index d = params_.d;
  double total = 0.0;
  for (std::int64_t rank = 0; rank < tuples_; ++rank) {
    total += averaged_.objective(u.segment(static_cast<Eigen::Index>(rank) * d, d));
  }
  return total;
}

Eigen::VectorXd BlockInstance::objective_gradient(const Eigen::VectorXd& u) const {
  check_point(u);
  const Eigen::Index d = params_.d;
  Eigen::VectorXd g(dim_);
  for (std::int64_t rank = 0; rank < tuples_; ++rank) {
    const Eigen::Index offset = static_cast<Eigen::Index>(rank) * d;
    g.segment(offset, d) = averaged_.objective_gradient(u.segment(offset, d));
  }
  return g;
}

double BlockInstance::gap(const Eigen::VectorXd& u) const {
  check_point(u);
  const Eigen::Index d = params_.d;
  const Eigen::VectorXd e = u - optimum_;
  double total = 0.0;
  for (std::int64_t rank = 0; rank < tuples_; ++rank) {
    const Eigen::VectorXd block = e.segment(static_cast<Eigen::Index>(rank) * d, d);
    total += 0.5 * block.dot(averaged_.apply_objective_hessian(block));
  }
  return total;
}

Eigen::VectorXd block_optimum(const BlockInstance& instance) {
  const auto& p = instance.params();
  const Eigen::VectorXd w = closed_form_optimum(ChainInstance(p, std::vector<int>(static_cast<std::size_t>(p.d - 1), 1)));
  return w.replicate(static_cast<Eigen::Index>(instance.tuples()), 1);
}

std::vector<int> per_block_heads(const Eigen::VectorXd& u, int n, int d, double tolerance) {
  const std::int64_t count = tuple_count(n, d);
  if (u.size() != static_cast<Eigen::Index>(count) * d) throw std::invalid_argument("vector length is not n^(d-1) d");
  std::vector<int> heads(static_cast<std::size_t>(count), 0);
  for (std::int64_t rank = 0; rank < count; ++rank) {
    const Eigen::Index offset = static_cast<Eigen::Index>(rank) * d;
    for (int k = d; k >= 1; --k) {
      if (std::abs(u[offset + k - 1]) > tolerance) {
        heads[static_cast<std::size_t>(rank)] = k;
        break;
      }
    }
  }
  return heads;
}

}  // namespace oclb
