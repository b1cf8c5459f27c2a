#include "oclb/oracle.hpp"

#include <cinttypes>
#include <cstdio>
#include <stdexcept>
#include <string>

#include "oclb/rng.hpp"

namespace oclb {

bool StructuredHessian::symmetric() const {
  std::map<std::pair<Eigen::Index, Eigen::Index>, double> entries;
  for (const auto& t : sparse_terms) entries[{t.row(), t.col()}] += t.value();
  for (const auto& [key, value] : entries) {
    if (key.first == key.second) continue;
    const auto mirror = entries.find({key.second, key.first});
    if (mirror == entries.end() || mirror->second != value) return false;
  }
  return true;
}

Eigen::MatrixXd StructuredHessian::dense() const {
  if (dim > kDenseLimit) throw std::length_error("dense Hessian requested above the dense limit");
  const Eigen::Index k = inner_dim();
  Eigen::MatrixXd inner = Eigen::MatrixXd::Zero(k, k);
  for (const auto& t : sparse_terms) inner(t.row(), t.col()) += t.value();
  Eigen::MatrixXd out = basis ? Eigen::MatrixXd(*basis * inner * basis->transpose()) : inner;
  out.diagonal().array() += diagonal_shift;
  return out;
}

Eigen::SparseMatrix<double> StructuredHessian::sparse() const {
  if (basis) throw std::logic_error("sparse() is not available for a rotated Hessian");
  Eigen::SparseMatrix<double> out(dim, dim);
  std::vector<Eigen::Triplet<double>> all = sparse_terms;
  if (diagonal_shift != 0.0) {
    all.reserve(all.size() + static_cast<std::size_t>(dim));
    for (Eigen::Index k = 0; k < dim; ++k) all.emplace_back(k, k, diagonal_shift);
  }
  out.setFromTriplets(all.begin(), all.end());
  return out;
}

Eigen::VectorXd StructuredHessian::apply(const Eigen::VectorXd& x) const {
  if (x.size() != dim) throw std::invalid_argument("Hessian apply: dimension mismatch");
  Eigen::VectorXd inner_x = basis ? Eigen::VectorXd(basis->transpose() * x) : x;
  Eigen::VectorXd inner_y = Eigen::VectorXd::Zero(inner_x.size());
  for (const auto& t : sparse_terms) inner_y[t.row()] += t.value() * inner_x[t.col()];
  Eigen::VectorXd y = basis ? Eigen::VectorXd(*basis * inner_y) : inner_y;
  y += diagonal_shift * x;
  return y;
}

bool identical(const StructuredHessian& a, const StructuredHessian& b) {
  if (a.dim != b.dim || a.diagonal_shift != b.diagonal_shift) return false;
  if (a.sparse_terms.size() != b.sparse_terms.size()) return false;
  for (std::size_t k = 0; k < a.sparse_terms.size(); ++k) {
    const auto& x = a.sparse_terms[k];
    const auto& y = b.sparse_terms[k];
    if (x.row() != y.row() || x.col() != y.col() || x.value() != y.value()) return false;
  }
  if (a.basis.has_value() != b.basis.has_value()) return false;
  return !a.basis || *a.basis == *b.basis;
}

void FiniteSum::check_index(int i) const {
  if (i < 1 || i > components()) {
    throw std::out_of_range("component index " + std::to_string(i) + " outside [1, " +
                            std::to_string(components()) + "]");
  }
}

void FiniteSum::check_point(const Eigen::VectorXd& w) const {
  if (w.size() != dim()) {
    throw std::invalid_argument("point has dimension " + std::to_string(w.size()) + ", expected " +
                                std::to_string(dim()));
  }
}

void CallLedger::append(int index, const Eigen::VectorXd& w) {
  entries_.push_back({total() + 1, index, point_hash(w)});
  ++counts_[index];
  if (record_points_) points_.push_back(w);
}

std::int64_t CallLedger::count(int index) const {
  const auto it = counts_.find(index);
  return it == counts_.end() ? 0 : it->second;
}

std::vector<int> CallLedger::indices() const {
  std::vector<int> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.index);
  return out;
}

void CallLedger::write_csv(std::ostream& out) const {
  out << "t,index,point_hash\n";
  char hash[17];
  for (const auto& e : entries_) {
    std::snprintf(hash, sizeof hash, "%016" PRIx64, e.point_hash);
    out << e.step << ',' << e.index << ',' << hash << '\n';
  }
}

OracleResponse query(const FiniteSum& instance, const Eigen::VectorXd& w, int i, CallLedger& ledger) {
  instance.check_index(i);
  instance.check_point(w);
  OracleResponse response = instance.evaluate(i, w);
  ledger.append(i, w);
  return response;
}

std::optional<double> suboptimality_ratio(const FiniteSum& instance, const Eigen::VectorXd& w) {
  instance.check_point(w);
  const double initial = instance.gap(Eigen::VectorXd::Zero(instance.dim()));
  if (!(initial > 0.0)) return std::nullopt;
  return instance.gap(w) / initial;
}

double component_average(const FiniteSum& instance, const Eigen::VectorXd& w) {
  instance.check_point(w);
  double sum = 0.0;
  for (int i = 1; i <= instance.components(); ++i) sum += instance.evaluate(i, w).value;
  return sum / instance.components();
}

bool obliviousness_audit(const CallLedger& ledger, std::span<const int> declared_schedule) {
  const auto& entries = ledger.entries();
  if (entries.size() > declared_schedule.size()) return false;
  for (std::size_t k = 0; k < entries.size(); ++k) {
    if (entries[k].index != declared_schedule[k]) return false;
  }
  return true;
}

}  // namespace oclb
