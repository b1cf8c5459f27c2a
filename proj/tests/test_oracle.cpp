#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include "oclb/chain_instance.hpp"
#include "oclb/oracle.hpp"
#include "oclb/rng.hpp"

using namespace oclb;

namespace {

ProblemParams params(double mu, double lambda, int n, int d) {
  ProblemParams p;
  p.mu = mu;
  p.lambda = lambda;
  p.n = n;
  p.d = d;
  return p;
}

}  // namespace

TEST_CASE("structured Hessian apply matches dense") {
  StructuredHessian h;
  h.dim = 4;
  h.diagonal_shift = 0.5;
  h.sparse_terms = {{0, 0, 2.0}, {0, 1, -1.0}, {1, 0, -1.0}, {3, 3, 4.0}};
  Rng rng(7);
  const Eigen::VectorXd x = uniform_direction(rng, 4);
  CHECK((h.apply(x) - h.dense() * x).norm() < 1e-14);
  CHECK(h.symmetric());
  CHECK((Eigen::MatrixXd(h.sparse()) - h.dense()).norm() == 0.0);

  // rotated form B S B^T + shift
  StructuredHessian r;
  r.dim = 3;
  r.diagonal_shift = 1.0;
  r.sparse_terms = {{0, 0, 3.0}};
  Eigen::MatrixXd b(3, 1);
  b << 0.6, 0.8, 0.0;
  r.basis = b;
  const Eigen::MatrixXd expected = Eigen::MatrixXd::Identity(3, 3) + 3.0 * b * b.transpose();
  CHECK((r.dense() - expected).norm() < 1e-14);
  CHECK_THROWS_AS(r.sparse(), std::logic_error);
  CHECK_THROWS_AS(h.apply(Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST_CASE("query counts calls and is deterministic") {
  const ChainInstance inst = sample_chain(params(9.0, 1.0, 3, 6), 11);
  CallLedger ledger(true);
  Rng rng(3);
  const Eigen::VectorXd w = uniform_direction(rng, 6);
  const OracleResponse a = query(inst, w, 2, ledger);
  const OracleResponse b = query(inst, w, 2, ledger);
  CHECK(ledger.total() == 2);
  CHECK(ledger.count(2) == 2);
  CHECK(ledger.count(1) == 0);
  CHECK(a.value == b.value);
  CHECK(a.gradient == b.gradient);
  CHECK(identical(a.hessian, b.hessian));
  CHECK(ledger.points().size() == 2);
  CHECK(ledger.entries()[0].point_hash == point_hash(w));
  for (int k = 0; k < 5; ++k) query(inst, w, 1 + k % 3, ledger);
  CHECK(ledger.total() == 7);
  CHECK(ledger.indices() == std::vector<int>{2, 2, 1, 2, 3, 1, 2});

  // the oracle returns exactly what the component evaluates to
  const OracleResponse direct = inst.evaluate(3, Eigen::VectorXd::Zero(6));
  const OracleResponse counted = query(inst, Eigen::VectorXd::Zero(6), 3, ledger);
  CHECK(direct.gradient == counted.gradient);

  CHECK_THROWS_AS(query(inst, w, 0, ledger), std::out_of_range);
  CHECK_THROWS_AS(query(inst, w, 4, ledger), std::out_of_range);
  CHECK_THROWS_AS(query(inst, Eigen::VectorXd::Zero(5), 1, ledger), std::invalid_argument);
  CHECK(ledger.total() == 8);
}

TEST_CASE("ledger without points keeps hashes only") {
  const ChainInstance inst = sample_chain(params(9.0, 1.0, 2, 4), 1);
  CallLedger ledger;
  query(inst, Eigen::VectorXd::Ones(4), 1, ledger);
  CHECK(ledger.points().empty());
  std::ostringstream csv;
  ledger.write_csv(csv);
  const std::string text = csv.str();
  CHECK(text.rfind("t,index,point_hash\n1,1,", 0) == 0);
  CHECK(text.size() == std::string("t,index,point_hash\n1,1,").size() + 17);
}

TEST_CASE("suboptimality ratio") {
  const ChainInstance inst = sample_chain(params(9.0, 1.0, 4, 20), 5);
  CHECK(*suboptimality_ratio(inst, Eigen::VectorXd::Zero(20)) == 1.0);
  CHECK(*suboptimality_ratio(inst, inst.optimum()) == 0.0);
  CHECK(*suboptimality_ratio(inst, closed_form_optimum(inst)) <= 1e-10);
  CHECK(*suboptimality_ratio(inst, tridiagonal_solve_optimum(inst)) <= 1e-10);

  // F(0) = F* leaves the ratio undefined
  const SignFlipInstance cancel(1.0, {1, -1});
  CHECK_FALSE(suboptimality_ratio(cancel, Eigen::VectorXd::Zero(2)).has_value());
}

TEST_CASE("component average") {
  const ChainInstance inst = sample_chain(params(50.0, 2.0, 5, 9), 8);
  Rng rng(4);
  for (int k = 0; k < 20; ++k) {
    const Eigen::VectorXd w = 3.0 * uniform_direction(rng, 9);
    CHECK(component_average(inst, w) == doctest::Approx(inst.objective(w)).epsilon(1e-12));
  }
}

TEST_CASE("obliviousness audit") {
  const ChainInstance inst = sample_chain(params(9.0, 1.0, 3, 5), 2);
  const std::vector<int> declared = {1, 3, 2, 2, 1};
  CallLedger empty;
  CHECK(obliviousness_audit(empty, declared));

  CallLedger prefix;
  for (int k = 0; k < 3; ++k) query(inst, Eigen::VectorXd::Zero(5), declared[static_cast<std::size_t>(k)], prefix);
  CHECK(obliviousness_audit(prefix, declared));

  CallLedger deviating;
  query(inst, Eigen::VectorXd::Zero(5), 1, deviating);
  query(inst, Eigen::VectorXd::Zero(5), 2, deviating);
  CHECK_FALSE(obliviousness_audit(deviating, declared));

  CallLedger overlong;
  for (int k = 0; k < 6; ++k) query(inst, Eigen::VectorXd::Zero(5), 1, overlong);
  CHECK_FALSE(obliviousness_audit(overlong, std::vector<int>(5, 1)));
}

TEST_CASE("seed splitting and draws") {
  CHECK(derive_seed(1, "a") == derive_seed(1, "a"));
  CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
  CHECK(derive_seed(1, "a", 0) != derive_seed(1, "a", 1));
  CHECK(derive_seed(1, "a") != derive_seed(2, "a"));
  CHECK(fnv1a(std::string_view("")) == 0xcbf29ce484222325ULL);
  CHECK(fnv1a(std::string_view("a")) == 0xaf63dc4c8601ec8cULL);

  Rng rng(derive_seed(9, "test"));
  std::vector<int> counts(5, 0);
  for (int k = 0; k < 50000; ++k) {
    const int i = uniform_index(rng, 5);
    REQUIRE(i >= 0);
    REQUIRE(i < 5);
    ++counts[static_cast<std::size_t>(i)];
  }
  for (int c : counts) CHECK(std::abs(c / 50000.0 - 0.2) < 0.01);
  for (int k = 0; k < 1000; ++k) {
    const double u = uniform_unit(rng);
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }

  Eigen::VectorXd a(2), b(2);
  a << 1.0, 0.0;
  b << 1.0, -0.0;
  CHECK(point_hash(a) != point_hash(b));  // bit-level identity
}
