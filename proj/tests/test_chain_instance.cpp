#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "oclb/chain_instance.hpp"
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

Eigen::VectorXd eigenvalues(const Eigen::MatrixXd& m) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues();
}

}  // namespace

TEST_CASE("tridiagonal solver against dense LU") {
  const int m = 12;
  Rng rng(21);
  Eigen::VectorXd lower = uniform_direction(rng, m - 1);
  Eigen::VectorXd upper = uniform_direction(rng, m - 1);
  Eigen::VectorXd diag = Eigen::VectorXd::Constant(m, 4.0) + uniform_direction(rng, m);
  Eigen::VectorXd rhs = uniform_direction(rng, m);
  Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(m, m);
  for (int k = 0; k < m; ++k) dense(k, k) = diag[k];
  for (int k = 0; k + 1 < m; ++k) {
    dense(k + 1, k) = lower[k];
    dense(k, k + 1) = upper[k];
  }
  const Eigen::VectorXd x = solve_tridiagonal<double>(lower, diag, upper, rhs);
  CHECK((x - dense.lu().solve(rhs)).norm() < 1e-13);

  // the kernel is scalar-generic
  const Eigen::VectorXf xf = solve_tridiagonal<float>(lower.cast<float>(), diag.cast<float>(), upper.cast<float>(),
                                                      rhs.cast<float>());
  CHECK((xf.cast<double>() - x).norm() < 1e-4);
}

TEST_CASE("component at the origin") {
  const ChainInstance inst = sample_chain(params(9.0, 1.0, 4, 7), 3);
  for (int i = 1; i <= 4; ++i) {
    const OracleResponse r = inst.evaluate(i, Eigen::VectorXd::Zero(7));
    CHECK(r.value == 0.0);
    Eigen::VectorXd expected = Eigen::VectorXd::Zero(7);
    expected[0] = -(9.0 - 1.0) / (8.0 * 4);
    CHECK((r.gradient - expected).norm() < 1e-15);
  }
  CHECK(inst.objective(Eigen::VectorXd::Zero(7)) == 0.0);
}

TEST_CASE("mu = lambda leaves only the regularizer") {
  const ChainInstance inst(params(2.0, 2.0, 3, 5), {1, 2, 3, 1});
  Rng rng(1);
  const Eigen::VectorXd w = uniform_direction(rng, 5);
  for (int i = 1; i <= 3; ++i) CHECK(inst.evaluate(i, w).value == doctest::Approx(w.squaredNorm()));
  CHECK(closed_form_optimum(inst).norm() == 0.0);
}

TEST_CASE("gradient and Hessian against finite differences") {
  const ChainInstance inst = sample_chain(params(40.0, 1.5, 3, 8), 17);
  Rng rng(5);
  const double h = 1e-6;
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::VectorXd w = uniform_direction(rng, 8);
    for (int i = 1; i <= 3; ++i) {
      const OracleResponse r = inst.evaluate(i, w);
      const Eigen::MatrixXd hess = r.hessian.dense();
      for (int k = 0; k < 8; ++k) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(8);
        e[k] = h;
        const double fd = (inst.evaluate(i, w + e).value - inst.evaluate(i, w - e).value) / (2 * h);
        CHECK(fd == doctest::Approx(r.gradient[k]).epsilon(1e-6));
        const Eigen::VectorXd gfd = (inst.evaluate(i, w + e).gradient - inst.evaluate(i, w - e).gradient) / (2 * h);
        CHECK((gfd - hess.col(k)).norm() < 1e-6);
      }
    }
    const Eigen::VectorXd g = inst.objective_gradient(w);
    for (int k = 0; k < 8; ++k) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(8);
      e[k] = h;
      CHECK((inst.objective(w + e) - inst.objective(w - e)) / (2 * h) == doctest::Approx(g[k]).epsilon(1e-6));
    }
  }
}

TEST_CASE("decomposition: component average equals F") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ChainInstance inst = sample_chain(params(100.0, 1.0, 6, 25), seed);
    Rng rng(seed + 100);
    for (int k = 0; k < 10; ++k) {
      const Eigen::VectorXd w = 2.0 * uniform_direction(rng, 25);
      double v = 0.0;
      Eigen::VectorXd g = Eigen::VectorXd::Zero(25);
      Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(25, 25);
      for (int i = 1; i <= 6; ++i) {
        const OracleResponse r = inst.evaluate(i, w);
        v += r.value / 6;
        g += r.gradient / 6;
        hess += r.hessian.dense() / 6;
      }
      CHECK(v == doctest::Approx(inst.objective(w)).epsilon(1e-12));
      CHECK((g - inst.objective_gradient(w)).norm() < 1e-12);
      CHECK((hess - inst.objective_hessian().dense()).norm() < 1e-12);
      CHECK((inst.apply_objective_hessian(w) - hess * w).norm() < 1e-12);
    }
  }
}

TEST_CASE("spectrum of components and F") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const int d = 2 + static_cast<int>(seed % 29);
    const int n = 1 + static_cast<int>(seed % 5);
    const double mu = seed % 2 ? 100.0 : 9.0;
    const ChainInstance inst = sample_chain(params(mu, 1.0, n, d), seed);
    Rng rng(seed);
    const Eigen::VectorXd w = uniform_direction(rng, d);
    for (int i = 1; i <= n; ++i) {
      const Eigen::MatrixXd h = inst.evaluate(i, w).hessian.dense();
      CHECK((h - h.transpose()).norm() == 0.0);
      const Eigen::VectorXd ev = eigenvalues(h);
      CHECK(ev.minCoeff() >= 1.0 - 1e-8);
      CHECK(ev.maxCoeff() <= mu + 1e-8);
    }
    const Eigen::VectorXd ev = eigenvalues(inst.objective_hessian().dense());
    CHECK(ev.minCoeff() >= 1.0 - 1e-8);
    CHECK(ev.maxCoeff() <= inst.objective_smoothness() + 1e-8);
    CHECK(inst.objective_smoothness() == doctest::Approx((mu - 1.0) / n + 1.0));
  }
}

TEST_CASE("closed-form minimizer") {
  // kappa = 4 with n = 1: q = 1/3, minimizer (1/6, 1/18, ...)
  const ChainInstance four(params(4.0, 1.0, 1, 6), std::vector<int>(5, 1));
  const Eigen::VectorXd w = closed_form_optimum(four);
  for (int k = 0; k < 6; ++k) CHECK(w[k] == doctest::Approx(0.5 * std::pow(1.0 / 3.0, k + 1)).epsilon(1e-14));

  const ChainInstance one(params(3.0, 3.0, 2, 4), {1, 2, 1});
  CHECK(closed_form_optimum(one).norm() == 0.0);

  for (double kappa : {1.5, 3.0, 100.0}) {
    for (int d : {3, 50, 500}) {
      const ChainInstance inst(params(kappa, 1.0, 1, d), std::vector<int>(static_cast<std::size_t>(d - 1), 1));
      const Eigen::VectorXd closed = closed_form_optimum(inst);
      const Eigen::VectorXd solved = tridiagonal_solve_optimum(inst);
      CHECK((closed - solved).cwiseAbs().maxCoeff() <= 1e-10);
      const double g0 = inst.objective_gradient(Eigen::VectorXd::Zero(d)).norm();
      CHECK(inst.objective_gradient(closed).norm() <= 1e-9 * std::max(1.0, g0));
      CHECK(inst.objective_gradient(solved).norm() <= 1e-10);
      CHECK(inst.objective(closed) == doctest::Approx(inst.objective(solved)).epsilon(1e-10));
    }
  }
}

TEST_CASE("the minimizer does not depend on owners or n splitting") {
  const ProblemParams p = params(30.0, 1.0, 5, 12);
  const Eigen::VectorXd a = sample_chain(p, 1).optimum();
  const Eigen::VectorXd b = sample_chain(p, 2).optimum();
  CHECK((a - b).norm() == 0.0);
}

TEST_CASE("one-dimensional chain") {
  const ChainInstance inst(params(17.0, 1.0, 2, 1), {});
  const double c = (17.0 - 1.0) / (8.0 * 2);
  const double a = inst.rates().a_kappa;
  const double expected = c / (2.0 * c * a + 1.0);
  CHECK(tridiagonal_solve_optimum(inst)[0] == doctest::Approx(expected).epsilon(1e-14));
  CHECK(closed_form_optimum(inst)[0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("gap and minimality") {
  const ChainInstance inst = sample_chain(params(25.0, 1.0, 3, 15), 9);
  const double fstar = inst.objective(inst.optimum());
  Rng rng(33);
  for (int k = 0; k < 10000; ++k) {
    const Eigen::VectorXd w = uniform_direction(rng, 15);
    const double gap = inst.gap(w);
    REQUIRE(gap >= 0.0);
    REQUIRE(inst.objective(w) >= fstar - 1e-12);
    if (k < 50) CHECK(gap == doctest::Approx(inst.objective(w) - fstar).epsilon(1e-9));
  }
}

TEST_CASE("owner sampling") {
  const ProblemParams p = params(9.0, 1.0, 4, 6);
  const ChainInstance a = sample_chain(p, 4);
  const ChainInstance b = sample_chain(p, 4);
  CHECK(std::equal(a.owners().begin(), a.owners().end(), b.owners().begin(), b.owners().end()));
  const ChainInstance single = sample_chain(params(9.0, 1.0, 1, 10), 3);
  for (int j : single.owners()) CHECK(j == 1);

  const ProblemParams small = params(9.0, 1.0, 4, 4);
  std::vector<std::vector<int>> counts(3, std::vector<int>(5, 0));
  const int samples = 100000;
  for (int s = 0; s < samples; ++s) {
    const ChainInstance inst = sample_chain(small, static_cast<std::uint64_t>(s));
    for (std::size_t slot = 0; slot < 3; ++slot) ++counts[slot][static_cast<std::size_t>(inst.owners()[slot])];
  }
  for (const auto& slot : counts) {
    for (int j = 1; j <= 4; ++j) CHECK(std::abs(slot[static_cast<std::size_t>(j)] / double(samples) - 0.25) < 0.01);
  }
  CHECK_THROWS_AS(sample_chain(params(9.0, 1.0, 4, 1), 0), std::invalid_argument);
  CHECK_THROWS_AS(ChainInstance(params(9.0, 1.0, 2, 4), {1, 3, 1}), std::invalid_argument);
  CHECK_THROWS_AS(ChainInstance(params(9.0, 1.0, 2, 4), {1, 1}), std::invalid_argument);
}

TEST_CASE("serialization round trip") {
  const ChainInstance inst = sample_chain(params(100.0 / 3.0, 0.1, 7, 30), 12345);
  const std::string text = inst.serialize();
  const ChainInstance back = ChainInstance::parse(text);
  CHECK(back.params().mu == inst.params().mu);
  CHECK(back.params().lambda == inst.params().lambda);
  CHECK(back.params().n == 7);
  CHECK(back.params().d == 30);
  CHECK(back.seed() == 12345);
  CHECK(std::equal(back.owners().begin(), back.owners().end(), inst.owners().begin(), inst.owners().end()));
  CHECK(back.serialize() == text);
  CHECK_THROWS_AS(ChainInstance::parse("mu=1\n"), std::invalid_argument);
}

TEST_CASE("sign-flip family") {
  const SignFlipInstance cancel(2.0, {1, -1});
  CHECK(signflip_optimum(cancel).norm() == 0.0);

  const SignFlipInstance plus(0.5, std::vector<int>(6, 1), 3);
  Eigen::VectorXd expected = Eigen::VectorXd::Zero(3);
  expected[0] = 2.0;
  CHECK((signflip_optimum(plus) - expected).norm() < 1e-15);
  CHECK((plus.optimum() - expected).norm() < 1e-15);

  const SignFlipInstance s = sample_signflip(1.5, 9, 4, 4);
  Rng rng(2);
  const Eigen::VectorXd w = uniform_direction(rng, 4);
  double v = 0.0;
  for (int i = 1; i <= 9; ++i) {
    const OracleResponse r = s.evaluate(i, w);
    CHECK((r.hessian.dense() - 1.5 * Eigen::MatrixXd::Identity(4, 4)).norm() < 1e-15);
    v += r.value / 9;
  }
  CHECK(v == doctest::Approx(s.objective(w)).epsilon(1e-12));
  CHECK(s.gap(w) == doctest::Approx(s.objective(w) - s.objective(s.optimum())).epsilon(1e-10));
  CHECK_THROWS_AS(SignFlipInstance(1.0, {1, 0}), std::invalid_argument);
}
