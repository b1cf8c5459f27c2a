#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "oclb/rng.hpp"
#include "oclb/span_analysis.hpp"

using namespace oclb;

TEST_CASE("hand traces") {
  const std::vector<int> owners = {1, 1, 2};
  SpanState a(2, 4);
  CHECK(a.window_capacity() == 1);
  CHECK(a.ell() == 1);
  CHECK(a.advance(2, owners) == 1);

  SpanState b(2, 4);
  CHECK(b.advance(1, owners) == 3);
  for (int i : {1, 2, 2, 1}) CHECK(b.advance(i, owners) == 3);

  // window of two at n = 4
  SpanState c(4, 5);
  CHECK(c.window_capacity() == 2);
  const std::vector<int> o = {3, 4, 1, 2};
  CHECK(c.advance(3, o) == 2);
  CHECK(c.advance(1, o) == 2);
  CHECK(c.advance(4, o) == 4);  // 3 evicted, but 4 and then 1 are in the window
  CHECK(c.window() == std::deque<int>{1, 4});
  CHECK(c.advance(2, o) == 4);

  CHECK_THROWS_AS(a.advance(3, owners), std::out_of_range);
  CHECK_THROWS_AS(a.advance(1, std::vector<int>{1}), std::invalid_argument);
}

TEST_CASE("ell is monotone and capped") {
  Rng rng(derive_seed(3, "test/span"));
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + uniform_index(rng, 6);
    const int d = 2 + uniform_index(rng, 10);
    std::vector<int> owners(static_cast<std::size_t>(d - 1));
    for (int& j : owners) j = 1 + uniform_index(rng, n);
    SpanState s(n, d);
    int prev = s.ell();
    for (int t = 0; t < 40; ++t) {
      const int ell = s.advance(1 + uniform_index(rng, n), owners);
      REQUIRE(ell >= prev);
      REQUIRE(ell <= d - 1);
      REQUIRE(ell - prev <= d);
      prev = ell;
    }
  }
}

TEST_CASE("schedules") {
  CHECK(round_robin_schedule(3, 7) == std::vector<int>{1, 2, 3, 1, 2, 3, 1});
  const auto u = uniform_schedule(5, 1000, 9);
  CHECK(u == uniform_schedule(5, 1000, 9));
  CHECK(u != uniform_schedule(5, 1000, 10));
  for (int i : u) {
    CHECK(i >= 1);
    CHECK(i <= 5);
  }
  CHECK(ell_after(2, 3, 1, std::vector<int>{}, std::vector<int>{2, 2}) == 1);
}

TEST_CASE("expected progress") {
  const std::vector<int> one = {1};
  const std::vector<int> two = {2};
  CHECK(exact_expected_ell(2, 3, 2, one) == 1.5);
  CHECK(exact_expected_ell(2, 3, 2, two) == 1.5);
  CHECK(progress_bound(2, 2) == 2.0);

  const ProgressEstimate first = expected_progress_mc(4, 10, 1, std::vector<int>{}, 100, 1);
  CHECK(first.mean == 1.0);
  CHECK(first.stderr_ == 0.0);
  CHECK(first.bound == 1.0);

  // the first step has no history, so the 2/n rate holds there
  for (int n = 2; n <= 6; ++n)
    for (int i = 1; i <= n; ++i)
      CHECK(exact_expected_ell(n, 4, 2, std::vector<int>{i}) <= progress_bound(n, 2) + 1e-12);

  // After a stall the frontier owner is known to lie outside the old window,
  // so a fixed round-robin schedule hits it sooner than 1/n suggests.
  const auto rr2 = round_robin_schedule(2, 2);
  CHECK(exact_expected_ell(2, 8, 3, rr2) == doctest::Approx(247.0 / 64.0));
  CHECK(exact_expected_ell(2, 8, 3, rr2) > progress_bound(2, 3));
  const auto rr = round_robin_schedule(8, 99);
  const ProgressEstimate e = expected_progress_mc(8, 40, 100, rr, 10000, 5);
  CHECK(e.bound == doctest::Approx(1.0 + 2.0 * 99 / 8));
  CHECK(e.mean > e.bound + 4.0 * e.stderr_);

  // Monte Carlo agrees with enumeration
  const auto sched = round_robin_schedule(3, 5);
  const double exact = exact_expected_ell(3, 5, 6, sched);
  const ProgressEstimate mc = expected_progress_mc(3, 5, 6, sched, 20000, 11);
  CHECK(std::abs(mc.mean - exact) <= 5 * mc.stderr_);

  const auto curve = progress_curve_mc(3, 5, 6, sched, 20000, 11);
  CHECK(curve.size() == 6);
  CHECK(curve.back().mean == mc.mean);
}

TEST_CASE("adversarial schedules") {
  const AdversarialResult t1 = adversarial_average(2, 3, 1);
  CHECK(t1.worst_average == 1.0);
  const AdversarialResult t2 = adversarial_average(2, 3, 2);
  CHECK(t2.worst_average <= 2.0);
  CHECK(t2.schedules == 2);
  CHECK(t2.holds());
  for (int T = 1; T <= 5; ++T) CHECK(adversarial_average(2, 3, T).holds());
  CHECK_THROWS_AS(adversarial_average(3, 4, 6, 1000), std::length_error);
}

TEST_CASE("greedy adaptive schedule gains every step") {
  const std::vector<int> owners = {2, 1, 3, 3, 1, 2, 2};
  const GreedyTrace g = greedy_adaptive_schedule(owners, 3, 10);
  REQUIRE(g.ell.size() == 10);
  for (std::size_t t = 1; t < g.ell.size(); ++t) {
    if (g.ell[t - 1] < 7) {
      CHECK(g.ell[t] >= g.ell[t - 1] + 1);
    } else {
      CHECK(g.ell[t] == 7);
    }
  }
}

TEST_CASE("g and the Jensen step") {
  CHECK(g_value(0.5, 1, 0.0) == 0.25);
  CHECK(g_value(0.5, 3, 3.0) == 0.0);
  CHECK(g_value(0.5, 3, 7.5) == 0.0);
  CHECK(g_value(0.3, 10, 2.0) == doctest::Approx(std::pow(0.3, 6)));
  const std::vector<double> constant(10, 3.0);
  CHECK(jensen_bound_check(0.4, 10, constant));

  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 4 + uniform_index(rng, 30);
    const double q = 0.05 + 0.9 * uniform_unit(rng);
    std::vector<double> samples(20);
    for (double& z : samples) z = static_cast<double>(uniform_index(rng, d / 2 + 1));
    double mean = 0.0;
    for (double z : samples) mean += z / 20;
    if (mean > d / 2.0) continue;
    CHECK(jensen_bound_check(q, d, samples));
  }
  CHECK_THROWS_AS(jensen_bound_check(1.0, 4, constant), std::invalid_argument);
  CHECK_THROWS_AS(jensen_bound_check(0.5, 4, constant), std::invalid_argument);
}

TEST_CASE("support audits") {
  const int n = 2;
  const int d = 5;
  const std::vector<int> owners = {1, 2, 1, 2};
  const std::vector<int> indices = {2, 1, 1};
  std::vector<Eigen::VectorXd> zero(3, Eigen::VectorXd::Zero(d));
  CHECK(iterate_support_audit(indices, zero, Eigen::VectorXd::Zero(d), owners, n, d).pass);

  // ell: 1 before call 1, 1 before call 2, 2 before call 3, 2 at the end
  std::vector<Eigen::VectorXd> ok = zero;
  ok[2][1] = 0.3;
  ok[0][d - 1] = 1.0;  // coordinate d is always admitted
  Eigen::VectorXd final_ok = Eigen::VectorXd::Zero(d);
  final_ok[1] = 0.1;
  CHECK(iterate_support_audit(indices, ok, final_ok, owners, n, d).pass);

  std::vector<Eigen::VectorXd> bad = zero;
  bad[1][1] = 1e-6;
  const AuditResult r = iterate_support_audit(indices, bad, Eigen::VectorXd::Zero(d), owners, n, d);
  CHECK_FALSE(r.pass);
  CHECK(r.step == 2);
  CHECK(r.coordinate == 2);
  CHECK(r.ell == 1);

  Eigen::VectorXd final_bad = Eigen::VectorXd::Zero(d);
  final_bad[3] = 1.0;
  CHECK_FALSE(iterate_support_audit(indices, zero, final_bad, owners, n, d).pass);
  CHECK_THROWS_AS(iterate_support_audit(indices, std::vector<Eigen::VectorXd>(2, Eigen::VectorXd::Zero(d)),
                                        Eigen::VectorXd::Zero(d), owners, n, d),
                  std::invalid_argument);
}

TEST_CASE("block support audit") {
  const int n = 2;
  const int d = 3;
  const std::vector<int> indices = {1};
  std::vector<Eigen::VectorXd> queries(1, Eigen::VectorXd::Zero(12));
  CHECK(block_support_audit(indices, queries, Eigen::VectorXd::Zero(12), n, d).pass);

  // after calling 1, tuples with j_1 = 1 reach ell = 2 = d-1, so coordinate 3 is fine there
  Eigen::VectorXd u = Eigen::VectorXd::Zero(12);
  u[2] = 1.0;  // tuple (1,1), head 3
  CHECK(block_support_audit(indices, queries, u, n, d).pass);
  u[7] = 1.0;  // tuple (2,1), head 2, ell still 1
  const AuditResult r = block_support_audit(indices, queries, u, n, d);
  CHECK_FALSE(r.pass);
  CHECK(r.block == 2);
  CHECK(r.step == 2);
}
