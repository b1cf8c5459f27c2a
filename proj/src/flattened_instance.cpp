#include "oclb/flattened_instance.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>

#include <Eigen/Cholesky>

#include "oclb/rng.hpp"

namespace oclb {

namespace {

constexpr double kLazyTolerance = 1e-10;
constexpr double kRedrawThreshold = 1e-8;

double phi_slope(double r, double z) { return phi(r, z).first; }

bool all_finite(const Eigen::VectorXd& w) { return w.allFinite(); }

// Projections <v_i, w> for every vector of the frame.
Eigen::VectorXd project(const OrthonormalFrame& frame, const Eigen::VectorXd& w) {
  Eigen::VectorXd p(frame.size());
  for (int i = 0; i < frame.size(); ++i) p[i] = frame.vectors[static_cast<std::size_t>(i)].dot(w);
  return p;
}

void require_complete(const FlattenedParams& params, const OrthonormalFrame& frame) {
  if (frame.size() != params.T) throw std::invalid_argument("operation needs the complete frame");
}

}  // namespace

double phi_difference(double r, double a, double b, double delta) {
  if (a == b) return 0.0;
  const double lo = std::min(a, b);
  const double hi = std::max(a, b);
  const std::array<double, 4> breaks = {-2.0 * r, -r, r, 2.0 * r};
  bool crosses = false;
  for (double x : breaks) crosses = crosses || (x > lo && x < hi);
  if (!crosses) return 0.5 * delta * (phi_slope(r, a) + phi_slope(r, b));

  double integral = 0.0;
  double left = lo;
  for (double x : breaks) {
    if (x <= left || x >= hi) continue;
    integral += 0.5 * (x - left) * (phi_slope(r, left) + phi_slope(r, x));
    left = x;
  }
  integral += 0.5 * (hi - left) * (phi_slope(r, left) + phi_slope(r, hi));
  return a > b ? integral : -integral;
}

double choose_radius(double mu, double lambda, int T) {
  if (!(lambda > 0.0) || !(mu > 8.0 * lambda)) throw std::invalid_argument("choose_radius needs mu > 8 lambda > 0");
  if (T < 2) throw std::invalid_argument("choose_radius needs T >= 2");
  const double q = q_factor(mu / (8.0 * lambda));
  const double tm = static_cast<double>(T) * mu;
  const double first = std::sqrt(8.0 * lambda / tm);
  const double second = 0.5 * std::pow(q, T) * std::sqrt(16.0 * lambda / tm);
  const double r = 0.5 * std::min(first, second);
  if (!(r > 0.0) || !std::isfinite(r)) throw std::domain_error("no representable flattening radius");
  return r;
}

FlattenedParams FlattenedParams::make(double mu, double lambda, int T, double r) {
  if (!(lambda > 0.0) || !(mu > 8.0 * lambda)) throw std::invalid_argument("flattened instance needs mu > 8 lambda > 0");
  if (T < 2) throw std::invalid_argument("flattened instance needs T >= 2");
  FlattenedParams p;
  p.mu = mu;
  p.lambda = lambda;
  p.T = T;
  p.d = 2 * static_cast<Eigen::Index>(T);
  p.r = r < 0.0 ? choose_radius(mu, lambda, T) : r;
  p.kappa = mu / (8.0 * lambda);
  p.q = q_factor(p.kappa);
  p.a_kappa = boundary_coefficient(p.kappa);
  p.validate();
  return p;
}

double FlattenedParams::displacement_bound() const {
  return std::sqrt(static_cast<double>(T) * mu * r * r / (16.0 * lambda));
}

void FlattenedParams::validate() const {
  if (!(lambda > 0.0) || !(mu > 8.0 * lambda)) throw std::invalid_argument("flattened instance needs mu > 8 lambda > 0");
  if (T < 2) throw std::invalid_argument("flattened instance needs T >= 2");
  if (d < 2 * static_cast<Eigen::Index>(T)) throw std::invalid_argument("flattened instance needs d >= 2T");
  if (!(r >= 0.0)) throw std::invalid_argument("flattening radius must be non-negative");
  if (static_cast<double>(T) * mu * r * r / (8.0 * lambda) > 1.0) {
    throw std::invalid_argument("flattening radius violates the norm constraint");
  }
  if (displacement_bound() > 0.5 * std::pow(q, T)) {
    throw std::invalid_argument("flattening radius violates the displacement constraint");
  }
}

Eigen::MatrixXd OrthonormalFrame::matrix() const {
  if (vectors.empty()) return {};
  Eigen::MatrixXd m(vectors.front().size(), size());
  for (int i = 0; i < size(); ++i) m.col(i) = vectors[static_cast<std::size_t>(i)];
  return m;
}

double OrthonormalFrame::orthonormality_defect() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    for (std::size_t j = i; j < vectors.size(); ++j) {
      const double target = i == j ? 1.0 : 0.0;
      worst = std::max(worst, std::abs(vectors[i].dot(vectors[j]) - target));
    }
  }
  return worst;
}

OracleResponse eval_flattened(const FlattenedParams& params, const OrthonormalFrame& frame,
                              const Eigen::VectorXd& w) {
  const int k = frame.size();
  if (k < 1 || k > params.T) throw std::invalid_argument("frame must hold between 1 and T vectors");
  if (w.size() != params.d) throw std::invalid_argument("point has the wrong dimension");
  for (const auto& v : frame.vectors) {
    if (v.size() != params.d) throw std::invalid_argument("frame vector has the wrong dimension");
  }
  const bool complete = k == params.T;
  const Eigen::VectorXd p = project(frame, w);
  if (!complete && std::abs(p[k - 1]) > kLazyTolerance) {
    throw std::domain_error("query is not orthogonal to the newest frame vector");
  }
  if (!complete && !(params.r > 0.0)) throw std::domain_error("partial-frame answers need r > 0");

  const double c = params.scale();
  const double r = params.r;
  const auto& v = frame.vectors;

  OracleResponse out;
  double h = p[0] * p[0] - p[0];
  out.gradient = (c * (2.0 * p[0] - 1.0)) * v[0];
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(k);
  diag[0] = 2.0 * c;
  std::vector<Eigen::Triplet<double>> off;

  for (int i = 0; i + 1 < k; ++i) {
    const auto term = phi(r, p[i] - p[i + 1]);
    h += term.value;
    if (term.first != 0.0) {
      out.gradient += (c * term.first) * v[static_cast<std::size_t>(i)];
      out.gradient -= (c * term.first) * v[static_cast<std::size_t>(i) + 1];
    }
    if (term.second != 0.0) {
      const double s = c * term.second;
      diag[i] += s;
      diag[i + 1] += s;
      off.emplace_back(i, i + 1, -s);
      off.emplace_back(i + 1, i, -s);
    }
  }
  if (complete) {
    const auto term = phi(r, p[k - 1]);
    const double boundary = params.a_kappa - 1.0;
    h += boundary * term.value;
    if (term.first != 0.0) out.gradient += (c * boundary * term.first) * v[static_cast<std::size_t>(k) - 1];
    diag[k - 1] += c * boundary * term.second;
  }

  out.value = c * h + 0.5 * params.lambda * w.squaredNorm();
  out.gradient += params.lambda * w;

  auto& hess = out.hessian;
  hess.dim = params.d;
  hess.diagonal_shift = params.lambda;
  for (int i = 0; i < k; ++i) {
    if (diag[i] != 0.0) hess.sparse_terms.emplace_back(i, i, diag[i]);
  }
  hess.sparse_terms.insert(hess.sparse_terms.end(), off.begin(), off.end());
  hess.basis = frame.matrix();
  return out;
}

double flattened_difference(const FlattenedParams& params, const OrthonormalFrame& frame,
                            const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  require_complete(params, frame);
  const int T = params.T;
  const Eigen::VectorXd e = a - b;
  const Eigen::VectorXd pa = project(frame, a);
  const Eigen::VectorXd pb = project(frame, b);
  const Eigen::VectorXd delta = project(frame, e);
  const double r = params.r;

  double h = delta[0] * (pa[0] + pb[0]) - delta[0];
  for (int i = 0; i + 1 < T; ++i) {
    h += phi_difference(r, pa[i] - pa[i + 1], pb[i] - pb[i + 1], delta[i] - delta[i + 1]);
  }
  h += (params.a_kappa - 1.0) * phi_difference(r, pa[T - 1], pb[T - 1], delta[T - 1]);
  return params.scale() * h + 0.5 * params.lambda * e.dot(a + b);
}

MinimizeResult minimize_flattened(const FlattenedParams& params, const OrthonormalFrame& frame,
                                  const Eigen::VectorXd& start, double tolerance) {
  require_complete(params, frame);
  MinimizeResult out;
  out.w = start;
  OracleResponse at = eval_flattened(params, frame, out.w);
  out.gradient_norm = at.gradient.norm();
  constexpr int kMaxIterations = 200;

  while (out.gradient_norm > tolerance && out.iterations < kMaxIterations) {
    ++out.iterations;
    const Eigen::VectorXd step = -at.hessian.dense().llt().solve(at.gradient);
    const double slope = at.gradient.dot(step);
    if (!(slope < 0.0)) break;
    double t = 1.0;
    bool accepted = false;
    for (int halving = 0; halving < 60; ++halving, t *= 0.5) {
      const Eigen::VectorXd trial = out.w + t * step;
      if (flattened_difference(params, frame, trial, out.w) <= 1e-4 * t * slope) {
        out.w = trial;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    at = eval_flattened(params, frame, out.w);
    out.gradient_norm = at.gradient.norm();
  }
  if (!(out.gradient_norm <= 1e-10)) {
    throw std::runtime_error("flattened minimization stalled at gradient norm " + std::to_string(out.gradient_norm));
  }
  return out;
}

FlattenedObjective::FlattenedObjective(FlattenedParams params, OrthonormalFrame frame)
    : params_(params), frame_(std::move(frame)) {
  params_.validate();
  require_complete(params_, frame_);
  const MinimizeResult min = minimize_flattened(params_, frame_, Eigen::VectorXd::Zero(params_.d));
  optimum_ = min.w;
  optimum_gradient_norm_ = min.gradient_norm;
}

OracleResponse FlattenedObjective::evaluate(int i, const Eigen::VectorXd& w) const {
  check_index(i);
  check_point(w);
  return eval_flattened(params_, frame_, w);
}

double FlattenedObjective::objective(const Eigen::VectorXd& w) const {
  check_point(w);
  return eval_flattened(params_, frame_, w).value;
}

double FlattenedObjective::gap(const Eigen::VectorXd& w) const {
  check_point(w);
  // The numeric minimizer sits within rounding of the true one; never report a negative gap.
  return std::max(0.0, flattened_difference(params_, frame_, w, optimum_));
}

namespace {

OptimumBracket bracket_of(const FlattenedObjective& objective) {
  const auto& params = objective.params();
  OptimumBracket out;
  out.anchor = Eigen::VectorXd::Zero(params.d);
  double power = 0.5;
  for (int i = 0; i < params.T; ++i) {
    power *= params.q;
    out.anchor += power * objective.frame().vectors[static_cast<std::size_t>(i)];
  }
  out.bound = params.displacement_bound();
  out.numeric_optimum = objective.optimum();
  out.displacement = (out.numeric_optimum - out.anchor).norm();
  out.optimum_norm_sq = out.numeric_optimum.squaredNorm();
  return out;
}

}  // namespace

OptimumBracket flattened_optimum_bracket(const FlattenedParams& params, const OrthonormalFrame& frame) {
  return bracket_of(FlattenedObjective(params, frame));
}

Eigen::VectorXd GradientDescentCallback::start(Eigen::Index d) { return Eigen::VectorXd::Zero(d); }

Eigen::VectorXd GradientDescentCallback::respond(const Eigen::VectorXd& w, const OracleResponse& response) {
  return w - response.gradient / mu_;
}

NesterovCallback::NesterovCallback(double mu, double lambda) : mu_(mu) {
  const double root = std::sqrt(mu / lambda);
  momentum_ = (root - 1.0) / (root + 1.0);
}

Eigen::VectorXd NesterovCallback::start(Eigen::Index d) {
  x_prev_ = Eigen::VectorXd::Zero(d);
  return x_prev_;
}

Eigen::VectorXd NesterovCallback::respond(const Eigen::VectorXd& w, const OracleResponse& response) {
  const Eigen::VectorXd x = w - response.gradient / mu_;
  const Eigen::VectorXd y = x + momentum_ * (x - x_prev_);
  x_prev_ = x;
  return y;
}

Eigen::VectorXd DampedNewtonCallback::start(Eigen::Index d) { return Eigen::VectorXd::Zero(d); }

Eigen::VectorXd DampedNewtonCallback::respond(const Eigen::VectorXd& w, const OracleResponse& response) {
  return w - damping_ * response.hessian.dense().ldlt().solve(response.gradient);
}

std::unique_ptr<QueryAlgorithm> make_callback(std::string_view name, double mu, double lambda) {
  if (name == "gd") return std::make_unique<GradientDescentCallback>(mu);
  if (name == "nesterov") return std::make_unique<NesterovCallback>(mu, lambda);
  if (name == "newton") return std::make_unique<DampedNewtonCallback>();
  if (name == "zero") return std::make_unique<ZeroQueryCallback>();
  throw std::invalid_argument("unknown callback '" + std::string(name) + "'");
}

namespace {

// Incremental orthonormal basis of span(queries, frame).
class SpanBasis {
 public:
  explicit SpanBasis(Eigen::Index d) : d_(d) {}

  Eigen::VectorXd residual(Eigen::VectorXd x) const {
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& b : basis_) x -= b.dot(x) * b;
    }
    return x;
  }

  void absorb(const Eigen::VectorXd& x) {
    const Eigen::VectorXd res = residual(x);
    const double norm = res.norm();
    if (norm > 1e-13 * std::max(1.0, x.norm())) basis_.push_back(res / norm);
  }

  Eigen::VectorXd draw_orthogonal(Rng& rng) {
    if (static_cast<Eigen::Index>(basis_.size()) >= d_) throw std::domain_error("no room left to extend the frame");
    for (int attempt = 0; attempt < 1000; ++attempt) {
      Eigen::VectorXd candidate = uniform_direction(rng, d_);
      const double scale = candidate.norm();
      if (!(scale > 0.0)) continue;
      candidate /= scale;
      Eigen::VectorXd res = residual(candidate);
      const double norm = res.norm();
      if (norm < kRedrawThreshold) continue;
      res /= norm;
      basis_.push_back(res);
      return res;
    }
    throw std::domain_error("could not draw a direction orthogonal to the current span");
  }

 private:
  Eigen::Index d_;
  std::vector<Eigen::VectorXd> basis_;
};

double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace

ResistResult resist(QueryAlgorithm& algorithm, const FlattenedParams& params, std::uint64_t seed) {
  params.validate();
  if (!(params.r > 0.0)) throw std::invalid_argument("the resisting oracle needs r > 0");
  Rng rng(derive_seed(seed, "resist/frame"));
  SpanBasis span(params.d);

  ResistResult out;
  out.params = params;
  auto emit = [&](Eigen::VectorXd w) {
    if (w.size() != params.d) throw std::invalid_argument("algorithm emitted a point of the wrong dimension");
    if (!all_finite(w)) throw std::domain_error("algorithm emitted a non-finite point");
    out.queries.push_back(std::move(w));
    span.absorb(out.queries.back());
  };

  emit(algorithm.start(params.d));
  for (int t = 1; t < params.T; ++t) {
    out.frame.vectors.push_back(span.draw_orthogonal(rng));
    out.responses.push_back(eval_flattened(params, out.frame, out.queries.back()));
    emit(algorithm.respond(out.queries.back(), out.responses.back()));
  }
  out.frame.vectors.push_back(span.draw_orthogonal(rng));

  const FlattenedObjective objective(params, out.frame);
  const double initial = objective.gap(Eigen::VectorXd::Zero(params.d));
  for (int t = 1; t <= params.T; ++t) {
    out.rows.push_back({t, objective.gap(out.queries[static_cast<std::size_t>(t) - 1]) / initial,
                        thm1_envelope(params.mu, params.lambda, t)});
  }
  out.inner_wT_vT = out.queries.back().dot(out.frame.vectors.back());

  for (std::size_t t = 0; t < out.queries.size(); ++t) {
    for (std::size_t i = t; i < out.frame.vectors.size(); ++i) {
      out.max_query_overlap = std::max(out.max_query_overlap, std::abs(out.frame.vectors[i].dot(out.queries[t])));
    }
  }
  for (std::size_t t = 0; t < out.responses.size(); ++t) {
    const OracleResponse full = eval_flattened(params, out.frame, out.queries[t]);
    const auto& lazy = out.responses[t];
    double dev = std::abs(full.value - lazy.value);
    dev = std::max(dev, max_abs_diff(full.gradient, lazy.gradient));
    dev = std::max(dev, max_abs_diff(full.hessian.dense(), lazy.hessian.dense()));
    out.max_response_deviation = std::max(out.max_response_deviation, dev);
  }
  out.bracket = bracket_of(objective);
  return out;
}

}  // namespace oclb
