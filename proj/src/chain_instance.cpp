#include "oclb/chain_instance.hpp"

#include <charconv>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

#include "oclb/rng.hpp"

namespace oclb {

ChainCoefficients ChainCoefficients::from(const ProblemParams& params) {
  const RateConstants rates = chain_rates(params.mu, params.lambda, params.n);
  return {(params.mu - params.lambda) / 8.0, params.lambda, params.n, rates.a_kappa};
}

OracleResponse chain_component(const ChainCoefficients& coeffs, std::span<const int> owners, int i,
                               const Eigen::VectorXd& w) {
  const Eigen::Index d = w.size();
  const double c = coeffs.coupling;
  const double inv_n = 1.0 / coeffs.n;
  const double boundary = coeffs.a_kappa - 1.0;

  OracleResponse out;
  out.gradient = coeffs.lambda * w;
  double chain_sum = 0.0;
  std::map<Eigen::Index, double> diag;
  std::vector<Eigen::Index> owned;

  for (Eigen::Index l = 0; l + 1 < d; ++l) {
    if (owners[static_cast<std::size_t>(l)] != i) continue;
    const double diff = w[l] - w[l + 1];
    chain_sum += diff * diff;
    out.gradient[l] += 2.0 * c * diff;
    out.gradient[l + 1] -= 2.0 * c * diff;
    diag[l] += 2.0 * c;
    diag[l + 1] += 2.0 * c;
    owned.push_back(l);
  }

  const double w1 = w[0];
  const double wd = w[d - 1];
  out.value = c * (chain_sum + inv_n * (w1 * w1 + boundary * wd * wd - w1)) + 0.5 * coeffs.lambda * w.squaredNorm();
  out.gradient[0] += c * inv_n * (2.0 * w1 - 1.0);
  out.gradient[d - 1] += c * inv_n * 2.0 * boundary * wd;
  diag[0] += 2.0 * c * inv_n;
  diag[d - 1] += 2.0 * c * inv_n * boundary;

  auto& h = out.hessian;
  h.dim = d;
  h.diagonal_shift = coeffs.lambda;
  h.sparse_terms.reserve(diag.size() + 2 * owned.size());
  for (const auto& [k, v] : diag) {
    if (v != 0.0) h.sparse_terms.emplace_back(k, k, v);
  }
  for (Eigen::Index l : owned) {
    if (c == 0.0) continue;
    h.sparse_terms.emplace_back(l, l + 1, -2.0 * c);
    h.sparse_terms.emplace_back(l + 1, l, -2.0 * c);
  }
  return out;
}

ChainInstance::ChainInstance(const ProblemParams& params, std::vector<int> owners, std::uint64_t seed)
    : params_(params), owners_(std::move(owners)), seed_(seed) {
  params_.validate();
  if (owners_.size() != static_cast<std::size_t>(params_.d - 1)) {
    throw std::invalid_argument("chain instance needs exactly d-1 block owners");
  }
  for (int j : owners_) {
    if (j < 1 || j > params_.n) throw std::invalid_argument("block owner outside [1, n]");
  }
  rates_ = chain_rates(params_.mu, params_.lambda, params_.n);
  coeffs_ = ChainCoefficients::from(params_);
  optimum_ = closed_form_optimum(*this);
}

double ChainInstance::objective_smoothness() const {
  return (params_.mu - params_.lambda) / params_.n + params_.lambda;
}

OracleResponse ChainInstance::evaluate(int i, const Eigen::VectorXd& w) const {
  check_index(i);
  check_point(w);
  return chain_component(coeffs_, owners_, i, w);
}

double ChainInstance::objective(const Eigen::VectorXd& w) const {
  check_point(w);
  const Eigen::Index d = params_.d;
  double chain_sum = 0.0;
  for (Eigen::Index l = 0; l + 1 < d; ++l) {
    const double diff = w[l] - w[l + 1];
    chain_sum += diff * diff;
  }
  const double scale = (params_.mu - params_.lambda) / (8.0 * params_.n);
  return scale * (w[0] * w[0] + chain_sum + (rates_.a_kappa - 1.0) * w[d - 1] * w[d - 1] - w[0]) +
         0.5 * params_.lambda * w.squaredNorm();
}

Eigen::VectorXd ChainInstance::apply_objective_hessian(const Eigen::VectorXd& x) const {
  check_point(x);
  const Eigen::Index d = params_.d;
  const double s = 2.0 * (params_.mu - params_.lambda) / (8.0 * params_.n);
  Eigen::VectorXd y = params_.lambda * x;
  y[0] += s * x[0];
  y[d - 1] += s * (rates_.a_kappa - 1.0) * x[d - 1];
  for (Eigen::Index l = 0; l + 1 < d; ++l) {
    const double diff = x[l] - x[l + 1];
    y[l] += s * diff;
    y[l + 1] -= s * diff;
  }
  return y;
}

Eigen::VectorXd ChainInstance::objective_gradient(const Eigen::VectorXd& w) const {
  Eigen::VectorXd g = apply_objective_hessian(w);
  g[0] -= (params_.mu - params_.lambda) / (8.0 * params_.n);
  return g;
}

StructuredHessian ChainInstance::objective_hessian() const {
  const Eigen::Index d = params_.d;
  const double s = 2.0 * (params_.mu - params_.lambda) / (8.0 * params_.n);
  StructuredHessian h;
  h.dim = d;
  h.diagonal_shift = params_.lambda;
  if (s == 0.0) return h;
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(d);
  diag[0] += s;
  diag[d - 1] += s * (rates_.a_kappa - 1.0);
  for (Eigen::Index l = 0; l + 1 < d; ++l) {
    diag[l] += s;
    diag[l + 1] += s;
  }
  for (Eigen::Index k = 0; k < d; ++k) h.sparse_terms.emplace_back(k, k, diag[k]);
  for (Eigen::Index l = 0; l + 1 < d; ++l) {
    h.sparse_terms.emplace_back(l, l + 1, -s);
    h.sparse_terms.emplace_back(l + 1, l, -s);
  }
  return h;
}

Eigen::VectorXd ChainInstance::optimum() const { return optimum_; }

double ChainInstance::gap(const Eigen::VectorXd& w) const {
  check_point(w);
  const Eigen::VectorXd e = w - optimum_;
  return 0.5 * e.dot(apply_objective_hessian(e));
}

namespace {

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

template <typename T>
T parse_number(std::string_view text, const char* key) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) {
    throw std::invalid_argument(std::string("malformed value for ") + key);
  }
  return value;
}

}  // namespace

std::string ChainInstance::serialize() const {
  std::ostringstream out;
  out << "mu=" << format_double(params_.mu) << '\n'
      << "lambda=" << format_double(params_.lambda) << '\n'
      << "n=" << params_.n << '\n'
      << "d=" << params_.d << '\n'
      << "seed=" << seed_ << '\n'
      << "owners=";
  for (std::size_t k = 0; k < owners_.size(); ++k) out << (k ? "," : "") << owners_[k];
  out << '\n';
  return out.str();
}

ChainInstance ChainInstance::parse(std::string_view text) {
  std::map<std::string, std::string, std::less<>> fields;
  while (!text.empty()) {
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw std::invalid_argument("instance line without '='");
    fields[std::string(line.substr(0, eq))] = std::string(line.substr(eq + 1));
  }
  auto field = [&](const char* key) -> const std::string& {
    const auto it = fields.find(key);
    if (it == fields.end()) throw std::invalid_argument(std::string("instance file lacks ") + key);
    return it->second;
  };

  ProblemParams params;
  params.mu = parse_number<double>(field("mu"), "mu");
  params.lambda = parse_number<double>(field("lambda"), "lambda");
  params.n = parse_number<int>(field("n"), "n");
  params.d = parse_number<int>(field("d"), "d");
  const auto seed = parse_number<std::uint64_t>(field("seed"), "seed");

  std::vector<int> owners;
  std::string_view list = field("owners");
  while (!list.empty()) {
    const auto comma = list.find(',');
    owners.push_back(parse_number<int>(list.substr(0, comma), "owners"));
    list = comma == std::string_view::npos ? std::string_view{} : list.substr(comma + 1);
  }
  return ChainInstance(params, std::move(owners), seed);
}

ChainInstance sample_chain(const ProblemParams& params, std::uint64_t seed) {
  params.validate();
  if (params.d < 2) throw std::invalid_argument("sample_chain requires d >= 2");
  Rng rng(derive_seed(seed, "chain/owners"));
  std::vector<int> owners(static_cast<std::size_t>(params.d - 1));
  for (int& j : owners) j = 1 + uniform_index(rng, params.n);
  return ChainInstance(params, std::move(owners), seed);
}

double average_objective(const ChainInstance& instance, const Eigen::VectorXd& w) {
  return instance.objective(w);
}

Eigen::VectorXd closed_form_optimum(const ChainInstance& instance) {
  const Eigen::Index d = instance.dim();
  const double q = instance.rates().q;
  Eigen::VectorXd w(d);
  double power = 0.5;
  for (Eigen::Index k = 0; k < d; ++k) {
    power *= q;
    w[k] = power;
  }
  return w;
}

Eigen::VectorXd tridiagonal_solve_optimum(const ChainInstance& instance) {
  const auto& p = instance.params();
  const Eigen::Index d = p.d;
  const double scale = (p.mu - p.lambda) / (8.0 * p.n);
  const double a = instance.rates().a_kappa;

  // Gradient of F = H w - scale * e_1 with H = lambda I + 2 scale (tridiagonal chain + boundary).
  Eigen::VectorXd diag = Eigen::VectorXd::Constant(d, p.lambda);
  Eigen::VectorXd off = Eigen::VectorXd::Constant(std::max<Eigen::Index>(d - 1, 0), -2.0 * scale);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d);
  rhs[0] = scale;
  diag[0] += 2.0 * scale;
  diag[d - 1] += 2.0 * scale * (a - 1.0);
  for (Eigen::Index l = 0; l + 1 < d; ++l) {
    diag[l] += 2.0 * scale;
    diag[l + 1] += 2.0 * scale;
  }
  if (scale == 0.0) return Eigen::VectorXd::Zero(d);
  return solve_tridiagonal<double>(off, diag, off, rhs);
}

SignFlipInstance::SignFlipInstance(double lambda, std::vector<int> signs, Eigen::Index d, std::uint64_t seed)
    : lambda_(lambda), signs_(std::move(signs)), dim_(d), seed_(seed) {
  if (!(lambda_ > 0.0)) throw std::invalid_argument("lambda must be positive");
  if (signs_.empty()) throw std::invalid_argument("sign-flip instance needs n >= 1");
  if (dim_ < 1) throw std::invalid_argument("dimension must be >= 1");
  long long sum = 0;
  for (int s : signs_) {
    if (s != 1 && s != -1) throw std::invalid_argument("signs must be +1 or -1");
    sum += s;
  }
  mean_sign_ = static_cast<double>(sum) / static_cast<double>(signs_.size());
}

OracleResponse SignFlipInstance::evaluate(int i, const Eigen::VectorXd& w) const {
  check_index(i);
  check_point(w);
  const double delta = signs_[static_cast<std::size_t>(i - 1)];
  OracleResponse out;
  out.value = -delta * w[0] + 0.5 * lambda_ * w.squaredNorm();
  out.gradient = lambda_ * w;
  out.gradient[0] -= delta;
  out.hessian.dim = dim_;
  out.hessian.diagonal_shift = lambda_;
  return out;
}

double SignFlipInstance::objective(const Eigen::VectorXd& w) const {
  check_point(w);
  return -mean_sign_ * w[0] + 0.5 * lambda_ * w.squaredNorm();
}

Eigen::VectorXd SignFlipInstance::optimum() const {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(dim_);
  w[0] = mean_sign_ / lambda_;
  return w;
}

double SignFlipInstance::gap(const Eigen::VectorXd& w) const {
  check_point(w);
  return 0.5 * lambda_ * (w - optimum()).squaredNorm();
}

SignFlipInstance sample_signflip(double lambda, int n, std::uint64_t seed, Eigen::Index d) {
  if (n < 1) throw std::invalid_argument("sample_signflip requires n >= 1");
  Rng rng(derive_seed(seed, "signflip/signs"));
  std::vector<int> signs(static_cast<std::size_t>(n));
  for (int& s : signs) s = uniform_index(rng, 2) == 0 ? -1 : 1;
  return SignFlipInstance(lambda, std::move(signs), d, seed);
}

Eigen::VectorXd signflip_optimum(const SignFlipInstance& instance) { return instance.optimum(); }

}  // namespace oclb
