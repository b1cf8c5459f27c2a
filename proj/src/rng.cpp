#include "oclb/rng.hpp"

#include <bit>
#include <stdexcept>

namespace oclb {

namespace {
constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t fnv1a_step(std::uint64_t h, unsigned char byte) {
  return (h ^ byte) * kFnvPrime;
}
}  // namespace

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view stream, std::uint64_t index) {
  return splitmix64(splitmix64(root ^ fnv1a(stream)) + index);
}

int uniform_index(Rng& rng, int n) {
  if (n <= 0) throw std::invalid_argument("uniform_index needs n >= 1");
  const std::uint64_t range = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = Rng::max() - Rng::max() % range;
  std::uint64_t draw;
  do {
    draw = rng();
  } while (draw >= limit);
  return static_cast<int>(draw % range);
}

double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Eigen::VectorXd uniform_direction(Rng& rng, Eigen::Index dim) {
  Eigen::VectorXd v(dim);
  for (Eigen::Index k = 0; k < dim; ++k) v[k] = 2.0 * uniform_unit(rng) - 1.0;
  return v;
}

std::uint64_t fnv1a(std::span<const unsigned char> bytes) {
  std::uint64_t h = kFnvOffset;
  for (unsigned char b : bytes) h = fnv1a_step(h, b);
  return h;
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = kFnvOffset;
  for (char c : text) h = fnv1a_step(h, static_cast<unsigned char>(c));
  return h;
}

std::uint64_t point_hash(const Eigen::VectorXd& w) {
  std::uint64_t h = kFnvOffset;
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    const auto bits = std::bit_cast<std::uint64_t>(w[k]);
    for (int byte = 0; byte < 8; ++byte) {
      h = fnv1a_step(h, static_cast<unsigned char>((bits >> (8 * byte)) & 0xffU));
    }
  }
  return h;
}

}  // namespace oclb
