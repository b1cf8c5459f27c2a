#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

#include <Eigen/Core>

namespace oclb {

/// Every stochastic component draws from this engine. Its output sequence is
/// fixed by the standard, so runs are bit-reproducible across toolchains as
/// long as only the helpers below turn raw draws into numbers.
using Rng = std::mt19937_64;
inline constexpr std::string_view kRngName = "mt19937_64";

/// Seed splitting rule:
///   child = splitmix64(splitmix64(root ^ fnv1a(stream)) + index)
/// `stream` names the consumer (e.g. "chain/owners", "race/svrg").
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream, std::uint64_t index = 0);

/// Uniform integer in [0, n) by rejection (no modulo bias).
int uniform_index(Rng& rng, int n);

/// Uniform double in [0, 1) from the top 53 bits.
double uniform_unit(Rng& rng);

/// Vector with i.i.d. entries uniform on [-1, 1).
Eigen::VectorXd uniform_direction(Rng& rng, Eigen::Index dim);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::span<const unsigned char> bytes);
std::uint64_t fnv1a(std::string_view text);

/// FNV-1a of the little-endian IEEE-754 byte image of the entries.
std::uint64_t point_hash(const Eigen::VectorXd& w);

}  // namespace oclb
