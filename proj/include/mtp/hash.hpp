#pragma once
// Digests and seeding hashes. SHA-256 keys the response cache; the 64-bit
// chain seeds per-utterance RNG streams so parallel runs reproduce.

#include <cstdint>
#include <string>
#include <string_view>

namespace mtp {

std::string sha256_hex(std::string_view data);

// FNV-1a, stable across platforms (std::hash is not).
std::uint64_t fnv1a64(std::string_view data);

std::uint64_t splitmix64(std::uint64_t x);

// Order-sensitive combination of two 64-bit values.
std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b);

// Uniform double in [0, 1) from the full 64-bit state.
double unit_double(std::uint64_t bits);

std::string base64_encode(std::string_view data);

}  // namespace mtp
