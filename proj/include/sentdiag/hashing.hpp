#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace sentdiag {

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

// Deterministic value in [0, 1) derived from the digest of `key`.
double hash_unit(std::string_view key);

// Seeded uniform sample of k distinct indices from [0, n), returned in
// ascending order. Uses mt19937_64 with rejection sampling so the result is
// identical across standard library implementations.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, std::uint64_t seed);

}  // namespace sentdiag
