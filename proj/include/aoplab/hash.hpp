#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace aoplab::hash {

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string hex64(std::uint64_t v);

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

/// Digest over a directory tree: sorted relative paths and file digests.
std::string sha256_tree(const std::filesystem::path& root);

}  // namespace aoplab::hash
