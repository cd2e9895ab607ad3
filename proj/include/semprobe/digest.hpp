// Copyright 2026 The SemProbe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace semprobe {

using Bytes = std::vector<std::uint8_t>;

// Lowercase hex SHA-256.
std::string sha256_hex(std::span<const std::uint8_t> data);
std::string sha256_hex(std::string_view data);

std::string base64_encode(std::span<const std::uint8_t> data);
// Throws Error(kFormat) on malformed input.
Bytes base64_decode(std::string_view text);

Bytes read_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);

/// Writes to a sibling temp file, flushes it to disk and renames over `path`.
void write_file_atomic(const std::filesystem::path& path,
                       std::span<const std::uint8_t> data);
void write_file_atomic(const std::filesystem::path& path, std::string_view data);

inline std::span<const std::uint8_t> as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

}  // namespace semprobe
