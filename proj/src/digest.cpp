// Copyright 2026 The SemProbe Authors
// SPDX-License-Identifier: Apache-2.0

#include "semprobe/digest.hpp"

#include <fcntl.h>
#include <openssl/evp.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <memory>

#include "semprobe/error.hpp"

namespace semprobe {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kNotFound: return "not-found";
    case ErrorCode::kBackendUnavailable: return "backend-unavailable";
    case ErrorCode::kValidation: return "validation";
    case ErrorCode::kConflict: return "conflict";
    case ErrorCode::kInternal: return "internal";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kProtocol: return "protocol";
    case ErrorCode::kEmptyMask: return "empty-mask";
    case ErrorCode::kTemplate: return "template";
    case ErrorCode::kUnresolvedPlaceholder: return "unresolved-placeholder";
    case ErrorCode::kGenerationFailed: return "generation-failed";
    case ErrorCode::kTimeout: return "timeout";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kWriteOnce: return "write-once-violation";
    case ErrorCode::kIntegrity: return "integrity";
    case ErrorCode::kRejected: return "rejected";
  }
  return "unknown";
}

std::string sha256_hex(std::span<const std::uint8_t> data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(),
                 nullptr) != 1) {
    fail(ErrorCode::kInternal, "sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

std::string sha256_hex(std::string_view data) { return sha256_hex(as_bytes(data)); }

std::string base64_encode(std::span<const std::uint8_t> data) {
  std::string out(4 * ((data.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                data.data(), static_cast<int>(data.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

Bytes base64_decode(std::string_view text) {
  // Tolerate data-URL prefixes and whitespace that browsers like to add.
  if (auto comma = text.find(','); text.starts_with("data:") && comma != text.npos) {
    text.remove_prefix(comma + 1);
  }
  std::string clean;
  clean.reserve(text.size());
  for (char c : text) {
    if (c != '\n' && c != '\r' && c != ' ' && c != '\t') clean.push_back(c);
  }
  if (clean.size() % 4 != 0) fail(ErrorCode::kFormat, "base64 length not a multiple of 4");
  if (clean.empty()) return {};
  Bytes out(clean.size() / 4 * 3);
  const int n = EVP_DecodeBlock(out.data(),
                                reinterpret_cast<const unsigned char*>(clean.data()),
                                static_cast<int>(clean.size()));
  if (n < 0) fail(ErrorCode::kFormat, "malformed base64");
  std::size_t pad = 0;
  if (clean.ends_with("==")) pad = 2;
  else if (clean.ends_with('=')) pad = 1;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

namespace {

struct FdCloser {
  void operator()(const int* fd) const {
    if (fd && *fd >= 0) ::close(*fd);
    delete fd;
  }
};

}  // namespace

void write_file_atomic(const std::filesystem::path& path,
                       std::span<const std::uint8_t> data) {
  const auto tmp = path.string() + ".tmp";
  {
    const int raw = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (raw < 0) fail(ErrorCode::kIo, "cannot write " + tmp);
    std::unique_ptr<int, FdCloser> fd(new int(raw));
    std::size_t off = 0;
    while (off < data.size()) {
      const auto n = ::write(raw, data.data() + off, data.size() - off);
      if (n < 0) fail(ErrorCode::kIo, "write failed: " + tmp);
      off += static_cast<std::size_t>(n);
    }
    if (::fsync(raw) != 0) fail(ErrorCode::kIo, "fsync failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    fail(ErrorCode::kIo, "rename failed: " + path.string());
  }
}

void write_file_atomic(const std::filesystem::path& path, std::string_view data) {
  write_file_atomic(path, as_bytes(data));
}

}  // namespace semprobe
