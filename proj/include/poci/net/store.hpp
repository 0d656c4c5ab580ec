#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace poci::net {

std::string sha256_hex(std::span<const std::uint8_t> bytes);

/// Writes `bytes` to a sibling temp file, flushes it, then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

std::optional<std::vector<std::uint8_t>> read_file(const std::filesystem::path& path);

/// Immutable blobs under <root>/<sha256 hex>.
class ContentStore {
 public:
  explicit ContentStore(std::filesystem::path root);

  std::string put(std::span<const std::uint8_t> bytes);
  std::optional<std::vector<std::uint8_t>> get(const std::string& hash) const;
  bool contains(const std::string& hash) const;

  static bool valid_hash(const std::string& hash);

 private:
  std::filesystem::path root_;
};

}  // namespace poci::net
