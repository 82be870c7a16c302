// Versioned binary container used for checkpoints.
//
// Layout (all integers little-endian, floats IEEE-754 binary64 little-endian):
//
//   "CDREARCH"                 8-byte magic
//   u32 version                currently 1
//   str kind                   e.g. "affinity-model", "relation-model"
//   u32 entry_count
//   entry*:
//     u8  tag                  1 text, 2 string list, 3 matrix, 4 u64, 5 f64
//     str name
//     payload                  text: str
//                              string list: u32 n, n x str
//                              matrix: u32 rows, u32 cols, rows*cols f64 (row-major)
//                              u64 / f64: 8 bytes
//
//   str := u32 byte_length, bytes
//
// Entries keep insertion order, so serialising a parsed archive reproduces the
// input byte for byte.
#pragma once

#include "corefdre/autograd.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace corefdre {

class ArchiveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Archive {
 public:
  static constexpr std::uint32_t kVersion = 1;

  explicit Archive(std::string kind) : kind_(std::move(kind)) {}

  const std::string& kind() const { return kind_; }

  void put_text(const std::string& name, std::string value);
  void put_strings(const std::string& name, std::vector<std::string> values);
  void put_matrix(const std::string& name, const Matrix& value);
  void put_u64(const std::string& name, std::uint64_t value);
  void put_f64(const std::string& name, double value);

  bool has(const std::string& name) const;
  const std::string& text(const std::string& name) const;
  const std::vector<std::string>& strings(const std::string& name) const;
  const Matrix& matrix(const std::string& name) const;
  std::uint64_t u64(const std::string& name) const;
  double f64(const std::string& name) const;
  std::vector<std::string> names() const;

  std::string serialize() const;
  static Archive parse(std::string_view bytes);

  void save(const std::filesystem::path& path) const;
  static Archive load(const std::filesystem::path& path);

 private:
  using Payload = std::variant<std::string, std::vector<std::string>, Matrix, std::uint64_t, double>;
  struct Entry {
    std::string name;
    Payload payload;
  };

  const Entry& find(const std::string& name) const;
  void put(const std::string& name, Payload payload);

  std::string kind_;
  std::vector<Entry> entries_;
};

}  // namespace corefdre
