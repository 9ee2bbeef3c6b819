#pragma once

// Binary container shared by datasets and checkpoints.
//
// Layout (all integers little-endian):
//   8 bytes   magic "L2GCONT\0"
//   u32       format version
//   u64       manifest byte length, then UTF-8 JSON manifest
//   u64       array count
//   per array:
//     u32 name length, name bytes
//     u32 rank, u64 dims[rank]
//     f64 payload, little-endian, row-major

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "l2g/graph_core.hpp"

namespace l2g {

inline constexpr std::uint32_t kContainerVersion = 1;

struct Array {
  std::vector<std::uint64_t> dims;
  std::vector<double> data;

  static Array from_vector(const Vector& v);
  static Array from_matrix(const Matrix& m);
  Vector to_vector() const;
  Matrix to_matrix() const;
  std::uint64_t element_count() const;
};

struct Container {
  nlohmann::json manifest;
  std::map<std::string, Array> arrays;

  const Array& at(const std::string& name) const;
};

std::string encode_container(const Container& c);
Container decode_container(const std::string& bytes);

void write_container(const std::filesystem::path& path, const Container& c);
Container read_container(const std::filesystem::path& path);

/// Writes `text` to `path`, creating parent directories. Throws DataError.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

/// 64-bit FNV-1a digest as 16 hex characters.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace l2g
