#pragma once

// Little-endian container files. Every container starts with a 4-byte magic
// and a u32 version; matrices are u32 rows, u32 cols, then row-major
// (f64 real, f64 imag) pairs.
//
//   RNOP  operator matrix
//   RRHS  pattern matrix + index block: u32 nx, u32 ny, u32 n_s,
//         nx*ny (f64 x, f64 y) grid points, n_s f64 orientation angles
//   RSVD  U matrix, u32 count + f64 singular values, V matrix
//   RNCK  network checkpoint (see regnet.hpp)

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "deepreg/forward_model.hpp"
#include "deepreg/types.hpp"

namespace deepreg {

inline constexpr std::uint32_t kFormatVersion = 1;

class BinaryWriter {
 public:
  BinaryWriter(const std::filesystem::path& path, std::array<char, 4> magic);

  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void complex_matrix(const CMatrix& m);
  void real_vector(const RVector& v);
  void close();

 private:
  void bytes(const unsigned char* data, std::size_t n);

  std::filesystem::path path_;
  std::ofstream out_;
};

class BinaryReader {
 public:
  BinaryReader(const std::filesystem::path& path, std::array<char, 4> magic);

  std::uint32_t version() const { return version_; }
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  CMatrix complex_matrix();
  RVector real_vector();
  bool at_end();

 private:
  void bytes(unsigned char* data, std::size_t n);

  std::filesystem::path path_;
  std::ifstream in_;
  std::uint32_t version_ = 0;
};

void save_operator(const Operator& op, const std::filesystem::path& path);
Operator load_operator(const std::filesystem::path& path);

void save_library(const RhsLibrary& lib, const std::filesystem::path& path);
RhsLibrary load_library(const std::filesystem::path& path);

}  // namespace deepreg
