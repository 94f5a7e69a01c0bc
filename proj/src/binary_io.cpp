#include "deepreg/binary_io.hpp"

#include <bit>
#include <cstring>

#include "deepreg/error.hpp"

namespace deepreg {
namespace {

template <typename T>
void store_le(T v, unsigned char* out) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
}

template <typename T>
T load_le(const unsigned char* in) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(in[i]) << (8 * i);
  return v;
}

std::string magic_string(std::array<char, 4> magic) { return std::string(magic.begin(), magic.end()); }

}  // namespace

BinaryWriter::BinaryWriter(const std::filesystem::path& path, std::array<char, 4> magic)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  bytes(reinterpret_cast<const unsigned char*>(magic.data()), magic.size());
  u32(kFormatVersion);
}

void BinaryWriter::bytes(const unsigned char* data, std::size_t n) {
  out_.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out_) throw Error(ErrorCode::IoError, "write failed on " + path_.string());
}

void BinaryWriter::u32(std::uint32_t v) {
  unsigned char buf[4];
  store_le(v, buf);
  bytes(buf, 4);
}

void BinaryWriter::u64(std::uint64_t v) {
  unsigned char buf[8];
  store_le(v, buf);
  bytes(buf, 8);
}

void BinaryWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void BinaryWriter::complex_matrix(const CMatrix& m) {
  u32(static_cast<std::uint32_t>(m.rows()));
  u32(static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      f64(m(r, c).real());
      f64(m(r, c).imag());
    }
  }
}

void BinaryWriter::real_vector(const RVector& v) {
  u32(static_cast<std::uint32_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) f64(v(i));
}

void BinaryWriter::close() {
  out_.close();
  if (!out_) throw Error(ErrorCode::IoError, "close failed on " + path_.string());
}

BinaryReader::BinaryReader(const std::filesystem::path& path, std::array<char, 4> magic)
    : path_(path), in_(path, std::ios::binary) {
  if (!in_) throw Error(ErrorCode::MissingInput, "cannot open " + path.string());
  std::array<char, 4> found{};
  bytes(reinterpret_cast<unsigned char*>(found.data()), found.size());
  if (found != magic) {
    throw Error(ErrorCode::IoError, path.string() + ": expected magic " + magic_string(magic));
  }
  version_ = u32();
  if (version_ != kFormatVersion) {
    throw Error(ErrorCode::IoError, path.string() + ": unsupported version " + std::to_string(version_));
  }
}

void BinaryReader::bytes(unsigned char* data, std::size_t n) {
  in_.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n));
  if (!in_) throw Error(ErrorCode::IoError, "truncated file " + path_.string());
}

std::uint32_t BinaryReader::u32() {
  unsigned char buf[4];
  bytes(buf, 4);
  return load_le<std::uint32_t>(buf);
}

std::uint64_t BinaryReader::u64() {
  unsigned char buf[8];
  bytes(buf, 8);
  return load_le<std::uint64_t>(buf);
}

double BinaryReader::f64() { return std::bit_cast<double>(u64()); }

CMatrix BinaryReader::complex_matrix() {
  const auto rows = static_cast<Eigen::Index>(u32());
  const auto cols = static_cast<Eigen::Index>(u32());
  CMatrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      const double re = f64();
      const double im = f64();
      m(r, c) = Complex(re, im);
    }
  }
  return m;
}

RVector BinaryReader::real_vector() {
  const auto n = static_cast<Eigen::Index>(u32());
  RVector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = f64();
  return v;
}

bool BinaryReader::at_end() { return in_.peek() == std::ifstream::traits_type::eof(); }

void save_operator(const Operator& op, const std::filesystem::path& path) {
  BinaryWriter w(path, {'R', 'N', 'O', 'P'});
  w.complex_matrix(op.entries);
  w.close();
}

Operator load_operator(const std::filesystem::path& path) {
  BinaryReader r(path, {'R', 'N', 'O', 'P'});
  Operator op;
  op.entries = r.complex_matrix();
  if (op.entries.rows() != op.entries.cols()) {
    throw Error(ErrorCode::DimensionMismatch, path.string() + ": operator is not square");
  }
  return op;
}

void save_library(const RhsLibrary& lib, const std::filesystem::path& path) {
  BinaryWriter w(path, {'R', 'R', 'H', 'S'});
  w.complex_matrix(lib.patterns);
  w.u32(static_cast<std::uint32_t>(lib.nx));
  w.u32(static_cast<std::uint32_t>(lib.ny));
  w.u32(static_cast<std::uint32_t>(lib.orientations.size()));
  for (const Point& p : lib.grid) {
    w.f64(p.x);
    w.f64(p.y);
  }
  for (double a : lib.orientations) w.f64(a);
  w.close();
}

RhsLibrary load_library(const std::filesystem::path& path) {
  BinaryReader r(path, {'R', 'R', 'H', 'S'});
  RhsLibrary lib;
  lib.patterns = r.complex_matrix();
  lib.nx = static_cast<int>(r.u32());
  lib.ny = static_cast<int>(r.u32());
  const std::uint32_t ns = r.u32();
  lib.grid.resize(static_cast<std::size_t>(lib.nx) * static_cast<std::size_t>(lib.ny));
  for (Point& p : lib.grid) {
    p.x = r.f64();
    p.y = r.f64();
  }
  lib.orientations.resize(ns);
  for (double& a : lib.orientations) a = r.f64();
  if (static_cast<std::size_t>(lib.patterns.cols()) != lib.n_patterns()) {
    throw Error(ErrorCode::DimensionMismatch, path.string() + ": index block does not match pattern count");
  }
  return lib;
}

}  // namespace deepreg
