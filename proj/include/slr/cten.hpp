#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "slr/tensor.hpp"

namespace slr {

/// Malformed or truncated CTEN payload.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem failure while reading or writing an artifact.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class CtenDtype : std::uint8_t { Complex128 = 0, Complex64 = 1 };

// CTEN layout, all fields little-endian:
//   "CTEN" | u8 version (1) | u8 dtype | u8 ndim | ndim x u64 extent |
//   row-major interleaved (re, im) IEEE-754 values.
std::vector<std::uint8_t> encode_tensor(const ComplexTensor &x, CtenDtype dtype = CtenDtype::Complex128);
ComplexTensor decode_tensor(const std::vector<std::uint8_t> &bytes);

void save_tensor(const std::filesystem::path &path, const ComplexTensor &x,
                 CtenDtype dtype = CtenDtype::Complex128);
ComplexTensor load_tensor(const std::filesystem::path &path);

/// Real tensors are stored as complex128 with zero imaginary part.
void save_real_tensor(const std::filesystem::path &path, const RealTensor &x);
RealTensor load_real_tensor(const std::filesystem::path &path);

std::vector<std::uint8_t> read_file(const std::filesystem::path &path);
void write_file(const std::filesystem::path &path, const std::vector<std::uint8_t> &bytes);
void write_text(const std::filesystem::path &path, const std::string &text);

}  // namespace slr
