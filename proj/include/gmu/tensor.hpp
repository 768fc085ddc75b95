#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "gmu/linalg.hpp"

namespace gmu {

// On-disk layout, all integers little-endian:
//   8 bytes  magic "GMUTNSR\0"
//   u16      version (1)
//   u8       dtype (0=f32, 1=f64, 2=u32, 3=u8)
//   u8       rank
//   u64      shape[rank]
//   payload  row-major packed values

inline constexpr std::uint16_t kTensorVersion = 1;

enum class DType : std::uint8_t { f32 = 0, f64 = 1, u32 = 2, u8 = 3 };

std::size_t element_size(DType dtype);

/// A typed n-dimensional array. The payload is kept in its little-endian
/// file encoding; the typed accessors convert on the way in and out.
class Tensor {
 public:
  Tensor() = default;

  static Tensor from_f64(std::vector<std::uint64_t> shape, std::span<const double> values);
  static Tensor from_f32(std::vector<std::uint64_t> shape, std::span<const float> values);
  static Tensor from_u32(std::vector<std::uint64_t> shape, std::span<const std::uint32_t> values);
  static Tensor from_u8(std::vector<std::uint64_t> shape, std::span<const std::uint8_t> values);

  DType dtype() const noexcept { return dtype_; }
  const std::vector<std::uint64_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t element_count() const;
  const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }

  std::vector<double> to_f64() const;  // any dtype, widened
  std::vector<float> as_f32() const;   // dtype must be f32
  std::vector<std::uint32_t> as_u32() const;
  std::vector<std::uint8_t> as_u8() const;

  bool operator==(const Tensor&) const = default;

  friend void write_tensor(std::ostream& os, const Tensor& t);
  friend Tensor read_tensor(std::istream& is);

 private:
  Tensor(DType dtype, std::vector<std::uint64_t> shape);
  void require(DType dtype) const;

  DType dtype_ = DType::f64;
  std::vector<std::uint64_t> shape_;
  std::vector<std::uint8_t> bytes_;
};

void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);

void write_tensor(const std::string& path, const Tensor& t);
Tensor read_tensor(const std::string& path);

/// Rank-2 float tensor (f32 or f64) to an n x d matrix.
Matrix tensor_to_matrix(const Tensor& t);
Tensor matrix_to_tensor(const Matrix& m);

/// Rank-1 integer tensor (u32 or u8) to class labels.
std::vector<std::int32_t> tensor_to_labels(const Tensor& t);
Tensor labels_to_tensor(std::span<const std::int32_t> labels);

}  // namespace gmu
