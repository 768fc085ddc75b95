#include "gmu/tensor.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

#include "gmu/error.hpp"

namespace gmu {
namespace {

constexpr std::array<char, 8> kMagic = {'G', 'M', 'U', 'T', 'N', 'S', 'R', '\0'};

template <typename T>
void store_le(std::uint8_t* dst, T value) {
  std::array<std::uint8_t, sizeof(T)> raw;
  std::memcpy(raw.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
  std::memcpy(dst, raw.data(), sizeof(T));
}

template <typename T>
T load_le(const std::uint8_t* src) {
  std::array<std::uint8_t, sizeof(T)> raw;
  std::memcpy(raw.data(), src, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
  T value;
  std::memcpy(&value, raw.data(), sizeof(T));
  return value;
}

template <typename T>
std::vector<T> decode(const std::vector<std::uint8_t>& bytes) {
  std::vector<T> out(bytes.size() / sizeof(T));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = load_le<T>(bytes.data() + i * sizeof(T));
  return out;
}

template <typename T>
void encode(std::vector<std::uint8_t>& bytes, std::span<const T> values) {
  for (std::size_t i = 0; i < values.size(); ++i)
    store_le<T>(bytes.data() + i * sizeof(T), values[i]);
}

std::size_t checked_count(const std::vector<std::uint64_t>& shape, std::size_t elem) {
  std::uint64_t count = 1;
  for (auto s : shape) {
    if (s != 0 && count > std::numeric_limits<std::uint64_t>::max() / s) {
      throw Error(ErrorCode::CorruptPayload, "tensor shape overflows");
    }
    count *= s;
  }
  if (count > std::numeric_limits<std::uint64_t>::max() / elem) {
    throw Error(ErrorCode::CorruptPayload, "tensor payload size overflows");
  }
  return static_cast<std::size_t>(count);
}

void read_exact(std::istream& is, void* dst, std::size_t n, ErrorCode code, const char* what) {
  is.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n) throw Error(code, what);
}

}  // namespace

std::size_t element_size(DType dtype) {
  switch (dtype) {
    case DType::f32: return 4;
    case DType::f64: return 8;
    case DType::u32: return 4;
    case DType::u8: return 1;
  }
  throw Error(ErrorCode::CorruptPayload, "unknown dtype");
}

Tensor::Tensor(DType dtype, std::vector<std::uint64_t> shape)
    : dtype_(dtype), shape_(std::move(shape)) {
  if (shape_.size() > 255) throw Error(ErrorCode::InvalidArgument, "tensor rank above 255");
  bytes_.resize(checked_count(shape_, element_size(dtype)) * element_size(dtype));
}

std::size_t Tensor::element_count() const { return bytes_.size() / element_size(dtype_); }

void Tensor::require(DType dtype) const {
  if (dtype_ != dtype) throw Error(ErrorCode::InvalidArgument, "tensor has a different dtype");
}

#define GMU_TENSOR_FACTORY(NAME, TYPE, CODE)                                            \
  Tensor Tensor::NAME(std::vector<std::uint64_t> shape, std::span<const TYPE> values) { \
    Tensor t(CODE, std::move(shape));                                                   \
    if (t.element_count() != values.size()) {                                           \
      throw Error(ErrorCode::DimensionMismatch, "value count does not match shape");    \
    }                                                                                   \
    encode<TYPE>(t.bytes_, values);                                                     \
    return t;                                                                           \
  }

GMU_TENSOR_FACTORY(from_f64, double, DType::f64)
GMU_TENSOR_FACTORY(from_f32, float, DType::f32)
GMU_TENSOR_FACTORY(from_u32, std::uint32_t, DType::u32)
GMU_TENSOR_FACTORY(from_u8, std::uint8_t, DType::u8)
#undef GMU_TENSOR_FACTORY

std::vector<double> Tensor::to_f64() const {
  switch (dtype_) {
    case DType::f64: return decode<double>(bytes_);
    case DType::f32: {
      auto v = decode<float>(bytes_);
      return {v.begin(), v.end()};
    }
    case DType::u32: {
      auto v = decode<std::uint32_t>(bytes_);
      return {v.begin(), v.end()};
    }
    case DType::u8: return {bytes_.begin(), bytes_.end()};
  }
  return {};
}

std::vector<float> Tensor::as_f32() const {
  require(DType::f32);
  return decode<float>(bytes_);
}

std::vector<std::uint32_t> Tensor::as_u32() const {
  require(DType::u32);
  return decode<std::uint32_t>(bytes_);
}

std::vector<std::uint8_t> Tensor::as_u8() const {
  require(DType::u8);
  return bytes_;
}

void write_tensor(std::ostream& os, const Tensor& t) {
  std::vector<std::uint8_t> header(8 + 2 + 1 + 1 + 8 * t.rank());
  std::memcpy(header.data(), kMagic.data(), kMagic.size());
  store_le<std::uint16_t>(header.data() + 8, kTensorVersion);
  header[10] = static_cast<std::uint8_t>(t.dtype());
  header[11] = static_cast<std::uint8_t>(t.rank());
  for (std::size_t i = 0; i < t.rank(); ++i)
    store_le<std::uint64_t>(header.data() + 12 + 8 * i, t.shape()[i]);
  os.write(reinterpret_cast<const char*>(header.data()),
           static_cast<std::streamsize>(header.size()));
  os.write(reinterpret_cast<const char*>(t.bytes_.data()),
           static_cast<std::streamsize>(t.bytes_.size()));
  if (!os) throw Error(ErrorCode::IoError, "tensor write failed");
}

Tensor read_tensor(std::istream& is) {
  std::array<std::uint8_t, 12> fixed;
  read_exact(is, fixed.data(), fixed.size(), ErrorCode::TruncatedPayload, "tensor header cut short");
  if (std::memcmp(fixed.data(), kMagic.data(), kMagic.size()) != 0) {
    throw Error(ErrorCode::BadMagic, "not a GMUTNSR tensor");
  }
  const auto version = load_le<std::uint16_t>(fixed.data() + 8);
  if (version != kTensorVersion) {
    throw Error(ErrorCode::UnsupportedVersion, "tensor version " + std::to_string(version));
  }
  const std::uint8_t code = fixed[10];
  if (code > 3) throw Error(ErrorCode::CorruptPayload, "unknown dtype code " + std::to_string(code));
  const std::size_t rank = fixed[11];
  std::vector<std::uint8_t> shape_bytes(8 * rank);
  read_exact(is, shape_bytes.data(), shape_bytes.size(), ErrorCode::TruncatedPayload,
             "tensor shape cut short");
  std::vector<std::uint64_t> shape(rank);
  for (std::size_t i = 0; i < rank; ++i) shape[i] = load_le<std::uint64_t>(shape_bytes.data() + 8 * i);

  const auto dtype = static_cast<DType>(code);
  const std::size_t payload = checked_count(shape, element_size(dtype)) * element_size(dtype);
  // Read in bounded chunks so a corrupt header cannot force a huge allocation
  // before the stream runs dry.
  std::vector<std::uint8_t> bytes;
  constexpr std::size_t kChunk = std::size_t{1} << 24;
  while (bytes.size() < payload) {
    const std::size_t take = std::min(kChunk, payload - bytes.size());
    const std::size_t old = bytes.size();
    bytes.resize(old + take);
    read_exact(is, bytes.data() + old, take, ErrorCode::TruncatedPayload,
               "tensor payload shorter than its shape declares");
  }
  Tensor t;
  t.dtype_ = dtype;
  t.shape_ = std::move(shape);
  t.bytes_ = std::move(bytes);
  return t;
}

void write_tensor(const std::string& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  write_tensor(out, t);
}

Tensor read_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return read_tensor(in);
}

Matrix tensor_to_matrix(const Tensor& t) {
  if (t.rank() != 2) throw Error(ErrorCode::DimensionMismatch, "expected a rank-2 tensor");
  if (t.dtype() != DType::f32 && t.dtype() != DType::f64) {
    throw Error(ErrorCode::InvalidArgument, "feature tensors must be f32 or f64");
  }
  return Matrix(t.shape()[0], t.shape()[1], t.to_f64());
}

Tensor matrix_to_tensor(const Matrix& m) {
  return Tensor::from_f64({m.rows(), m.cols()}, m.values());
}

std::vector<std::int32_t> tensor_to_labels(const Tensor& t) {
  if (t.rank() != 1) throw Error(ErrorCode::DimensionMismatch, "expected a rank-1 label tensor");
  if (t.dtype() != DType::u32 && t.dtype() != DType::u8) {
    throw Error(ErrorCode::InvalidArgument, "label tensors must be u32 or u8");
  }
  std::vector<std::int32_t> out;
  out.reserve(t.element_count());
  if (t.dtype() == DType::u8) {
    for (auto v : t.as_u8()) out.push_back(v);
  } else {
    for (auto v : t.as_u32()) {
      if (v > static_cast<std::uint32_t>(std::numeric_limits<std::int32_t>::max())) {
        throw Error(ErrorCode::BadLabel, "label " + std::to_string(v) + " out of range");
      }
      out.push_back(static_cast<std::int32_t>(v));
    }
  }
  return out;
}

Tensor labels_to_tensor(std::span<const std::int32_t> labels) {
  std::vector<std::uint32_t> raw(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) throw Error(ErrorCode::BadLabel, "negative label");
    raw[i] = static_cast<std::uint32_t>(labels[i]);
  }
  return Tensor::from_u32({labels.size()}, raw);
}

}  // namespace gmu
