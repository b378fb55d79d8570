#include "retts/matrix_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "retts/error.hpp"

namespace retts {

namespace {

static_assert(std::endian::native == std::endian::little, "matrix I/O assumes a little-endian host");

constexpr char kMagic[4] = {'R', 'T', 'T', 'S'};

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

template <typename T>
T take(std::span<const std::uint8_t> bytes, std::size_t& offset, const char* what) {
  if (offset + sizeof(T) > bytes.size()) {
    throw FormatError(std::string("matrix truncated at offset ") + std::to_string(offset) + " reading " + what);
  }
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  offset += sizeof(T);
  return value;
}

}  // namespace

std::vector<std::uint8_t> encode_matrix(const Shape& shape, std::span<const double> values, Dtype dtype) {
  if (shape.size() > 255) throw FormatError("matrix rank exceeds 255");
  for (std::size_t e : shape) {
    if (e == 0) throw FormatError("cannot save a tensor with a zero extent: " + shape_str(shape));
    if (e > 0xFFFFFFFFull) throw FormatError("extent does not fit in u32");
  }
  if (values.size() != shape_numel(shape)) throw FormatError("value count does not match shape");
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError("cannot save non-finite values");
  }
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put<std::uint16_t>(out, kMatrixFormatVersion);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(dtype));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(shape.size()));
  for (std::size_t e : shape) put<std::uint32_t>(out, static_cast<std::uint32_t>(e));
  out.reserve(out.size() + values.size() * (dtype == Dtype::F64 ? 8 : 4));
  for (double v : values) {
    if (dtype == Dtype::F64) {
      put<double>(out, v);
    } else {
      put<float>(out, static_cast<float>(v));
    }
  }
  return out;
}

Tensor decode_matrix(std::span<const std::uint8_t> bytes, std::size_t& offset) {
  const std::size_t start = offset;
  if (offset + 4 > bytes.size() || std::memcmp(bytes.data() + offset, kMagic, 4) != 0) {
    throw FormatError("bad matrix magic at offset " + std::to_string(start));
  }
  offset += 4;
  const std::size_t version_at = offset;
  const auto version = take<std::uint16_t>(bytes, offset, "version");
  if (version != kMatrixFormatVersion) {
    throw FormatError("unsupported matrix version " + std::to_string(version) + " at offset " +
                      std::to_string(version_at));
  }
  const std::size_t dtype_at = offset;
  const auto dtype = take<std::uint8_t>(bytes, offset, "dtype");
  if (dtype != static_cast<std::uint8_t>(Dtype::F32) && dtype != static_cast<std::uint8_t>(Dtype::F64)) {
    throw FormatError("unknown dtype code " + std::to_string(dtype) + " at offset " + std::to_string(dtype_at));
  }
  const auto rank = take<std::uint8_t>(bytes, offset, "rank");
  Shape shape(rank);
  for (auto& e : shape) {
    const std::size_t at = offset;
    e = take<std::uint32_t>(bytes, offset, "extent");
    if (e == 0) throw FormatError("zero extent at offset " + std::to_string(at));
  }
  const std::size_t count = shape_numel(shape);
  const std::size_t width = dtype == static_cast<std::uint8_t>(Dtype::F64) ? 8 : 4;
  if (count > (bytes.size() - offset) / width) {
    throw FormatError("matrix data truncated at offset " + std::to_string(offset) + ": need " +
                      std::to_string(count * width) + " bytes, have " + std::to_string(bytes.size() - offset));
  }
  std::vector<double> values(count);
  for (double& v : values) {
    v = width == 8 ? take<double>(bytes, offset, "data") : static_cast<double>(take<float>(bytes, offset, "data"));
  }
  return Tensor::from(std::move(shape), std::move(values));
}

void save_matrix(const std::filesystem::path& path, const Tensor& tensor, Dtype dtype) {
  write_file_bytes(path, encode_matrix(tensor.shape(), tensor.data(), dtype));
}

Tensor load_matrix(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  std::size_t offset = 0;
  Tensor t = decode_matrix(bytes, offset);
  if (offset != bytes.size()) {
    throw FormatError(path.string() + ": trailing bytes after matrix at offset " + std::to_string(offset));
  }
  return t;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace retts
