#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "retts/tensor.hpp"

namespace retts {

enum class Dtype : std::uint8_t { F32 = 1, F64 = 2 };

/// Matrix file layout (all integers little-endian):
///   "RTTS" | u16 version | u8 dtype | u8 rank | u32 extent x rank | data
/// Data is row-major, f32 or f64.
inline constexpr std::uint16_t kMatrixFormatVersion = 1;

std::vector<std::uint8_t> encode_matrix(const Shape& shape, std::span<const double> values,
                                        Dtype dtype = Dtype::F64);
/// Decodes one matrix starting at `offset`; advances offset past it.
/// Throws FormatError naming the failing byte offset.
Tensor decode_matrix(std::span<const std::uint8_t> bytes, std::size_t& offset);

void save_matrix(const std::filesystem::path& path, const Tensor& tensor, Dtype dtype = Dtype::F64);
Tensor load_matrix(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
/// Writes through a temporary sibling and renames, so readers never observe
/// a partially written file.
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace retts
