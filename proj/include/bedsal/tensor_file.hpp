#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace bedsal::tensor {

// Container layout, little-endian:
//   "BSTN" | version u8 | rank u8 | dims u32 x rank | dtype u8 | payload
// dtype 0 is f32. dtype 1 (f64) is used for checkpoints and caches that must
// round-trip exactly.
inline constexpr std::uint8_t kVersion = 1;

enum class DType : std::uint8_t { F32 = 0, F64 = 1 };

struct Tensor {
  std::vector<std::uint32_t> dims;
  DType dtype = DType::F32;
  std::vector<double> values;
};

std::size_t element_count(std::span<const std::uint32_t> dims);

std::vector<std::uint8_t> encode(std::span<const std::uint32_t> dims, std::span<const float> values);
std::vector<std::uint8_t> encode(std::span<const std::uint32_t> dims, std::span<const double> values);
Tensor decode(std::span<const std::uint8_t> bytes);

void write_tensor(std::span<const std::uint32_t> dims, std::span<const float> values,
                  const std::filesystem::path& path);
void write_tensor_f64(std::span<const std::uint32_t> dims, std::span<const double> values,
                      const std::filesystem::path& path);
Tensor read_tensor(const std::filesystem::path& path);

}  // namespace bedsal::tensor
