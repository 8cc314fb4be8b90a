#include "bedsal/tensor_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "bedsal/error.hpp"

namespace bedsal::tensor {

namespace {

constexpr char kMagic[4] = {'B', 'S', 'T', 'N'};

static_assert(std::endian::native == std::endian::little, "little-endian host required");

template <typename T>
void append(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

template <typename T>
T take(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  if (pos + sizeof(T) > bytes.size()) throw Error(ErrorCode::TruncatedPayload, "header cut short");
  T value;
  std::memcpy(&value, bytes.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

std::vector<std::uint8_t> header(std::span<const std::uint32_t> dims, DType dtype,
                                 std::size_t count) {
  if (dims.size() > 255) throw Error(ErrorCode::DimMismatch, "rank exceeds 255");
  if (element_count(dims) != count)
    throw Error(ErrorCode::DimMismatch, "dims product " + std::to_string(element_count(dims)) +
                                            " != value count " + std::to_string(count));
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  out.push_back(kVersion);
  out.push_back(static_cast<std::uint8_t>(dims.size()));
  for (auto d : dims) append(out, d);
  out.push_back(static_cast<std::uint8_t>(dtype));
  return out;
}

void write_bytes(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

}  // namespace

std::size_t element_count(std::span<const std::uint32_t> dims) {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::vector<std::uint8_t> encode(std::span<const std::uint32_t> dims, std::span<const float> values) {
  auto out = header(dims, DType::F32, values.size());
  out.reserve(out.size() + values.size() * 4);
  for (float v : values) append(out, v);
  return out;
}

std::vector<std::uint8_t> encode(std::span<const std::uint32_t> dims,
                                 std::span<const double> values) {
  auto out = header(dims, DType::F64, values.size());
  out.reserve(out.size() + values.size() * 8);
  for (double v : values) append(out, v);
  return out;
}

Tensor decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw Error(ErrorCode::BadMagic, "not a BSTN tensor");
  std::size_t pos = 4;
  const auto version = take<std::uint8_t>(bytes, pos);
  if (version != kVersion)
    throw Error(ErrorCode::BadMagic, "unsupported version " + std::to_string(version));
  const auto rank = take<std::uint8_t>(bytes, pos);
  Tensor t;
  for (int i = 0; i < rank; ++i) t.dims.push_back(take<std::uint32_t>(bytes, pos));
  const auto tag = take<std::uint8_t>(bytes, pos);
  if (tag > 1) throw Error(ErrorCode::BadMagic, "unknown dtype tag " + std::to_string(tag));
  t.dtype = static_cast<DType>(tag);

  const std::size_t count = element_count(t.dims);
  const std::size_t width = t.dtype == DType::F32 ? 4 : 8;
  const std::size_t need = count * width;
  if (bytes.size() - pos < need) throw Error(ErrorCode::TruncatedPayload, "payload cut short");
  if (bytes.size() - pos > need) throw Error(ErrorCode::DimMismatch, "trailing bytes after payload");
  t.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    t.values[i] = t.dtype == DType::F32 ? static_cast<double>(take<float>(bytes, pos))
                                        : take<double>(bytes, pos);
  }
  return t;
}

void write_tensor(std::span<const std::uint32_t> dims, std::span<const float> values,
                  const std::filesystem::path& path) {
  write_bytes(encode(dims, values), path);
}

void write_tensor_f64(std::span<const std::uint32_t> dims, std::span<const double> values,
                      const std::filesystem::path& path) {
  write_bytes(encode(dims, values), path);
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode(bytes);
}

}  // namespace bedsal::tensor
