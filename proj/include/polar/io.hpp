#pragma once

#include <cstdint>
#include <filesystem>
#include <variant>
#include <vector>

#include "polar/image.hpp"
#include "polar/polar_core.hpp"

namespace polar::io {

/// Grayscale 16-bit PNG contents. `bit_depth` is the number of significant
/// bits: 12-bit data is stored shifted left by 4 and declared with an sBIT
/// chunk, and shifted back on read.
struct Png16 {
  Image16 image;
  int bit_depth = 16;
};

void write_png16(const std::filesystem::path& path, const Image16& image,
                 int bit_depth = 16);

/// Throws FormatError for anything but single-channel 16-bit PNGs.
Png16 read_png16(const std::filesystem::path& path);

inline constexpr char kTensorMagic[4] = {'P', 'M', 'R', 'T'};
inline constexpr std::uint16_t kTensorVersion = 1;
/// Upper bound on the element count a tensor header may declare.
inline constexpr std::uint64_t kMaxTensorElements = std::uint64_t{1} << 32;

enum class DType : std::uint16_t { u16 = 1, f32 = 2 };

std::size_t dtype_size(DType t);

/// Row-major tensor with either 16-bit unsigned or 32-bit float payload.
/// File layout (all little-endian):
///   "PMRT" | u16 version | u16 dtype | u16 ndim | u32 dims[ndim] | payload
struct Tensor {
  std::vector<std::uint32_t> dims;
  std::variant<std::vector<std::uint16_t>, std::vector<float>> data;

  DType dtype() const;
  std::size_t element_count() const;
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// Product of `dims`; throws FormatError if it overflows or exceeds
/// kMaxTensorElements.
std::uint64_t checked_element_count(const std::vector<std::uint32_t>& dims);

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
Tensor decode_tensor(const std::vector<std::uint8_t>& bytes);

void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

/// (4, H, W) tensors for stacks and (H, W) tensors for single images.
Tensor stack_to_tensor(const PolarizedStack& s, DType type);
PolarizedStack tensor_to_stack(const Tensor& t);
Tensor image_to_tensor(const Image& img);
Tensor mask_to_tensor(const Mask& m);
Image tensor_to_image(const Tensor& t);

}  // namespace polar::io
