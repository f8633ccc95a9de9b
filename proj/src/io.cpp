#include "polar/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>

namespace polar::io {

namespace {

// Routes libpng diagnostics into a string instead of stderr.
[[noreturn]] void on_png_error(png_structp png, png_const_charp msg) {
  if (auto* out = static_cast<std::string*>(png_get_error_ptr(png))) *out = msg;
  png_longjmp(png, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) {
    throw FormatError("cannot open " + path.string() + " (" + mode + ")");
  }
  return f;
}

void check_bit_depth(int bit_depth) {
  if (bit_depth < 1 || bit_depth > 16) {
    throw ParameterError("PNG significant bit depth must be in [1, 16]");
  }
}

}  // namespace

void write_png16(const std::filesystem::path& path, const Image16& image,
                 int bit_depth) {
  check_bit_depth(bit_depth);
  if (image.empty()) throw DimensionError("cannot write an empty PNG");
  const int shift = 16 - bit_depth;
  const std::uint32_t top = (1u << bit_depth) - 1u;

  // Big-endian rows, built before libpng gets control.
  const std::size_t stride = static_cast<std::size_t>(image.width()) * 2;
  std::vector<png_byte> buffer(stride * image.height());
  for (std::size_t i = 0; i < image.size(); ++i) {
    if (image[i] > top) {
      throw RangeError("sample " + std::to_string(image[i]) + " exceeds the " +
                       std::to_string(bit_depth) + "-bit range");
    }
    const auto v = static_cast<std::uint16_t>(image[i] << shift);
    buffer[2 * i] = static_cast<png_byte>(v >> 8);
    buffer[2 * i + 1] = static_cast<png_byte>(v & 0xff);
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(image.height()));
  for (std::size_t y = 0; y < rows.size(); ++y) {
    rows[y] = buffer.data() + y * stride;
  }

  FilePtr file = open_file(path, "wb");
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, on_png_error,
                              on_png_warning);
  if (!png) throw FormatError("libpng: cannot create write struct");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw FormatError("libpng: failed writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()),
               static_cast<png_uint_32>(image.height()), 16,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  if (bit_depth < 16) {
    png_color_8 sig{};
    sig.gray = static_cast<png_byte>(bit_depth);
    png_set_sBIT(png, info, &sig);
  }
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Png16 read_png16(const std::filesystem::path& path) {
  FilePtr file = open_file(path, "rb");
  png_byte sig[8] = {};
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw FormatError(path.string() + " is not a PNG file");
  }

  std::string libpng_message;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &libpng_message,
                                           on_png_error, on_png_warning);
  if (!png) throw FormatError("libpng: cannot create read struct");
  png_infop info = png_create_info_struct(png);

  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int depth = 0;
  int color = 0;
  int interlace = 0;
  volatile int sig_bits = 16;
  std::vector<png_byte> buffer;
  std::vector<png_bytep> rows;
  // Set before longjmp so the message survives the unwind.
  const char* volatile problem = nullptr;

  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    const std::string why = problem ? problem : libpng_message;
    throw FormatError("cannot decode " + path.string() +
                      (why.empty() ? "" : ": " + why));
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  png_get_IHDR(png, info, &width, &height, &depth, &color, &interlace,
               nullptr, nullptr);
  if (depth != 16 || color != PNG_COLOR_TYPE_GRAY) {
    problem = "only single-channel 16-bit PNGs are supported";
    png_error(png, "unsupported layout");
  }
  png_color_8p sbit = nullptr;
  if (png_get_sBIT(png, info, &sbit) && sbit && sbit->gray > 0 &&
      sbit->gray < 16) {
    sig_bits = sbit->gray;
  }
  if (interlace != PNG_INTERLACE_NONE) png_set_interlace_handling(png);
  png_read_update_info(png, info);

  const std::size_t stride = static_cast<std::size_t>(width) * 2;
  buffer.resize(stride * height);
  rows.resize(height);
  for (std::size_t y = 0; y < height; ++y) rows[y] = buffer.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const int shift = 16 - sig_bits;
  const std::uint16_t low_mask =
      static_cast<std::uint16_t>((1u << shift) - 1u);
  Png16 out{Image16(static_cast<int>(width), static_cast<int>(height)),
            sig_bits};
  for (std::size_t i = 0; i < out.image.size(); ++i) {
    const auto v = static_cast<std::uint16_t>((buffer[2 * i] << 8) |
                                              buffer[2 * i + 1]);
    if (v & low_mask) {
      throw FormatError(path.string() + ": sBIT declares " +
                        std::to_string(sig_bits) +
                        " significant bits but low bits are set");
    }
    out.image[i] = static_cast<std::uint16_t>(v >> shift);
  }
  return out;
}

std::size_t dtype_size(DType t) {
  switch (t) {
    case DType::u16:
      return 2;
    case DType::f32:
      return 4;
  }
  throw FormatError("unknown tensor dtype");
}

DType Tensor::dtype() const {
  return std::holds_alternative<std::vector<std::uint16_t>>(data) ? DType::u16
                                                                  : DType::f32;
}

std::size_t Tensor::element_count() const {
  return std::visit([](const auto& v) { return v.size(); }, data);
}

std::uint64_t checked_element_count(const std::vector<std::uint32_t>& dims) {
  std::uint64_t count = 1;
  for (std::uint32_t d : dims) {
    if (d != 0 && count > kMaxTensorElements / d) {
      throw FormatError("tensor dimensions exceed the element limit of 2^32");
    }
    count *= d;
  }
  return count;
}

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) {
    out.push_back(static_cast<std::uint8_t>((v >> s) & 0xff));
  }
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}

  std::uint16_t u16() {
    need(2);
    const auto v = static_cast<std::uint16_t>(bytes_[pos_] |
                                              (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(bytes_[pos_ + static_cast<std::size_t>(i)])
           << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("truncated tensor file");
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  if (t.dims.size() > 0xffff) throw FormatError("too many tensor dimensions");
  const std::uint64_t count = checked_element_count(t.dims);
  if (count != t.element_count()) {
    throw DimensionError("tensor payload does not match its dimensions");
  }
  std::vector<std::uint8_t> out(std::begin(kTensorMagic),
                                std::end(kTensorMagic));
  put_u16(out, kTensorVersion);
  put_u16(out, static_cast<std::uint16_t>(t.dtype()));
  put_u16(out, static_cast<std::uint16_t>(t.dims.size()));
  for (std::uint32_t d : t.dims) put_u32(out, d);
  out.reserve(out.size() + count * dtype_size(t.dtype()));
  if (const auto* u = std::get_if<std::vector<std::uint16_t>>(&t.data)) {
    for (std::uint16_t v : *u) put_u16(out, v);
  } else {
    for (float v : std::get<std::vector<float>>(t.data)) {
      put_u32(out, std::bit_cast<std::uint32_t>(v));
    }
  }
  return out;
}

Tensor decode_tensor(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 ||
      !std::equal(std::begin(kTensorMagic), std::end(kTensorMagic),
                  bytes.begin())) {
    throw FormatError("bad tensor magic (expected PMRT)");
  }
  Reader r(bytes);
  r.u32();  // magic
  const std::uint16_t version = r.u16();
  if (version != kTensorVersion) {
    throw FormatError("unsupported tensor version " + std::to_string(version));
  }
  const std::uint16_t code = r.u16();
  if (code != static_cast<std::uint16_t>(DType::u16) &&
      code != static_cast<std::uint16_t>(DType::f32)) {
    throw FormatError("unknown tensor dtype code " + std::to_string(code));
  }
  const auto type = static_cast<DType>(code);
  const std::uint16_t ndim = r.u16();
  Tensor t;
  t.dims.resize(ndim);
  for (auto& d : t.dims) d = r.u32();
  const std::uint64_t count = checked_element_count(t.dims);
  const std::uint64_t payload = count * dtype_size(type);
  if (r.remaining() != payload) {
    throw FormatError(r.remaining() < payload ? "truncated tensor payload"
                                              : "trailing bytes after tensor "
                                                "payload");
  }
  if (type == DType::u16) {
    std::vector<std::uint16_t> v(count);
    for (auto& e : v) e = r.u16();
    t.data = std::move(v);
  } else {
    std::vector<float> v(count);
    for (auto& e : v) e = std::bit_cast<float>(r.u32());
    t.data = std::move(v);
  }
  return t;
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  const auto bytes = encode_tensor(t);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw FormatError("short write to " + path.string());
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return decode_tensor(bytes);
}

Tensor stack_to_tensor(const PolarizedStack& s, DType type) {
  const auto w = static_cast<std::uint32_t>(s.width());
  const auto h = static_cast<std::uint32_t>(s.height());
  Tensor t;
  t.dims = {4, h, w};
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (type == DType::u16) {
    std::vector<std::uint16_t> v(4 * n);
    for (int k = 0; k < 4; ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        const double x = std::nearbyint(s[k][i]);
        if (!(x >= 0.0 && x <= 65535.0)) {
          throw RangeError("stack value out of u16 range");
        }
        v[static_cast<std::size_t>(k) * n + i] = static_cast<std::uint16_t>(x);
      }
    }
    t.data = std::move(v);
  } else {
    std::vector<float> v(4 * n);
    for (int k = 0; k < 4; ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        v[static_cast<std::size_t>(k) * n + i] = static_cast<float>(s[k][i]);
      }
    }
    t.data = std::move(v);
  }
  return t;
}

namespace {

double element(const Tensor& t, std::size_t i) {
  if (const auto* u = std::get_if<std::vector<std::uint16_t>>(&t.data)) {
    return (*u)[i];
  }
  return std::get<std::vector<float>>(t.data)[i];
}

}  // namespace

PolarizedStack tensor_to_stack(const Tensor& t) {
  if (t.dims.size() != 3 || t.dims[0] != 4) {
    throw FormatError("stack tensors must have shape (4, H, W)");
  }
  const int h = static_cast<int>(t.dims[1]);
  const int w = static_cast<int>(t.dims[2]);
  PolarizedStack s(w, h);
  const std::size_t n = static_cast<std::size_t>(w) * h;
  for (int k = 0; k < 4; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      s[k][i] = element(t, static_cast<std::size_t>(k) * n + i);
    }
  }
  return s;
}

Tensor image_to_tensor(const Image& img) {
  Tensor t;
  t.dims = {static_cast<std::uint32_t>(img.height()),
            static_cast<std::uint32_t>(img.width())};
  std::vector<float> v(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) v[i] = static_cast<float>(img[i]);
  t.data = std::move(v);
  return t;
}

Tensor mask_to_tensor(const Mask& m) {
  Tensor t;
  t.dims = {static_cast<std::uint32_t>(m.height()),
            static_cast<std::uint32_t>(m.width())};
  t.data = std::vector<std::uint16_t>(m.pixels().begin(), m.pixels().end());
  return t;
}

Image tensor_to_image(const Tensor& t) {
  if (t.dims.size() != 2) throw FormatError("image tensors must be 2-D");
  Image img(static_cast<int>(t.dims[1]), static_cast<int>(t.dims[0]));
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = element(t, i);
  return img;
}

}  // namespace polar::io
