#include "aerodet/image_io.hpp"

#include <png.h>

#include <array>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

#include "aerodet/error.hpp"

namespace aerodet {
namespace fs = std::filesystem;

namespace {

std::string lower_ext(const fs::path& p) {
  std::string ext = p.extension().string();
  for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return ext;
}

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const fs::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw DataError("cannot open image file: " + path.string());
  return f;
}

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
  auto* where = static_cast<std::string*>(png_get_error_ptr(png));
  throw DataError("PNG error in " + *where + ": " + msg);
}

void png_warning_fn(png_structp, png_const_charp) {}

Image read_png(const fs::path& path) {
  FilePtr f = open_file(path, "rb");
  std::string where = path.string();
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, &where, png_error_fn, png_warning_fn);
  if (!png) throw DataError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* png;
    png_infop* info;
    ~Guard() { png_destroy_read_struct(png, info, nullptr); }
  } guard{&png, &info};

  png_init_io(png, f.get());
  png_read_info(png, info);

  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_packing(png);
  const auto color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);

  Image img(static_cast<int>(png_get_image_width(png, info)),
            static_cast<int>(png_get_image_height(png, info)),
            static_cast<int>(png_get_channels(png, info)));
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) rows[y] = img.pixels.data() + img.index(0, y);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  return img;
}

void write_png(const Image& img, const fs::path& path) {
  if (img.channels != 1 && img.channels != 3)
    throw DataError("PNG writer supports 1 or 3 channels: " + path.string());
  FilePtr f = open_file(path, "wb");
  std::string where = path.string();
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, &where, png_error_fn, png_warning_fn);
  if (!png) throw DataError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* png;
    png_infop* info;
    ~Guard() { png_destroy_write_struct(png, info); }
  } guard{&png, &info};

  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height),
               8, img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y)
    png_write_row(png, const_cast<png_bytep>(img.pixels.data() + img.index(0, y)));
  png_write_end(png, nullptr);
}

// Netpbm tokenizer: skips whitespace and '#' comments.
class PnmReader {
 public:
  explicit PnmReader(std::istream& in) : in_(in) {}

  std::string token() {
    std::string tok;
    int ch;
    while ((ch = in_.get()) != EOF) {
      if (ch == '#') {
        while ((ch = in_.get()) != EOF && ch != '\n') {
        }
        continue;
      }
      if (std::isspace(ch)) {
        if (!tok.empty()) break;
        continue;
      }
      tok.push_back(static_cast<char>(ch));
    }
    return tok;
  }

  int integer(const fs::path& path) {
    const std::string tok = token();
    try {
      return std::stoi(tok);
    } catch (const std::exception&) {
      throw DataError("malformed PNM header in " + path.string());
    }
  }

 private:
  std::istream& in_;
};

Image read_pnm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image file: " + path.string());
  PnmReader reader(in);
  const std::string magic = reader.token();
  int channels = 0;
  bool ascii = false;
  if (magic == "P5") channels = 1;
  else if (magic == "P6") channels = 3;
  else if (magic == "P2") channels = 1, ascii = true;
  else if (magic == "P3") channels = 3, ascii = true;
  else throw DataError("unsupported PNM variant '" + magic + "' in " + path.string());

  const int w = reader.integer(path);
  const int h = reader.integer(path);
  const int maxval = reader.integer(path);
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535)
    throw DataError("invalid PNM dimensions in " + path.string());

  Image img(w, h, channels);
  const std::size_t n = img.pixels.size();
  if (ascii) {
    for (std::size_t i = 0; i < n; ++i) {
      const int v = reader.integer(path);
      img.pixels[i] = static_cast<std::uint8_t>(v * 255 / maxval);
    }
    return img;
  }
  if (maxval < 256) {
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
      throw DataError("truncated PNM data in " + path.string());
    if (maxval != 255)
      for (auto& v : img.pixels) v = static_cast<std::uint8_t>(int(v) * 255 / maxval);
  } else {
    std::vector<unsigned char> raw(2 * n);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size())
      throw DataError("truncated PNM data in " + path.string());
    for (std::size_t i = 0; i < n; ++i)
      img.pixels[i] = static_cast<std::uint8_t>(((raw[2 * i] << 8) | raw[2 * i + 1]) * 255 / maxval);
  }
  return img;
}

void write_pnm(const Image& img, const fs::path& path, int channels) {
  if (img.channels != channels)
    throw DataError("channel count does not match extension for " + path.string());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write image file: " + path.string());
  out << (channels == 1 ? "P5" : "P6") << '\n' << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
}

std::optional<ImageDims> probe_png(std::istream& in) {
  std::array<unsigned char, 24> hdr{};
  in.read(reinterpret_cast<char*>(hdr.data()), hdr.size());
  if (in.gcount() != static_cast<std::streamsize>(hdr.size())) return std::nullopt;
  auto be32 = [&](int o) {
    return (std::uint32_t(hdr[o]) << 24) | (std::uint32_t(hdr[o + 1]) << 16) |
           (std::uint32_t(hdr[o + 2]) << 8) | std::uint32_t(hdr[o + 3]);
  };
  return ImageDims{double(be32(16)), double(be32(20))};
}

// Walks JPEG markers up to the first start-of-frame segment.
std::optional<ImageDims> probe_jpeg(std::istream& in) {
  auto byte = [&]() -> int { return in.get(); };
  if (byte() != 0xFF || byte() != 0xD8) return std::nullopt;
  while (in) {
    int b = byte();
    while (b != 0xFF && b != EOF) b = byte();
    int marker = byte();
    while (marker == 0xFF) marker = byte();
    if (marker == EOF) return std::nullopt;
    if (marker == 0xD8 || marker == 0x01 || (marker >= 0xD0 && marker <= 0xD7)) continue;
    const int hi = byte(), lo = byte();
    if (hi == EOF || lo == EOF) return std::nullopt;
    const int len = (hi << 8) | lo;
    const bool sof = marker >= 0xC0 && marker <= 0xCF && marker != 0xC4 && marker != 0xC8 &&
                     marker != 0xCC;
    if (sof) {
      byte();  // precision
      const int h = (byte() << 8) | byte();
      const int w = (byte() << 8) | byte();
      if (!in || w <= 0 || h <= 0) return std::nullopt;
      return ImageDims{double(w), double(h)};
    }
    in.seekg(len - 2, std::ios::cur);
  }
  return std::nullopt;
}

}  // namespace

Image read_image(const fs::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".png") return read_png(path);
  if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") return read_pnm(path);
  throw DataError("unsupported image format: " + path.string());
}

void write_image(const Image& image, const fs::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".png") return write_png(image, path);
  if (ext == ".pgm") return write_pnm(image, path, 1);
  if (ext == ".ppm") return write_pnm(image, path, 3);
  throw DataError("unsupported image format: " + path.string());
}

std::optional<ImageDims> probe_image_size(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  const std::string ext = lower_ext(path);
  if (ext == ".png") return probe_png(in);
  if (ext == ".jpg" || ext == ".jpeg") return probe_jpeg(in);
  if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") {
    PnmReader reader(in);
    reader.token();
    try {
      const int w = reader.integer(path);
      const int h = reader.integer(path);
      return ImageDims{double(w), double(h)};
    } catch (const DataError&) {
      return std::nullopt;
    }
  }
  return std::nullopt;
}

}  // namespace aerodet
