#pragma once

// 8-bit grayscale raster I/O: binary PGM (P5) and PNG via libpng.

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "mapbench/error.hpp"

namespace mapbench {

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  std::uint8_t& at(int row, int col) { return pixels[static_cast<std::size_t>(row) * width + col]; }
  std::uint8_t at(int row, int col) const {
    return pixels[static_cast<std::size_t>(row) * width + col];
  }
};

namespace detail {

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Reads the next whitespace-delimited header token, skipping '#' comments.
inline std::string pgm_token(const std::vector<std::uint8_t>& buf, std::size_t& pos) {
  while (pos < buf.size()) {
    if (buf[pos] == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
    } else if (std::isspace(buf[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  std::string tok;
  while (pos < buf.size() && !std::isspace(buf[pos]) && buf[pos] != '#') tok.push_back(static_cast<char>(buf[pos++]));
  return tok;
}

inline int pgm_int(const std::vector<std::uint8_t>& buf, std::size_t& pos, const std::string& file) {
  const std::string tok = pgm_token(buf, pos);
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError("malformed PGM header in '" + file + "'");
  }
}

}  // namespace detail

inline GrayImage read_pgm(const std::filesystem::path& path) {
  const auto buf = detail::read_file_bytes(path);
  std::size_t pos = 0;
  if (detail::pgm_token(buf, pos) != "P5") throw ParseError("'" + path.string() + "' is not a binary PGM (P5)");
  const int w = detail::pgm_int(buf, pos, path.string());
  const int h = detail::pgm_int(buf, pos, path.string());
  const int maxval = detail::pgm_int(buf, pos, path.string());
  if (w <= 0 || h <= 0) throw ParseError("zero-area image '" + path.string() + "'");
  if (maxval <= 0 || maxval > 65535) throw ParseError("bad PGM maxval in '" + path.string() + "'");
  ++pos;  // single whitespace byte after maxval
  const std::size_t bpp = maxval < 256 ? 1 : 2;
  const std::size_t need = static_cast<std::size_t>(w) * h * bpp;
  if (buf.size() < pos + need) throw ParseError("truncated PGM data in '" + path.string() + "'");
  GrayImage img(w, h);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    unsigned v = bpp == 1 ? buf[pos + i] : (unsigned{buf[pos + 2 * i]} << 8) | buf[pos + 2 * i + 1];
    img.pixels[i] = static_cast<std::uint8_t>(maxval == 255 ? v : (v * 255u + maxval / 2) / maxval);
  }
  return img;
}

inline void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline GrayImage read_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw IoError("cannot read PNG '" + path.string() + "': " + image.message);
  }
  image.format = PNG_FORMAT_GRAY;
  if (image.width == 0 || image.height == 0) {
    png_image_free(&image);
    throw ParseError("zero-area image '" + path.string() + "'");
  }
  GrayImage img(static_cast<int>(image.width), static_cast<int>(image.height));
  if (!png_image_finish_read(&image, nullptr, img.pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw ParseError("cannot decode PNG '" + path.string() + "': " + image.message);
  }
  return img;
}

inline void write_png(const std::filesystem::path& path, const GrayImage& img) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, img.pixels.data(), 0, nullptr)) {
    throw IoError("cannot write PNG '" + path.string() + "': " + image.message);
  }
}

/// Dispatches on file content (PNG signature or "P5" magic), not extension.
inline GrayImage read_raster(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  char magic[8] = {};
  in.read(magic, sizeof magic);
  if (in.gcount() >= 8 && png_sig_cmp(reinterpret_cast<png_const_bytep>(magic), 0, 8) == 0) return read_png(path);
  if (in.gcount() >= 2 && magic[0] == 'P' && magic[1] == '5') return read_pgm(path);
  throw ParseError("unsupported raster format '" + path.string() + "' (expected PGM P5 or PNG)");
}

inline void write_raster(const std::filesystem::path& path, const GrayImage& img) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") {
    write_png(path, img);
  } else {
    write_pgm(path, img);
  }
}

}  // namespace mapbench
