#pragma once

#include <png.h>

#include <cstdint>
#include <cstring>
#include <map>
#include <string>
#include <vector>

#include "poci/errors.hpp"
#include "poci/grid.hpp"

namespace poci::png {

using Bytes = std::vector<std::uint8_t>;
using TextChunks = std::map<std::string, std::string>;

struct RGB {
  std::uint8_t r, g, b;
};

struct Image16 {
  Grid<std::uint16_t> pixels;
  TextChunks text;
};

struct IndexedImage {
  Grid<std::uint8_t> indices;
  std::vector<RGB> palette;
  TextChunks text;
};

namespace detail {

struct WriteContext {
  png_structp png = nullptr;
  png_infop info = nullptr;

  WriteContext() {
    png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw Error("png: cannot allocate write struct");
    info = png_create_info_struct(png);
    if (!info) {
      png_destroy_write_struct(&png, nullptr);
      throw Error("png: cannot allocate info struct");
    }
  }
  ~WriteContext() { png_destroy_write_struct(&png, &info); }
  WriteContext(const WriteContext&) = delete;
  WriteContext& operator=(const WriteContext&) = delete;
};

struct ReadContext {
  png_structp png = nullptr;
  png_infop info = nullptr;

  ReadContext() {
    png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw Error("png: cannot allocate read struct");
    info = png_create_info_struct(png);
    if (!info) {
      png_destroy_read_struct(&png, nullptr, nullptr);
      throw Error("png: cannot allocate info struct");
    }
  }
  ~ReadContext() { png_destroy_read_struct(&png, &info, nullptr); }
  ReadContext(const ReadContext&) = delete;
  ReadContext& operator=(const ReadContext&) = delete;
};

struct MemoryReader {
  const Bytes* data;
  std::size_t offset = 0;
};

inline void write_to_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<Bytes*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

inline void read_from_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* in = static_cast<MemoryReader*>(png_get_io_ptr(png));
  if (in->offset + length > in->data->size()) png_error(png, "truncated PNG");
  std::memcpy(data, in->data->data() + in->offset, length);
  in->offset += length;
}

inline void set_text(WriteContext& ctx, const TextChunks& text, std::vector<std::string>& storage) {
  if (text.empty()) return;
  std::vector<png_text> chunks;
  storage.clear();
  storage.reserve(text.size() * 2);
  for (const auto& [k, v] : text) {
    storage.push_back(k);
    storage.push_back(v);
  }
  for (std::size_t i = 0; i < storage.size(); i += 2) {
    png_text t{};
    t.compression = PNG_TEXT_COMPRESSION_NONE;
    t.key = storage[i].data();
    t.text = storage[i + 1].data();
    t.text_length = storage[i + 1].size();
    chunks.push_back(t);
  }
  png_set_text(ctx.png, ctx.info, chunks.data(), static_cast<int>(chunks.size()));
}

// Rows are handed to libpng already in PNG byte order.
inline Bytes encode(int width, int height, int bit_depth, int color_type, const std::vector<png_bytep>& rows,
                    const TextChunks& text, const std::vector<RGB>* palette = nullptr) {
  WriteContext ctx;
  Bytes out;
  std::vector<std::string> storage;
  std::vector<png_color> pal;
  if (setjmp(png_jmpbuf(ctx.png))) throw Error("png: encode failed");
  png_set_write_fn(ctx.png, &out, write_to_vector, nullptr);
  png_set_IHDR(ctx.png, ctx.info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  if (palette) {
    for (const auto& c : *palette) pal.push_back(png_color{c.r, c.g, c.b});
    png_set_PLTE(ctx.png, ctx.info, pal.data(), static_cast<int>(pal.size()));
  }
  set_text(ctx, text, storage);
  png_write_info(ctx.png, ctx.info);
  png_write_image(ctx.png, const_cast<png_bytepp>(rows.data()));
  png_write_end(ctx.png, nullptr);
  return out;
}

}  // namespace detail

inline Bytes encode_gray16(const Grid<std::uint16_t>& img, const TextChunks& text = {}) {
  std::vector<std::uint8_t> buf(img.size() * 2);
  for (std::size_t i = 0; i < img.size(); ++i) {
    buf[2 * i] = static_cast<std::uint8_t>(img.data[i] >> 8);
    buf[2 * i + 1] = static_cast<std::uint8_t>(img.data[i] & 0xff);
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) rows[y] = buf.data() + static_cast<std::size_t>(y) * img.width * 2;
  return detail::encode(img.width, img.height, 16, PNG_COLOR_TYPE_GRAY, rows, text);
}

inline Bytes encode_indexed(const Grid<std::uint8_t>& img, const std::vector<RGB>& palette,
                            const TextChunks& text = {}) {
  if (palette.empty() || palette.size() > 256) throw Error("png: palette must hold 1..256 entries");
  auto copy = img.data;
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) rows[y] = copy.data() + static_cast<std::size_t>(y) * img.width;
  return detail::encode(img.width, img.height, 8, PNG_COLOR_TYPE_PALETTE, rows, text, &palette);
}

/// Packed 8-bit RGB, row-major, 3 bytes per pixel.
inline Bytes encode_rgb8(int width, int height, const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3) throw Error("png: rgb buffer size mismatch");
  auto copy = rgb;
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) rows[y] = copy.data() + static_cast<std::size_t>(y) * width * 3;
  return detail::encode(width, height, 8, PNG_COLOR_TYPE_RGB, rows, {});
}

struct Decoded {
  int width = 0;
  int height = 0;
  int bit_depth = 0;
  int color_type = 0;
  int channels = 0;
  std::vector<std::uint8_t> raw;  // rows as stored, big-endian for 16-bit
  std::vector<RGB> palette;
  TextChunks text;
};

inline Decoded decode(const Bytes& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw ParseError("png: not a PNG stream");
  detail::ReadContext ctx;
  detail::MemoryReader reader{&bytes};
  Decoded out;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(ctx.png))) throw ParseError("png: decode failed (corrupt or truncated stream)");
  png_set_read_fn(ctx.png, &reader, detail::read_from_vector);
  png_read_info(ctx.png, ctx.info);
  out.width = static_cast<int>(png_get_image_width(ctx.png, ctx.info));
  out.height = static_cast<int>(png_get_image_height(ctx.png, ctx.info));
  out.bit_depth = png_get_bit_depth(ctx.png, ctx.info);
  out.color_type = png_get_color_type(ctx.png, ctx.info);
  out.channels = png_get_channels(ctx.png, ctx.info);
  png_colorp pal = nullptr;
  int npal = 0;
  if (png_get_PLTE(ctx.png, ctx.info, &pal, &npal) == PNG_INFO_PLTE)
    for (int i = 0; i < npal; ++i) out.palette.push_back({pal[i].red, pal[i].green, pal[i].blue});
  const auto rowbytes = png_get_rowbytes(ctx.png, ctx.info);
  out.raw.resize(rowbytes * static_cast<std::size_t>(out.height));
  rows.resize(static_cast<std::size_t>(out.height));
  for (int y = 0; y < out.height; ++y) rows[y] = out.raw.data() + rowbytes * static_cast<std::size_t>(y);
  png_read_image(ctx.png, rows.data());
  png_read_end(ctx.png, ctx.info);
  png_textp text = nullptr;
  int ntext = 0;
  png_get_text(ctx.png, ctx.info, &text, &ntext);
  for (int i = 0; i < ntext; ++i) out.text[text[i].key] = std::string(text[i].text, text[i].text_length);
  return out;
}

inline Image16 decode_gray16(const Bytes& bytes) {
  auto d = decode(bytes);
  if (d.color_type != PNG_COLOR_TYPE_GRAY || d.bit_depth != 16)
    throw ParseError("png: expected a 16-bit grayscale image");
  Image16 img{Grid<std::uint16_t>(d.width, d.height), std::move(d.text)};
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    img.pixels.data[i] = static_cast<std::uint16_t>((d.raw[2 * i] << 8) | d.raw[2 * i + 1]);
  return img;
}

inline IndexedImage decode_indexed(const Bytes& bytes) {
  auto d = decode(bytes);
  if (d.color_type != PNG_COLOR_TYPE_PALETTE || d.bit_depth != 8)
    throw ParseError("png: expected an 8-bit indexed image");
  IndexedImage img{Grid<std::uint8_t>(d.width, d.height), std::move(d.palette), std::move(d.text)};
  img.indices.data = std::move(d.raw);
  return img;
}

}  // namespace poci::png
