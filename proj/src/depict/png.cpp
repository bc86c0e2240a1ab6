#include <png.h>

#include <cstring>

#include "molbench/depict.hpp"

namespace molbench::depict {

std::string encode_png(const RasterImage& image) {
  png_image info;
  std::memset(&info, 0, sizeof info);
  info.version = PNG_IMAGE_VERSION;
  info.width = static_cast<png_uint_32>(image.width);
  info.height = static_cast<png_uint_32>(image.height);
  info.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&info, nullptr, &size, 0, image.pixels.data(), 0, nullptr)) {
    throw std::runtime_error(std::string("encode_png: ") + info.message);
  }
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&info, out.data(), &size, 0, image.pixels.data(), 0, nullptr)) {
    throw std::runtime_error(std::string("encode_png: ") + info.message);
  }
  out.resize(size);
  return out;
}

RasterImage decode_png(std::string_view bytes) {
  png_image info;
  std::memset(&info, 0, sizeof info);
  info.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&info, bytes.data(), bytes.size())) {
    throw std::runtime_error(std::string("decode_png: ") + info.message);
  }
  info.format = PNG_FORMAT_RGB;
  RasterImage img(static_cast<int>(info.width), static_cast<int>(info.height));
  if (!png_image_finish_read(&info, nullptr, img.pixels.data(), 0, nullptr)) {
    png_image_free(&info);
    throw std::runtime_error(std::string("decode_png: ") + info.message);
  }
  return img;
}

}  // namespace molbench::depict
