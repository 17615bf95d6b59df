/*
   Copyright 2026 The drnet Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

      http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#include "drnet/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cstring>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

namespace drnet {
namespace {

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_fail(png_structp, png_const_charp msg) {
  throw Error(ErrorCode::unsupported_format, std::string("png: ") + msg);
}
void png_warn(png_structp, png_const_charp) {}

Image read_png(const std::filesystem::path& path) {
  File file(std::fopen(path.string().c_str(), "rb"));
  require(file != nullptr, ErrorCode::io, "cannot open " + path.string());
  unsigned char sig[8];
  require(std::fread(sig, 1, 8, file.get()) == 8 && png_sig_cmp(sig, 0, 8) == 0,
          ErrorCode::unsupported_format, path.string() + " is not a PNG file");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};

  Image img;
  try {
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    if (depth == 16) png_set_swap(png);
    png_read_update_info(png, info);

    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    img.channels = png_get_channels(png, info);
    img.bit_depth = png_get_bit_depth(png, info);
    require(img.channels == 1 || img.channels == 3, ErrorCode::unsupported_format,
            path.string() + ": unsupported channel layout");
    const std::size_t row_bytes = png_get_rowbytes(png, info);
    std::vector<unsigned char> buf(row_bytes * static_cast<std::size_t>(img.height));
    std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
    for (int y = 0; y < img.height; ++y) rows[static_cast<std::size_t>(y)] = buf.data() + row_bytes * static_cast<std::size_t>(y);
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);

    const std::size_t count = static_cast<std::size_t>(img.width) * img.height * img.channels;
    img.samples.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      if (img.bit_depth == 16) {
        std::uint16_t v;
        std::memcpy(&v, buf.data() + 2 * i, 2);
        img.samples[i] = v;
      } else {
        img.samples[i] = buf[i];
      }
    }
  } catch (const Error& e) {
    fail(e.code(), path.string() + ": " + e.what());
  }
  return img;
}

void write_png(const std::filesystem::path& path, const Image& img) {
  File file(std::fopen(path.string().c_str(), "wb"));
  require(file != nullptr, ErrorCode::io, "cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};

  const std::size_t per_row = static_cast<std::size_t>(img.width) * img.channels;
  const std::size_t bytes = img.bit_depth == 16 ? 2 : 1;
  std::vector<unsigned char> buf(per_row * bytes * static_cast<std::size_t>(img.height));
  for (std::size_t i = 0; i < img.samples.size(); ++i) {
    if (bytes == 2) {
      buf[2 * i] = static_cast<unsigned char>(img.samples[i] >> 8);
      buf[2 * i + 1] = static_cast<unsigned char>(img.samples[i] & 0xff);
    } else {
      buf[i] = static_cast<unsigned char>(img.samples[i]);
    }
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) rows[static_cast<std::size_t>(y)] = buf.data() + per_row * bytes * static_cast<std::size_t>(y);

  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height),
               img.bit_depth, img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
}

// Next whitespace-separated header token, skipping '#' comments.
std::string pnm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

Image read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::io, "cannot open " + path.string());
  const std::string magic = pnm_token(in);
  require(magic == "P5" || magic == "P6", ErrorCode::unsupported_format,
          path.string() + ": only binary PGM (P5) and PPM (P6) are supported");
  Image img;
  img.channels = magic == "P6" ? 3 : 1;
  try {
    img.width = std::stoi(pnm_token(in));
    img.height = std::stoi(pnm_token(in));
    const int maxval = std::stoi(pnm_token(in));
    require(maxval > 0 && maxval <= 65535, ErrorCode::unsupported_format,
            path.string() + ": maxval out of range");
    img.bit_depth = maxval > 255 ? 16 : 8;
    require(maxval == img.max_value(), ErrorCode::unsupported_format,
            path.string() + ": maxval must be 255 or 65535, got " + std::to_string(maxval));
  } catch (const std::logic_error&) {
    fail(ErrorCode::unsupported_format, path.string() + ": malformed PNM header");
  }
  require(img.width > 0 && img.height > 0, ErrorCode::unsupported_format,
          path.string() + ": empty image");
  const std::size_t count = static_cast<std::size_t>(img.width) * img.height * img.channels;
  const std::size_t bytes = img.bit_depth == 16 ? 2 : 1;
  std::vector<unsigned char> buf(count * bytes);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  require(in.gcount() == static_cast<std::streamsize>(buf.size()), ErrorCode::unsupported_format,
          path.string() + ": truncated pixel data");
  img.samples.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    img.samples[i] = bytes == 2 ? static_cast<std::uint16_t>(buf[2 * i] << 8 | buf[2 * i + 1]) : buf[i];
  }
  return img;
}

void write_pnm(const std::filesystem::path& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::io, "cannot write " + path.string());
  out << (img.channels == 3 ? "P6" : "P5") << "\n"
      << img.width << " " << img.height << "\n"
      << img.max_value() << "\n";
  for (std::uint16_t v : img.samples) {
    if (img.bit_depth == 16) out.put(static_cast<char>(v >> 8));
    out.put(static_cast<char>(v & 0xff));
  }
  require(static_cast<bool>(out), ErrorCode::io, "write failed for " + path.string());
}

void check_image(const Image& img) {
  require(img.width > 0 && img.height > 0 && (img.channels == 1 || img.channels == 3) &&
              (img.bit_depth == 8 || img.bit_depth == 16) &&
              img.samples.size() == static_cast<std::size_t>(img.width) * img.height * img.channels,
          ErrorCode::invalid_argument, "malformed image buffer");
}

}  // namespace

Image read_image(const std::filesystem::path& path) {
  require(std::filesystem::exists(path), ErrorCode::io, "no such file " + path.string());
  const std::string ext = lower_extension(path);
  if (ext == ".png") return read_png(path);
  if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") return read_pnm(path);
  fail(ErrorCode::unsupported_format,
       path.string() + ": unsupported image format (use .png, .pgm or .ppm)");
}

void write_image(const std::filesystem::path& path, const Image& image) {
  check_image(image);
  const std::string ext = lower_extension(path);
  if (ext == ".png") return write_png(path, image);
  if (ext == ".pgm" || ext == ".ppm") {
    require((ext == ".pgm") == (image.channels == 1), ErrorCode::unsupported_format,
            path.string() + ": .pgm holds 1 channel and .ppm holds 3");
    return write_pnm(path, image);
  }
  fail(ErrorCode::unsupported_format,
       path.string() + ": unsupported image format (use .png, .pgm or .ppm)");
}

Tensor<float> image_to_tensor(const Image& image) {
  check_image(image);
  Tensor<float> t(Shape{1, image.channels, image.height, image.width});
  const float scale = 1.0f / static_cast<float>(image.max_value());
  std::size_t i = 0;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < image.channels; ++c) t.at(0, c, y, x) = static_cast<float>(image.samples[i++]) * scale;
  return t;
}

Image tensor_to_image(const Tensor<float>& tensor, int bit_depth) {
  require(tensor.n() == 1 && (tensor.c() == 1 || tensor.c() == 3), ErrorCode::shape_mismatch,
          "tensor_to_image expects (1,1|3,H,W), got " + tensor.shape().str());
  require(bit_depth == 8 || bit_depth == 16, ErrorCode::invalid_argument, "bit depth must be 8 or 16");
  Image img;
  img.width = tensor.w();
  img.height = tensor.h();
  img.channels = tensor.c();
  img.bit_depth = bit_depth;
  const double maxv = img.max_value();
  img.samples.reserve(tensor.numel());
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        const double v = std::clamp(static_cast<double>(tensor.at(0, c, y, x)), 0.0, 1.0);
        img.samples.push_back(static_cast<std::uint16_t>(std::lround(v * maxv)));
      }
  return img;
}

}  // namespace drnet
