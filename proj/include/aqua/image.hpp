#pragma once

#include <png.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "aqua/errors.hpp"
#include "aqua/ops.hpp"
#include "aqua/tensor.hpp"

namespace aqua {

/// 8-bit interleaved RGB image, row-major.
struct RgbImage8 {
  int h = 0;
  int w = 0;
  std::vector<std::uint8_t> pixels;  // 3 * h * w

  RgbImage8() = default;
  RgbImage8(int height, int width)
      : h(height), w(width), pixels(static_cast<std::size_t>(height) * width * 3, 0) {}

  std::uint8_t* px(int y, int x) { return pixels.data() + (static_cast<std::size_t>(y) * w + x) * 3; }
  const std::uint8_t* px(int y, int x) const {
    return pixels.data() + (static_cast<std::size_t>(y) * w + x) * 3;
  }
  bool operator==(const RgbImage8&) const = default;
};

namespace png_detail {

struct FileCloser {
  std::FILE* fp = nullptr;
  ~FileCloser() {
    if (fp) std::fclose(fp);
  }
};

}  // namespace png_detail

/// Decodes an 8-bit PNG. Grayscale expands to three identical channels and an
/// alpha channel is dropped; palette or 16-bit files are rejected. Nothing is
/// returned on failure.
inline RgbImage8 load_png(const std::string& path) {
  png_detail::FileCloser file;
  file.fp = std::fopen(path.c_str(), "rb");
  if (!file.fp) throw IoError("cannot open '" + path + "'");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw InternalError("libpng allocation failed");
  }

  RgbImage8 img;
  std::vector<png_bytep> row_ptrs;
  std::string reject;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("cannot decode '" + path + "'" + (reject.empty() ? "" : ": " + reject));
  }

  png_init_io(png, file.fp);
  png_read_info(png, info);

  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  if (bit_depth != 8) {
    reject = "unsupported bit depth " + std::to_string(bit_depth);
    png_error(png, "bit depth");
  }
  if (color_type == PNG_COLOR_TYPE_PALETTE) {
    reject = "palette images are unsupported";
    png_error(png, "palette");
  }
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(png);
  }
  png_set_interlace_handling(png);
  png_read_update_info(png, info);

  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  if (png_get_rowbytes(png, info) != width * 3) {
    reject = "unexpected channel layout";
    png_error(png, "layout");
  }

  img = RgbImage8(static_cast<int>(height), static_cast<int>(width));
  row_ptrs.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) {
    row_ptrs[y] = img.pixels.data() + static_cast<std::size_t>(y) * width * 3;
  }
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

namespace png_detail {

inline void write_png_bytes(const std::string& path, int h, int w, int channels,
                            const std::uint8_t* data) {
  const std::string tmp = path + ".tmp";
  {
    FileCloser file;
    file.fp = std::fopen(tmp.c_str(), "wb");
    if (!file.fp) throw IoError("cannot create '" + tmp + "'");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
      png_destroy_write_struct(&png, &info);
      throw InternalError("libpng allocation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
      png_destroy_write_struct(&png, &info);
      std::remove(tmp.c_str());
      throw IoError("cannot encode '" + path + "'");
    }
    png_init_io(png, file.fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(static_cast<std::size_t>(h));
    for (int y = 0; y < h; ++y) {
      rows[static_cast<std::size_t>(y)] =
          const_cast<png_bytep>(data + static_cast<std::size_t>(y) * w * channels);
    }
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw IoError("cannot move temporary file onto '" + path + "'");
  }
}

}  // namespace png_detail

/// Writes via a temporary file and renames on success, so a failed write
/// never leaves a partial image behind.
inline void save_png(const std::string& path, const RgbImage8& img) {
  png_detail::write_png_bytes(path, img.h, img.w, 3, img.pixels.data());
}

inline void save_png_gray(const std::string& path, int h, int w,
                          const std::vector<std::uint8_t>& gray) {
  if (static_cast<std::size_t>(h) * w != gray.size()) {
    throw ContractError("save_png_gray: byte count does not match dimensions");
  }
  png_detail::write_png_bytes(path, h, w, 1, gray.data());
}

// ---------------------------------------------------------------------------
// Model-range conversion: pixels [0,255] <-> tensors in [-1, 1].

/// (1,3,h,w) tensor at native size, x/127.5 - 1.
template <typename T = float>
Tensor<T> image_to_tensor(const RgbImage8& img) {
  Tensor<T> t(Shape{1, 3, img.h, img.w});
  for (int c = 0; c < 3; ++c) {
    T* p = t.plane(0, c);
    for (int y = 0; y < img.h; ++y) {
      for (int x = 0; x < img.w; ++x) {
        p[static_cast<std::int64_t>(y) * img.w + x] =
            static_cast<T>(img.px(y, x)[c]) / T(127.5) - T(1);
      }
    }
  }
  return t;
}

/// Bilinear resize to size x size, then map into [-1, 1].
template <typename T = float>
Tensor<T> to_model_range(const RgbImage8& img, int size) {
  if (size < 8 || size % 8 != 0) {
    throw ContractError("to_model_range: size must be a positive multiple of 8");
  }
  Tensor<T> native(Shape{1, 3, img.h, img.w});
  for (int c = 0; c < 3; ++c) {
    T* p = native.plane(0, c);
    for (int y = 0; y < img.h; ++y) {
      for (int x = 0; x < img.w; ++x) {
        p[static_cast<std::int64_t>(y) * img.w + x] = static_cast<T>(img.px(y, x)[c]);
      }
    }
  }
  Tensor<T> resized = ops::bilinear_resize(native, size, size);
  for (std::int64_t i = 0; i < resized.numel(); ++i) resized[i] = resized[i] / T(127.5) - T(1);
  return resized;
}

/// Clamps to [-1, 1], maps to [0, 255], rounds half-up.
template <typename T>
RgbImage8 from_model_range(const Tensor<T>& t) {
  const Shape s = t.shape();
  if (s.n != 1 || s.c != 3) throw ContractError("from_model_range: expects a (1,3,h,w) tensor");
  RgbImage8 img(s.h, s.w);
  for (int c = 0; c < 3; ++c) {
    const T* p = t.plane(0, c);
    for (int y = 0; y < s.h; ++y) {
      for (int x = 0; x < s.w; ++x) {
        double v = static_cast<double>(p[static_cast<std::int64_t>(y) * s.w + x]);
        v = std::min(1.0, std::max(-1.0, v));
        const double scaled = (v + 1.0) * 127.5;
        img.px(y, x)[c] = static_cast<std::uint8_t>(std::floor(scaled + 0.5));
      }
    }
  }
  return img;
}

// ---------------------------------------------------------------------------
// Padding for arbitrary inference sizes.

namespace pad_detail {

/// Mirror index into [0, n) without repeating the edge sample; falls back to
/// edge clamping when the extent is too small to reflect.
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  int m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - m;
}

}  // namespace pad_detail

/// Reflect-pads on the bottom/right so both spatial dims become multiples
/// of m. Returns the input unchanged when already aligned.
template <typename T>
Tensor<T> pad_reflect_to_multiple(const Tensor<T>& x, int m) {
  const Shape s = x.shape();
  const int ph = (m - s.h % m) % m;
  const int pw = (m - s.w % m) % m;
  if (ph == 0 && pw == 0) return x;
  Tensor<T> y(Shape{s.n, s.c, s.h + ph, s.w + pw});
  for (int in = 0; in < s.n; ++in) {
    for (int ic = 0; ic < s.c; ++ic) {
      const T* src = x.plane(in, ic);
      T* dst = y.plane(in, ic);
      for (int yy = 0; yy < s.h + ph; ++yy) {
        const int sy = pad_detail::reflect_index(yy, s.h);
        for (int xx = 0; xx < s.w + pw; ++xx) {
          const int sx = pad_detail::reflect_index(xx, s.w);
          dst[static_cast<std::int64_t>(yy) * (s.w + pw) + xx] =
              src[static_cast<std::int64_t>(sy) * s.w + sx];
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> crop_top_left(const Tensor<T>& x, int h, int w) {
  const Shape s = x.shape();
  if (h > s.h || w > s.w) throw ContractError("crop_top_left: target exceeds input");
  if (h == s.h && w == s.w) return x;
  Tensor<T> y(Shape{s.n, s.c, h, w});
  for (int in = 0; in < s.n; ++in) {
    for (int ic = 0; ic < s.c; ++ic) {
      const T* src = x.plane(in, ic);
      T* dst = y.plane(in, ic);
      for (int yy = 0; yy < h; ++yy) {
        for (int xx = 0; xx < w; ++xx) {
          dst[static_cast<std::int64_t>(yy) * w + xx] = src[static_cast<std::int64_t>(yy) * s.w + xx];
        }
      }
    }
  }
  return y;
}

}  // namespace aqua
