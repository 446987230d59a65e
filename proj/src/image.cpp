#include "emoji/image.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>

namespace emoji {

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void save_png(const Image& img, const std::string& path) {
  std::string tmp = path + ".tmp";
  FILE* fp = std::fopen(tmp.c_str(), "wb");
  if (!fp) throw std::runtime_error("save_png: cannot open " + tmp);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw std::runtime_error("save_png: libpng failure for " + path);
  }
  png_init_io(png, fp);
  // Pin compression settings so output bytes are reproducible.
  png_set_compression_level(png, 6);
  png_set_filter(png, 0, PNG_FILTER_NONE);
  png_set_IHDR(png, info, img.w, img.h, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<unsigned char> row(size_t(img.w) * 3);
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x)
      for (int c = 0; c < 3; ++c) {
        float v = img.px(c, img.idx(y, x));
        v = clampv(v, 0.0f, 1.0f);
        row[size_t(x) * 3 + c] = static_cast<unsigned char>(v * 255.0f + 0.5f);
      }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("save_png: rename failed for " + path);
}

Image load_png(const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw std::runtime_error("load_png: cannot open " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw std::runtime_error("load_png: libpng failure for " + path);
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  png_uint_32 w = png_get_image_width(png, info), h = png_get_image_height(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  Image img{int(h), int(w)};
  std::vector<unsigned char> row(size_t(w) * 3);
  for (png_uint_32 y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (png_uint_32 x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        img.px(c, img.idx(int(y), int(x))) = row[size_t(x) * 3 + c] / 255.0f;
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return img;
}

Image crop_resize(const Image& src, int y0, int x0, int ch, int cw, int oh, int ow) {
  Image out(oh, ow);
  for (int oy = 0; oy < oh; ++oy) {
    float sy = (oy + 0.5f) * ch / oh - 0.5f + y0;
    int iy0 = int(std::floor(sy));
    float fy = sy - iy0;
    int iy1 = iy0 + 1;
    int cy0 = clampv(iy0, 0, src.h - 1), cy1 = clampv(iy1, 0, src.h - 1);
    for (int ox = 0; ox < ow; ++ox) {
      float sx = (ox + 0.5f) * cw / ow - 0.5f + x0;
      int ix0 = int(std::floor(sx));
      float fx = sx - ix0;
      int ix1 = ix0 + 1;
      int cx0 = clampv(ix0, 0, src.w - 1), cx1 = clampv(ix1, 0, src.w - 1);
      out.px.col(out.idx(oy, ox)) =
          (1 - fy) * ((1 - fx) * src.px.col(src.idx(cy0, cx0)) + fx * src.px.col(src.idx(cy0, cx1))) +
          fy * ((1 - fx) * src.px.col(src.idx(cy1, cx0)) + fx * src.px.col(src.idx(cy1, cx1)));
    }
  }
  return out;
}

float region_mad(const Image& a, const Image& b, int y0, int x0, int ch, int cw) {
  if (a.h != b.h || a.w != b.w) throw std::invalid_argument("region_mad: size mismatch");
  double acc = 0.0;
  long n = 0;
  for (int y = y0; y < y0 + ch; ++y)
    for (int x = x0; x < x0 + cw; ++x) {
      if (!a.inside(y, x)) continue;
      acc += (a.px.col(a.idx(y, x)) - b.px.col(b.idx(y, x))).cwiseAbs().sum();
      n += 3;
    }
  return n ? float(acc / n) : 0.0f;
}

}  // namespace emoji
