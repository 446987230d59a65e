#pragma once

#include "emoji/common.hpp"

namespace emoji {

// RGB float image. Pixels live in a 3 x (h*w) matrix, column index y*w + x,
// which is the same layout the nets use, so batching is column concatenation.
struct Image {
  int h = 0, w = 0;
  fmat px;  // 3 x h*w, values nominally in [0,1]

  Image() = default;
  Image(int h_, int w_) : h(h_), w(w_), px(fmat::Zero(3, Eigen::Index(h_) * w_)) {}

  Eigen::Index idx(int y, int x) const { return Eigen::Index(y) * w + x; }
  Eigen::Block<fmat, 3, 1> at(int y, int x) { return px.block<3, 1>(0, idx(y, x)); }
  Eigen::Block<const fmat, 3, 1> at(int y, int x) const { return px.block<3, 1>(0, idx(y, x)); }
  void set(int y, int x, float r, float g, float b) {
    px(0, idx(y, x)) = r;
    px(1, idx(y, x)) = g;
    px(2, idx(y, x)) = b;
  }
  bool inside(int y, int x) const { return y >= 0 && y < h && x >= 0 && x < w; }
};

void save_png(const Image& img, const std::string& path);
Image load_png(const std::string& path);

// Axis-aligned crop, then bilinear resample to (oh, ow). Half-pixel centers.
Image crop_resize(const Image& src, int y0, int x0, int ch, int cw, int oh, int ow);

// Mean absolute pixel difference over a rectangular region between two
// equally sized images; used by region-sensitivity tests.
float region_mad(const Image& a, const Image& b, int y0, int x0, int ch, int cw);

}  // namespace emoji
