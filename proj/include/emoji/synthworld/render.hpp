#pragma once

#include "emoji/image.hpp"
#include "emoji/synthworld/geometry.hpp"

namespace emoji::synthworld {

// Per-pixel semantic label, assigned at the pixel center with the same
// priority order the rasterizer uses (later-drawn wins).
enum class PixLabel : uint8_t {
  bg = 0,
  head,
  border,
  hair,
  nose,
  mouth_open,
  lip,
  aperture,
  pupil,
  lid,
  brow,
  glasses,
};

using LabelMap = Eigen::Matrix<uint8_t, Eigen::Dynamic, Eigen::Dynamic>;  // h x w

struct Palette {
  static constexpr float kBg[3] = {0.93f, 0.95f, 0.97f};
  static constexpr float kSclera[3] = {0.97f, 0.97f, 0.97f};
  static constexpr float kPupil[3] = {0.10f, 0.10f, 0.12f};
  static constexpr float kMouthOpen[3] = {0.42f, 0.13f, 0.15f};
  static constexpr float kLip[3] = {0.65f, 0.22f, 0.25f};
  static constexpr float kGlasses[3] = {0.15f, 0.15f, 0.17f};
  static constexpr double kBorderScale = 0.55;  // of skin tone
  static constexpr double kNoseScale = 0.62;
  static constexpr double kBrowScale = 0.80;  // of hair color
};

// 2x2 supersampled rasterization; pure function of the geometry.
// Throws std::invalid_argument when either dimension is below 32.
Image render_face(const FaceGeometry& g, int h, int w);
inline Image render_face(const FaceGeometry& g, int size = 64) {
  return render_face(g, size, size);
}

// Label at each pixel center (no supersampling).
LabelMap render_labels(const FaceGeometry& g, int size = 64);

// Flat color for a label under this identity (skin/hair-derived where needed).
void label_color(const FaceGeometry& g, PixLabel l, float rgb[3]);

}  // namespace emoji::synthworld
