#include "emoji/synthworld/render.hpp"

namespace emoji::synthworld {

namespace {

// Highest-priority shape containing (u,v); mirrors draw order
// bg -> head/border -> hair -> nose -> mouth -> eyes -> brows -> glasses.
PixLabel classify(const FaceGeometry& g, double u, double v) {
  if (g.in_glasses_frame(u, v)) return PixLabel::glasses;
  if (g.in_brow(u, v, true) || g.in_brow(u, v, false)) return PixLabel::brow;
  if (g.on_closed_lid(u, v, true) || g.on_closed_lid(u, v, false)) return PixLabel::lid;
  if (g.in_pupil(u, v, true) || g.in_pupil(u, v, false)) return PixLabel::pupil;
  if (g.in_aperture(u, v, true) || g.in_aperture(u, v, false)) return PixLabel::aperture;
  if (g.on_lip_line(u, v)) return PixLabel::lip;
  if (g.in_mouth_opening(u, v)) return PixLabel::mouth_open;
  if (g.in_nose(u, v)) return PixLabel::nose;
  if (g.in_hair(u, v)) return PixLabel::hair;
  if (g.in_head_border(u, v)) return PixLabel::border;
  if (g.in_head(u, v)) return PixLabel::head;
  return PixLabel::bg;
}

}  // namespace

void label_color(const FaceGeometry& g, PixLabel l, float rgb[3]) {
  auto fill = [&](const float c[3]) {
    rgb[0] = c[0];
    rgb[1] = c[1];
    rgb[2] = c[2];
  };
  auto scaled = [&](const std::array<double, 3>& base, double s) {
    rgb[0] = float(base[0] * s);
    rgb[1] = float(base[1] * s);
    rgb[2] = float(base[2] * s);
  };
  switch (l) {
    case PixLabel::bg: fill(Palette::kBg); break;
    case PixLabel::head: scaled(g.id.skin_tone, 1.0); break;
    case PixLabel::border: scaled(g.id.skin_tone, Palette::kBorderScale); break;
    case PixLabel::hair: scaled(g.id.hair_color, 1.0); break;
    case PixLabel::nose: scaled(g.id.skin_tone, Palette::kNoseScale); break;
    case PixLabel::mouth_open: fill(Palette::kMouthOpen); break;
    case PixLabel::lip: fill(Palette::kLip); break;
    case PixLabel::aperture: fill(Palette::kSclera); break;
    case PixLabel::pupil: fill(Palette::kPupil); break;
    case PixLabel::lid: scaled(g.id.skin_tone, Palette::kBorderScale); break;
    case PixLabel::brow: scaled(g.id.hair_color, Palette::kBrowScale); break;
    case PixLabel::glasses: fill(Palette::kGlasses); break;
  }
}

Image render_face(const FaceGeometry& g, int h, int w) {
  if (h < 32 || w < 32) throw std::invalid_argument("render_face: dimensions must be >= 32");
  Image img{h, w};
  const double invw = 1.0 / w, invh = 1.0 / h;
  const double off[2] = {0.25, 0.75};
  float rgb[3];
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float acc[3] = {0, 0, 0};
      for (double oy : off) {
        double v = (y + oy) * invh;
        for (double ox : off) {
          double u = (x + ox) * invw;
          label_color(g, classify(g, u, v), rgb);
          acc[0] += rgb[0];
          acc[1] += rgb[1];
          acc[2] += rgb[2];
        }
      }
      img.set(y, x, acc[0] * 0.25f, acc[1] * 0.25f, acc[2] * 0.25f);
    }
  }
  return img;
}

LabelMap render_labels(const FaceGeometry& g, int size) {
  LabelMap m(size, size);
  const double inv = 1.0 / size;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) m(y, x) = uint8_t(classify(g, (x + 0.5) * inv, (y + 0.5) * inv));
  return m;
}

}  // namespace emoji::synthworld
