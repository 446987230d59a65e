#include "emoji/synthworld/factors.hpp"

#include "emoji/synthworld/geometry.hpp"

#include <algorithm>

namespace emoji::synthworld {

IdentityParams sample_identity(int64_t seed) {
  if (seed < 0) throw std::invalid_argument("sample_identity: seed must be >= 0");
  Rng rng(seed_stream(tag("identity"), uint64_t(seed)));
  IdentityParams p;
  p.face_width = rng.uniform(0.6, 1.0);
  p.face_height = rng.uniform(0.7, 1.1);
  for (auto& c : p.skin_tone) c = rng.uniform(0.25, 0.95);
  for (auto& c : p.hair_color) c = rng.uniform(0.0, 1.0);
  p.hair_length = rng.uniform(0.0, 1.0);
  p.eye_spacing = rng.uniform(0.25, 0.45);
  p.eye_size = rng.uniform(0.05, 0.12);
  p.nose_length = rng.uniform(0.05, 0.15);
  p.brow_thickness = rng.uniform(0.0, 1.0);
  p.glasses = rng.uniform() < 0.3;
  p.identity_id = int(seed);
  validate(p);
  return p;
}

ExpressionParams sample_expression(int64_t seed) {
  if (seed < 0) throw std::invalid_argument("sample_expression: seed must be >= 0");
  Rng rng(seed_stream(tag("expression"), uint64_t(seed)));
  ExpressionParams e;
  e.eye_open_left = rng.uniform(0.0, 1.0);
  e.eye_open_right = rng.uniform(0.0, 1.0);
  e.pupil_x = rng.uniform(-1.0, 1.0);
  e.pupil_y = rng.uniform(-1.0, 1.0);
  e.mouth_open = rng.uniform(0.0, 1.0);
  e.mouth_smile = rng.uniform(-1.0, 1.0);
  e.brow_raise = rng.uniform(-1.0, 1.0);
  e.expression_id = int(seed);
  validate(e);
  return e;
}

ExpressionParams neutral_expression() {
  ExpressionParams e;
  e.eye_open_left = e.eye_open_right = 1.0;
  e.expression_id = -1;
  return e;
}

double identity_separation(const IdentityParams& a, const IdentityParams& b) {
  double d = 0.0;
  auto upd = [&](double x, double y) { d = std::max(d, std::abs(x - y)); };
  upd(a.face_width, b.face_width);
  upd(a.face_height, b.face_height);
  for (int i = 0; i < 3; ++i) {
    upd(a.skin_tone[size_t(i)], b.skin_tone[size_t(i)]);
    upd(a.hair_color[size_t(i)], b.hair_color[size_t(i)]);
  }
  upd(a.hair_length, b.hair_length);
  upd(a.eye_spacing, b.eye_spacing);
  upd(a.eye_size, b.eye_size);
  upd(a.nose_length, b.nose_length);
  upd(a.brow_thickness, b.brow_thickness);
  upd(a.glasses ? 1.0 : 0.0, b.glasses ? 1.0 : 0.0);
  return d;
}

std::vector<IdentityParams> sample_identity_pool(int n, int64_t seed_base, double min_sep) {
  std::vector<IdentityParams> pool;
  pool.reserve(size_t(n));
  int64_t seed = seed_base;
  while (int(pool.size()) < n) {
    IdentityParams cand = sample_identity(seed++);
    bool ok = true;
    for (const auto& p : pool)
      if (identity_separation(p, cand) < min_sep) {
        ok = false;
        break;
      }
    if (ok) pool.push_back(cand);
    if (seed - seed_base > int64_t(n) * 100 + 1000)
      throw std::runtime_error("sample_identity_pool: separation unreachable");
  }
  return pool;
}

namespace {
void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("factor out of range: ") + what);
}
}  // namespace

void validate(const IdentityParams& p) {
  require(p.face_width >= 0.6 && p.face_width <= 1.0, "face_width");
  require(p.face_height >= 0.7 && p.face_height <= 1.1, "face_height");
  for (double c : p.skin_tone) require(c >= 0.0 && c <= 1.0, "skin_tone");
  for (double c : p.hair_color) require(c >= 0.0 && c <= 1.0, "hair_color");
  require(p.hair_length >= 0.0 && p.hair_length <= 1.0, "hair_length");
  require(p.eye_spacing >= 0.25 && p.eye_spacing <= 0.45, "eye_spacing");
  require(p.eye_size >= 0.05 && p.eye_size <= 0.12, "eye_size");
  require(p.nose_length >= 0.05 && p.nose_length <= 0.15, "nose_length");
  require(p.brow_thickness >= 0.0 && p.brow_thickness <= 1.0, "brow_thickness");
}

void validate(const ExpressionParams& e) {
  require(e.eye_open_left >= 0.0 && e.eye_open_left <= 1.0, "eye_open_left");
  require(e.eye_open_right >= 0.0 && e.eye_open_right <= 1.0, "eye_open_right");
  require(e.pupil_x >= -1.0 && e.pupil_x <= 1.0, "pupil_x");
  require(e.pupil_y >= -1.0 && e.pupil_y <= 1.0, "pupil_y");
  require(e.mouth_open >= 0.0 && e.mouth_open <= 1.0, "mouth_open");
  require(e.mouth_smile >= -1.0 && e.mouth_smile <= 1.0, "mouth_smile");
  require(e.brow_raise >= -1.0 && e.brow_raise <= 1.0, "brow_raise");
}

const std::array<const char*, 52>& blendshape_names() {
  static const std::array<const char*, 52> names = {
      "browDownLeft",      "browDownRight",     "browInnerUp",      "browOuterUpLeft",
      "browOuterUpRight",  "cheekPuff",         "cheekSquintLeft",  "cheekSquintRight",
      "eyeBlinkLeft",      "eyeBlinkRight",     "eyeLookDownLeft",  "eyeLookDownRight",
      "eyeLookInLeft",     "eyeLookInRight",    "eyeLookOutLeft",   "eyeLookOutRight",
      "eyeLookUpLeft",     "eyeLookUpRight",    "eyeSquintLeft",    "eyeSquintRight",
      "eyeWideLeft",       "eyeWideRight",      "jawForward",       "jawLeft",
      "jawOpen",           "jawRight",          "mouthClose",       "mouthDimpleLeft",
      "mouthDimpleRight",  "mouthFrownLeft",    "mouthFrownRight",  "mouthFunnel",
      "mouthLeft",         "mouthLowerDownLeft","mouthLowerDownRight","mouthPressLeft",
      "mouthPressRight",   "mouthPucker",       "mouthRight",       "mouthRollLower",
      "mouthRollUpper",    "mouthShrugLower",   "mouthShrugUpper",  "mouthSmileLeft",
      "mouthSmileRight",   "mouthStretchLeft",  "mouthStretchRight","mouthUpperUpLeft",
      "mouthUpperUpRight", "noseSneerLeft",     "noseSneerRight",   "tongueOut"};
  return names;
}

int blendshape_index(const std::string& name) {
  const auto& names = blendshape_names();
  for (int i = 0; i < 52; ++i)
    if (name == names[size_t(i)]) return i;
  throw std::out_of_range("unknown blendshape name: " + name);
}

LandmarkSet oracle_landmarks(const IdentityParams& id, const ExpressionParams& exp) {
  validate(id);
  validate(exp);
  return FaceGeometry(id, exp).landmarks();
}

// "Left"/"Right" refer to screen side, matching eye_open_left; x grows right,
// y grows down. Only these 18 entries are ever nonzero.
BlendshapeVector oracle_blendshapes(const ExpressionParams& e) {
  validate(e);
  BlendshapeVector b;
  auto set = [&](const char* name, double v) { b.values[blendshape_index(name)] = v; };
  auto pos = [](double v) { return std::max(0.0, v); };
  set("eyeBlinkLeft", 1.0 - e.eye_open_left);
  set("eyeBlinkRight", 1.0 - e.eye_open_right);
  set("eyeLookInLeft", pos(e.pupil_x));
  set("eyeLookOutLeft", pos(-e.pupil_x));
  set("eyeLookInRight", pos(-e.pupil_x));
  set("eyeLookOutRight", pos(e.pupil_x));
  set("eyeLookUpLeft", pos(-e.pupil_y));
  set("eyeLookUpRight", pos(-e.pupil_y));
  set("eyeLookDownLeft", pos(e.pupil_y));
  set("eyeLookDownRight", pos(e.pupil_y));
  set("jawOpen", e.mouth_open);
  set("mouthSmileLeft", pos(e.mouth_smile));
  set("mouthSmileRight", pos(e.mouth_smile));
  set("mouthFrownLeft", pos(-e.mouth_smile));
  set("mouthFrownRight", pos(-e.mouth_smile));
  set("browInnerUp", pos(e.brow_raise));
  set("browDownLeft", pos(-e.brow_raise));
  set("browDownRight", pos(-e.brow_raise));
  return b;
}

}  // namespace emoji::synthworld
