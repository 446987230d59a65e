#pragma once

#include "emoji/common.hpp"

#include <array>
#include <map>

namespace emoji::synthworld {

struct IdentityParams {
  double face_width = 0.8;    // [0.6, 1.0]
  double face_height = 0.9;   // [0.7, 1.1]
  std::array<double, 3> skin_tone{0.8, 0.65, 0.55};
  std::array<double, 3> hair_color{0.2, 0.15, 0.1};
  double hair_length = 0.5;   // [0, 1]
  double eye_spacing = 0.35;  // [0.25, 0.45], fraction of face width
  double eye_size = 0.08;     // [0.05, 0.12]
  double nose_length = 0.10;  // [0.05, 0.15]
  double brow_thickness = 0.5;  // [0, 1]
  bool glasses = false;
  int identity_id = -1;
};

struct ExpressionParams {
  double eye_open_left = 1.0;   // [0, 1]
  double eye_open_right = 1.0;  // [0, 1]
  double pupil_x = 0.0;         // [-1, 1]
  double pupil_y = 0.0;         // [-1, 1]
  double mouth_open = 0.0;      // [0, 1]
  double mouth_smile = 0.0;     // [-1, 1]
  double brow_raise = 0.0;      // [-1, 1]
  int expression_id = -1;
};

// Deterministic draws: the seed alone fixes every field.
IdentityParams sample_identity(int64_t seed);
ExpressionParams sample_expression(int64_t seed);
ExpressionParams neutral_expression();

// Largest |delta| across the scalar fields (glasses counts as 0/1).
double identity_separation(const IdentityParams& a, const IdentityParams& b);

// n identities with pairwise separation >= min_sep, scanning seeds upward from
// seed_base and skipping colliders; deterministic.
std::vector<IdentityParams> sample_identity_pool(int n, int64_t seed_base, double min_sep = 0.05);

void validate(const IdentityParams& id);
void validate(const ExpressionParams& exp);

// 14 ratio landmarks by their standard detector indices plus 16 contour points.
struct LandmarkSet {
  std::map<int, Vec2d> points;
  std::array<Vec2d, 16> contour{};
};

inline const std::array<int, 14> kRequiredLandmarks = {0,   17,  33,  61,  133, 145, 159,
                                                       263, 291, 362, 374, 386, 468, 473};

struct BlendshapeVector {
  Eigen::Matrix<double, 52, 1> values = Eigen::Matrix<double, 52, 1>::Zero();
};

// Canonical 52-entry blendshape name table (index -> name).
const std::array<const char*, 52>& blendshape_names();
int blendshape_index(const std::string& name);  // throws on unknown name

// Ground-truth annotations computed in closed form from the factors.
// The full mapping table lives in docs/blendshape_map.md.
LandmarkSet oracle_landmarks(const IdentityParams& id, const ExpressionParams& exp);
BlendshapeVector oracle_blendshapes(const ExpressionParams& exp);

}  // namespace emoji::synthworld
