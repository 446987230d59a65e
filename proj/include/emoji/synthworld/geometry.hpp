#pragma once

#include "emoji/synthworld/factors.hpp"

#include <cmath>

namespace emoji::synthworld {

// All face geometry in normalized [0,1]^2 coordinates (x right, y down),
// derived once from the factor vectors. Renderer, landmark oracles, region
// masks and crop boxes all read from here so they cannot drift apart.
//
// Placement rules:
//  * Horizontal eye geometry scales with head width, vertical eye-region
//    geometry is capped by head height, so brows/glasses provably stay inside
//    the head outline (r_ell <= 0.93) at every factor extreme.
//  * The mouth box is absolute (identity-independent) so equal expressions on
//    different faces produce equal mouth movement ratios.
struct FaceGeometry {
  static constexpr double kCx = 0.5, kCy = 0.54;
  static constexpr double kMaxApertureRatio = 0.75;  // aperture half-h / eye half-w at eye_open=1
  static constexpr double kMouthY = 0.63;
  static constexpr double kMouthHalfW = 0.115;
  static constexpr double kMouthOpenHalfH = 0.075;  // at mouth_open = 1
  static constexpr double kMouthCornerLift = 0.03;  // at |mouth_smile| = 1
  static constexpr double kLipHalfThick = 0.008;
  static constexpr double kHeadInnerR = 0.93;  // all features live inside this radius

  IdentityParams id;
  ExpressionParams exp;

  // head
  double ax, ay;
  // eyes
  double eye_y, eye_dx, w_e, h_left, h_right, pupil_r, pupil_dx, pupil_dy;
  // brows
  double brow_off, brow_y, brow_half_w, brow_half_h, brow_top_env;
  // nose
  double nose_y0, nose_len, nose_half_w;
  // mouth
  double mouth_half_h, corner_lift;
  // hair
  double hair_cut_y, fringe_bottom_y;

  FaceGeometry(const IdentityParams& id_, const ExpressionParams& exp_) : id(id_), exp(exp_) {
    ax = 0.30 * id.face_width;
    ay = 0.34 * id.face_height;
    eye_y = kCy - 0.26 * ay;
    eye_dx = id.eye_spacing * ax;
    w_e = std::min((1.1 * id.eye_size + 0.065) * ax, 0.18 * ay);
    h_left = kMaxApertureRatio * w_e * exp.eye_open_left;
    h_right = kMaxApertureRatio * w_e * exp.eye_open_right;
    pupil_r = 0.38 * w_e;
    pupil_dx = exp.pupil_x * 0.55 * (w_e - pupil_r);
    pupil_dy = exp.pupil_y * 0.225 * w_e;
    brow_off = kMaxApertureRatio * w_e + 0.12 * ay;
    brow_y = eye_y - brow_off - 0.06 * ay * exp.brow_raise;
    brow_half_w = 1.05 * w_e;
    brow_half_h = (0.016 + 0.022 * id.brow_thickness) * ay;
    brow_top_env = eye_y - kMaxApertureRatio * w_e - 0.218 * ay;  // over all expressions
    nose_y0 = 0.515;
    nose_len = 0.45 * id.nose_length + 0.025;
    nose_half_w = 0.006;
    mouth_half_h = kMouthOpenHalfH * exp.mouth_open;
    corner_lift = kMouthCornerLift * exp.mouth_smile;
    hair_cut_y = (kCy - 0.9 * ay) + id.hair_length * 1.5 * ay;
    fringe_bottom_y = brow_top_env - 0.006;
  }

  double eye_cx(bool left) const { return left ? kCx - eye_dx : kCx + eye_dx; }
  double aperture_h(bool left) const { return left ? h_left : h_right; }

  // elliptical radius: < 1 inside the head outline
  double r_ell(double u, double v) const {
    double dx = (u - kCx) / ax, dy = (v - kCy) / ay;
    return std::sqrt(dx * dx + dy * dy);
  }

  bool in_head(double u, double v) const { return r_ell(u, v) <= 1.0; }
  bool in_head_border(double u, double v) const {
    double r = r_ell(u, v);
    return r >= 0.96 && r <= 1.0;
  }
  bool in_hair(double u, double v) const {
    double r = r_ell(u, v);
    bool ring = r >= 0.97 && r <= 1.16 && v <= hair_cut_y;
    bool fringe = r <= 1.16 && v <= fringe_bottom_y;
    return ring || fringe;
  }
  bool in_aperture(double u, double v, bool left) const {
    double h = aperture_h(left);
    if (h <= 0.0) return false;
    double dx = (u - eye_cx(left)) / w_e, dy = (v - eye_y) / h;
    return dx * dx + dy * dy <= 1.0;
  }
  bool on_closed_lid(double u, double v, bool left) const {
    if (aperture_h(left) > 0.004) return false;
    return std::abs(u - eye_cx(left)) <= w_e && std::abs(v - eye_y) <= 0.004;
  }
  Vec2d pupil_center(bool left) const { return {eye_cx(left) + pupil_dx, eye_y + pupil_dy}; }
  bool in_pupil(double u, double v, bool left) const {
    Vec2d c = pupil_center(left);
    double dx = u - c.x(), dy = v - c.y();
    return dx * dx + dy * dy <= pupil_r * pupil_r && in_aperture(u, v, left);
  }
  bool in_brow(double u, double v, bool left) const {
    return std::abs(u - eye_cx(left)) <= brow_half_w && std::abs(v - brow_y) <= brow_half_h;
  }
  bool in_nose(double u, double v) const {
    return std::abs(u - kCx) <= nose_half_w && v >= nose_y0 && v <= nose_y0 + nose_len;
  }
  bool in_mouth_opening(double u, double v) const {
    if (mouth_half_h <= 1e-9) return false;
    double dx = (u - kCx) / (kMouthHalfW * 0.92), dy = (v - kMouthY) / mouth_half_h;
    return dx * dx + dy * dy <= 1.0;
  }
  // lip curve: parabola through the corners (lifted by the smile) and center
  bool on_lip_line(double u, double v) const {
    if (std::abs(u - kCx) > kMouthHalfW) return false;
    double s = (u - kCx) / kMouthHalfW;
    double yc = kMouthY - corner_lift * s * s;
    return std::abs(v - yc) <= kLipHalfThick;
  }
  // glasses frame: rectangular borders around each lens plus a nose bridge
  bool in_glasses_frame(double u, double v) const {
    if (!id.glasses) return false;
    const double lw = 1.45 * w_e, lh = 1.05 * w_e, th = 0.009;
    for (bool left : {true, false}) {
      double dx = std::abs(u - eye_cx(left)), dy = std::abs(v - eye_y);
      bool outer = dx <= lw && dy <= lh;
      bool inner = dx <= lw - th && dy <= lh - th;
      if (outer && !inner) return true;
    }
    double bridge_lo = eye_cx(true) + lw, bridge_hi = eye_cx(false) - lw;
    if (bridge_hi > bridge_lo && u >= bridge_lo && u <= bridge_hi && std::abs(v - eye_y) <= 0.0065)
      return true;
    return false;
  }

  // --- landmark closed forms ----------------------------------------------
  LandmarkSet landmarks() const {
    LandmarkSet L;
    double exl = eye_cx(true), exr = eye_cx(false);
    L.points[33] = {exl - w_e, eye_y};
    L.points[133] = {exl + w_e, eye_y};
    L.points[159] = {exl, eye_y - h_left};
    L.points[145] = {exl, eye_y + h_left};
    L.points[468] = pupil_center(true);
    L.points[362] = {exr - w_e, eye_y};
    L.points[263] = {exr + w_e, eye_y};
    L.points[386] = {exr, eye_y - h_right};
    L.points[374] = {exr, eye_y + h_right};
    L.points[473] = pupil_center(false);
    L.points[0] = {kCx, kMouthY - mouth_half_h};
    L.points[17] = {kCx, kMouthY + mouth_half_h};
    L.points[61] = {kCx - kMouthHalfW, kMouthY - corner_lift};
    L.points[291] = {kCx + kMouthHalfW, kMouthY - corner_lift};
    for (int i = 0; i < 16; ++i) {
      double th = 2.0 * M_PI * i / 16.0;
      L.contour[size_t(i)] = {kCx + ax * std::cos(th), kCy + ay * std::sin(th)};
    }
    return L;
  }

  // --- analytic regions -----------------------------------------------------
  // Expression-variable pixel zone for THIS identity: anything outside is
  // identity-only and must stay bit-stable when only the expression changes.
  bool in_expression_zone(double u, double v) const {
    for (bool left : {true, false}) {
      double ex = eye_cx(left);
      if (std::abs(u - ex) <= w_e + 0.01 &&
          std::abs(v - eye_y) <= kMaxApertureRatio * w_e + 0.01)
        return true;
      if (std::abs(u - ex) <= brow_half_w + 0.01) {
        double lo = eye_y - brow_off - 0.06 * ay - brow_half_h - 0.01;
        double hi = eye_y - brow_off + 0.06 * ay + brow_half_h + 0.01;
        if (v >= lo && v <= hi) return true;
      }
    }
    if (std::abs(u - kCx) <= kMouthHalfW + 0.01 &&
        std::abs(v - kMouthY) <=
            std::max(kMouthOpenHalfH, kMouthCornerLift + kLipHalfThick) + 0.01)
      return true;
    return false;
  }

  // Inner-face box covering eyes, brows, pupils and mouth for THIS identity
  // across ALL expressions (envelopes; never depends on `exp`). Corners may
  // leave the head outline; croppers compensate by radially clamping sample
  // points to kHeadInnerR, which only affects non-feature pixels.
  struct Box {
    double x0, y0, x1, y1;
  };
  Box expression_box() const {
    double xh = std::max(eye_dx + 1.2 * w_e + 0.012, kMouthHalfW + 0.025);
    double top = brow_top_env - 0.012;
    double bottom = kMouthY + kMouthOpenHalfH + kLipHalfThick + 0.022;
    return {kCx - xh, top, kCx + xh, bottom};
  }
};

// Fixed interior window (canvas-relative) used by estimators: rows [19,47) x
// cols [18,46) at 64x64. Contains all 14 ratio landmarks for every identity
// and expression, with >=1.3px margin at the extremes.
struct FixedWindow {
  static constexpr int kRow0 = 19, kRow1 = 47, kCol0 = 18, kCol1 = 46;
  static constexpr int kSize = 28;  // pixels at 64x64
};

}  // namespace emoji::synthworld
