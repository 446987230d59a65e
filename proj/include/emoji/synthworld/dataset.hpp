#pragma once

#include "emoji/json.hpp"
#include "emoji/synthworld/render.hpp"

#include <vector>

namespace emoji::synthworld {

// One training triplet: S carries the identity cue (same person, different
// expression), R is the expression reference, D the denoising target.
struct TripletRecord {
  int64_t record_id = -1;
  std::string stage;  // "same_id" or "cross_id"
  int64_t identity_id_S = -1, identity_id_R = -1, identity_id_D = -1;
  int64_t expression_id_S = -1, expression_id_R = -1, expression_id_D = -1;
  std::string image_path_S, image_path_R, image_path_D;
  std::string landmark_path, blendshape_path;  // annotations for R
};

Json record_to_json(const TripletRecord& r);
TripletRecord record_from_json(const Json& j);

// JSONL, one record per line, atomic write; stable bytes for fixed input.
void write_manifest(const std::string& path, const std::vector<TripletRecord>& recs);
std::vector<TripletRecord> read_manifest(const std::string& path);

Json landmarks_to_json(const LandmarkSet& L);
LandmarkSet landmarks_from_json(const Json& j);
Json blendshapes_to_json(const BlendshapeVector& b);
BlendshapeVector blendshapes_from_json(const Json& j);

// Same-identity triplets: identities drawn as a separated pool starting at
// `seed`, expressions shared across identities (seed+500000+g for slot g).
// Every (k,g) pairs with every g' != g, so n_ids * E * (E-1) records; R and D
// coincide (same image file). Renders PNGs and R's annotations under out_dir
// and writes out_dir/manifest.jsonl. exprs_per_id < 2 is rejected.
std::vector<TripletRecord> build_same_id_triplets(int n_ids, int exprs_per_id, int64_t seed,
                                                  const std::string& out_dir);

// Deterministic per-slot expression seed used by dataset builders.
inline int64_t expression_slot_seed(int64_t seed, int g) { return seed + 500000 + g; }

}  // namespace emoji::synthworld
