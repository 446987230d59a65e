#include "emoji/synthworld/dataset.hpp"

#include <filesystem>
#include <fstream>

namespace emoji::synthworld {

Json record_to_json(const TripletRecord& r) {
  Json j;
  j["record_id"] = r.record_id;
  j["stage"] = r.stage;
  j["identity_id_S"] = r.identity_id_S;
  j["identity_id_R"] = r.identity_id_R;
  j["identity_id_D"] = r.identity_id_D;
  j["expression_id_S"] = r.expression_id_S;
  j["expression_id_R"] = r.expression_id_R;
  j["expression_id_D"] = r.expression_id_D;
  j["image_path_S"] = r.image_path_S;
  j["image_path_R"] = r.image_path_R;
  j["image_path_D"] = r.image_path_D;
  j["landmark_path"] = r.landmark_path;
  j["blendshape_path"] = r.blendshape_path;
  return j;
}

TripletRecord record_from_json(const Json& j) {
  TripletRecord r;
  r.record_id = j.at("record_id").get<int64_t>();
  r.stage = j.at("stage").get<std::string>();
  r.identity_id_S = j.at("identity_id_S").get<int64_t>();
  r.identity_id_R = j.at("identity_id_R").get<int64_t>();
  r.identity_id_D = j.at("identity_id_D").get<int64_t>();
  r.expression_id_S = j.at("expression_id_S").get<int64_t>();
  r.expression_id_R = j.at("expression_id_R").get<int64_t>();
  r.expression_id_D = j.at("expression_id_D").get<int64_t>();
  r.image_path_S = j.at("image_path_S").get<std::string>();
  r.image_path_R = j.at("image_path_R").get<std::string>();
  r.image_path_D = j.at("image_path_D").get<std::string>();
  r.landmark_path = j.at("landmark_path").get<std::string>();
  r.blendshape_path = j.at("blendshape_path").get<std::string>();
  return r;
}

void write_manifest(const std::string& path, const std::vector<TripletRecord>& recs) {
  std::string out;
  for (const auto& r : recs) {
    out += record_to_json(r).dump();
    out += '\n';
  }
  atomic_write_text(path, out);
}

std::vector<TripletRecord> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path);
  std::vector<TripletRecord> recs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    recs.push_back(record_from_json(Json::parse(line)));
  }
  return recs;
}

Json landmarks_to_json(const LandmarkSet& L) {
  Json pts = Json::array();
  for (const auto& [idx, p] : L.points) pts.push_back(Json::array({idx, p.x(), p.y()}));
  Json contour = Json::array();
  for (const auto& p : L.contour) contour.push_back(Json::array({p.x(), p.y()}));
  Json j;
  j["points"] = pts;
  j["contour"] = contour;
  return j;
}

LandmarkSet landmarks_from_json(const Json& j) {
  LandmarkSet L;
  for (const auto& e : j.at("points"))
    L.points[e.at(0).get<int>()] = Vec2d(e.at(1).get<double>(), e.at(2).get<double>());
  const auto& c = j.at("contour");
  if (c.size() != L.contour.size()) throw std::runtime_error("landmark json: bad contour size");
  for (size_t i = 0; i < L.contour.size(); ++i)
    L.contour[i] = Vec2d(c.at(i).at(0).get<double>(), c.at(i).at(1).get<double>());
  return L;
}

Json blendshapes_to_json(const BlendshapeVector& b) {
  Json arr = Json::array();
  for (int i = 0; i < 52; ++i) arr.push_back(b.values[i]);
  return arr;
}

BlendshapeVector blendshapes_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 52) throw std::runtime_error("blendshape json: need 52 values");
  BlendshapeVector b;
  for (int i = 0; i < 52; ++i) b.values[i] = j.at(size_t(i)).get<double>();
  return b;
}

std::vector<TripletRecord> build_same_id_triplets(int n_ids, int exprs_per_id, int64_t seed,
                                                  const std::string& out_dir) {
  if (exprs_per_id < 2)
    throw std::invalid_argument("build_same_id_triplets: exprs_per_id must be >= 2");
  if (n_ids < 1) throw std::invalid_argument("build_same_id_triplets: n_ids must be >= 1");
  namespace fs = std::filesystem;
  ensure_dir(out_dir);
  ensure_dir(out_dir + "/images");
  ensure_dir(out_dir + "/ann");

  auto ids = sample_identity_pool(n_ids, seed);
  std::vector<ExpressionParams> exprs;
  for (int g = 0; g < exprs_per_id; ++g)
    exprs.push_back(sample_expression(expression_slot_seed(seed, g)));

  // Render each (k,g) once; same file serves as R and D of same_id records.
  std::vector<std::vector<std::string>> img(ids.size());
  std::vector<std::vector<std::string>> lm(ids.size()), bs(ids.size());
  for (size_t k = 0; k < ids.size(); ++k) {
    img[k].resize(exprs.size());
    lm[k].resize(exprs.size());
    bs[k].resize(exprs.size());
    for (size_t g = 0; g < exprs.size(); ++g) {
      std::string stem = "id" + std::to_string(ids[k].identity_id) + "_ex" +
                         std::to_string(exprs[g].expression_id);
      img[k][g] = out_dir + "/images/" + stem + ".png";
      lm[k][g] = out_dir + "/ann/" + stem + "_landmarks.json";
      bs[k][g] = out_dir + "/ann/" + stem + "_blendshapes.json";
      save_png(render_face(FaceGeometry(ids[k], exprs[g])), img[k][g]);
      save_json(lm[k][g], landmarks_to_json(oracle_landmarks(ids[k], exprs[g])));
      save_json(bs[k][g], blendshapes_to_json(oracle_blendshapes(exprs[g])));
    }
  }

  std::vector<TripletRecord> recs;
  int64_t rid = 0;
  for (size_t k = 0; k < ids.size(); ++k)
    for (size_t g = 0; g < exprs.size(); ++g)
      for (size_t gp = 0; gp < exprs.size(); ++gp) {
        if (gp == g) continue;
        TripletRecord r;
        r.record_id = rid++;
        r.stage = "same_id";
        r.identity_id_S = r.identity_id_R = r.identity_id_D = ids[k].identity_id;
        r.expression_id_S = exprs[gp].expression_id;
        r.expression_id_R = r.expression_id_D = exprs[g].expression_id;
        r.image_path_S = img[k][gp];
        r.image_path_R = img[k][g];
        r.image_path_D = img[k][g];
        r.landmark_path = lm[k][g];
        r.blendshape_path = bs[k][g];
        recs.push_back(r);
      }
  write_manifest(out_dir + "/manifest.jsonl", recs);
  return recs;
}

}  // namespace emoji::synthworld
