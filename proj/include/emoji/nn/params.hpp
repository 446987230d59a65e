#pragma once

#include "emoji/json.hpp"
#include "emoji/nn/tape.hpp"

#include <cstring>
#include <map>

namespace emoji::nn {

// Named parameter bank. std::map keeps iteration order deterministic, which
// makes optimizer updates, fingerprints and checkpoints reproducible.
template <typename S>
struct ParamStore {
  struct Entry {
    MatX<S> w, m, v;  // weights + Adam moments
    bool trainable = true;
  };
  std::map<std::string, Entry> entries;
  long adam_t = 0;

  bool has(const std::string& name) const { return entries.count(name) != 0; }

  MatX<S>& create(const std::string& name, MatX<S> init) {
    if (has(name)) throw std::logic_error("param exists: " + name);
    Entry e;
    e.w = std::move(init);
    return entries.emplace(name, std::move(e)).first->second.w;
  }

  Entry& at(const std::string& name) {
    auto it = entries.find(name);
    if (it == entries.end()) throw std::out_of_range("no param: " + name);
    return it->second;
  }
  const Entry& at(const std::string& name) const {
    auto it = entries.find(name);
    if (it == entries.end()) throw std::out_of_range("no param: " + name);
    return it->second;
  }

  void set_trainable(const std::string& prefix, bool flag) {
    for (auto& [k, e] : entries)
      if (k.rfind(prefix, 0) == 0) e.trainable = flag;
  }
  void set_all_trainable(bool flag) {
    for (auto& [k, e] : entries) e.trainable = flag;
  }

  size_t count_scalars(const std::string& prefix = "") const {
    size_t n = 0;
    for (const auto& [k, e] : entries)
      if (k.rfind(prefix, 0) == 0) n += size_t(e.w.size());
    return n;
  }

  // Order- and value-sensitive digest over all params under prefix. Weights
  // are hashed as float32 so fingerprints match what checkpoints store.
  uint64_t fingerprint(const std::string& prefix = "") const {
    uint64_t h = 1469598103934665603ull;
    for (const auto& [k, e] : entries) {
      if (k.rfind(prefix, 0) != 0) continue;
      h = fnv1a(k, h);
      int64_t dims[2] = {e.w.rows(), e.w.cols()};
      h = fnv1a(dims, sizeof dims, h);
      for (Eigen::Index c = 0; c < e.w.cols(); ++c)
        for (Eigen::Index r = 0; r < e.w.rows(); ++r) {
          float f = float(e.w(r, c));
          h = fnv1a(&f, sizeof f, h);
        }
    }
    return h;
  }

  void adam_step(const std::map<std::string, MatX<S>>& grads, S lr, S beta1, S beta2,
                 S eps = S(1e-8)) {
    ++adam_t;
    S c1 = S(1) - std::pow(beta1, S(adam_t));
    S c2 = S(1) - std::pow(beta2, S(adam_t));
    for (const auto& [name, g] : grads) {
      Entry& e = at(name);
      if (!e.trainable) continue;
      if (e.m.size() == 0) {
        e.m = MatX<S>::Zero(e.w.rows(), e.w.cols());
        e.v = MatX<S>::Zero(e.w.rows(), e.w.cols());
      }
      e.m = beta1 * e.m + (S(1) - beta1) * g;
      e.v = (beta2 * e.v.array() + (S(1) - beta2) * g.array().square()).matrix();
      e.w.array() -= lr * (e.m.array() / c1) / ((e.v.array() / c2).sqrt() + eps);
    }
  }

  void save(const std::string& path, Json meta = Json::object()) const {
    Json header;
    header["magic"] = "EMJP1";
    header["meta"] = std::move(meta);
    Json plist = Json::array();
    std::string payload;
    for (const auto& [k, e] : entries) {
      plist.push_back(Json{{"name", k},
                           {"rows", e.w.rows()},
                           {"cols", e.w.cols()},
                           {"trainable", e.trainable}});
      for (Eigen::Index c = 0; c < e.w.cols(); ++c)
        for (Eigen::Index r = 0; r < e.w.rows(); ++r) {
          float f = float(e.w(r, c));
          payload.append(reinterpret_cast<const char*>(&f), sizeof f);
        }
    }
    header["params"] = std::move(plist);
    header["fingerprint"] = hex64(fingerprint());
    std::string hs = header.dump();
    uint32_t hl = uint32_t(hs.size());
    std::string blob;
    blob.reserve(4 + hs.size() + payload.size());
    blob.append(reinterpret_cast<const char*>(&hl), 4);
    blob += hs;
    blob += payload;
    atomic_write_bytes(path, blob.data(), blob.size());
  }

  static ParamStore load(const std::string& path, Json* meta_out = nullptr) {
    std::string blob = read_text_file(path);
    if (blob.size() < 4) throw std::runtime_error("checkpoint truncated: " + path);
    uint32_t hl;
    std::memcpy(&hl, blob.data(), 4);
    if (blob.size() < 4 + size_t(hl)) throw std::runtime_error("checkpoint truncated: " + path);
    Json header = Json::parse(blob.substr(4, hl));
    if (header.value("magic", "") != std::string("EMJP1"))
      throw std::runtime_error("bad checkpoint magic in " + path);
    ParamStore ps;
    size_t off = 4 + hl;
    for (const auto& p : header["params"]) {
      Eigen::Index rows = p["rows"], cols = p["cols"];
      MatX<S> w(rows, cols);
      size_t need = size_t(rows) * size_t(cols) * sizeof(float);
      if (off + need > blob.size()) throw std::runtime_error("checkpoint payload short: " + path);
      const float* src = reinterpret_cast<const float*>(blob.data() + off);
      for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) w(r, c) = S(src[c * rows + r]);
      off += need;
      Entry e;
      e.w = std::move(w);
      e.trainable = p.value("trainable", true);
      ps.entries.emplace(p["name"].get<std::string>(), std::move(e));
    }
    std::string fp = header.value("fingerprint", "");
    if (!fp.empty() && fp != hex64(ps.fingerprint()))
      throw std::runtime_error("checkpoint fingerprint mismatch: " + path);
    if (meta_out) *meta_out = header["meta"];
    return ps;
  }
};

// Binds store parameters onto a tape as leaves, once per tape lifetime.
// With train=false every leaf is constant, so forward passes build no
// gradient closures for the frozen model (teachers, samplers).
template <typename S>
struct Binder {
  Tape<S>* tape = nullptr;
  ParamStore<S>* store = nullptr;
  bool train = false;
  std::map<std::string, int> bound;

  Binder(Tape<S>& t, ParamStore<S>& s, bool train_) : tape(&t), store(&s), train(train_) {}

  int operator()(const std::string& name) {
    auto it = bound.find(name);
    if (it != bound.end()) return it->second;
    auto& e = store->at(name);
    int id = tape->leaf(e.w, train && e.trainable);
    bound.emplace(name, id);
    return id;
  }

  // Gather d(loss)/d(param) for every bound trainable leaf after backward().
  std::map<std::string, MatX<S>> grads() const {
    std::map<std::string, MatX<S>> out;
    for (const auto& [name, id] : bound) {
      if (!tape->rg(id)) continue;
      if (tape->has_grad(id))
        out[name] = tape->grad(id);
      else
        out[name] = MatX<S>::Zero(tape->val(id).rows(), tape->val(id).cols());
    }
    return out;
  }
};

// --------------------------------------------------------------------------
// init helpers

template <typename S>
MatX<S> he_init(Rng& rng, Eigen::Index rows, Eigen::Index cols, double fan_in) {
  return rng.normal_mat<S>(rows, cols, std::sqrt(2.0 / fan_in));
}

template <typename S>
void create_conv(ParamStore<S>& ps, Rng& rng, const std::string& name, int Co, int Ci, int k,
                 bool zero = false) {
  Eigen::Index cols = Eigen::Index(Ci) * k * k;
  ps.create(name + ".w", zero ? MatX<S>::Zero(Co, cols)
                              : he_init<S>(rng, Co, cols, double(cols)));
  ps.create(name + ".b", MatX<S>::Zero(Co, 1));
}

template <typename S>
void create_linear(ParamStore<S>& ps, Rng& rng, const std::string& name, int out, int in,
                   bool zero = false) {
  ps.create(name + ".w", zero ? MatX<S>::Zero(out, in) : he_init<S>(rng, out, in, double(in)));
  ps.create(name + ".b", MatX<S>::Zero(out, 1));
}

template <typename S>
void create_gain(ParamStore<S>& ps, const std::string& name, int C) {
  ps.create(name, MatX<S>::Ones(C, 1));
}

// Matrix without bias (attention projections).
template <typename S>
void create_matrix(ParamStore<S>& ps, Rng& rng, const std::string& name, int rows, int cols,
                   bool zero = false) {
  ps.create(name, zero ? MatX<S>::Zero(rows, cols) : he_init<S>(rng, rows, cols, double(cols)));
}

}  // namespace emoji::nn
