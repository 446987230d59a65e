#include "emoji/json.hpp"

#include "emoji/common.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace emoji {

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_text_file: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void atomic_write_bytes(const std::string& path, const void* data, size_t n) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("atomic_write: cannot open " + tmp);
    out.write(static_cast<const char*>(data), std::streamsize(n));
    if (!out) throw std::runtime_error("atomic_write: short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

void atomic_write_text(const std::string& path, const std::string& content) {
  atomic_write_bytes(path, content.data(), content.size());
}

Json load_json(const std::string& path) { return Json::parse(read_text_file(path)); }

void save_json(const std::string& path, const Json& j) {
  atomic_write_text(path, j.dump(2) + "\n");
}

uint64_t json_hash(const Json& j) { return fnv1a(j.dump()); }

bool file_exists(const std::string& path) { return std::filesystem::exists(path); }

void ensure_dir(const std::string& path) { std::filesystem::create_directories(path); }

}  // namespace emoji
