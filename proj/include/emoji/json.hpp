#pragma once

#include <json.hpp>

#include <string>

namespace emoji {

// Artifacts use insertion-ordered JSON so serialized bytes are reproducible.
using Json = nlohmann::ordered_json;

std::string read_text_file(const std::string& path);
// write-then-rename so readers never observe a partial artifact
void atomic_write_text(const std::string& path, const std::string& content);
void atomic_write_bytes(const std::string& path, const void* data, size_t n);

Json load_json(const std::string& path);
void save_json(const std::string& path, const Json& j);  // dump(2) + trailing newline

// Hash of the canonical (compact) dump; stamped into every artifact.
uint64_t json_hash(const Json& j);

bool file_exists(const std::string& path);
void ensure_dir(const std::string& path);  // mkdir -p

}  // namespace emoji
