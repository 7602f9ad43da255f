#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "triage/error.hpp"

namespace triage::util {

using Json = nlohmann::json;

// Parses a JSON document; parse failures become SchemaError carrying
// "<origin>:<line>:<column>".
Json parse_json(const std::string& text, const std::string& origin);
Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& doc,
                     int indent = 2);

// JSON Lines. Blank lines are skipped.
std::vector<Json> read_jsonl(const std::filesystem::path& path);
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const Json&)>& fn);
void write_jsonl(const std::filesystem::path& path,
                 const std::vector<Json>& rows);

// CBOR-encoded documents for model files.
void write_cbor_file(const std::filesystem::path& path, const Json& doc);
Json read_cbor_file(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path,
                     const std::string& content);

std::string sha256_hex(const std::string& bytes);

// Typed field access with a readable error on missing/mistyped fields.
template <typename T>
T get_field(const Json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw SchemaError(where + ": missing field \"" + key + "\"");
  }
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(where + ": field \"" + key +
                                "\" has wrong type");
  }
}

}  // namespace triage::util
