#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "fluxsolve/common.hpp"

namespace fluxsolve::json_io {

using nlohmann::json;

// Serializes with every floating-point number printed at 17 significant
// digits ("%.17g"), so text -> double -> text is bit-stable. Compact output,
// trailing newline.
std::string dump(const json& j);

void write_file(const std::filesystem::path& path, const json& j);
json read_file(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const json& j);

}  // namespace fluxsolve::json_io
