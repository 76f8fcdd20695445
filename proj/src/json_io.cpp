#include "fluxsolve/json_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fluxsolve::json_io {

namespace {

void write_number(std::string& out, double v) {
  if (!std::isfinite(v)) throw NumericalError("json_io: non-finite number cannot be serialized");
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
  // keep the value typed as float on re-read
  std::string_view s(buf);
  if (s.find_first_of(".eEn") == std::string_view::npos) out += ".0";
}

void write_string(std::string& out, const std::string& s) {
  out += json(s).dump();
}

void write(std::string& out, const json& j) {
  switch (j.type()) {
    case json::value_t::object: {
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ',';
        first = false;
        write_string(out, it.key());
        out += ':';
        write(out, it.value());
      }
      out += '}';
      break;
    }
    case json::value_t::array: {
      out += '[';
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ',';
        write(out, j[i]);
      }
      out += ']';
      break;
    }
    case json::value_t::number_float:
      write_number(out, j.get<double>());
      break;
    default:
      out += j.dump();
  }
}

}  // namespace

std::string dump(const json& j) {
  std::string out;
  write(out, j);
  out += '\n';
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open for writing: " + path.string());
  os << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open: " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const json& j) { write_text(path, dump(j)); }

json read_file(const std::filesystem::path& path) {
  auto text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw CorruptionError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

json matrix_to_json(const Matrix& m) {
  json values = json::array();
  for (double v : m.data) values.push_back(v);
  return json{{"shape", {m.rows, m.cols}}, {"values", std::move(values)}};
}

Matrix matrix_from_json(const json& j) {
  try {
    auto shape = j.at("shape");
    std::size_t r = shape.at(0).get<std::size_t>();
    std::size_t c = shape.at(1).get<std::size_t>();
    auto values = j.at("values").get<std::vector<double>>();
    if (values.size() != r * c) throw CorruptionError("matrix: values do not match shape");
    return Matrix(r, c, std::move(values));
  } catch (const json::exception& e) {
    throw CorruptionError(std::string("matrix: ") + e.what());
  }
}

}  // namespace fluxsolve::json_io
