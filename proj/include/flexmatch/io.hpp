#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <cstdlib>
#include <stdexcept>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "types.hpp"

namespace flexmatch {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// write to a sibling temp file then rename over the target
inline void write_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + tmp.string());
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    f.flush();
    if (!f) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("rename failed: " + target.string());
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InvalidParams("cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline nlohmann::json read_json_file(const std::string& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidParams("config " + path + ": " + e.what());
  }
}

// Header-plus-rows CSV (no quoting) to an array of objects; numeric cells become numbers.
inline nlohmann::json csv_to_json(const std::string& csv) {
  auto split = [](const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
      if (ch == ',') {
        out.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    out.push_back(cur);
    return out;
  };
  auto rows = nlohmann::json::array();
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line)) return rows;
  auto head = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split(line);
    nlohmann::json row = nlohmann::json::object();
    for (std::size_t i = 0; i < head.size() && i < cells.size(); ++i) {
      const std::string& v = cells[i];
      char* end = nullptr;
      double d = std::strtod(v.c_str(), &end);
      if (!v.empty() && end && *end == '\0')
        row[head[i]] = d;
      else if (v == "true" || v == "false")
        row[head[i]] = v == "true";
      else
        row[head[i]] = v;
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace flexmatch
