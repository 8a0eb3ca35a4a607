#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "amrdia/amr.hpp"
#include "amrdia/error.hpp"

namespace fixtures {

inline std::string data_path(const std::string& name) { return std::string(AMRDIA_TEST_DATA) + "/" + name; }
inline std::string config_path(const std::string& name) { return std::string(AMRDIA_CONFIGS) + "/" + name; }

inline std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing fixture " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<std::string> valid_penman() { return amrdia::amr::split_penman_blocks(slurp(data_path("penman_valid.txt"))); }

struct Malformed {
  std::string expected;
  std::string text;
};

// "<ErrorCode name>\t<penman>" per line; '#' lines are comments.
inline std::vector<Malformed> malformed_penman() {
  std::istringstream in(slurp(data_path("penman_malformed.tsv")));
  std::vector<Malformed> out;
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    out.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  return out;
}

// Name of the error raised by parse_penman, or "" if it parsed.
inline std::string parse_error_name(const std::string& text) {
  try {
    amrdia::amr::parse_penman(text);
  } catch (const amrdia::Error& e) {
    return std::string(amrdia::to_string(e.code()));
  }
  return "";
}

}  // namespace fixtures
