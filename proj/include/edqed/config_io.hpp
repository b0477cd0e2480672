#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include "edqed/errors.hpp"
#include "edqed/lattice.hpp"
#include "json.hpp"

namespace edqed {

using json = nlohmann::json;

namespace detail {

inline const json& require(const json& j, const char* key, const std::string& at) {
  if (!j.contains(key)) throw ParseError(std::string("missing key '") + key + "'", at);
  return j.at(key);
}

inline double get_number(const json& j, const char* key, const std::string& at) {
  const json& v = require(j, key, at);
  if (!v.is_number()) throw ParseError(std::string("expected number for '") + key + "'", at + "/" + key);
  return v.get<double>();
}

inline int get_int(const json& j, const char* key, const std::string& at) {
  const json& v = require(j, key, at);
  if (!v.is_number_integer()) throw ParseError(std::string("expected integer for '") + key + "'", at + "/" + key);
  return v.get<int>();
}

}  // namespace detail

inline json spec_to_json(const LatticeSpec& s) {
  json parts = json::array();
  for (const auto& p : s.particles) parts.push_back({{"mass", p.mass}, {"charge", p.charge}});
  return json{{"dim", s.dim},     {"sites", s.sites}, {"dx", s.dx},     {"particles", parts},
              {"levels", s.levels}, {"dA", s.dA},     {"hbar", s.hbar}, {"c", s.c},
              {"eta", s.eta},     {"periodic", s.periodic}, {"max_configs", s.max_configs}};
}

/// Parses a lattice block; `at` is the JSON pointer of the block, used in error positions.
inline LatticeSpec spec_from_json(const json& j, const std::string& at = "") {
  static const char* const kKeys[] = {"dim", "sites", "dx", "particles", "levels", "dA",
                                      "hbar", "c", "eta", "periodic", "max_configs"};
  if (!j.is_object()) throw ParseError("lattice block must be an object", at.empty() ? "/" : at);
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : kKeys) known = known || it.key() == k;
    if (!known) throw ParseError("unknown key '" + it.key() + "'", at + "/" + it.key());
  }
  LatticeSpec s;
  s.dim = detail::get_int(j, "dim", at);
  s.sites = detail::get_int(j, "sites", at);
  s.dx = detail::get_number(j, "dx", at);
  s.levels = detail::get_int(j, "levels", at);
  s.dA = detail::get_number(j, "dA", at);
  s.hbar = detail::get_number(j, "hbar", at);
  s.c = detail::get_number(j, "c", at);
  s.eta = detail::get_number(j, "eta", at);
  if (j.contains("periodic")) {
    if (!j["periodic"].is_boolean()) throw ParseError("expected boolean for 'periodic'", at + "/periodic");
    s.periodic = j["periodic"].get<bool>();
  }
  if (j.contains("max_configs")) {
    if (!j["max_configs"].is_number_unsigned())
      throw ParseError("expected positive integer for 'max_configs'", at + "/max_configs");
    s.max_configs = j["max_configs"].get<std::uint64_t>();
  }
  const json& parts = detail::require(j, "particles", at);
  if (!parts.is_array()) throw ParseError("expected array for 'particles'", at + "/particles");
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const std::string pat = at + "/particles/" + std::to_string(i);
    if (!parts[i].is_object()) throw ParseError("particle entry must be an object", pat);
    Particle p;
    p.mass = detail::get_number(parts[i], "mass", pat);
    p.charge = detail::get_number(parts[i], "charge", pat);
    s.particles.push_back(p);
  }
  try {
    s.validate();
  } catch (const InvalidSpec& e) {
    throw ParseError(e.what(), at.empty() ? "/" : at);
  }
  return s;
}

inline json parse_json_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what(), "byte " + std::to_string(e.byte));
  }
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file '" + path + "'", "");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json_text(ss.str());
}

/// FNV-1a over the canonical (sorted-key) JSON dump.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t spec_hash(const LatticeSpec& s) { return fnv1a(spec_to_json(s).dump()); }

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

}  // namespace edqed
