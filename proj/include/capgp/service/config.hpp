#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "capgp/error.hpp"

namespace capgp::service {

/// Service settings, read from a `key = value` file. Blank lines and lines
/// starting with '#' are ignored; unknown keys are rejected.
struct ServiceConfig {
  std::string bind_address = "127.0.0.1";
  int port = 8080;
  std::size_t grid_size = 50;
  std::size_t string_len = 8;
  std::size_t rounds = 1;
  std::int64_t challenge_ttl_seconds = 300;
  std::string image_dir;
  std::string admin_token;  // empty disables the attempts export
  std::string store_path = "capgp-store.jsonl";
  std::string static_dir;   // optional browser client assets
  std::size_t max_attempts = 3;
  std::int64_t lockout_seconds = 900;  // 0 = until an admin clears the store
  std::size_t max_inflight = 1;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename Int>
Int parse_int(std::string_view key, std::string_view value) {
  Int out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw Error(Errc::InvalidParams, "config key '" + std::string(key) + "' expects an integer, got '" +
                                         std::string(value) + "'");
  }
  return out;
}

}  // namespace detail

inline ServiceConfig parse_config(std::string_view text) {
  ServiceConfig cfg;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(Errc::InvalidParams, "config line " + std::to_string(line_no) + " is not key = value");
    }
    const auto key = detail::trim(line.substr(0, eq));
    const auto value = detail::trim(line.substr(eq + 1));
    using detail::parse_int;
    if (key == "port") cfg.port = parse_int<int>(key, value);
    else if (key == "bind_address") cfg.bind_address = value;
    else if (key == "grid_size") cfg.grid_size = parse_int<std::size_t>(key, value);
    else if (key == "string_len") cfg.string_len = parse_int<std::size_t>(key, value);
    else if (key == "rounds") cfg.rounds = parse_int<std::size_t>(key, value);
    else if (key == "challenge_ttl_seconds") cfg.challenge_ttl_seconds = parse_int<std::int64_t>(key, value);
    else if (key == "image_dir") cfg.image_dir = value;
    else if (key == "admin_token") cfg.admin_token = value;
    else if (key == "store_path") cfg.store_path = value;
    else if (key == "static_dir") cfg.static_dir = value;
    else if (key == "max_attempts") cfg.max_attempts = parse_int<std::size_t>(key, value);
    else if (key == "lockout_seconds") cfg.lockout_seconds = parse_int<std::int64_t>(key, value);
    else if (key == "max_inflight") cfg.max_inflight = parse_int<std::size_t>(key, value);
    else throw Error(Errc::InvalidParams, "unknown config key '" + std::string(key) + "'");
  }
  if (cfg.port < 0 || cfg.port > 65535) throw Error(Errc::InvalidParams, "port out of range");
  if (cfg.challenge_ttl_seconds <= 0) throw Error(Errc::InvalidParams, "challenge_ttl_seconds must be positive");
  if (cfg.max_attempts == 0) throw Error(Errc::InvalidParams, "max_attempts must be positive");
  return cfg;
}

inline ServiceConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot read config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

}  // namespace capgp::service
