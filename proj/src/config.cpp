#include "mmgr/config.hpp"

#include "mmgr/error.hpp"
#include "mmgr/table.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace mmgr {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::size_t line, std::string_view key, std::string_view value) {
  fail(ErrorCode::validation,
       "config line " + std::to_string(line) + ": bad value for " + std::string(key) + ": " + std::string(value),
       Json{{"line", line}, {"key", key}});
}

double number(std::size_t line, std::string_view key, std::string_view value, double min) {
  double v = 0.0;
  if (!parse_decimal(value, v) || v < min) bad_value(line, key, value);
  return v;
}

std::uint64_t integer(std::size_t line, std::string_view key, std::string_view value, std::uint64_t min,
                      std::uint64_t max) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || p != value.data() + value.size() || v < min || v > max) bad_value(line, key, value);
  return v;
}

}  // namespace

Config Config::parse(std::string_view text) {
  Config c;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      fail(ErrorCode::validation, "config line " + std::to_string(line_no) + ": expected key = value",
           Json{{"line", line_no}});
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key == "data_dir") {
      if (value.empty()) bad_value(line_no, key, value);
      c.data_dir = std::string(value);
    } else if (key == "host") {
      if (value.empty()) bad_value(line_no, key, value);
      c.host = std::string(value);
    } else if (key == "port") {
      c.port = static_cast<int>(integer(line_no, key, value, 0, 65535));
    } else if (key == "gate.epsilon") {
      c.gate.epsilon = number(line_no, key, value, 0.0);
    } else if (key == "gate.abs_factor") {
      c.gate.abs_factor = number(line_no, key, value, 0.0);
    } else if (key == "gate.abs_floor") {
      c.gate.abs_floor = number(line_no, key, value, 0.0);
    } else if (key == "drift.delta_factor") {
      c.drift.delta_factor = number(line_no, key, value, 0.0);
    } else if (key == "drift.lambda_factor") {
      c.drift.lambda_factor = number(line_no, key, value, 0.0);
      if (c.drift.lambda_factor == 0.0) bad_value(line_no, key, value);
    } else if (key == "drift.min_scale") {
      c.drift.min_scale = number(line_no, key, value, 0.0);
      if (c.drift.min_scale == 0.0) bad_value(line_no, key, value);
    } else if (key == "jobs.tuning_window") {
      c.jobs.tuning_window = integer(line_no, key, value, 1, 1'000'000);
    } else if (key == "jobs.tune_lambda") {
      c.jobs.tune_lambda = number(line_no, key, value, 0.0);
    } else if (key == "jobs.tune_tau") {
      c.jobs.tune_tau = number(line_no, key, value, 0.0);
    } else if (key == "jobs.worker_count") {
      c.jobs.worker_count = static_cast<unsigned>(integer(line_no, key, value, 0, 64));
    } else {
      fail(ErrorCode::validation, "config line " + std::to_string(line_no) + ": unknown key " + std::string(key),
           Json{{"line", line_no}, {"key", key}});
    }
  }
  return c;
}

Config Config::load(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) not_found("config file", file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void Config::apply_environment() {
  if (const char* dir = std::getenv("MMGR_DATA_DIR"); dir && *dir) data_dir = dir;
}

}  // namespace mmgr
