#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include "aqua/errors.hpp"
#include "aqua/training.hpp"

// Flat key=value run configuration. Blank lines and lines starting with '#'
// are ignored; unknown keys are rejected; missing keys take the defaults
// below. Keys:
//   lr, batch, epochs, input_size, seed, loss, ablation, base_channels,
//   data (dataset root), out (output directory).

namespace aqua {

struct RunConfig {
  TrainConfig train;
  std::string data;         // dataset root; required for training
  std::string out = "run";  // output directory
};

namespace config_detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream is(value);
  T v{};
  is >> v;
  if (is.fail() || !is.eof()) {
    throw ConfigError("key '" + key + "' has a malformed value '" + value + "'");
  }
  return v;
}

}  // namespace config_detail

inline RunConfig parse_run_config_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream lines(text);
  std::string line;
  int lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    const std::string t = config_detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + " is not key=value: '" + t + "'");
    }
    const std::string key = config_detail::trim(t.substr(0, eq));
    const std::string value = config_detail::trim(t.substr(eq + 1));
    if (key == "lr") {
      cfg.train.lr = config_detail::parse_number<double>(key, value);
      if (!(cfg.train.lr > 0)) throw ConfigError("lr must be positive");
    } else if (key == "batch") {
      cfg.train.batch = config_detail::parse_number<int>(key, value);
      if (cfg.train.batch < 1) throw ConfigError("batch must be >= 1");
    } else if (key == "epochs") {
      cfg.train.epochs = config_detail::parse_number<int>(key, value);
      if (cfg.train.epochs < 0) throw ConfigError("epochs must be >= 0");
    } else if (key == "input_size") {
      cfg.train.input_size = config_detail::parse_number<int>(key, value);
      if (cfg.train.input_size < 8 || cfg.train.input_size % 8 != 0) {
        throw ConfigError("input_size must be a positive multiple of 8");
      }
    } else if (key == "seed") {
      cfg.train.seed = config_detail::parse_number<std::uint64_t>(key, value);
    } else if (key == "loss") {
      if (value != "l1") throw ConfigError("loss must be 'l1'");
      cfg.train.loss = value;
    } else if (key == "ablation") {
      const auto a = parse_ablation(value);
      if (!a) {
        throw ConfigError("ablation must be one of base, base+freq, base+illum, full");
      }
      cfg.train.ablation = *a;
    } else if (key == "base_channels") {
      cfg.train.base_channels = config_detail::parse_number<int>(key, value);
      if (cfg.train.base_channels < 1) throw ConfigError("base_channels must be >= 1");
    } else if (key == "data") {
      cfg.data = value;
    } else if (key == "out") {
      cfg.out = value;
    } else {
      throw ConfigError("unknown key '" + key + "'");
    }
  }
  return cfg;
}

inline RunConfig parse_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config '" + path + "'");
  std::ostringstream buf;
  buf << f.rdbuf();
  try {
    return parse_run_config_text(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(e.what()).substr(8) + " (in '" + path + "')");
  }
}

}  // namespace aqua
