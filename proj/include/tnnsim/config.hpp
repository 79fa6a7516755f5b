#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "tnnsim/array.hpp"
#include "tnnsim/device.hpp"
#include "tnnsim/pcsa.hpp"
#include "tnnsim/trainer.hpp"

namespace tnnsim::config {

struct KeyInfo {
  const char* key;  ///< "section.name"
  const char* default_value;
  const char* help;
};

/// Every accepted key with its default.
const std::vector<KeyInfo>& known_keys();

/// Experiment configuration: INI-style text with [section] headers and
/// `name = value` lines; `#` and `;` start comments. Keys are stored as
/// "section.name"; unknown keys and malformed lines throw ConfigError.
class Config {
 public:
  static Config parse(std::istream& in);
  static Config parse_text(const std::string& text);
  static Config load(const std::filesystem::path& path);

  /// Override from "section.name=value".
  void set_assignment(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  /// Explicit value or the documented default.
  std::string get(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key) const;

  /// Every key with its effective value, sorted, one "key=value" per line.
  std::string canonical() const;
  /// FNV-1a 64 of canonical().
  std::uint64_t hash() const;

 private:
  std::map<std::string, std::string> values_;
};

device::ProgrammingProfile programming_profile(const Config& c);
/// Built-in calibrated set for pcsa.vdd (or pcsa.params_file if set), with
/// pcsa.jitter_sigma applied.
pcsa::PcsaParams pcsa_params(const Config& c);
array::ReadConfig read_config(const Config& c);
train::TrainConfig train_config(const Config& c);

/// `[pcsa]` section text that parse() accepts back via pcsa.params_file.
void write_params_file(std::ostream& out, const pcsa::PcsaParams& p);
pcsa::PcsaParams read_params_file(const std::filesystem::path& path);

}  // namespace tnnsim::config
