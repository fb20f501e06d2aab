#pragma once

#include "aet/error.hpp"
#include "aet/phantom.hpp"
#include "aet/reconstruction.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace aet {

// Invalid or inconsistent experiment configuration (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Flat key/value configuration with dotted keys. Accepts `key = value`
/// lines, `[section]` headers that prefix subsequent keys, `#` comments and
/// optionally quoted values.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in, const std::string& source = "<config>");
  static KeyValueConfig load(const std::filesystem::path& path);

  // `key=value` override, as given on the command line.
  void set(const std::string& assignment);
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

struct ExperimentConfig {
  double fine_h = 0.05;
  double recon_h = 0.1;
  std::string fine_path;   // MSH file; overrides fine_h when set
  std::string recon_path;  // MSH file; overrides recon_h when set
  std::string phantom = "shapes";
  std::vector<int> fluxes{1, 2, 3};
  NoiseSpec noise{0.01, 1};
  NoiseStage noise_stage = NoiseStage::Fine;
  MaskSpec mask;
  ReconConfig recon;
  double sigma0 = 1.0;
  std::string output_dir = "out";
  std::string data_dir;  // defaults to output_dir

  /// Converts and validates; unknown keys and bad values throw ConfigError.
  static ExperimentConfig from(const KeyValueConfig& kv);

  std::string effective_data_dir() const { return data_dir.empty() ? output_dir : data_dir; }

  // Canonical `key = value` listing of every setting.
  std::string echo() const;
};

}  // namespace aet
