// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

// Flat key-value run configuration. Every key is registered with a default
// and a one-line description; anything else is rejected. Values are stored
// as strings and parsed on access, so the fully-resolved document can be
// echoed byte-for-byte into the run directory.
namespace robustnmt {

struct ConfigKey {
  const char* name;
  const char* preset;  // default value, as written
  const char* doc;
};

class RunConfig {
 public:
  RunConfig();  // starts from the registered defaults

  static const std::vector<ConfigKey>& registry();
  static bool known(const std::string& key);

  // Environment variable mirroring a key: dots and dashes become
  // underscores, letters are uppercased, and the RNMT_ prefix is added
  // (train.lr-schedule -> RNMT_TRAIN_LR_SCHEDULE).
  static std::string env_name(const std::string& key);

  // Layering, lowest to highest: defaults, file, environment, --set.
  // apply_file reads "key = value" lines; blank lines and lines starting
  // with '#' are skipped. apply_env consults the mirror variable of every
  // registered key. apply_set takes one "key=value" assignment.
  void apply_file(const std::string& path);
  void apply_env();
  void apply_set(const std::string& assignment);

  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;

  std::int64_t get_int(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;  // true/false/yes/no/1/0

  // The resolved document: one "key = value" line per key, sorted by key.
  std::string resolved() const;

  // Registry rendered as "key (default) description" lines, for --help.
  static std::string documentation();

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace robustnmt
