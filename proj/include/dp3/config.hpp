#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "dp3/env.hpp"
#include "dp3/policy.hpp"

namespace dp3 {

// Experiment configuration backed by a published schema of dotted keys.
//
// File format:
//
//   # comment to end of line
//   seed = 7
//   env {
//     observation_mode = cloud
//     crop_min = 0, 0, 0.01     # triples are comma-separated
//   }
//   demos.count = 10            # dotted form, same as a section entry
//
// Sections are one level deep and group keys by their prefix; a short section
// also fits on one line, `env { fps_count = 128 }`. Every key must
// appear in the schema; values are parsed per the schema type and checked
// against the schema range. Unknown keys, duplicates, malformed values, and
// out-of-range values all fail with the offending location.

enum class ConfigType { boolean, integer, real, enumeration, vec3, int_list, target_list };

struct SchemaEntry {
  std::string key;
  ConfigType type;
  std::string default_text;
  double min = 0.0;  // inclusive bounds, applied to integer/real values and
  double max = 0.0;  // to every element of an int_list
  std::vector<std::string> choices;  // enumeration only
  std::string doc;
};

using ConfigValue = std::variant<bool, long long, double, std::string, Vec3,
                                std::vector<long long>, std::vector<Vec3>>;

class ExperimentConfig {
public:
  static const std::vector<SchemaEntry>& schema();
  static const SchemaEntry& schema_entry(const std::string& key);
  static std::string help_text();

  static ExperimentConfig defaults();
  static ExperimentConfig parse_file(const std::string& path);
  static ExperimentConfig parse_text(const std::string& text, const std::string& source = "config");

  // Validates and stores one value; `where` names the source for error
  // messages. Marks the key as explicitly set.
  void set(const std::string& key, const std::string& value_text, const std::string& where = "");
  void apply_override(const std::string& spec);  // "dotted.key=value"

  bool get_bool(const std::string& key) const;
  long long get_int(const std::string& key) const;
  double get_real(const std::string& key) const;
  const std::string& get_enum(const std::string& key) const;
  const Vec3& get_vec3(const std::string& key) const;
  const std::vector<long long>& get_int_list(const std::string& key) const;
  const std::vector<Vec3>& get_targets(const std::string& key) const;

  bool explicitly_set(const std::string& key) const { return explicit_.count(key) > 0; }

  // Resolved dump in schema order: parseable, deterministic, defaults
  // materialized. Run directories keep one of these.
  std::string serialize() const;

  std::uint64_t seed() const;
  Reach3dConfig env_config() const;
  PolicyConfig policy_config() const;  // validated before returning
  TrainConfig train_config() const;
  std::vector<Vec3> demo_targets() const;
  std::vector<Vec3> eval_targets() const;

private:
  const ConfigValue& value(const std::string& key) const;

  std::map<std::string, ConfigValue> values_;
  std::set<std::string> explicit_;
};

// Seed precedence: an explicit `seed` key wins; otherwise the DP3_SEED
// environment variable, when present, is applied as if written in the file.
void apply_env_seed(ExperimentConfig& cfg);

}  // namespace dp3
