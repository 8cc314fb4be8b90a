#pragma once

#include <filesystem>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "bedsal/dataio.hpp"
#include "bedsal/evalkit.hpp"
#include "bedsal/features.hpp"
#include "bedsal/model.hpp"

namespace bedsal::config {

enum class Kind { Int, Real, Bool, Choice, Text };

struct KeySpec {
  std::string key;
  Kind kind = Kind::Text;
  std::string fallback;
  std::string help;
  double min = -std::numeric_limits<double>::infinity();
  double max = std::numeric_limits<double>::infinity();
  bool min_exclusive = false;
  std::vector<std::string> choices;
};

/// Every recognized key, in documentation order.
const std::vector<KeySpec>& schema();
const KeySpec* find(std::string_view key);

/// Flat dotted-key settings. Starts from defaults; unknown keys and
/// out-of-range values are ConfigError.
class Config {
 public:
  Config();

  void set(const std::string& key, const std::string& value);
  /// `key = value` lines; '#' starts a comment; a key may appear once.
  void merge_text(std::string_view text, const std::string& origin = "config");
  void merge_file(const std::filesystem::path& path);

  const std::string& get(const std::string& key) const;
  long long integer(const std::string& key) const;
  double real(const std::string& key) const;
  bool flag(const std::string& key) const;

  /// Sorted `key=value` lines of every key.
  std::string canonical() const;
  /// Only keys starting with one of `prefixes`.
  std::string canonical(const std::vector<std::string>& prefixes) const;
  std::string hash() const;

  const std::map<std::string, std::string>& values() const noexcept { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

dataio::SplitSpec split_spec(const Config& c);
dataio::NormalizeOptions normalize_options(const Config& c);
features::Options feature_options(const Config& c);
model::Architecture architecture(const Config& c);
model::TrainSchedule schedule(const Config& c);
evalkit::EvalOptions eval_options(const Config& c);
evalkit::FMode f_mode(const Config& c);

}  // namespace bedsal::config
