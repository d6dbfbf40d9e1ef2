#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dagan/data.hpp"
#include "dagan/train.hpp"

namespace dagan::cli {

/// Bad flags, unknown keys, malformed or out-of-range values. Exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Everything a `key = value` config file can set.
struct Settings {
  TrainConfig train;
  int min_shapes = 2;
  int max_shapes = 5;
  std::uint64_t data_seed = 0;
  std::int64_t checkpoint_every = 10;  // epochs; the final epoch is always saved

  SceneConfig scenes() const;
  /// Throws UsageError.
  void validate() const;
};

/// Sets one key. Accepts '-' for '_'. Throws UsageError.
void apply(Settings& s, const std::string& key, const std::string& value);

/// Parses `key = value` lines; blank lines and `#` comments are ignored.
/// Throws UsageError with the line number.
void apply_text(Settings& s, const std::string& text, const std::string& origin);

/// Applies `--key value` / `--key=value` pairs left over after flag parsing.
void apply_overrides(Settings& s, const std::vector<std::string>& args);

/// Every key with its current value, in a form apply_text reads back.
std::string to_text(const Settings& s);

}  // namespace dagan::cli
