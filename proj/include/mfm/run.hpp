// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The mfm Authors

#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "mfm/decode.hpp"
#include "mfm/eval.hpp"
#include "mfm/training.hpp"

namespace mfm {

// Flat `section.key = value` settings over a fixed table of known keys.
// Unknown keys are errors; unset keys keep their defaults.
class RunConfig {
 public:
  RunConfig();

  // Lines of `section.key = value`; '#' starts a comment.
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);

  // `section.key=value`
  void set(const std::string& assignment);
  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;
  bool is_set(const std::string& key) const { return explicit_.count(key) != 0; }

  // Every key, sorted, one `key = value` line each.
  std::string resolved() const;
  // Hash of resolved() without run.* keys, as 16 hex digits.
  std::string fingerprint() const;

  std::uint64_t seed() const;
  GeneratorParams generator() const;
  ModelConfig model() const;
  TrainConfig train() const;
  DecodeConfig decode() const;
  std::vector<TaskGroup> eval_groups() const;

  // Checks values and that referenced paths exist. `command` decides which
  // keys are required.
  void validate(const std::string& command) const;

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, bool> explicit_;
};

// Commands that share the artifact layout under `out`.
extern const std::vector<std::string> kCommands;

// Runs `command`; human-readable progress goes to `log`. Every artifact is
// written below `out` with the config fingerprint in its file name. Throws
// mfm::Error on failure.
void execute(const std::string& command, const RunConfig& config, const std::filesystem::path& out,
             std::ostream& log);

// Merges eval and accounting artifacts found in `dir` into one table, one
// row per (group, template, tuning mode, r, k). Reads only.
std::string report(const std::filesystem::path& dir);

}  // namespace mfm
