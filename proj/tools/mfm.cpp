// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The mfm Authors

// mfm <command> [--config <path>] [--set section.key=value ...] --out <dir>

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mfm/run.hpp"

namespace {

const char* kind(const std::exception& e) {
  if (dynamic_cast<const mfm::ParseError*>(&e)) return "parse";
  if (dynamic_cast<const mfm::ConfigError*>(&e)) return "config";
  if (dynamic_cast<const mfm::DimensionError*>(&e)) return "dimension";
  if (dynamic_cast<const mfm::RangeError*>(&e)) return "range";
  if (dynamic_cast<const mfm::DecodeError*>(&e)) return "decode";
  if (dynamic_cast<const mfm::TrainingError*>(&e)) return "training";
  return "internal";
}

// One line, so scripts can split on the first two colons.
std::string one_line(std::string s) {
  for (auto& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

const std::map<std::string, std::string> kHelp = {
    {"synth", "write a synthetic interaction log and item features"},
    {"ingest", "load, validate and normalize interactions and features"},
    {"train", "train a model and write checkpoint, vocabulary and logs"},
    {"evaluate", "score a checkpoint on the evaluation protocol"},
    {"decode", "decode one template for every user"},
    {"gradcheck", "compare analytic and finite-difference gradients"},
    {"account", "count total and trainable parameters"},
    {"sweep", "train and evaluate one-axis variations of the config"},
    {"report", "merge eval and accounting artifacts into one table"},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal prompt recommender: synthesize, train, decode and evaluate"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out = "runs";

  for (const auto& name : mfm::kCommands) {
    auto* sub = app.add_subcommand(name, kHelp.at(name));
    sub->add_option("--config", config_path, "section.key = value file");
    sub->add_option("--set", overrides, "override, section.key=value")->take_all();
    sub->add_option("--out", out, name == "report" ? "run directory to summarize" : "output directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << one_line(e.what()) << "\n";
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    auto config = config_path.empty() ? mfm::RunConfig() : mfm::RunConfig::load(config_path);
    for (const auto& o : overrides) config.set(o);
    mfm::execute(command, config, out, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << kind(e) << ": " << one_line(e.what()) << "\n";
    return 1;
  }
  return 0;
}
