#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "wglab/config.hpp"

namespace wglab {

struct Verdict {
  std::string label;   // result family, e.g. "resolvent-uniformity"
  std::string check;   // the quantity tested
  bool pass = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string detail;
};

struct ResultBundle {
  std::filesystem::path dir;                  // empty when nothing was written
  ExperimentConfig config;
  std::string hash;
  std::vector<Verdict> verdicts;
  std::map<std::string, std::string> files;   // text artifacts by name
  double wall_seconds = 0.0;
  std::string error;                          // module error, if the run stopped

  bool all_pass() const;
  const Verdict* find(const std::string& check) const;
};

// Runs one experiment. The bundle is staged and renamed into `out` (or
// config.out when `out` is empty); with neither set nothing is written. A
// module error is recorded in error.json and the partial bundle is kept.
// Throws ConfigInvalid for an invalid config.
ResultBundle run_experiment(const ExperimentConfig& config, const std::filesystem::path& out = {});

std::string verdicts_to_json(const std::vector<Verdict>& v);
std::vector<Verdict> verdicts_from_json(const std::string& text);

}  // namespace wglab
