#pragma once

#include "fractal/config.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace flab {

/// Verbs in dependency order; the exit code of a failed run is 10 + index of the first failure.
const std::vector<std::string>& verb_names();
/// Verbs run when none are requested.
const std::vector<std::string>& default_verbs();

enum class VerbStatus { Pass, Fail, Skipped };
const char* status_name(VerbStatus s);

struct VerbRecord {
  std::string verb;
  VerbStatus status = VerbStatus::Skipped;
  std::string detail;
  double seconds = 0.0;
  std::vector<std::string> files;
};

struct PipelineOptions {
  std::string config_text;  // parsed by the validate verb
  std::string config_label = "<inline>";
  std::vector<std::string> verbs;
  std::filesystem::path out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  std::optional<double> kappa;
  std::optional<int> level;
  std::optional<Space> space;
  unsigned threads = 0;
  bool echo = false;  // print verdict lines to stdout
};

struct RunReport {
  std::vector<VerbRecord> records;
  std::map<std::string, std::string> manifest;
  std::string manifest_hash;  // over every line except wall times
  int exit_code = 0;
};

/// Runs the requested verbs plus their prerequisites, writes CSVs and `run.manifest` into
/// `out`. A failed verb skips every verb depending on it.
RunReport run_pipeline(const PipelineOptions& opt);

/// FNV-1a 64-bit hash as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace flab
