#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "common/version.hpp"

namespace ctae {

// Record of one command invocation. The manifest alone carries everything
// needed to re-execute the run: the resolved config text, the flag values
// (`params`) and the absolute input paths.
struct RunManifest {
  int format_version = kManifestFormatVersion;
  std::string program_version = kProgramVersion;
  std::string command;
  std::string config_text;  // resolved canonical key-value text
  uint64_t seed = 0;
  std::map<std::string, std::string> params;  // flag values and derived facts
  std::map<std::string, std::string> inputs;  // name -> absolute path
  std::vector<std::string> outputs;           // file names relative to run_dir
  std::string run_dir;
  std::string started_utc;
  std::string finished_utc;
  int exit_status = 0;
};

// $CTAE_OUT_ROOT when set, else "runs".
std::string output_root();

// Current UTC time; compact form (20260816T093000Z) names run directories,
// the default ISO form stamps manifests.
std::string utc_timestamp(bool compact = false);

// Creates <root>/<timestamp>-<command>-<config_hash>, appending -2, -3, ... on
// collision. Empty root falls back to output_root().
std::string make_run_dir(const std::string& command, const std::string& config_hash,
                         const std::string& root = "");

void write_manifest(const RunManifest& man);  // <run_dir>/manifest.json
RunManifest read_manifest(const std::string& path);

}  // namespace ctae
