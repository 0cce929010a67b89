#include "cli/manifest.hpp"

#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "common/errors.hpp"

namespace ctae {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string output_root() {
  const char* env = std::getenv("CTAE_OUT_ROOT");
  if (env && *env) return env;
  return "runs";
}

std::string utc_timestamp(bool compact) {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), compact ? "%Y%m%dT%H%M%SZ" : "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string make_run_dir(const std::string& command, const std::string& config_hash,
                         const std::string& root) {
  const fs::path base = root.empty() ? output_root() : root;
  std::error_code ec;
  fs::create_directories(base, ec);
  if (ec) fail(ErrorKind::io, "cannot create output root " + base.string() + ": " + ec.message());

  const std::string stem = utc_timestamp(true) + "-" + command + "-" + config_hash;
  for (int attempt = 1; attempt < 10000; ++attempt) {
    fs::path dir = base / (attempt == 1 ? stem : stem + "-" + std::to_string(attempt));
    if (fs::create_directory(dir, ec)) return dir.string();
    if (ec) fail(ErrorKind::io, "cannot create run dir " + dir.string() + ": " + ec.message());
  }
  fail(ErrorKind::io, "could not find a free run dir name under " + base.string());
}

void write_manifest(const RunManifest& man) {
  ordered_json j;
  j["format_version"] = man.format_version;
  j["program_version"] = man.program_version;
  j["command"] = man.command;
  j["config_text"] = man.config_text;
  j["seed"] = man.seed;
  j["params"] = man.params;
  j["inputs"] = man.inputs;
  j["outputs"] = man.outputs;
  j["run_dir"] = man.run_dir;
  j["started_utc"] = man.started_utc;
  j["finished_utc"] = man.finished_utc;
  j["exit_status"] = man.exit_status;

  const fs::path path = fs::path(man.run_dir) / "manifest.json";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out.flush()) fail(ErrorKind::io, "short write to " + path.string());
}

RunManifest read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open manifest " + path);
  std::stringstream buf;
  buf << in.rdbuf();

  RunManifest man;
  try {
    const ordered_json j = ordered_json::parse(buf.str());
    man.format_version = j.at("format_version").get<int>();
    if (man.format_version != kManifestFormatVersion)
      fail(ErrorKind::config, "unsupported manifest format version " +
                                  std::to_string(man.format_version) + " in " + path);
    man.program_version = j.at("program_version").get<std::string>();
    man.command = j.at("command").get<std::string>();
    man.config_text = j.at("config_text").get<std::string>();
    man.seed = j.at("seed").get<uint64_t>();
    man.params = j.at("params").get<std::map<std::string, std::string>>();
    man.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
    man.outputs = j.at("outputs").get<std::vector<std::string>>();
    man.run_dir = j.at("run_dir").get<std::string>();
    man.started_utc = j.at("started_utc").get<std::string>();
    man.finished_utc = j.at("finished_utc").get<std::string>();
    man.exit_status = j.at("exit_status").get<int>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, "malformed manifest " + path + ": " + e.what());
  }
  return man;
}

}  // namespace ctae
