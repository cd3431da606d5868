#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "semcom/tensor.hpp"

namespace semcom::cli {

enum class Command { synth, train, eval, sweep, overhead };

const char* command_name(Command command);

struct RunConfig {
  Command command = Command::synth;
  std::optional<std::filesystem::path> config_path;
  std::filesystem::path output_dir = ".";
  std::optional<std::uint64_t> seed;
  /// Defaults to <output_dir>/corpus.
  std::optional<std::filesystem::path> dataset;
  /// Defaults to <output_dir>/checkpoint_final.semc.
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::vector<real>> p_grid;
  std::optional<real> snr_db;
};

/// Parses "0,0.5,1" into a list; throws ConfigError on malformed items.
std::vector<real> parse_p_grid(const std::string& text);

/// Executes one command. Returns 0 on success; on failure prints a one-line
/// diagnostic to `err`, removes files this run created, and returns 1.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Full command-line entry point (argument parsing included).
int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace semcom::cli
