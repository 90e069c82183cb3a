#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "wvalab/config.hpp"
#include "wvalab/error.hpp"

namespace wvalab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitPhysics = 3;
inline constexpr int kExitInvariant = 4;

struct CommandOptions {
  std::optional<std::string> config_path;
  std::optional<std::string> out;
  std::optional<int> steps;
  std::optional<std::uint64_t> seed;
  std::optional<int> truncation;
  int workers = 1;
};

int exit_code_for(const Error& e);

// Loads --config (or the built-in default) and applies --truncation.
config::ExperimentConfig resolve_config(const CommandOptions& opts);

// Each command returns its exit code; Error exceptions escape to the caller
// except where a command reports them as structured JSON.
int cmd_validate(const CommandOptions& opts, std::ostream& log);
int cmd_sweep_squeeze(const CommandOptions& opts, std::ostream& log);
int cmd_snr(const CommandOptions& opts, std::ostream& log);
int cmd_qfi(const CommandOptions& opts, std::ostream& log);
int cmd_sample(const CommandOptions& opts, std::ostream& log);

// Worker count from WVALAB_WORKERS, else the hardware concurrency.
int default_workers();

}  // namespace wvalab::cli
