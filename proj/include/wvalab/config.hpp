#pragma once

// Experiment configuration: JSON schema "wvalab.config/1", parsing with
// field-path error messages, canonical emission, and the runtime objects a
// configuration resolves to.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "wvalab/fock.hpp"
#include "wvalab/metrology.hpp"
#include "wvalab/protocol.hpp"

namespace wvalab::config {

using fock::CMatrix;
using fock::Complex;
using fock::CVector;

inline constexpr std::string_view kSchema = "wvalab.config/1";
inline constexpr int kMinTruncation = 64;

struct SystemSpec {
  std::string observable;  // "sigma_z" or "matrix"
  CMatrix matrix;          // resolved observable
  CVector pre;
  std::optional<CVector> post;
};
bool operator==(const SystemSpec& lhs, const SystemSpec& rhs);

struct PointerSpec {
  std::string kind;  // vacuum | coherent | squeezed_coherent
  Complex alpha{};
  Complex xi{};
  int truncation = fock::kDefaultTruncation;
  bool operator==(const PointerSpec&) const = default;
};

struct CouplingSpec {
  double g = 0.0;
  std::string omega = "q";
  std::string readout = "p";
  std::int64_t N = 1;
  bool operator==(const CouplingSpec&) const = default;
};

struct SweepSpec {
  std::string parameter = "xi";
  double re_lo = -2.0;
  double re_hi = 2.0;
  double im_lo = -2.0;
  double im_hi = 2.0;
  int steps = 101;
  bool operator==(const SweepSpec&) const = default;
};

struct McSpec {
  std::int64_t trials = 0;
  std::uint64_t seed = 0;
  bool operator==(const McSpec&) const = default;
};

struct ExperimentConfig {
  SystemSpec system;
  PointerSpec pointer;
  CouplingSpec coupling;
  std::string mode = "postselected";  // postselected | standard
  std::optional<Complex> weak_value;  // empty means "optimal"
  std::optional<SweepSpec> sweep;
  std::optional<McSpec> mc;
  bool operator==(const ExperimentConfig&) const = default;
};

// Throws Error(ConfigParse) naming the offending field path.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig parse_config_text(std::string_view text);
ExperimentConfig load_config(const std::string& path);

nlohmann::json to_json(const ExperimentConfig& cfg);

// Squeezed vacuum xi = i, sigma_z, pre |+>, A_w = 20i, g = 1e-5, q/p.
ExperimentConfig default_config();

// FNV-1a 64 of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

struct Experiment {
  ExperimentConfig config;
  protocol::SystemState pre;
  protocol::SystemObservable a;
  fock::PointerState pointer;
  fock::PointerOperator omega;
  fock::PointerOperator readout;
  // Resolved postselection for postselected mode.
  std::optional<protocol::SystemState> post;
  std::string preselection;  // human-readable disclosure

  metrology::SnrConfig snr_config() const;
};

// Builds the pointer first so an inadequate truncation reports the tail mass;
// a truncation below kMinTruncation is otherwise a config error.
// `weak_value_rule` picks the postselection when the config says "optimal":
// the SNR optimizer for "snr", the QFI optimizer for "qfi".
enum class OptimalRule { Snr, Qfi };
Experiment build_experiment(const ExperimentConfig& cfg, OptimalRule rule = OptimalRule::Snr);

fock::PointerState build_pointer(const PointerSpec& spec);

std::string describe_state(const CVector& amplitudes);

}  // namespace wvalab::config
