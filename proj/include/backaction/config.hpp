#pragma once

#include "backaction/ensemble.hpp"
#include "backaction/hamiltonian.hpp"
#include "backaction/jump.hpp"
#include "backaction/scattering.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace backaction {

struct OutputConfig {
  std::string directory = "out";
  bool json = true;  // CSV is always written
  bool svg = true;
};

/// One dt setting of the evolution study: dt, events per run m, runs n.
using StudyCase = EvolutionCase;

struct StudyConfig {
  double interaction_b = 10.0;  // U/J of the second initial state
  std::vector<std::pair<std::size_t, std::size_t>> pairs{{100, 100}, {100, 1000}, {1000, 1000}};  // (m, n)
  std::vector<StudyCase> cases{{0.001, 1000, 1000}, {0.01, 1000, 1000}, {1.0, 1000000, 1}};
};

/// Full experiment description, loadable from an INI-style file:
///
///   [physics]    sites, atoms, interaction, hopping, boundary = open|periodic
///   [scattering] coupling, k0 (number, "pi", "pi/2", "2*pi"), wannier_width, quadrature_points
///   [trajectory] events, dt, snapshot_stride
///   [ensemble]   runs, bins, master_seed, workers
///   [output]     directory, formats (comma list of csv, json, svg)
///   [initial]    source = ground | path to an amplitude CSV
///   [study]      interaction_b, pairs = "100x100, 100x1000", cases = "0.001:1000x1000, ..."
struct ExperimentConfig {
  BoseHubbardParams physics{};
  ScatteringConfig scattering{};
  std::size_t events = 1000;
  double dt = 0.0;
  std::size_t snapshot_stride = 0;
  std::size_t runs = 100;
  std::size_t bins = 600;
  std::uint64_t master_seed = 1;
  std::size_t workers = 1;
  OutputConfig output{};
  std::string initial = "ground";
  StudyConfig study{};

  ExperimentConfig();

  void validate() const;

  TrajectoryConfig trajectory_config() const;
  EnsembleConfig ensemble_config() const;
};

/// Parses INI text on top of `defaults`. Throws ConfigError on unknown
/// sections or keys, malformed values and failed validation.
ExperimentConfig parse_config(std::istream& is, const ExperimentConfig& defaults = {});
ExperimentConfig load_config(const std::string& path, const ExperimentConfig& defaults = {});

/// Applies one "section.key=value" override.
void apply_override(ExperimentConfig& config, const std::string& assignment);

/// Canonical INI text; parse_config(echo) reproduces the configuration.
/// With `provenance_only`, execution-only settings (worker count, output
/// directory) are left out so the text is identical across those.
std::string config_echo(const ExperimentConfig& config, bool provenance_only = false);

/// The echo as "# "-prefixed comment lines for CSV headers.
std::string config_comment(const ExperimentConfig& config);

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

} // namespace backaction
