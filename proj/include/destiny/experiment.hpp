#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "destiny/engine.hpp"

namespace destiny {

enum class ProblemFamily { Pca, Olsr, Sdl };
enum class DataSource { Synthetic, Csv };

/// Flat key = value experiment description. Every field except problem,
/// the data dimensions (or CSV paths) and d has a documented default.
struct ExperimentConfig {
  ProblemFamily problem = ProblemFamily::Pca;
  DataSource data = DataSource::Synthetic;

  // synthetic data
  int n = 0;
  int m = 0;
  int p = 0;
  double xi = 0.9;

  // csv data; pca/sdl use `csv`, olsr uses `csv_c` + `csv_d`
  std::string csv;
  std::string csv_c;
  std::string csv_d;

  int d = 0;
  double prob = 0.5;
  double beta = 1.0;

  bool bb = true;        // stepsize = bb | fixed
  double eta = 1e-2;     // fixed rule
  double eta0 = 1e-3;    // bb first round
  double eta_min = 1e-10;
  double eta_max = 1.0;

  int max_rounds = 5000;
  double tol_substationarity = 1e-5;
  double tol_consensus = 1e-7;
  double tol_feasibility = 1e-7;

  std::uint64_t seed = 0;
  std::string output = "trace.csv";
  std::string graph_output;  // edge list; empty = not written

  bool operator==(const ExperimentConfig&) const = default;
};

/// Parses and validates a config file. Unknown keys, out-of-range values
/// and missing required keys are errors naming the key and line.
ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text,
                                   const std::string& name);

/// Canonical key = value rendering; parsing it back yields an equal config.
std::string serialize_config(const ExperimentConfig& config);

/// Trace CSV schema:
/// round,substationarity,consensus,feasibility,h_value,eta_min,eta_max,elapsed_s
/// with 17 significant digits so a reparse recovers the values exactly.
void write_trace_csv(const std::vector<TraceRow>& trace,
                     const std::string& path);

/// Builds data, network and initial point from the config, runs the
/// solver, writes the trace (and optionally the graph edge list) and
/// prints a one-line summary. Exit status: 0 converged, 2 max rounds,
/// 3 diverged, 1 config or data error.
int run_experiment(const ExperimentConfig& config);

/// Builds the network from the config, reports the mixing-matrix checks
/// and the spectral gap. Exit status 0 when everything passes.
int verify_experiment(const ExperimentConfig& config);

}  // namespace destiny
