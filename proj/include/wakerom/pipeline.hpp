#pragma once

#include <string>

#include "wakerom/config.hpp"
#include "wakerom/datagen.hpp"
#include "wakerom/metrics.hpp"

namespace wakerom {

/// Batch pipeline stages behind the CLI subcommands. Every stage is
/// restartable: it reads its prerequisites from the run directory and fails
/// with the missing file's name when a stage was skipped.
void cmd_generate(const ExperimentConfig& cfg);
void cmd_train(const ExperimentConfig& cfg, const std::string& method = "");
void cmd_cluster(const ExperimentConfig& cfg);
void cmd_eval(const ExperimentConfig& cfg);
void cmd_report(const ExperimentConfig& cfg);
void cmd_all(const ExperimentConfig& cfg);

// exposed for tests and the acceptance suite
SnapshotSet load_dataset(const ExperimentConfig& cfg, const std::string& which);
SnapshotSet generate_dataset(const ExperimentConfig& cfg, int snapshots);
Parametrization load_parametrization(const ExperimentConfig& cfg, const std::string& method,
                                     int n_rho);
std::string model_path(const ExperimentConfig& cfg, const std::string& method, int n_rho);
std::string report_path(const ExperimentConfig& cfg, const std::string& method, int n_rho,
                        const std::string& which);

} // namespace wakerom
