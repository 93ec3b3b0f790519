#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wakerom/autoencoder.hpp"
#include "wakerom/grid.hpp"

namespace wakerom {

struct ObstacleSpec {
    double cx = 0.0, cy = 0.0, radius = 0.0;
};

/// Resolved experiment parameters. Parseable from a key = value file;
/// unknown keys are rejected. Every run directory receives a frozen copy of
/// the resolved values.
struct ExperimentConfig {
    std::string scenario = "synthetic";  // single | double | synthetic

    int nx = 24, ny = 12;
    double domain_lx = 12.0, domain_ly = 6.0;
    bool periodic_x = true;
    double reynolds = 40.0;
    std::vector<ObstacleSpec> obstacles;
    double inflow_peak = 0.0;   // bounded-x channels
    double body_force_x = 0.0;  // periodic channels

    double dt = 0.05;
    double t_transient = 0.0;
    double t_window = 10.0;  // sampled span after the transient
    int train_snapshots = 60;
    int eval_snapshots = 80;
    int synthetic_modes = 3;

    int image_h = 8, image_w = 12;
    std::vector<std::string> methods = {"pod", "cnn", "cae", "cpod", "icae"};
    std::vector<int> nrho_list = {2, 3};
    int clusters = 5;
    int pod_r = 15;  // basis size of the cnn decoder

    uint64_t seed = 1;
    int epochs = 150;
    int batch = 64;
    double learning_rate = 1e-3;
    std::vector<double> milestones = {0.5, 0.75};
    double decay = 0.1;
    int kmeans_restarts = 1;
    int threads = 1;

    std::string outdir = "out";

    GridSpec make_grid() const;
    TrainConfig train_config() const;
    std::vector<std::pair<std::string, std::string>> to_kv() const;
    std::string dataset_id() const;
    void validate() const;
};

/// Scenario defaults; "single" is the 64x32 cylinder preset, "double" the
/// 128x48 two-cylinder preset, "synthetic" a small deterministic stream
/// function dataset.
ExperimentConfig preset_config(const std::string& scenario);

/// Reads a config file, then applies key=value override strings.
ExperimentConfig load_config(const std::string& path,
                             const std::vector<std::string>& overrides = {});

/// Applies one parsed key to the config; throws ConfigError on unknown keys
/// or unparseable values.
void apply_key(ExperimentConfig& cfg, const std::string& key, const std::string& value);

} // namespace wakerom
