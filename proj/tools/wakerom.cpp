#include <CLI11.hpp>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "wakerom/config.hpp"
#include "wakerom/errors.hpp"
#include "wakerom/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"wake-flow low-dimensional parametrization pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    std::string method;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "experiment config file")->required();
        sub->add_option("--override", overrides, "key=value overriding a config entry");
    };

    CLI::App* gen = app.add_subcommand("generate", "simulate and store the datasets");
    CLI::App* train = app.add_subcommand("train", "fit models for every configured n_rho");
    CLI::App* cluster = app.add_subcommand("cluster", "fit the k-means models on the codes");
    CLI::App* eval = app.add_subcommand("eval", "compute the six metrics per model");
    CLI::App* report = app.add_subcommand("report", "emit comparison tables and SVG plots");
    CLI::App* all = app.add_subcommand("all", "generate, train, eval, report");
    for (CLI::App* sub : {gen, train, cluster, eval, report, all}) add_common(sub);
    train->add_option("--method", method, "train a single method (pod|cnn|cae|cpod|icae)");

    CLI11_PARSE(app, argc, argv);

    try {
        const wakerom::ExperimentConfig cfg = wakerom::load_config(config_path, overrides);
        if (gen->parsed()) wakerom::cmd_generate(cfg);
        else if (train->parsed()) wakerom::cmd_train(cfg, method);
        else if (cluster->parsed()) wakerom::cmd_cluster(cfg);
        else if (eval->parsed()) wakerom::cmd_eval(cfg);
        else if (report->parsed()) wakerom::cmd_report(cfg);
        else if (all->parsed()) wakerom::cmd_all(cfg);
        return kExitOk;
    } catch (const wakerom::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const wakerom::ArgumentError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const wakerom::SolverError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
}
