#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "nrr/config.hpp"
#include "nrr/pipeline.hpp"

namespace {

struct CliOverrides {
    std::string config_path;
    std::string model;
    std::string seeds;
    std::string out;
    int jobs = 0;  // 0 keeps the configured value
};

void add_common_options(CLI::App* cmd, CliOverrides& opt) {
    cmd->add_option("--config", opt.config_path, "experiment configuration (JSON)")
        ->required();
    cmd->add_option("--model", opt.model, "models to touch: all, or a comma list of rf,mlp,ae,dae");
    cmd->add_option("--seeds", opt.seeds, "run seeds, e.g. 1..5 or 1,3,7");
    cmd->add_option("--out", opt.out, "output directory (overrides the config)");
    cmd->add_option("--jobs", opt.jobs, "worker threads (overrides the config)")
        ->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"nitrogen response rate prediction pipeline"};
    app.footer("The NRR_MASTER_SEED environment variable overrides the configured master seed.");
    app.require_subcommand(1);

    CliOverrides opt;
    CLI::App* generate =
        app.add_subcommand("generate", "synthesize the scenario dataset files");
    CLI::App* preprocess =
        app.add_subcommand("preprocess", "window, split and standardize the samples");
    CLI::App* train = app.add_subcommand("train", "tune and train the configured models");
    CLI::App* evaluate =
        app.add_subcommand("evaluate", "predict the test split from saved checkpoints");
    CLI::App* report =
        app.add_subcommand("report", "aggregate metrics, monthly candles and gate verdicts");
    CLI::App* run_all = app.add_subcommand("run-all", "execute every stage in order");
    for (CLI::App* cmd : {generate, preprocess, train, evaluate, report, run_all})
        add_common_options(cmd, opt);

    CLI11_PARSE(app, argc, argv);

    try {
        nrr::config::ExperimentConfig cfg = nrr::config::load_config(opt.config_path);
        if (!opt.model.empty()) cfg.model_kinds = nrr::config::parse_model_list(opt.model);
        if (!opt.seeds.empty()) cfg.seeds = nrr::config::parse_seed_list(opt.seeds);
        if (!opt.out.empty()) cfg.out_dir = opt.out;
        if (opt.jobs > 0) cfg.jobs = opt.jobs;
        cfg.validate();

        if (generate->parsed()) {
            nrr::pipeline::cmd_generate(cfg);
        } else if (preprocess->parsed()) {
            nrr::pipeline::cmd_preprocess(cfg);
        } else if (train->parsed()) {
            nrr::pipeline::cmd_train(cfg);
        } else if (evaluate->parsed()) {
            nrr::pipeline::cmd_evaluate(cfg);
        } else if (report->parsed()) {
            nrr::pipeline::cmd_report(cfg);
        } else if (run_all->parsed()) {
            nrr::pipeline::run_all(cfg);
        }
        std::cout << app.get_subcommands().front()->get_name() << " ok\n";
    } catch (const nrr::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const nrr::StageError& e) {
        std::cerr << "stage error: " << e.what() << "\n";
        return 3;
    } catch (const nrr::ModelError& e) {
        std::cerr << "model error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
