#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ctl/affinity.hpp"
#include "ctl/config.hpp"
#include "ctl/experiments.hpp"
#include "ctl/metrics.hpp"
#include "ctl/tarnet.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::uint64_t seed = 0;
    std::string out;
    int workers = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args, const char* out_help) {
    cmd->add_option("--config", args.config_path, "experiment configuration (json)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", args.seed, "override the replication seed list with this one seed");
    cmd->add_option("--out", args.out, out_help);
    cmd->add_option("--workers", args.workers, "worker thread count override");
}

ctl::ExperimentConfig load_config(const CLI::App* cmd, const CommonArgs& args,
                                  bool out_is_results_dir) {
    ctl::ExperimentConfig config = ctl::load_experiment_config(args.config_path);
    if (cmd->count("--seed") > 0) config.seeds = {args.seed};
    if (cmd->count("--workers") > 0) config.workers = args.workers;
    if (out_is_results_dir && !args.out.empty()) config.out = args.out;
    ctl::validate_config(config);
    return config;
}

ctl::TrainResult train_task(const ctl::CausalDataset& ds, ctl::TrainConfig config) {
    return ctl::train(ds, ctl::default_phi_spec(static_cast<int>(ds.d())),
                      ctl::default_head_hidden(), config);
}

int run_cli(int argc, char** argv) {
    CLI::App app{"causal transfer-learning toolkit"};
    app.require_subcommand(1);
    int exit_code = 0;

    CommonArgs gen_args;
    auto* gen = app.add_subcommand("generate", "generate one dataset from the target spec");
    add_common(gen, gen_args, "explicit dataset file path (default: workdir store)");
    gen->callback([&] {
        const auto config = load_config(gen, gen_args, false);
        const std::uint64_t sv = config.seeds.front();
        const ctl::CausalDataset ds = ctl::make_dataset(config.target, sv);
        std::string path;
        if (!gen_args.out.empty()) {
            ctl::save_dataset(ds, gen_args.out);
            path = gen_args.out;
        } else {
            path = ctl::store_dataset(config.workdir, ds);
        }
        std::printf("dataset %s  rows %ld  -> %s\n", ctl::dataset_id(ds.meta).c_str(),
                    static_cast<long>(ds.n()), path.c_str());
    });

    CommonArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "train one model on the target spec");
    add_common(train_cmd, train_args, "explicit model file path (default: workdir store)");
    train_cmd->callback([&] {
        const auto config = load_config(train_cmd, train_args, false);
        const std::uint64_t sv = config.seeds.front();
        const ctl::CausalDataset ds = ctl::make_dataset(config.target, sv);
        ctl::TrainConfig tc = config.train;
        tc.seed = ctl::mix_seed(config.train.seed, sv);
        const ctl::TrainResult result = train_task(ds, tc);
        std::string path;
        if (!train_args.out.empty()) {
            ctl::save_model(result.model, train_args.out);
            path = train_args.out;
        } else {
            path = ctl::store_model(config.workdir, result.model);
        }
        std::printf("model on %s  final loss %.6g  -> %s\n", ctl::dataset_id(ds.meta).c_str(),
                    result.model.meta.final_train_loss, path.c_str());
    });

    CommonArgs aff_args;
    auto* aff = app.add_subcommand(
        "affinity", "train the source models and rank them by task distance to the target");
    add_common(aff, aff_args, "explicit report file path (default: workdir store)");
    aff->callback([&] {
        const auto config = load_config(aff, aff_args, false);
        if (config.sources.empty()) {
            throw ctl::ConfigError("affinity: the config needs at least one source");
        }
        const std::uint64_t sv = config.seeds.front();
        const ctl::CausalDataset target = ctl::make_dataset(config.target, sv);
        std::vector<ctl::CausalDataset> sources;
        std::vector<ctl::TarNetModel> models;
        for (std::size_t i = 0; i < config.sources.size(); ++i) {
            sources.push_back(ctl::make_dataset(config.sources[i], sv));
            ctl::TrainConfig tc = config.train;
            tc.seed = ctl::mix_seed(ctl::mix_seed(config.train.seed, sv), 1000 + i);
            models.push_back(train_task(sources.back(), tc).model);
        }
        const ctl::SelectionResult selection = ctl::select_closest(models, sources, target);
        nlohmann::json all = nlohmann::json::array();
        for (std::size_t i = 0; i < selection.reports.size(); ++i) {
            const auto& report = selection.reports[i];
            std::printf("source %-28s d_sym %.6f  best perm %s\n", report.source_id.c_str(),
                        report.d_sym, ctl::permutation_to_string(report.best_perm).c_str());
            all.push_back(ctl::report_to_json(report));
        }
        std::printf("selected index %zu (%s)\n", selection.index,
                    selection.reports[selection.index].source_id.c_str());
        std::string path;
        if (!aff_args.out.empty()) {
            std::ofstream out(aff_args.out);
            if (!out) throw std::runtime_error("affinity: cannot open " + aff_args.out);
            out << all.dump(2) << "\n";
            path = aff_args.out;
        } else {
            path = ctl::store_report(config.workdir, "affinity-s" + std::to_string(sv), all);
        }
        std::printf("reports -> %s\n", path.c_str());
    });

    CommonArgs transfer_args;
    auto* transfer_cmd =
        app.add_subcommand("transfer", "source training, selection, and fine-tuning");
    add_common(transfer_cmd, transfer_args, "results directory override");
    transfer_cmd->callback([&] {
        auto config = load_config(transfer_cmd, transfer_args, true);
        config.experiment = "transfer";
        const ctl::ExperimentOutput output = ctl::run_transfer(config);
        const std::string csv = ctl::write_outputs(config, output);
        std::printf("transfer pehe median %.6g  scratch practice median %.6g\n",
                    output.summary["transfer_pehe_median"].get<double>(),
                    output.summary["scratch_practice_pehe_median"].get<double>());
        std::printf("results -> %s\n", csv.c_str());
    });

    CommonArgs bounds_args;
    auto* bounds_cmd = app.add_subcommand("verify-bounds", "numerical bound checks on a family");
    add_common(bounds_cmd, bounds_args, "results directory override");
    bounds_cmd->callback([&] {
        auto config = load_config(bounds_cmd, bounds_args, true);
        config.experiment = "verify-bounds";
        const ctl::ExperimentOutput output = ctl::run_verify_bounds(config);
        const std::string csv = ctl::write_outputs(config, output);
        std::printf("bound reports %d  holding %d\n", output.summary["report_count"].get<int>(),
                    output.summary["holds_count"].get<int>());
        std::printf("results -> %s\n", csv.c_str());
    });

    CommonArgs exp_args;
    std::string experiment_name;
    auto* exp = app.add_subcommand("experiment", "run a named experiment end to end");
    exp->add_option("name", experiment_name,
                    "transfer | symmetry | correlation | efficiency | bundling | verify-bounds")
        ->required();
    add_common(exp, exp_args, "results directory override");
    exp->callback([&] {
        auto config = load_config(exp, exp_args, true);
        config.experiment = experiment_name;
        ctl::validate_config(config);
        const ctl::ExperimentOutput output = ctl::run_experiment(config);
        const std::string csv = ctl::write_outputs(config, output);
        const bool met = output.summary.value("criteria_met", false);
        std::printf("experiment %s  criteria %s\n", experiment_name.c_str(),
                    met ? "met" : "NOT met");
        std::printf("results -> %s\n", csv.c_str());
        if (!met) exit_code = 3;
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ctl::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return exit_code;
}

}  // namespace

int main(int argc, char** argv) { return run_cli(argc, argv); }
