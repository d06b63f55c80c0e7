#include "ctl/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "ctl/generators.hpp"

namespace ctl {

namespace {

const std::vector<std::string>& known_experiments() {
    static const std::vector<std::string> names = {"transfer",   "symmetry", "correlation",
                                                   "efficiency", "bundling", "verify-bounds"};
    return names;
}

void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* key : allowed) {
            if (it.key() == key) {
                known = true;
                break;
            }
        }
        if (!known) throw ConfigError(where + ": unknown key '" + it.key() + "'");
    }
}

template <typename T>
T get_as(const nlohmann::json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ConfigError(where + ": missing required key '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(where + ": key '" + key + "' has the wrong type");
    }
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(where + ": key '" + key + "' has the wrong type");
    }
}

void validate_spec(const DatasetSpec& spec, const std::string& where) {
    if (spec.n < 2) throw ConfigError(where + ": n must be at least 2");
    if (spec.family == "heat") {
        if (!spec.params.contains("k") || !spec.params["k"].is_number()) {
            throw ConfigError(where + ": heat needs a numeric params.k");
        }
        if (spec.params["k"].get<double>() <= 0) throw ConfigError(where + ": heat k must be positive");
    } else if (spec.family == "movement") {
        for (const char* key : {"m", "k"}) {
            if (!spec.params.contains(key) || !spec.params[key].is_number()) {
                throw ConfigError(where + ": movement needs numeric params.m and params.k");
            }
            if (spec.params[key].get<double>() <= 0) {
                throw ConfigError(where + ": movement parameters must be positive");
            }
        }
    } else if (spec.family == "rkhs") {
        // no surface parameters
    } else if (spec.family == "surrogate") {
        const int setting = get_or<int>(spec.params, "setting", 0, where);
        const int count = static_cast<int>(ihdp_settings().size());
        if (setting < 0 || setting >= count) {
            throw ConfigError(where + ": surrogate setting must lie in [0, " +
                              std::to_string(count - 1) + "]");
        }
    } else if (spec.family == "ihdp") {
        throw ConfigError(where + ": ihdp needs externally supplied covariates; use family 'surrogate'");
    } else {
        throw ConfigError(where + ": unknown dataset family '" + spec.family + "'");
    }
}

}  // namespace

DatasetSpec dataset_spec_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("dataset spec: must be an object");
    check_keys(j, {"family", "n", "seed", "params"}, "dataset spec");
    DatasetSpec spec;
    spec.family = get_as<std::string>(j, "family", "dataset spec");
    spec.n = get_or<int>(j, "n", spec.n, "dataset spec");
    spec.seed = get_or<std::uint64_t>(j, "seed", spec.seed, "dataset spec");
    if (j.contains("params")) {
        if (!j.at("params").is_object()) throw ConfigError("dataset spec: params must be an object");
        spec.params = j.at("params");
    }
    validate_spec(spec, "dataset spec (" + spec.family + ")");
    return spec;
}

nlohmann::json dataset_spec_to_json(const DatasetSpec& spec) {
    return nlohmann::json{
        {"family", spec.family}, {"n", spec.n}, {"seed", spec.seed}, {"params", spec.params}};
}

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt) {
    std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

CausalDataset make_dataset(const DatasetSpec& spec) { return make_dataset(spec, 0); }

CausalDataset make_dataset(const DatasetSpec& spec, std::uint64_t replication) {
    validate_spec(spec, "make_dataset (" + spec.family + ")");
    const std::uint64_t seed = replication == 0 ? spec.seed : mix_seed(spec.seed, replication);
    if (spec.family == "heat") {
        return gen_heat(spec.params["k"].get<double>(), spec.n, seed);
    }
    if (spec.family == "movement") {
        return gen_movement(spec.params["m"].get<double>(), spec.params["k"].get<double>(), spec.n,
                            seed);
    }
    if (spec.family == "rkhs") {
        return gen_rkhs(spec.n, seed);
    }
    // surrogate; validate_spec rejects everything else
    const auto settings = ihdp_settings();
    const int setting = spec.params.value("setting", 0);
    const auto& s = settings[static_cast<std::size_t>(setting)];
    return gen_surrogate(spec.n, s.mu, s.omega, seed);
}

nlohmann::json train_config_to_json(const TrainConfig& config) {
    return nlohmann::json{{"alpha", config.alpha},
                          {"lr", config.lr},
                          {"epochs", config.epochs},
                          {"batch_size", config.batch_size},
                          {"seed", config.seed},
                          {"loss_kind", loss_kind_to_string(config.loss_kind)},
                          {"ipm", {{"eps", config.ipm.eps}, {"iters", config.ipm.iters}}}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("train: must be an object");
    check_keys(j, {"alpha", "lr", "epochs", "batch_size", "seed", "loss_kind", "ipm"}, "train");
    TrainConfig config;
    config.alpha = get_or<double>(j, "alpha", config.alpha, "train");
    config.lr = get_or<double>(j, "lr", config.lr, "train");
    config.epochs = get_or<int>(j, "epochs", config.epochs, "train");
    config.batch_size = get_or<int>(j, "batch_size", config.batch_size, "train");
    config.seed = get_or<std::uint64_t>(j, "seed", config.seed, "train");
    if (j.contains("loss_kind")) {
        const auto name = get_as<std::string>(j, "loss_kind", "train");
        try {
            config.loss_kind = loss_kind_from_string(name);
        } catch (const std::exception& e) {
            throw ConfigError(std::string("train: ") + e.what());
        }
    }
    if (j.contains("ipm")) {
        const auto& ipm = j.at("ipm");
        if (!ipm.is_object()) throw ConfigError("train.ipm: must be an object");
        check_keys(ipm, {"eps", "iters"}, "train.ipm");
        config.ipm.eps = get_or<double>(ipm, "eps", config.ipm.eps, "train.ipm");
        config.ipm.iters = get_or<int>(ipm, "iters", config.ipm.iters, "train.ipm");
    }
    if (!(config.alpha >= 0)) throw ConfigError("train: alpha must be nonnegative");
    if (!(config.lr > 0)) throw ConfigError("train: lr must be positive");
    if (config.epochs < 1) throw ConfigError("train: epochs must be at least 1");
    if (config.batch_size < 2) throw ConfigError("train: batch_size must be at least 2");
    if (!(config.ipm.eps > 0)) throw ConfigError("train.ipm: eps must be positive");
    if (config.ipm.iters < 1) throw ConfigError("train.ipm: iters must be at least 1");
    return config;
}

ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    check_keys(j,
               {"experiment", "target", "sources", "seeds", "alpha_grid", "sizes", "p_grid",
                "target_size", "train", "fine_tune_fraction", "scratch_candidates", "workers",
                "workdir", "out"},
               "config");
    ExperimentConfig config;
    config.experiment = get_as<std::string>(j, "experiment", "config");
    if (!j.contains("target")) throw ConfigError("config: missing required key 'target'");
    config.target = dataset_spec_from_json(j.at("target"));
    if (j.contains("sources")) {
        if (!j.at("sources").is_array()) throw ConfigError("config: sources must be an array");
        for (const auto& item : j.at("sources")) {
            config.sources.push_back(dataset_spec_from_json(item));
        }
    }
    config.seeds = get_or<std::vector<std::uint64_t>>(j, "seeds", config.seeds, "config");
    config.alpha_grid = get_or<std::vector<double>>(j, "alpha_grid", config.alpha_grid, "config");
    config.sizes = get_or<std::vector<int>>(j, "sizes", config.sizes, "config");
    config.p_grid = get_or<std::vector<double>>(j, "p_grid", config.p_grid, "config");
    config.target_size = get_or<int>(j, "target_size", config.target_size, "config");
    if (j.contains("train")) config.train = train_config_from_json(j.at("train"));
    config.fine_tune_fraction =
        get_or<double>(j, "fine_tune_fraction", config.fine_tune_fraction, "config");
    config.scratch_candidates =
        get_or<int>(j, "scratch_candidates", config.scratch_candidates, "config");
    config.workers = get_or<int>(j, "workers", config.workers, "config");
    config.workdir = get_or<std::string>(j, "workdir", config.workdir, "config");
    config.out = get_or<std::string>(j, "out", config.out, "config");

    if (config.experiment == "symmetry" && config.p_grid.empty()) {
        for (int i = 0; i <= 10; ++i) config.p_grid.push_back(0.1 * i);
    }
    if (config.alpha_grid.empty()) config.alpha_grid = {config.train.alpha};
    if (config.out.empty()) config.out = config.workdir + "/results";

    validate_config(config);
    return config;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream file(path);
    if (!file) throw ConfigError("config: cannot open " + path);
    nlohmann::json j;
    try {
        file >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config: " + path + " is not valid json: " + e.what());
    }
    return parse_experiment_config(j);
}

void validate_config(const ExperimentConfig& config) {
    const auto& names = known_experiments();
    if (std::find(names.begin(), names.end(), config.experiment) == names.end()) {
        std::string all;
        for (const auto& name : names) all += (all.empty() ? "" : ", ") + name;
        throw ConfigError("config: unknown experiment '" + config.experiment + "' (expected one of " +
                          all + ")");
    }
    validate_spec(config.target, "config.target (" + config.target.family + ")");
    for (std::size_t i = 0; i < config.sources.size(); ++i) {
        validate_spec(config.sources[i], "config.sources[" + std::to_string(i) + "]");
    }
    if (config.seeds.empty()) throw ConfigError("config: seeds must be nonempty");
    for (double alpha : config.alpha_grid) {
        if (!(alpha >= 0)) throw ConfigError("config: alpha_grid entries must be nonnegative");
    }
    for (std::size_t i = 0; i < config.sizes.size(); ++i) {
        if (config.sizes[i] < 1) throw ConfigError("config: sizes entries must be positive");
        if (i > 0 && config.sizes[i] <= config.sizes[i - 1]) {
            throw ConfigError("config: sizes must be strictly ascending");
        }
    }
    for (double p : config.p_grid) {
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("config: p_grid entries must lie in [0, 1]");
    }
    if (config.target_size < 0 || config.target_size > config.target.n) {
        throw ConfigError("config: target_size must lie in [0, target.n]");
    }
    if (!(config.fine_tune_fraction >= 0 && config.fine_tune_fraction <= 1)) {
        throw ConfigError("config: fine_tune_fraction must lie in [0, 1]");
    }
    if (config.scratch_candidates < 1) {
        throw ConfigError("config: scratch_candidates must be at least 1");
    }
    if (config.workers < 1) throw ConfigError("config: workers must be at least 1");
    if (config.workdir.empty()) throw ConfigError("config: workdir must be nonempty");

    const bool needs_sources = config.experiment == "transfer" || config.experiment == "bundling" ||
                               config.experiment == "efficiency";
    if (needs_sources && config.sources.empty()) {
        throw ConfigError("config: experiment '" + config.experiment + "' needs at least one source");
    }
    if (config.experiment == "efficiency") {
        if (config.sizes.empty()) throw ConfigError("config: efficiency needs a sizes list");
        if (config.sizes.front() < 2) {
            throw ConfigError("config: efficiency sizes must be at least 2");
        }
        if (config.sizes.back() > config.target.n) {
            throw ConfigError("config: efficiency sizes cannot exceed target.n");
        }
    }
    if (config.experiment == "bundling" && !config.sizes.empty()) {
        if (config.sizes.back() > static_cast<int>(config.sources.size())) {
            throw ConfigError("config: bundling sizes are source counts and cannot exceed the "
                              "number of sources");
        }
    }
    if (config.experiment == "symmetry" && config.p_grid.empty()) {
        throw ConfigError("config: symmetry needs a p_grid");
    }
    if (config.experiment == "verify-bounds" && config.target.family != "heat" &&
        config.target.family != "movement") {
        throw ConfigError("config: verify-bounds runs on the heat or movement families");
    }
}

nlohmann::json config_to_json(const ExperimentConfig& config) {
    nlohmann::json sources = nlohmann::json::array();
    for (const auto& spec : config.sources) sources.push_back(dataset_spec_to_json(spec));
    return nlohmann::json{{"experiment", config.experiment},
                          {"target", dataset_spec_to_json(config.target)},
                          {"sources", sources},
                          {"seeds", config.seeds},
                          {"alpha_grid", config.alpha_grid},
                          {"sizes", config.sizes},
                          {"p_grid", config.p_grid},
                          {"target_size", config.target_size},
                          {"train", train_config_to_json(config.train)},
                          {"fine_tune_fraction", config.fine_tune_fraction},
                          {"scratch_candidates", config.scratch_candidates},
                          {"workers", config.workers},
                          {"workdir", config.workdir},
                          {"out", config.out}};
}

}  // namespace ctl
