#include "ctl/affinity.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace ctl {

namespace {

double nll_grad(const std::string& outcome_kind, double pred, double y) {
    if (outcome_kind == "continuous") return pred - y;
    if (outcome_kind == "binary") return 1.0 / (1.0 + std::exp(-pred)) - y;
    throw std::invalid_argument("empirical_fisher_diag: unknown outcome kind " + outcome_kind);
}

}  // namespace

FisherSignature empirical_fisher_diag(const TarNetModel& model, const CausalDataset& ds) {
    validate_model(model);
    if (ds.n() == 0) throw std::invalid_argument("empirical_fisher_diag: empty dataset");
    if (ds.d() != model.input_dim()) {
        throw std::invalid_argument("empirical_fisher_diag: covariate width mismatch");
    }
    if (ds.treatments() != model.treatments()) {
        throw std::invalid_argument("empirical_fisher_diag: treatment count mismatch");
    }

    const Eigen::Index phi_count = param_count(model.phi_spec);
    std::vector<Eigen::Index> head_offset(model.head_specs.size());
    Eigen::Index off = phi_count;
    for (std::size_t h = 0; h < model.head_specs.size(); ++h) {
        head_offset[h] = off;
        off += param_count(model.head_specs[h]);
    }

    FisherSignature sig;
    sig.diag = Eigen::VectorXd::Zero(total_param_count(model));
    sig.model_id = model.meta.config_hash;
    sig.dataset_id = dataset_id(ds);

    ForwardCache phi_cache, head_cache;
    ParamVector phi_grad(phi_count);
    std::vector<ParamVector> head_grad;
    for (const auto& spec : model.head_specs) head_grad.emplace_back(param_count(spec));
    Vector out_grad(1), head_input_grad;

    for (Eigen::Index i = 0; i < ds.n(); ++i) {
        const auto a = static_cast<std::size_t>(ds.a[i]);
        phi_cache = forward_cached(model.phi_spec, model.phi_params, ds.x.row(i).transpose());
        head_cache = forward_cached(model.head_specs[a], model.head_params[a], phi_cache.output);
        out_grad[0] = nll_grad(ds.meta.outcome_kind, head_cache.output[0], ds.y[i]);
        backward(model.head_specs[a], model.head_params[a], head_cache, out_grad, head_grad[a],
                 &head_input_grad);
        backward(model.phi_spec, model.phi_params, phi_cache, head_input_grad, phi_grad, nullptr);
        sig.diag.head(phi_count).array() += phi_grad.array().square();
        sig.diag.segment(head_offset[a], head_grad[a].size()).array() +=
            head_grad[a].array().square();
    }
    sig.diag /= static_cast<double>(ds.n());

    const double trace = sig.diag.sum();
    if (trace > 0.0) {
        sig.diag /= trace;
        sig.trace_normalized = true;
    } else {
        sig.trace_normalized = false;
    }
    return sig;
}

double frechet_distance(const FisherSignature& f1, const FisherSignature& f2) {
    if (f1.diag.size() != f2.diag.size()) {
        throw std::invalid_argument("frechet_distance: signature length mismatch");
    }
    if (!f1.trace_normalized || !f2.trace_normalized) {
        throw std::invalid_argument("frechet_distance: signatures must be trace-normalized");
    }
    return (f1.diag.array().sqrt() - f2.diag.array().sqrt()).matrix().norm() / std::sqrt(2.0);
}

std::string permutation_to_string(const Permutation& perm) {
    std::string s;
    for (int v : perm) s += static_cast<char>('0' + v);
    return s;
}

double TaskDistanceReport::identity_distance() const {
    Permutation identity(best_perm.size());
    std::iota(identity.begin(), identity.end(), 0);
    return d_per_perm.at(permutation_to_string(identity));
}

TaskDistanceReport cita(const TarNetModel& source_model, const CausalDataset& source_ds,
                        const CausalDataset& target_ds) {
    if (source_ds.d() != target_ds.d()) {
        throw std::invalid_argument("cita: covariate width mismatch between tasks");
    }
    if (source_ds.treatments() != target_ds.treatments()) {
        throw std::invalid_argument("cita: tasks have differing treatment counts");
    }
    const int labels = source_ds.treatments() + 1;
    if (labels > kMaxCitaLabels) {
        throw std::invalid_argument(
            "cita: label permutation enumeration is capped at " +
            std::to_string(kMaxCitaLabels) + " treatment labels");
    }

    const FisherSignature source_sig = empirical_fisher_diag(source_model, source_ds);
    if (!source_sig.trace_normalized) {
        throw std::invalid_argument("cita: source signature has zero trace");
    }

    TaskDistanceReport report;
    report.source_id = dataset_id(source_ds);
    report.target_id = dataset_id(target_ds);

    Permutation perm(static_cast<std::size_t>(labels));
    std::iota(perm.begin(), perm.end(), 0);
    bool first = true;
    CausalDataset relabeled = target_ds;
    do {
        for (Eigen::Index i = 0; i < target_ds.n(); ++i) {
            relabeled.a[i] = perm[static_cast<std::size_t>(target_ds.a[i])];
        }
        const FisherSignature sig = empirical_fisher_diag(source_model, relabeled);
        const double d = frechet_distance(source_sig, sig);
        report.d_per_perm[permutation_to_string(perm)] = d;
        if (first || d < report.d_sym) {
            report.d_sym = d;
            report.best_perm = perm;
            first = false;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return report;
}

nlohmann::json report_to_json(const TaskDistanceReport& report) {
    nlohmann::json j;
    j["source_id"] = report.source_id;
    j["target_id"] = report.target_id;
    j["d_per_perm"] = report.d_per_perm;
    j["d_sym"] = report.d_sym;
    j["best_perm"] = permutation_to_string(report.best_perm);
    return j;
}

void save_report(const TaskDistanceReport& report, const std::string& path) {
    const nlohmann::json j = report_to_json(report);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_report: cannot open " + path);
    out << j.dump(2) << "\n";
    if (!out.good()) throw std::runtime_error("save_report: write failed for " + path);
}

SelectionResult select_closest(const std::vector<TarNetModel>& models,
                               const std::vector<CausalDataset>& sources,
                               const CausalDataset& target,
                               std::optional<double> max_source_loss) {
    if (models.empty()) throw std::invalid_argument("select_closest: empty source list");
    if (models.size() != sources.size()) {
        throw std::invalid_argument("select_closest: model/dataset list length mismatch");
    }
    if (max_source_loss) {
        for (std::size_t i = 0; i < models.size(); ++i) {
            const double loss = models[i].meta.final_train_loss;
            if (!(loss <= *max_source_loss)) {
                throw std::runtime_error(
                    "select_closest: source " + std::to_string(i) + " has training loss " +
                    std::to_string(loss) + ", above the trust threshold " +
                    std::to_string(*max_source_loss));
            }
        }
    }
    SelectionResult result;
    for (std::size_t i = 0; i < models.size(); ++i) {
        result.reports.push_back(cita(models[i], sources[i], target));
        if (result.reports[i].d_sym < result.reports[result.index].d_sym) {
            result.index = i;
        }
    }
    return result;
}

}  // namespace ctl
