#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "ctl/affinity.hpp"
#include "ctl/generators.hpp"
#include "ctl/rng.hpp"
#include "ctl/tarnet.hpp"

using namespace ctl;

namespace {

const MlpSpec kTinyPhi{{1, 8, 6}, Activation::elu, 0};
const std::vector<int> kTinyHead{4};

// linear representation [2 -> 3] with single linear heads [3 -> 1];
// parameters packed as out-neuron-major weights followed by biases
struct LinearModelParts {
    Eigen::MatrixXd w;   // 3 x 2
    Eigen::VectorXd b;   // 3
    Eigen::MatrixXd wh;  // 2 x 3, one row per head
    Eigen::VectorXd bh;  // 2
};

TarNetModel build_linear_model(const LinearModelParts& parts) {
    TarNetModel model = make_model(2, MlpSpec{{2, 3}, Activation::identity, 0}, {}, 1, 0);
    ParamVector phi(9);
    for (int o = 0; o < 3; ++o) {
        phi[2 * o] = parts.w(o, 0);
        phi[2 * o + 1] = parts.w(o, 1);
    }
    for (int o = 0; o < 3; ++o) phi[6 + o] = parts.b[o];
    model.phi_params = phi;
    for (int a = 0; a < 2; ++a) {
        ParamVector head(4);
        head << parts.wh(a, 0), parts.wh(a, 1), parts.wh(a, 2), parts.bh[a];
        model.head_params[a] = head;
    }
    return model;
}

CausalDataset small_dataset(int n, int treatments, std::uint64_t seed, int d = 2) {
    Rng rng(seed);
    CausalDataset ds;
    ds.x.resize(n, d);
    ds.a.resize(n);
    ds.y.resize(n);
    ds.potential.resize(n, treatments + 1);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) ds.x(i, j) = rng.normal();
        ds.a[i] = i % (treatments + 1);
        for (int k = 0; k <= treatments; ++k) ds.potential(i, k) = rng.normal();
        ds.y[i] = ds.potential(i, ds.a[i]);
    }
    ds.meta.family = "hand";
    ds.meta.seed = seed;
    ds.meta.n = n;
    ds.meta.d = d;
    ds.meta.num_treatments = treatments;
    return ds;
}

// expected signature from the chain rule written out by hand
Eigen::VectorXd hand_fisher(const LinearModelParts& parts, const CausalDataset& ds,
                            bool binary) {
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(9 + 4 + 4);
    for (Eigen::Index i = 0; i < ds.n(); ++i) {
        const Eigen::VectorXd x = ds.x.row(i).transpose();
        const int a = ds.a[i];
        const Eigen::VectorXd z = parts.w * x + parts.b;
        const double pred = parts.wh.row(a).dot(z) + parts.bh[a];
        const double r = binary ? 1.0 / (1.0 + std::exp(-pred)) - ds.y[i] : pred - ds.y[i];
        Eigen::VectorXd g = Eigen::VectorXd::Zero(diag.size());
        for (int o = 0; o < 3; ++o) {
            g[2 * o] = r * parts.wh(a, o) * x[0];
            g[2 * o + 1] = r * parts.wh(a, o) * x[1];
            g[6 + o] = r * parts.wh(a, o);
        }
        const Eigen::Index head_off = 9 + 4 * a;
        for (int o = 0; o < 3; ++o) g[head_off + o] = r * z[o];
        g[head_off + 3] = r;
        diag += g.cwiseProduct(g);
    }
    diag /= static_cast<double>(ds.n());
    return diag;
}

LinearModelParts fixed_parts() {
    LinearModelParts parts;
    parts.w.resize(3, 2);
    parts.w << 0.4, -0.3, 0.7, 0.2, -0.5, 0.6;
    parts.b.resize(3);
    parts.b << 0.1, -0.2, 0.05;
    parts.wh.resize(2, 3);
    parts.wh << 0.9, -0.4, 0.3, -0.2, 0.8, 0.5;
    parts.bh.resize(2);
    parts.bh << 0.15, -0.35;
    return parts;
}

CausalDataset permute_labels(CausalDataset ds, const std::vector<int>& sigma) {
    for (Eigen::Index i = 0; i < ds.n(); ++i) ds.a[i] = sigma[ds.a[i]];
    ds.meta.params["perm"] = permutation_to_string(sigma);
    return ds;
}

FisherSignature unit_signature(std::initializer_list<double> entries) {
    FisherSignature sig;
    sig.diag = Eigen::VectorXd(static_cast<Eigen::Index>(entries.size()));
    Eigen::Index i = 0;
    for (double e : entries) sig.diag[i++] = e;
    sig.trace_normalized = true;
    return sig;
}

TarNetModel quick_train(const CausalDataset& ds, std::uint64_t seed, int epochs = 30) {
    TrainConfig config;
    config.alpha = 0.0;
    config.epochs = epochs;
    config.seed = seed;
    return train(ds, kTinyPhi, kTinyHead, config).model;
}

}  // namespace

TEST_CASE("linear model wiring matches the packed layout") {
    const LinearModelParts parts = fixed_parts();
    const TarNetModel model = build_linear_model(parts);
    Eigen::VectorXd x(2);
    x << 0.7, -1.1;
    const Eigen::VectorXd z = latent(model, x);
    CHECK((z - (parts.w * x + parts.b)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(predict_outcome(model, x, 0) ==
          doctest::Approx(parts.wh.row(0).dot(z) + parts.bh[0]).epsilon(1e-14));
    CHECK(predict_outcome(model, x, 1) ==
          doctest::Approx(parts.wh.row(1).dot(z) + parts.bh[1]).epsilon(1e-14));
}

TEST_CASE("fisher diagonal matches the written out chain rule") {
    const LinearModelParts parts = fixed_parts();
    const TarNetModel model = build_linear_model(parts);
    const CausalDataset ds = small_dataset(10, 1, 71);

    const FisherSignature sig = empirical_fisher_diag(model, ds);
    REQUIRE(sig.trace_normalized);
    CHECK(std::abs(sig.diag.sum() - 1.0) < 1e-9);

    Eigen::VectorXd expected = hand_fisher(parts, ds, false);
    expected /= expected.sum();
    CHECK((sig.diag - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("fisher diagonal handles binary outcomes") {
    const LinearModelParts parts = fixed_parts();
    const TarNetModel model = build_linear_model(parts);
    CausalDataset ds = small_dataset(10, 1, 73);
    ds.meta.outcome_kind = "binary";
    for (Eigen::Index i = 0; i < ds.n(); ++i) {
        for (int k = 0; k < 2; ++k) ds.potential(i, k) = ds.potential(i, k) > 0.0 ? 1.0 : 0.0;
        ds.y[i] = ds.potential(i, ds.a[i]);
    }

    const FisherSignature sig = empirical_fisher_diag(model, ds);
    Eigen::VectorXd expected = hand_fisher(parts, ds, true);
    expected /= expected.sum();
    CHECK((sig.diag - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("single sample signature is the normalized squared gradient") {
    const LinearModelParts parts = fixed_parts();
    const TarNetModel model = build_linear_model(parts);
    const CausalDataset ds = small_dataset(1, 1, 79);
    const FisherSignature sig = empirical_fisher_diag(model, ds);
    Eigen::VectorXd expected = hand_fisher(parts, ds, false);
    expected /= expected.sum();
    CHECK((sig.diag - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("zero gradients produce an unnormalized zero signature") {
    LinearModelParts parts = fixed_parts();
    parts.w.setZero();
    parts.b.setZero();
    parts.wh.setZero();
    parts.bh.setZero();
    const TarNetModel model = build_linear_model(parts);
    CausalDataset ds = small_dataset(6, 1, 83);
    ds.y.setZero();
    ds.potential.setZero();
    const FisherSignature sig = empirical_fisher_diag(model, ds);
    CHECK_FALSE(sig.trace_normalized);
    CHECK(sig.diag.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("fisher signature ignores dataset row order") {
    const TarNetModel model = build_linear_model(fixed_parts());
    const CausalDataset ds = small_dataset(24, 1, 89);
    std::vector<int> order(24);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(5);
    rng.shuffle(order);
    const FisherSignature a = empirical_fisher_diag(model, ds);
    const FisherSignature b = empirical_fisher_diag(model, subset(ds, order));
    CHECK((a.diag - b.diag).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("frechet distance has the pinned hand values") {
    const FisherSignature same = unit_signature({0.3, 0.2, 0.5});
    CHECK(frechet_distance(same, same) == 0.0);

    const FisherSignature e1 = unit_signature({1.0, 0.0, 0.0});
    const FisherSignature e2 = unit_signature({0.0, 1.0, 0.0});
    CHECK(frechet_distance(e1, e2) == doctest::Approx(1.0).epsilon(1e-12));

    const FisherSignature half = unit_signature({0.5, 0.5});
    const FisherSignature tilted = unit_signature({0.25, 0.75});
    const double expected = std::sqrt(std::pow(std::sqrt(0.5) - std::sqrt(0.25), 2) +
                                      std::pow(std::sqrt(0.5) - std::sqrt(0.75), 2)) /
                            std::sqrt(2.0);
    CHECK(expected == doctest::Approx(0.1845919).epsilon(1e-6));
    CHECK(frechet_distance(half, tilted) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("frechet distance is a metric on unit trace vectors") {
    Rng rng(97);
    for (int trial = 0; trial < 20; ++trial) {
        auto draw = [&]() {
            Eigen::VectorXd v(6);
            for (int i = 0; i < 6; ++i) v[i] = rng.uniform(1e-4, 1.0);
            v /= v.sum();
            FisherSignature sig;
            sig.diag = v;
            sig.trace_normalized = true;
            return sig;
        };
        const FisherSignature a = draw(), b = draw(), c = draw();
        const double ab = frechet_distance(a, b);
        CHECK(ab == frechet_distance(b, a));
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0 + 1e-12);
        CHECK(ab <= frechet_distance(a, c) + frechet_distance(c, b) + 1e-9);
    }
}

TEST_CASE("frechet distance rejects mismatched or raw signatures") {
    const FisherSignature a = unit_signature({0.5, 0.5});
    const FisherSignature b = unit_signature({0.2, 0.3, 0.5});
    CHECK_THROWS_AS(frechet_distance(a, b), std::invalid_argument);
    FisherSignature raw = a;
    raw.trace_normalized = false;
    CHECK_THROWS_AS(frechet_distance(a, raw), std::invalid_argument);
}

TEST_CASE("distance to the source task itself is zero") {
    const CausalDataset ds = gen_heat(1.0, 200, 101);
    const TarNetModel model = quick_train(ds, 1);
    const TaskDistanceReport report = cita(model, ds, ds);
    CHECK(report.identity_distance() == 0.0);
    CHECK(report.d_sym == 0.0);
    CHECK(report.d_per_perm.size() == 2);
    CHECK(report.source_id == report.target_id);
}

TEST_CASE("fully flipped labels are recognized as the same task") {
    const CausalDataset ds = gen_heat(1.0, 200, 103);
    const TarNetModel model = quick_train(ds, 2);
    const CausalDataset flipped = flip_treatments(ds, 1.0, 9);
    const TaskDistanceReport report = cita(model, ds, flipped);
    CHECK(report.d_sym == 0.0);
    CHECK(report.identity_distance() > 0.0);
    CHECK(permutation_to_string(report.best_perm) == "10");
}

TEST_CASE("label permutations of the target never change the symmetrized distance") {
    const CausalDataset source = gen_heat(0.8, 200, 107);
    const TarNetModel model = quick_train(source, 3);
    const CausalDataset target = gen_heat(1.6, 200, 109);

    const TaskDistanceReport base = cita(model, source, target);
    const TaskDistanceReport swapped = cita(model, source, permute_labels(target, {1, 0}));
    CHECK(base.d_sym == doctest::Approx(swapped.d_sym).epsilon(1e-12));
    // the candidate set is the same two numbers in either order
    CHECK(base.d_per_perm.at("01") == doctest::Approx(swapped.d_per_perm.at("10")).epsilon(1e-12));
    CHECK(base.d_per_perm.at("10") == doctest::Approx(swapped.d_per_perm.at("01")).epsilon(1e-12));
    for (const auto& [name, value] : base.d_per_perm) {
        CHECK(value >= 0.0);
        CHECK(value <= 1.0 + 1e-12);
    }
}

TEST_CASE("three label tasks enumerate all six relabelings") {
    const CausalDataset source = small_dataset(60, 2, 113, 1);
    const TarNetModel model =
        make_model(1, MlpSpec{{1, 6, 4}, Activation::elu, 0}, {3}, 2, 17);
    const CausalDataset target = small_dataset(60, 2, 127, 1);

    const TaskDistanceReport base = cita(model, source, target);
    CHECK(base.d_per_perm.size() == 6);

    const std::vector<int> cycle = {1, 2, 0};
    const TaskDistanceReport rotated = cita(model, source, permute_labels(target, cycle));
    CHECK(base.d_sym == doctest::Approx(rotated.d_sym).epsilon(1e-12));

    std::vector<double> av, bv;
    for (const auto& [name, value] : base.d_per_perm) av.push_back(value);
    for (const auto& [name, value] : rotated.d_per_perm) bv.push_back(value);
    std::sort(av.begin(), av.end());
    std::sort(bv.begin(), bv.end());
    for (std::size_t i = 0; i < av.size(); ++i)
        CHECK(av[i] == doctest::Approx(bv[i]).epsilon(1e-12));
}

TEST_CASE("nearby decay rates are closer than distant ones") {
    // sharing the draw across decay rates isolates the surface difference,
    // mirroring how the task grids reuse one replication seed
    const CausalDataset source = gen_heat(0.5, 600, 131);
    const TarNetModel model = quick_train(source, 4, 60);
    const double near = cita(model, source, gen_heat(0.6, 600, 131)).d_sym;
    const double far = cita(model, source, gen_heat(2.0, 600, 131)).d_sym;
    CHECK(near < far);
}

TEST_CASE("closest source selection breaks ties at the lowest index") {
    const CausalDataset ds = gen_heat(1.0, 200, 149);
    const TarNetModel model = quick_train(ds, 5);
    // identical (model, dataset) entries produce identical distances
    const SelectionResult result = select_closest({model, model}, {ds, ds}, gen_heat(1.2, 200, 151));
    CHECK(result.index == 0);
    REQUIRE(result.reports.size() == 2);
    CHECK(result.reports[0].d_sym == result.reports[1].d_sym);
}

TEST_CASE("single source and own generator selections") {
    const CausalDataset only = gen_heat(0.9, 200, 157);
    const TarNetModel only_model = quick_train(only, 6);
    const SelectionResult single =
        select_closest({only_model}, {only}, gen_heat(1.5, 200, 163));
    CHECK(single.index == 0);

    const CausalDataset other = gen_heat(1.7, 200, 167);
    const TarNetModel other_model = quick_train(other, 7);
    const SelectionResult owned =
        select_closest({other_model, only_model}, {other, only}, only);
    CHECK(owned.index == 1);
    CHECK(owned.reports[1].d_sym == 0.0);
}

TEST_CASE("decay rate sources bracket the target sensibly") {
    const CausalDataset target = gen_heat(0.5, 400, 173);
    std::vector<CausalDataset> sources;
    std::vector<TarNetModel> models;
    int offset = 0;
    for (double k : {0.6, 1.0, 2.0}) {
        sources.push_back(gen_heat(k, 400, 173));
        models.push_back(quick_train(sources.back(), 8 + offset, 40));
        ++offset;
    }
    CHECK(select_closest(models, sources, target).index == 0);
}

TEST_CASE("trust threshold rejects underfit sources") {
    const CausalDataset ds = gen_heat(1.0, 200, 181);
    const TarNetModel model = quick_train(ds, 9);
    REQUIRE(std::isfinite(model.meta.final_train_loss));
    const double loss = model.meta.final_train_loss;
    CHECK_NOTHROW(select_closest({model}, {ds}, gen_heat(1.2, 200, 191), loss + 1.0));
    CHECK_THROWS_AS(select_closest({model}, {ds}, gen_heat(1.2, 200, 191), loss * 0.5),
                    std::runtime_error);
}

TEST_CASE("mismatched tasks are rejected") {
    const CausalDataset ds = gen_heat(1.0, 100, 193);
    const TarNetModel model = quick_train(ds, 10);
    CHECK_THROWS_AS(cita(model, ds, gen_rkhs(100, 197)), std::invalid_argument);
    CHECK_THROWS_AS(cita(model, ds, small_dataset(30, 2, 199, 1)), std::invalid_argument);
    CHECK_THROWS_AS(select_closest({}, {}, ds), std::invalid_argument);
}

TEST_CASE("label count cap is enforced") {
    const int treatments = 6;  // seven labels exceeds the enumeration cap
    const CausalDataset source = small_dataset(70, treatments, 211, 1);
    const TarNetModel model =
        make_model(1, MlpSpec{{1, 4}, Activation::elu, 0}, {}, treatments, 19);
    const CausalDataset target = small_dataset(70, treatments, 223, 1);
    CHECK_THROWS_AS(cita(model, source, target), std::invalid_argument);
}

TEST_CASE("reports serialize with every permutation entry") {
    const CausalDataset ds = gen_heat(1.1, 200, 227);
    const TarNetModel model = quick_train(ds, 11);
    const TaskDistanceReport report = cita(model, ds, gen_heat(1.4, 200, 229));
    const nlohmann::json j = report_to_json(report);
    CHECK(j.at("source_id").get<std::string>() == report.source_id);
    CHECK(j.at("d_per_perm").size() == 2);
    CHECK(j.at("d_sym").get<double>() == report.d_sym);
    CHECK(j.at("best_perm").get<std::string>() == permutation_to_string(report.best_perm));
}
