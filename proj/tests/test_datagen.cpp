#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "ctl/dataset.hpp"
#include "ctl/generators.hpp"

using namespace ctl;

namespace {

Eigen::VectorXd scalar_input(double u) {
    Eigen::VectorXd x(1);
    x << u;
    return x;
}

void check_noiseless(const CausalDataset& ds) {
    validate_dataset(ds);
    REQUIRE(has_closed_form(ds.meta));
    CHECK(factually_consistent(ds));
    for (Eigen::Index i = 0; i < ds.n(); ++i) {
        const Eigen::VectorXd x = ds.x.row(i).transpose();
        CHECK(ds.potential(i, 0) == doctest::Approx(closed_form_outcome(ds.meta, x, 0)).epsilon(1e-12));
        CHECK(ds.potential(i, 1) == doctest::Approx(closed_form_outcome(ds.meta, x, 1)).epsilon(1e-12));
        CHECK(ds.y[i] == ds.potential(i, ds.a[i]));
    }
}

}  // namespace

TEST_CASE("heat outcomes agree at zero exposure") {
    const CausalDataset ds = gen_heat(1.3, 100, 0);
    CHECK(closed_form_outcome(ds.meta, scalar_input(0.0), 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(closed_form_outcome(ds.meta, scalar_input(0.0), 1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("heat effect at unit exposure has the known value") {
    const CausalDataset ds = gen_heat(0.5, 10, 0);
    const double y0 = closed_form_outcome(ds.meta, scalar_input(1.0), 0);
    const double y1 = closed_form_outcome(ds.meta, scalar_input(1.0), 1);
    CHECK(y0 == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
    CHECK(y1 - y0 == doctest::Approx(-0.1049252).epsilon(1e-5));
}

TEST_CASE("heat treated curve is clipped at zero for long exposures") {
    const CausalDataset ds = gen_heat(2.0, 10, 0);
    CHECK(closed_form_outcome(ds.meta, scalar_input(10.0), 1) == 0.0);
}

TEST_CASE("heat datasets are noiseless and balanced") {
    const CausalDataset ds = gen_heat(0.8, 400, 3);
    check_noiseless(ds);
    CHECK(ds.n() == 400);
    CHECK(ds.d() == 1);
    CHECK(ds.a.sum() == 200);
    CHECK(ds.x.minCoeff() >= 0.0);
}

TEST_CASE("heat groups draw exposure times from the right chi squared laws") {
    const CausalDataset ds = gen_heat(1.0, 4000, 9);
    double sum0 = 0.0, sum1 = 0.0;
    int n0 = 0, n1 = 0;
    for (Eigen::Index i = 0; i < ds.n(); ++i) {
        if (ds.a[i] == 0) {
            sum0 += ds.x(i, 0);
            ++n0;
        } else {
            sum1 += ds.x(i, 0);
            ++n1;
        }
    }
    CHECK(sum0 / n0 == doctest::Approx(2.0).epsilon(0.1));
    CHECK(sum1 / n1 == doctest::Approx(5.0).epsilon(0.1));
}

TEST_CASE("movement saturates at the drag limited velocity") {
    const CausalDataset ds = gen_movement(20.0, 5.0, 10, 0);
    CHECK(ds.meta.params.at("c").get<double>() == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(closed_form_outcome(ds.meta, scalar_input(80.0), 1) == doctest::Approx(40.0).epsilon(1e-6));
    CHECK(closed_form_outcome(ds.meta, scalar_input(80.0), 0) == doctest::Approx(10.0).epsilon(1e-6));
}

TEST_CASE("movement datasets are noiseless") {
    const CausalDataset ds = gen_movement(10.0, 10.0, 300, 5);
    check_noiseless(ds);
    CHECK(ds.d() == 1);
}

TEST_CASE("rkhs datasets are noiseless with recomputable surfaces") {
    const CausalDataset ds = gen_rkhs(200, 11);
    check_noiseless(ds);
    CHECK(ds.d() == 4);
}

TEST_CASE("generators are deterministic in the seed") {
    const CausalDataset a = gen_heat(0.7, 150, 21);
    const CausalDataset b = gen_heat(0.7, 150, 21);
    CHECK((a.x - b.x).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.a - b.a).cwiseAbs().maxCoeff() == 0);
    CHECK((a.y - b.y).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.potential - b.potential).cwiseAbs().maxCoeff() == 0.0);

    const CausalDataset c = gen_heat(0.7, 150, 22);
    CHECK((a.x - c.x).cwiseAbs().maxCoeff() > 0.0);

    const CausalDataset r1 = gen_rkhs(64, 4);
    const CausalDataset r2 = gen_rkhs(64, 4);
    CHECK((r1.y - r2.y).cwiseAbs().maxCoeff() == 0.0);
    CHECK(dataset_id(r1) == dataset_id(r2));
    CHECK(dataset_id(r1) != dataset_id(gen_rkhs(64, 5)));
}

TEST_CASE("surrogate base has the observational assignment rate") {
    const CausalDataset ds = gen_surrogate(4000, {0.5, 0.125, 0.125, 0.125, 0.125}, 4.0, 17);
    validate_dataset(ds);
    CHECK(ds.d() == 25);
    const double treated = static_cast<double>(ds.a.sum()) / ds.n();
    CHECK(treated == doctest::Approx(139.0 / 747.0).epsilon(0.15));
    CHECK(factually_consistent(ds));
}

TEST_CASE("surrogate noise is centered on the closed form means") {
    const CausalDataset ds = gen_surrogate(4000, {0.6, 0.1, 0.1, 0.1, 0.1}, 4.0, 23);
    double dev0 = 0.0, dev1 = 0.0;
    for (Eigen::Index i = 0; i < ds.n(); ++i) {
        const Eigen::VectorXd x = ds.x.row(i).transpose();
        dev0 += ds.potential(i, 0) - closed_form_outcome(ds.meta, x, 0);
        dev1 += ds.potential(i, 1) - closed_form_outcome(ds.meta, x, 1);
    }
    CHECK(std::abs(dev0 / ds.n()) < 0.08);
    CHECK(std::abs(dev1 / ds.n()) < 0.08);
}

TEST_CASE("ihdp respects supplied assignments") {
    Eigen::MatrixXd covariates = Eigen::MatrixXd::Random(50, 6);
    Eigen::VectorXi given(50);
    for (int i = 0; i < 50; ++i) given[i] = i % 3 == 0 ? 1 : 0;
    const CausalDataset ds =
        gen_ihdp(covariates, {0.6, 0.1, 0.1, 0.1, 0.1}, 4.0, 31, given);
    CHECK((ds.a - given).cwiseAbs().maxCoeff() == 0);
    CHECK((ds.x - covariates).cwiseAbs().maxCoeff() == 0.0);
    CHECK(factually_consistent(ds));
}

TEST_CASE("treatment flips hit close to the requested rate") {
    const CausalDataset base = gen_heat(1.0, 2000, 41);
    const CausalDataset flipped = flip_treatments(base, 0.3, 7);
    int changed = 0;
    for (Eigen::Index i = 0; i < base.n(); ++i) changed += base.a[i] != flipped.a[i];
    const double fraction = static_cast<double>(changed) / base.n();
    CHECK(std::abs(fraction - 0.3) <= 0.03);
    CHECK(flipped.meta.params.at("flip_count").get<int>() == changed);

    // outcomes and potentials describe the original measurements
    CHECK((base.y - flipped.y).cwiseAbs().maxCoeff() == 0.0);
    CHECK((base.x - flipped.x).cwiseAbs().maxCoeff() == 0.0);
    CHECK((base.potential - flipped.potential).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zero and certain flip rates are exact") {
    const CausalDataset base = gen_heat(1.0, 300, 43);
    const CausalDataset none = flip_treatments(base, 0.0, 1);
    CHECK((base.a - none.a).cwiseAbs().maxCoeff() == 0);
    const CausalDataset all = flip_treatments(base, 1.0, 1);
    for (Eigen::Index i = 0; i < base.n(); ++i) CHECK(all.a[i] == 1 - base.a[i]);
    CHECK_THROWS_AS(flip_treatments(base, 1.5, 1), std::invalid_argument);
}

TEST_CASE("counterfactual version swaps arms and undoes itself") {
    const CausalDataset base = gen_movement(5.0, 5.0, 120, 47);
    const CausalDataset cf = counterfactual_version(base);
    for (Eigen::Index i = 0; i < base.n(); ++i) {
        CHECK(cf.a[i] == 1 - base.a[i]);
        CHECK(cf.y[i] == base.potential(i, cf.a[i]));
    }
    const CausalDataset back = counterfactual_version(cf);
    CHECK((back.a - base.a).cwiseAbs().maxCoeff() == 0);
    CHECK((back.y - base.y).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.potential - base.potential).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("subset keeps the selected rows in order") {
    const CausalDataset base = gen_heat(0.6, 50, 53);
    const CausalDataset part = subset(base, {4, 0, 17});
    REQUIRE(part.n() == 3);
    CHECK(part.x(0, 0) == base.x(4, 0));
    CHECK(part.x(1, 0) == base.x(0, 0));
    CHECK(part.y[2] == base.y[17]);
    CHECK(part.a[0] == base.a[4]);
    validate_dataset(part);
    CHECK_THROWS_AS(subset(base, {}), std::invalid_argument);
    CHECK_THROWS_AS(subset(base, {60}), std::out_of_range);
}

TEST_CASE("task grids have the documented shapes") {
    const auto ks = heat_k_grid();
    REQUIRE(ks.size() == 20);
    CHECK(ks.front() == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(ks.back() == doctest::Approx(2.0).epsilon(1e-12));
    for (std::size_t i = 1; i < ks.size(); ++i)
        CHECK(ks[i] - ks[i - 1] == doctest::Approx(1.5 / 19.0).epsilon(1e-9));

    const auto movement = movement_settings();
    REQUIRE(movement.size() == 12);
    CHECK(movement.front().m == 5.0);
    CHECK(movement.front().k == 1.0);

    const auto ihdp = ihdp_settings();
    REQUIRE(ihdp.size() == 10);
    CHECK(ihdp.front().omega == 4.0);
    CHECK(ihdp.front().mu.size() == 5);
    CHECK(ihdp.front().mu[0] == 0.6);
}

TEST_CASE("datasets survive a save and load round trip") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "ctl_datagen_test";
    fs::create_directories(dir);
    const std::string path = (dir / "roundtrip.bin").string();

    const CausalDataset ds = gen_rkhs(80, 61);
    save_dataset(ds, path);
    const CausalDataset loaded = load_dataset(path);
    CHECK((ds.x - loaded.x).cwiseAbs().maxCoeff() == 0.0);
    CHECK((ds.a - loaded.a).cwiseAbs().maxCoeff() == 0);
    CHECK((ds.y - loaded.y).cwiseAbs().maxCoeff() == 0.0);
    CHECK((ds.potential - loaded.potential).cwiseAbs().maxCoeff() == 0.0);
    CHECK(dataset_id(ds) == dataset_id(loaded));
    CHECK(loaded.meta.family == "rkhs");
    fs::remove_all(dir);
}

TEST_CASE("bad generator arguments are rejected") {
    CHECK_THROWS_AS(gen_heat(0.0, 100, 0), std::invalid_argument);
    CHECK_THROWS_AS(gen_heat(1.0, 0, 0), std::invalid_argument);
    CHECK_THROWS_AS(gen_movement(0.0, 1.0, 100, 0), std::invalid_argument);
    CHECK_THROWS_AS(gen_rkhs(-5, 0), std::invalid_argument);
}
