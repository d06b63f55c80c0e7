#include "ctl/generators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ctl/rng.hpp"

namespace ctl {

namespace {

const double kIhdpTreatedShare = 139.0 / 747.0;

// final deterministic row shuffle so prefixes of a generated dataset mix
// both groups
void shuffle_rows(CausalDataset& ds, Rng& rng) {
    std::vector<int> order(ds.n());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    CausalDataset shuffled = subset(ds, order);
    ds.x.swap(shuffled.x);
    ds.a.swap(shuffled.a);
    ds.y.swap(shuffled.y);
    ds.potential.swap(shuffled.potential);
}

void require_both_groups(const CausalDataset& ds) {
    const int treated = static_cast<int>((ds.a.array() == 1).count());
    if (treated == 0 || treated == ds.n()) {
        throw std::runtime_error("generator produced a single-group dataset");
    }
}

}  // namespace

CausalDataset gen_ihdp(const Eigen::MatrixXd& covariates, const std::vector<double>& mu,
                       double omega, std::uint64_t seed,
                       const std::optional<Eigen::VectorXi>& assignments) {
    const Eigen::Index n = covariates.rows();
    const Eigen::Index d = covariates.cols();
    if (n < 2) throw std::invalid_argument("gen_ihdp: need at least two rows");
    if (mu.size() != 5) throw std::invalid_argument("gen_ihdp: mu needs 5 entries");
    double msum = 0.0;
    for (double p : mu) {
        if (p < 0.0) throw std::invalid_argument("gen_ihdp: mu entries must be nonnegative");
        msum += p;
    }
    if (std::abs(msum - 1.0) > 1e-9) throw std::invalid_argument("gen_ihdp: mu must sum to 1");

    Rng rng(seed);
    static const double kBetaValues[5] = {0.0, 0.1, 0.2, 0.3, 0.4};
    Eigen::VectorXd beta(d);
    for (Eigen::Index j = 0; j < d; ++j) {
        beta[j] = kBetaValues[rng.categorical(mu)];
    }

    CausalDataset ds;
    ds.x = covariates;
    ds.a.resize(n);
    if (assignments) {
        if (assignments->size() != n) throw std::invalid_argument("gen_ihdp: assignment length mismatch");
        for (Eigen::Index i = 0; i < n; ++i) {
            if ((*assignments)[i] != 0 && (*assignments)[i] != 1) {
                throw std::invalid_argument("gen_ihdp: assignments must be binary");
            }
        }
        ds.a = *assignments;
    } else {
        // redrawn wholesale in the (astronomically unlikely) degenerate case
        for (int attempt = 0; attempt < 64; ++attempt) {
            for (Eigen::Index i = 0; i < n; ++i) ds.a[i] = rng.bernoulli(kIhdpTreatedShare) ? 1 : 0;
            const auto treated = (ds.a.array() == 1).count();
            if (treated > 0 && treated < n) break;
        }
    }

    ds.y.resize(n);
    ds.potential.resize(n, 2);
    const Eigen::VectorXd shifted_mean = (covariates.rowwise() + Eigen::RowVectorXd::Constant(d, 0.5)) * beta;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double y0 = rng.normal(std::exp(shifted_mean[i]), 1.0);
        const double y1 = rng.normal(shifted_mean[i] - omega, 1.0);
        ds.potential(i, 0) = y0;
        ds.potential(i, 1) = y1;
        ds.y[i] = ds.potential(i, ds.a[i]);
    }

    ds.meta.family = "ihdp";
    ds.meta.seed = seed;
    ds.meta.num_treatments = 1;
    ds.meta.n = static_cast<int>(n);
    ds.meta.d = static_cast<int>(d);
    ds.meta.params["mu"] = mu;
    ds.meta.params["omega"] = omega;
    ds.meta.params["beta"] = std::vector<double>(beta.data(), beta.data() + beta.size());
    require_both_groups(ds);
    return ds;
}

CausalDataset gen_surrogate(int n, const std::vector<double>& mu, double omega,
                            std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("gen_surrogate: need at least two rows");
    Rng rng(seed);
    Eigen::MatrixXd x(n, 25);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < 25; ++j) x(i, j) = rng.normal();
    }
    Eigen::VectorXi a(n);
    for (int attempt = 0; attempt < 64; ++attempt) {
        for (int i = 0; i < n; ++i) a[i] = rng.bernoulli(kIhdpTreatedShare) ? 1 : 0;
        const auto treated = (a.array() == 1).count();
        if (treated > 0 && treated < n) break;
    }
    CausalDataset ds = gen_ihdp(x, mu, omega, rng.raw(), a);
    ds.meta.family = "surrogate";
    ds.meta.seed = seed;
    return ds;
}

CausalDataset gen_rkhs(int n, std::uint64_t seed) {
    if (n < 2 || n % 2 != 0) throw std::invalid_argument("gen_rkhs: n must be even and >= 2");
    Rng rng(seed);
    const int d = 4;
    auto draw_around = [&](double center) {
        Eigen::VectorXd v(d);
        for (int j = 0; j < d; ++j) v[j] = rng.normal(center, 1.0);
        return v;
    };
    const Eigen::VectorXd mu1 = draw_around(1.0);
    const Eigen::VectorXd mu0 = draw_around(-1.0);
    const Eigen::VectorXd gamma0 = draw_around(7.0);
    const Eigen::VectorXd gamma1 = draw_around(9.0);
    const int lambda = 10 + static_cast<int>(rng.below(91));  // uniform on {10..100}
    const int m0 = rng.poisson(static_cast<double>(lambda));
    const int m1 = rng.poisson(static_cast<double>(lambda));

    auto draw_centers = [&](const Eigen::VectorXd& gamma, int count) {
        Eigen::MatrixXd c(count, d);
        for (int i = 0; i < count; ++i) {
            for (int j = 0; j < d; ++j) c(i, j) = rng.normal(gamma[j], 1.0);
        }
        return c;
    };
    const Eigen::MatrixXd centers0 = draw_centers(gamma0, m0);
    const Eigen::MatrixXd centers1 = draw_centers(gamma1, m1);

    auto kernel_sum = [&](const Eigen::MatrixXd& centers, const Eigen::VectorXd& x) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < centers.rows(); ++i) {
            const double sq = (centers.row(i).transpose() - x).squaredNorm();
            s += std::exp(-sq / (2.0 * kRkhsBandwidth * kRkhsBandwidth));
        }
        return s;  // zero sum when there are no centers
    };

    const int half = n / 2;
    CausalDataset ds;
    ds.x.resize(n, d);
    ds.a.resize(n);
    ds.y.resize(n);
    ds.potential.resize(n, 2);
    for (int i = 0; i < n; ++i) {
        const bool treated = i < half;
        const Eigen::VectorXd& mu = treated ? mu1 : mu0;
        Eigen::VectorXd xi(d);
        for (int j = 0; j < d; ++j) xi[j] = rng.normal(mu[j], 1.0);
        ds.x.row(i) = xi.transpose();
        ds.a[i] = treated ? 1 : 0;
        ds.potential(i, 0) = kernel_sum(centers0, xi);
        ds.potential(i, 1) = kernel_sum(centers1, xi);
        ds.y[i] = ds.potential(i, ds.a[i]);
    }

    ds.meta.family = "rkhs";
    ds.meta.seed = seed;
    ds.meta.num_treatments = 1;
    ds.meta.n = n;
    ds.meta.d = d;
    auto vec = [](const Eigen::VectorXd& v) {
        return std::vector<double>(v.data(), v.data() + v.size());
    };
    auto mat = [](const Eigen::MatrixXd& m) {
        std::vector<std::vector<double>> rows;
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            rows.emplace_back(m.row(i).begin(), m.row(i).end());
        }
        return rows;
    };
    ds.meta.params["mu0"] = vec(mu0);
    ds.meta.params["mu1"] = vec(mu1);
    ds.meta.params["gamma0"] = vec(gamma0);
    ds.meta.params["gamma1"] = vec(gamma1);
    ds.meta.params["lambda"] = lambda;
    ds.meta.params["m0"] = m0;
    ds.meta.params["m1"] = m1;
    ds.meta.params["centers0"] = mat(centers0);
    ds.meta.params["centers1"] = mat(centers1);
    ds.meta.params["bandwidth"] = kRkhsBandwidth;
    shuffle_rows(ds, rng);
    require_both_groups(ds);
    return ds;
}

namespace {

double heat_y0(double k, double u) { return std::exp(-k * u); }
double heat_y1(double k, double u) { return std::max((95.0 * std::exp(-k * u) - 20.0) / 75.0, 0.0); }

double movement_y0(double u) { return 10.0 * (1.0 - std::exp(-u)); }
double movement_y1(double c, double u) { return (10.0 / c) * (1.0 - std::exp(-c * u)); }

}  // namespace

CausalDataset gen_heat(double k, int n, std::uint64_t seed) {
    if (n < 2 || n % 2 != 0) throw std::invalid_argument("gen_heat: n must be even and >= 2");
    if (k <= 0.0) throw std::invalid_argument("gen_heat: k must be positive");
    Rng rng(seed);
    const int half = n / 2;
    CausalDataset ds;
    ds.x.resize(n, 1);
    ds.a.resize(n);
    ds.y.resize(n);
    ds.potential.resize(n, 2);
    for (int i = 0; i < n; ++i) {
        const bool treated = i < half;
        const double u = rng.chi_squared(treated ? 5 : 2);
        ds.x(i, 0) = u;
        ds.a[i] = treated ? 1 : 0;
        ds.potential(i, 0) = heat_y0(k, u);
        ds.potential(i, 1) = heat_y1(k, u);
        ds.y[i] = ds.potential(i, ds.a[i]);
    }
    ds.meta.family = "heat";
    ds.meta.seed = seed;
    ds.meta.num_treatments = 1;
    ds.meta.n = n;
    ds.meta.d = 1;
    ds.meta.params["k"] = k;
    shuffle_rows(ds, rng);
    require_both_groups(ds);
    return ds;
}

CausalDataset gen_movement(double m, double k, int n, std::uint64_t seed) {
    if (n < 2 || n % 2 != 0) throw std::invalid_argument("gen_movement: n must be even and >= 2");
    if (m <= 0.0 || k <= 0.0) throw std::invalid_argument("gen_movement: m and k must be positive");
    const double c = k / m;
    Rng rng(seed);
    const int half = n / 2;
    CausalDataset ds;
    ds.x.resize(n, 1);
    ds.a.resize(n);
    ds.y.resize(n);
    ds.potential.resize(n, 2);
    for (int i = 0; i < n; ++i) {
        const bool treated = i < half;
        const double u = rng.chi_squared(treated ? 2 : 5);
        ds.x(i, 0) = u;
        ds.a[i] = treated ? 1 : 0;
        ds.potential(i, 0) = movement_y0(u);
        ds.potential(i, 1) = movement_y1(c, u);
        ds.y[i] = ds.potential(i, ds.a[i]);
    }
    ds.meta.family = "movement";
    ds.meta.seed = seed;
    ds.meta.num_treatments = 1;
    ds.meta.n = n;
    ds.meta.d = 1;
    ds.meta.params["m"] = m;
    ds.meta.params["k"] = k;
    ds.meta.params["c"] = c;
    shuffle_rows(ds, rng);
    require_both_groups(ds);
    return ds;
}

CausalDataset flip_treatments(const CausalDataset& ds, double p, std::uint64_t seed) {
    validate_dataset(ds);
    if (ds.meta.num_treatments != 1) {
        throw std::invalid_argument("flip_treatments: binary treatments required");
    }
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("flip_treatments: p must lie in [0, 1]");
    CausalDataset out = ds;
    Rng rng(seed);
    int flipped = 0;
    for (Eigen::Index i = 0; i < out.n(); ++i) {
        if (rng.bernoulli(p)) {
            out.a[i] = 1 - out.a[i];
            ++flipped;
        }
    }
    out.meta.params["flip_p"] = p;
    out.meta.params["flip_seed"] = seed;
    out.meta.params["flip_count"] = flipped;
    return out;
}

std::vector<IhdpSetting> ihdp_settings() {
    std::vector<IhdpSetting> settings;
    settings.push_back({{0.6, 0.1, 0.1, 0.1, 0.1}, 4.0});
    for (int i = 1; i <= 9; ++i) {
        settings.push_back({{0.6 + 0.01 * i, 0.1 - 0.01 * i, 0.1, 0.1, 0.1}, 4.0 + 0.1 * i});
    }
    return settings;
}

std::vector<double> heat_k_grid() {
    std::vector<double> ks;
    for (int i = 0; i < 20; ++i) {
        ks.push_back(0.5 + 1.5 * i / 19.0);
    }
    return ks;
}

std::vector<MovementSetting> movement_settings() {
    return {{5, 1},  {5, 5},   {5, 10},  {5, 20},  {10, 5},  {10, 10},
            {10, 20}, {20, 5},  {20, 10}, {20, 20}, {50, 10}, {50, 20}};
}

bool has_closed_form(const DatasetMeta& meta) {
    return meta.family == "heat" || meta.family == "movement" || meta.family == "rkhs" ||
           meta.family == "ihdp" || meta.family == "surrogate";
}

double closed_form_outcome(const DatasetMeta& meta, const Eigen::VectorXd& x, int a) {
    if (a != 0 && a != 1) throw std::invalid_argument("closed_form_outcome: binary treatments only");
    if (meta.family == "heat") {
        const double k = meta.params.at("k").get<double>();
        return a == 0 ? heat_y0(k, x[0]) : heat_y1(k, x[0]);
    }
    if (meta.family == "movement") {
        const double c = meta.params.at("c").get<double>();
        return a == 0 ? movement_y0(x[0]) : movement_y1(c, x[0]);
    }
    if (meta.family == "rkhs") {
        const auto centers = meta.params.at(a == 0 ? "centers0" : "centers1")
                                 .get<std::vector<std::vector<double>>>();
        const double bw = meta.params.at("bandwidth").get<double>();
        double s = 0.0;
        for (const auto& c : centers) {
            double sq = 0.0;
            for (std::size_t j = 0; j < c.size(); ++j) {
                const double t = c[j] - x[static_cast<Eigen::Index>(j)];
                sq += t * t;
            }
            s += std::exp(-sq / (2.0 * bw * bw));
        }
        return s;
    }
    if (meta.family == "ihdp" || meta.family == "surrogate") {
        // conditional mean surfaces of the noisy simulation
        const auto beta = meta.params.at("beta").get<std::vector<double>>();
        const double omega = meta.params.at("omega").get<double>();
        double dot = 0.0;
        for (std::size_t j = 0; j < beta.size(); ++j) {
            dot += beta[j] * (x[static_cast<Eigen::Index>(j)] + 0.5);
        }
        return a == 0 ? std::exp(dot) : dot - omega;
    }
    throw std::invalid_argument("closed_form_outcome: no closed form for family " + meta.family);
}

}  // namespace ctl
