#include "ctl/transport.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace ctl {

namespace {

// column-wise logsumexp of (f - C) / e : result[j] = LSE_i((f_i - C_ij)/e)
Eigen::VectorXd lse_over_rows(const Eigen::VectorXd& f, const Eigen::MatrixXd& c, double e) {
    const Eigen::Index mp = c.cols();
    Eigen::VectorXd out(mp);
    for (Eigen::Index j = 0; j < mp; ++j) {
        const Eigen::VectorXd z = (f - c.col(j)) / e;
        const double zmax = z.maxCoeff();
        out[j] = zmax + std::log((z.array() - zmax).exp().sum());
    }
    return out;
}

// row-wise logsumexp of (g - C) / e : result[i] = LSE_j((g_j - C_ij)/e)
Eigen::VectorXd lse_over_cols(const Eigen::VectorXd& g, const Eigen::MatrixXd& c, double e) {
    const Eigen::Index m = c.rows();
    Eigen::VectorXd out(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const Eigen::VectorXd z = (g - c.row(i).transpose()) / e;
        const double zmax = z.maxCoeff();
        out[i] = zmax + std::log((z.array() - zmax).exp().sum());
    }
    return out;
}

}  // namespace

TransportResult sinkhorn_w1(const PointCloud& p, const PointCloud& q, double eps, int iters) {
    validate_cloud(p);
    validate_cloud(q);
    if (p.points.cols() != q.points.cols()) {
        throw std::invalid_argument("sinkhorn_w1: dimension mismatch");
    }
    if (!(eps > 0.0)) throw std::invalid_argument("sinkhorn_w1: eps must be positive");
    if (iters < 1) throw std::invalid_argument("sinkhorn_w1: iters must be >= 1");

    const Eigen::Index m = p.points.rows();
    const Eigen::Index mp = q.points.rows();
    const Eigen::Index dim = p.points.cols();
    const Eigen::VectorXd& a = p.weights;
    const Eigen::VectorXd& b = q.weights;

    Eigen::MatrixXd cost(m, mp);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < mp; ++j) {
            cost(i, j) = (p.points.row(i) - q.points.row(j)).norm();
        }
    }
    const double s = cost.maxCoeff();

    TransportResult result;
    if (s == 0.0) {
        // all pairwise distances vanish; any feasible plan is optimal
        result.cost = 0.0;
        result.plan = a * b.transpose();
        result.grad_p = Eigen::MatrixXd::Zero(m, dim);
        result.grad_q = Eigen::MatrixXd::Zero(mp, dim);
        return result;
    }

    const Eigen::MatrixXd ch = cost / s;  // normalized cost, entries in [0, 1]
    const double target = eps / s;        // eps acts on the raw cost scale
    const Eigen::VectorXd la = a.array().log().matrix();
    const Eigen::VectorXd lb = b.array().log().matrix();

    // geometric warm-start: annealed regularization over a fixed-length
    // prefix so that runs with more iterations extend the same trajectory
    const int anneal = std::max(1, std::min(iters / 2, 200));
    std::vector<double> ehs(iters);
    const double eps0 = 1.0;
    for (int t = 0; t < iters; ++t) {
        ehs[t] = (t < anneal)
                     ? eps0 * std::pow(target / eps0, static_cast<double>(t + 1) / anneal)
                     : target;
    }

    std::vector<Eigen::VectorXd> fs, gs;
    fs.reserve(iters + 1);
    gs.reserve(iters);
    Eigen::VectorXd f = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd g(mp);
    fs.push_back(f);
    for (int t = 0; t < iters; ++t) {
        const double e = ehs[t];
        g = e * (lb - lse_over_rows(f, ch, e));
        gs.push_back(g);
        f = e * (la - lse_over_cols(g, ch, e));
        fs.push_back(f);
    }
    const double et = ehs.back();

    const Eigen::MatrixXd pi =
        (((f.replicate(1, mp) + g.transpose().replicate(m, 1) - ch) / et).array().exp()).matrix();

    // rounding to exact feasibility: scale rows down, then columns, then
    // spread the leftover mass as a rank-one repair
    const Eigen::VectorXd rowsum = pi.rowwise().sum();
    const Eigen::VectorXd x = (a.array() / rowsum.array()).min(1.0).matrix();
    const Eigen::MatrixXd pi1 = x.asDiagonal() * pi;
    const Eigen::VectorXd colsum = pi1.colwise().sum().transpose();
    const Eigen::VectorXd y = (b.array() / colsum.array()).min(1.0).matrix();
    const Eigen::MatrixXd pi2 = pi1 * y.asDiagonal();
    const Eigen::VectorXd ea = a - pi2.rowwise().sum();
    const Eigen::VectorXd eb = b - pi2.colwise().sum().transpose();
    const double sa = ea.sum();
    const bool repaired = sa > 1e-300;
    Eigen::MatrixXd plan = pi2;
    if (repaired) plan += (ea / sa) * eb.transpose();

    result.cost = s * (plan.array() * ch.array()).sum();
    result.plan = plan;

    // reverse sweep; the normalization scale s is held constant
    Eigen::MatrixXd dplan = s * ch;
    Eigen::MatrixXd dch = s * plan;
    Eigen::MatrixXd dpi2;
    if (repaired) {
        Eigen::VectorXd dea = dplan * eb / sa;
        Eigen::VectorXd deb = dplan.transpose() * ea / sa;
        const double dsa = -(ea.transpose() * dplan * eb).value() / (sa * sa);
        dea.array() += dsa;
        dpi2 = dplan;
        dpi2.colwise() -= dea;
        dpi2.rowwise() -= deb.transpose();
    } else {
        dpi2 = dplan;
    }

    Eigen::MatrixXd dpi1 = dpi2 * y.asDiagonal();
    {
        const Eigen::VectorXd dy = (dpi2.array() * pi1.array()).colwise().sum().transpose();
        for (Eigen::Index j = 0; j < mp; ++j) {
            if (b[j] / colsum[j] < 1.0) {
                const double dc1 = -dy[j] * b[j] / (colsum[j] * colsum[j]);
                dpi1.col(j).array() += dc1;
            }
        }
    }
    Eigen::MatrixXd dpi = x.asDiagonal() * dpi1;
    {
        const Eigen::VectorXd dx = (dpi1.array() * pi.array()).rowwise().sum();
        for (Eigen::Index i = 0; i < m; ++i) {
            if (a[i] / rowsum[i] < 1.0) {
                const double dr = -dx[i] * a[i] / (rowsum[i] * rowsum[i]);
                dpi.row(i).array() += dr;
            }
        }
    }

    Eigen::VectorXd df = (dpi.array() * pi.array()).rowwise().sum() / et;
    Eigen::VectorXd dg = (dpi.array() * pi.array()).colwise().sum().transpose() / et;
    dch -= (dpi.array() * pi.array()).matrix() / et;

    for (int t = iters - 1; t >= 0; --t) {
        const double e = ehs[t];
        // f_{t+1} = e (la - LSE_j((g_{t+1} - C)/e)); V holds the row softmax
        {
            const Eigen::VectorXd& gcur = gs[t];
            for (Eigen::Index i = 0; i < m; ++i) {
                Eigen::VectorXd z = (gcur - ch.row(i).transpose()) / e;
                const double zmax = z.maxCoeff();
                Eigen::VectorXd v = (z.array() - zmax).exp().matrix();
                v /= v.sum();
                dg.noalias() -= df[i] * v;
                dch.row(i) += df[i] * v.transpose();
            }
            df.setZero();
        }
        // g_{t+1} = e (lb - LSE_i((f_t - C)/e)); W holds the column softmax
        {
            const Eigen::VectorXd& fprev = fs[t];
            Eigen::VectorXd dfprev = Eigen::VectorXd::Zero(m);
            for (Eigen::Index j = 0; j < mp; ++j) {
                Eigen::VectorXd z = (fprev - ch.col(j)) / e;
                const double zmax = z.maxCoeff();
                Eigen::VectorXd w = (z.array() - zmax).exp().matrix();
                w /= w.sum();
                dfprev.noalias() -= dg[j] * w;
                dch.col(j) += dg[j] * w;
            }
            df = dfprev;
            dg.setZero();
        }
    }

    const Eigen::MatrixXd dcost_matrix = dch / s;
    Eigen::MatrixXd grad_p = Eigen::MatrixXd::Zero(m, dim);
    Eigen::MatrixXd grad_q = Eigen::MatrixXd::Zero(mp, dim);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < mp; ++j) {
            if (cost(i, j) > 0.0) {
                const Eigen::RowVectorXd u = (p.points.row(i) - q.points.row(j)) / cost(i, j);
                grad_p.row(i) += dcost_matrix(i, j) * u;
                grad_q.row(j) -= dcost_matrix(i, j) * u;
            }
        }
    }
    result.grad_p = grad_p;
    result.grad_q = grad_q;
    return result;
}

}  // namespace ctl
