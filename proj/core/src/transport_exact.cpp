#include "ctl/transport.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <vector>

namespace ctl {

PointCloud PointCloud::uniform(const Eigen::MatrixXd& points) {
    PointCloud c;
    c.points = points;
    c.weights = Eigen::VectorXd::Constant(points.rows(), 1.0 / static_cast<double>(points.rows()));
    return c;
}

void validate_cloud(const PointCloud& c) {
    if (c.points.rows() == 0) throw std::invalid_argument("point cloud: empty");
    if (c.weights.size() != c.points.rows()) {
        throw std::invalid_argument("point cloud: weight count mismatch");
    }
    double sum = 0.0;
    for (Eigen::Index i = 0; i < c.weights.size(); ++i) {
        if (!(c.weights[i] > 0.0)) throw std::invalid_argument("point cloud: weights must be positive");
        sum += c.weights[i];
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("point cloud: weights must sum to 1");
}

namespace {

// smallest common denominator <= cap such that every weight is an integer
// multiple of 1/denominator (within rounding tolerance)
std::int64_t rational_denominator(const Eigen::VectorXd& w) {
    const std::int64_t cap = 1'000'000;
    std::int64_t den = 1;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        // continued-fraction expansion of the weight
        double x = w[i];
        std::int64_t p0 = 0, q0 = 1, p1 = 1, q1 = 0;
        double frac = x;
        for (int it = 0; it < 64; ++it) {
            const double fl = std::floor(frac);
            const std::int64_t ai = static_cast<std::int64_t>(fl);
            const std::int64_t p2 = ai * p1 + p0;
            const std::int64_t q2 = ai * q1 + q0;
            if (q2 > cap) break;
            p0 = p1; q0 = q1; p1 = p2; q1 = q2;
            if (std::abs(x - static_cast<double>(p2) / static_cast<double>(q2)) < 1e-12) break;
            const double rem = frac - fl;
            if (rem < 1e-15) break;
            frac = 1.0 / rem;
        }
        den = std::lcm(den, q1);
        if (den > cap) throw std::invalid_argument("exact_w1: weight denominators too large");
    }
    // the scaled weights must land on integers; a genuinely rational input
    // reproduces its numerator to ~1e-10 here, while the best cap-bounded
    // approximation of an irrational weight misses by orders of magnitude more
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        const double scaled = w[i] * static_cast<double>(den);
        if (std::abs(scaled - std::round(scaled)) > 5e-9) {
            throw std::invalid_argument("exact_w1: weights are not small-denominator rationals");
        }
    }
    return den;
}

}  // namespace

// Transportation problem on the complete bipartite graph: supplies are the
// integerized source weights, demands the sink weights. Each round runs
// Dijkstra on reduced costs (kept nonnegative by node potentials), then
// augments along the shortest source-to-sink path by the bottleneck amount.
TransportResult exact_w1(const PointCloud& p, const PointCloud& q) {
    validate_cloud(p);
    validate_cloud(q);
    if (p.points.cols() != q.points.cols()) {
        throw std::invalid_argument("exact_w1: dimension mismatch");
    }
    const int m = static_cast<int>(p.points.rows());
    const int mp = static_cast<int>(q.points.rows());
    if (m > 256 || mp > 256) {
        throw std::invalid_argument("exact_w1: clouds larger than 256 points");
    }

    Eigen::MatrixXd cost(m, mp);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < mp; ++j) {
            cost(i, j) = (p.points.row(i) - q.points.row(j)).norm();
        }
    }

    const std::int64_t dp = rational_denominator(p.weights);
    const std::int64_t dq = rational_denominator(q.weights);
    const std::int64_t scale = std::lcm(dp, dq);
    std::vector<std::int64_t> sup(m), dem(mp);
    std::int64_t total = 0;
    for (int i = 0; i < m; ++i) {
        sup[i] = static_cast<std::int64_t>(std::llround(p.weights[i] * static_cast<double>(scale)));
        total += sup[i];
    }
    std::int64_t total_q = 0;
    for (int j = 0; j < mp; ++j) {
        dem[j] = static_cast<std::int64_t>(std::llround(q.weights[j] * static_cast<double>(scale)));
        total_q += dem[j];
    }
    if (total != total_q) throw std::logic_error("exact_w1: integerized masses disagree");

    const int nodes = m + mp;
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> pot(nodes, 0.0);
    Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> flow =
        Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(m, mp);

    std::int64_t remaining = total;
    std::vector<double> dist(nodes);
    std::vector<int> parent(nodes);
    std::vector<char> visited(nodes);
    using HeapItem = std::pair<double, int>;

    while (remaining > 0) {
        std::fill(dist.begin(), dist.end(), inf);
        std::fill(parent.begin(), parent.end(), -1);
        std::fill(visited.begin(), visited.end(), 0);
        std::priority_queue<HeapItem, std::vector<HeapItem>, std::greater<>> heap;
        for (int i = 0; i < m; ++i) {
            if (sup[i] > 0) {
                dist[i] = 0.0;
                heap.emplace(0.0, i);
            }
        }
        while (!heap.empty()) {
            const auto [du, u] = heap.top();
            heap.pop();
            if (visited[u] || du > dist[u] + 1e-15) continue;
            visited[u] = 1;
            if (u < m) {
                for (int j = 0; j < mp; ++j) {
                    const int v = m + j;
                    if (visited[v]) continue;
                    const double rc = std::max(cost(u, j) + pot[u] - pot[v], 0.0);
                    if (du + rc < dist[v] - 1e-15) {
                        dist[v] = du + rc;
                        parent[v] = u;
                        heap.emplace(dist[v], v);
                    }
                }
            } else {
                const int j = u - m;
                for (int i = 0; i < m; ++i) {
                    if (visited[i] || flow(i, j) == 0) continue;
                    const double rc = std::max(-cost(i, j) + pot[u] - pot[i], 0.0);
                    if (du + rc < dist[i] - 1e-15) {
                        dist[i] = du + rc;
                        parent[i] = u;
                        heap.emplace(dist[i], i);
                    }
                }
            }
        }

        int sink = -1;
        double best = inf;
        for (int j = 0; j < mp; ++j) {
            if (dem[j] > 0 && dist[m + j] < best) {
                best = dist[m + j];
                sink = m + j;
            }
        }
        if (sink < 0) throw std::logic_error("exact_w1: no augmenting path found");

        std::int64_t bottleneck = dem[sink - m];
        int v = sink;
        while (parent[v] >= 0) {
            const int u = parent[v];
            if (u >= m) bottleneck = std::min(bottleneck, flow(v, u - m));
            v = u;
        }
        bottleneck = std::min(bottleneck, sup[v]);

        int w = sink;
        while (parent[w] >= 0) {
            const int u = parent[w];
            if (u < m) {
                flow(u, w - m) += bottleneck;
            } else {
                flow(w, u - m) -= bottleneck;
            }
            w = u;
        }
        sup[w] -= bottleneck;
        dem[sink - m] -= bottleneck;
        remaining -= bottleneck;

        for (int nIdx = 0; nIdx < nodes; ++nIdx) {
            pot[nIdx] += (dist[nIdx] < inf) ? dist[nIdx] : best;
        }
    }

    TransportResult result;
    result.plan.resize(m, mp);
    double total_cost = 0.0;
    const double inv_scale = 1.0 / static_cast<double>(scale);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < mp; ++j) {
            const double mass = static_cast<double>(flow(i, j)) * inv_scale;
            result.plan(i, j) = mass;
            total_cost += mass * cost(i, j);
        }
    }
    result.cost = total_cost;
    return result;
}

}  // namespace ctl
