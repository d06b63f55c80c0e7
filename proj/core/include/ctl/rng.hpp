#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace ctl {

// Deterministic random source. mt19937_64's output stream is fixed by the
// standard; the distribution transforms below are written out by hand so
// that identical seeds give identical draws on every platform, which the
// standard <random> distributions do not guarantee.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t raw() { return engine_(); }

    // uniform on [0, 1) with 53 bits of mantissa
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Marsaglia polar method; draws fresh pairs so no hidden state survives
    // between calls beyond the engine position.
    double normal() {
        while (true) {
            const double u = 2.0 * uniform() - 1.0;
            const double v = 2.0 * uniform() - 1.0;
            const double s = u * u + v * v;
            if (s > 0.0 && s < 1.0) {
                return u * std::sqrt(-2.0 * std::log(s) / s);
            }
        }
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    bool bernoulli(double p) { return uniform() < p; }

    // integer in [0, n)
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
        // rejection sampling to stay unbiased
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    // Knuth's product method; fine for the moderate rates used here.
    int poisson(double lambda) {
        if (lambda < 0.0) throw std::invalid_argument("Rng::poisson: lambda must be nonnegative");
        const double threshold = std::exp(-lambda);
        int k = 0;
        double prod = uniform();
        while (prod > threshold) {
            ++k;
            prod *= uniform();
        }
        return k;
    }

    // chi-squared as a sum of squared standard normals
    double chi_squared(int dof) {
        if (dof <= 0) throw std::invalid_argument("Rng::chi_squared: dof must be positive");
        double s = 0.0;
        for (int i = 0; i < dof; ++i) {
            const double z = normal();
            s += z * z;
        }
        return s;
    }

    // index draw from unnormalized nonnegative weights
    int categorical(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) {
            if (w < 0.0 || !std::isfinite(w)) throw std::invalid_argument("Rng::categorical: bad weight");
            total += w;
        }
        if (total <= 0.0) throw std::invalid_argument("Rng::categorical: weights sum to zero");
        double r = uniform() * total;
        for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
            r -= weights[i];
            if (r < 0.0) return static_cast<int>(i);
        }
        return static_cast<int>(weights.size()) - 1;
    }

    // in-place Fisher-Yates
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace ctl
