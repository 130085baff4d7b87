#include "kpzcond/gauss_rules.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "kpzcond/errors.hpp"

namespace kpzcond::quad {
namespace {

Rule compute_gauss_legendre(int n) {
    Rule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    const int half = (n + 1) / 2;
    for (int i = 0; i < half; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int k = 1; k <= n; ++k) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p2) / k;
            }
            dp = n * (x * p0 - p1) / (x * x - 1.0);
            const double dx = p0 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        // one more evaluation at the converged node for the weight
        double p0 = 1.0, p1 = 0.0;
        for (int k = 1; k <= n; ++k) {
            const double p2 = p1;
            p1 = p0;
            p0 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p2) / k;
        }
        dp = n * (x * p0 - p1) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        r.nodes[i] = -x;
        r.nodes[n - 1 - i] = x;
        r.weights[i] = w;
        r.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) r.nodes[n / 2] = 0.0;
    return r;
}

Rule compute_clenshaw_curtis(int n) {
    // Waldvogel-style direct formula, O(n^2) which is fine for the sizes used here.
    const int N = n - 1;
    Rule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    for (int k = 0; k <= N; ++k) {
        const double theta = std::numbers::pi * k / N;
        r.nodes[k] = -std::cos(theta);
        double s = 0.0;
        for (int j = 1; j <= N / 2; ++j) {
            const double b = (2 * j == N) ? 1.0 : 2.0;
            s += b / (4.0 * j * j - 1.0) * std::cos(2.0 * j * theta);
        }
        const double c = (k == 0 || k == N) ? 1.0 : 2.0;
        r.weights[k] = c / N * (1.0 - s);
    }
    return r;
}

Rule compute_gauss_hermite_normal(int n) {
    // Newton iteration on orthonormal Hermite functions for the weight
    // exp(-x^2), then rescaled to the standard normal weight.
    Rule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    const double pim4 = std::pow(std::numbers::pi, -0.25);
    const int half = (n + 1) / 2;
    double z = 0.0;
    for (int i = 0; i < half; ++i) {
        if (i == 0) {
            z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
        } else if (i == 1) {
            z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
        } else if (i == 2) {
            z = 1.86 * z - 0.86 * r.nodes[0];
        } else if (i == 3) {
            z = 1.91 * z - 0.91 * r.nodes[1];
        } else {
            z = 2.0 * z - r.nodes[i - 2];
        }
        double pp = 0.0;
        for (int it = 0; it < 200; ++it) {
            double p1 = pim4, p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
            }
            pp = std::sqrt(2.0 * n) * p2;
            const double dz = p1 / pp;
            z -= dz;
            if (std::abs(dz) <= 1e-15 * std::max(1.0, std::abs(z))) break;
        }
        double p1 = pim4, p2 = 0.0;
        for (int j = 0; j < n; ++j) {
            const double p3 = p2;
            p2 = p1;
            p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
        }
        pp = std::sqrt(2.0 * n) * p2;
        r.nodes[i] = z;
        r.nodes[n - 1 - i] = -z;
        r.weights[i] = 2.0 / (pp * pp);
        r.weights[n - 1 - i] = r.weights[i];
    }
    if (n % 2 == 1) r.nodes[n / 2] = 0.0;
    // exp(-x^2) -> standard normal: x = sqrt(2) t, weights / sqrt(pi)
    for (int i = 0; i < n; ++i) {
        r.nodes[i] *= std::numbers::sqrt2;
        r.weights[i] /= std::sqrt(std::numbers::pi);
    }
    return r;
}

template <class Make>
const Rule& cached(std::map<int, Rule>& cache, std::mutex& mu, int n, Make make) {
    std::lock_guard lock(mu);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, make(n)).first;
    return it->second;
}

}  // namespace

Rule gauss_legendre(int n) {
    require(n >= 1, "gauss_legendre: n must be positive");
    static std::map<int, Rule> cache;
    static std::mutex mu;
    return cached(cache, mu, n, compute_gauss_legendre);
}

Rule clenshaw_curtis(int n) {
    require(n >= 2, "clenshaw_curtis: n must be at least 2");
    static std::map<int, Rule> cache;
    static std::mutex mu;
    return cached(cache, mu, n, compute_clenshaw_curtis);
}

Rule gauss_hermite_normal(int n) {
    require(n >= 1, "gauss_hermite_normal: n must be positive");
    if (n == 1) return Rule{{0.0}, {1.0}};
    static std::map<int, Rule> cache;
    static std::mutex mu;
    return cached(cache, mu, n, compute_gauss_hermite_normal);
}

}  // namespace kpzcond::quad
