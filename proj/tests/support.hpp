#pragma once

#include <random>

#include "ctmc/generator.hpp"

namespace testing_support {

using ctmc::Generator;
using ctmc::Matrix;
using ctmc::ProbabilityVector;
using ctmc::Vector;

inline ProbabilityVector random_probability(int n, std::mt19937_64& rng, double lo = 0.2) {
    std::uniform_real_distribution<double> u(lo, 1.0);
    Vector p(n);
    for (int x = 0; x < n; ++x) p(x) = u(rng);
    return ProbabilityVector(p / p.sum());
}

// Random chain on a connected graph; with balanced set, rates are s(x,y)/q(x)
// for a symmetric s so that detailed balance holds with respect to q.
inline Generator random_chain(int n, std::mt19937_64& rng, bool balanced, double density = 0.5) {
    std::uniform_real_distribution<double> rate(0.2, 1.5), coin(0.0, 1.0);
    Matrix k = Matrix::Zero(n, n);
    if (balanced) {
        const Vector q = random_probability(n, rng).values();
        Matrix s = Matrix::Zero(n, n);
        for (int x = 1; x < n; ++x) {
            const int parent = std::uniform_int_distribution<int>(0, x - 1)(rng);
            s(x, parent) = s(parent, x) = rate(rng);
        }
        for (int x = 0; x < n; ++x)
            for (int y = x + 1; y < n; ++y)
                if (s(x, y) == 0.0 && coin(rng) < density) s(x, y) = s(y, x) = rate(rng);
        for (int x = 0; x < n; ++x)
            for (int y = 0; y < n; ++y)
                if (x != y) k(x, y) = s(x, y) / q(x) / n;
    } else {
        std::vector<int> perm(n);
        for (int x = 0; x < n; ++x) perm[x] = x;
        std::shuffle(perm.begin(), perm.end(), rng);
        for (int i = 0; i < n; ++i) k(perm[i], perm[(i + 1) % n]) = rate(rng);
        for (int x = 0; x < n; ++x)
            for (int y = 0; y < n; ++y)
                if (x != y && k(x, y) == 0.0 && coin(rng) < density) k(x, y) = rate(rng);
    }
    for (int x = 0; x < n; ++x) k(x, x) = -k.row(x).sum();
    return ctmc::validate_generator(k);
}

inline Vector random_node(int n, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> z(0.0, scale);
    Vector f(n);
    for (int x = 0; x < n; ++x) f(x) = z(rng);
    return f;
}

inline ctmc::LikelihoodVector random_likelihood(const ProbabilityVector& q, std::mt19937_64& rng,
                                                double spread = 1.0) {
    Vector l = random_node(q.size(), rng, spread).array().exp();
    l /= q.values().dot(l);
    return ctmc::LikelihoodVector(l, q);
}

inline Vector mean_zero(const Vector& f, const ProbabilityVector& q) {
    return f.array() - q.values().dot(f);
}

inline Generator cycle3() {
    Matrix k(3, 3);
    k << -1, 1, 0, 0, -1, 1, 1, 0, -1;
    return ctmc::validate_generator(k);
}

inline Generator two_state(double a, double b) {
    Matrix k(2, 2);
    k << -a, a, b, -b;
    return ctmc::validate_generator(k);
}

} // namespace testing_support
