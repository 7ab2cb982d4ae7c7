#pragma once

#include <Eigen/Dense>

#include <string>
#include <utility>
#include <vector>

#include "ctmc/error.hpp"

namespace ctmc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using NodeFunction = Eigen::VectorXd;

namespace config {
inline constexpr double structural_tol = 1e-12;
inline constexpr double analytic_tol = 1e-9;
inline constexpr double balance_tol = 1e-10;
inline constexpr double poisson_tail = 1e-15;
} // namespace config

// Ordered pairs (x,y), x != y, where either direction has a positive rate.
// Edge functions live on this symmetric closure; a pair whose own rate is
// zero carries zero conductance.
class EdgeSet {
public:
    EdgeSet() = default;
    explicit EdgeSet(const Matrix& rates);

    int size() const { return static_cast<int>(edges_.size()); }
    const std::pair<int, int>& operator[](int e) const { return edges_[e]; }
    const std::vector<std::pair<int, int>>& edges() const { return edges_; }
    // -1 when (x,y) is not an edge
    int index(int x, int y) const { return index_(x, y); }

private:
    std::vector<std::pair<int, int>> edges_;
    Eigen::MatrixXi index_;
};

class ProbabilityVector;

class Generator {
public:
    int size() const { return static_cast<int>(rates_.rows()); }
    const Matrix& rates() const { return rates_; }
    double rate(int x, int y) const { return rates_(x, y); }
    double exit_rate(int x) const { return -rates_(x, x); }
    const std::vector<std::string>& names() const { return names_; }
    const EdgeSet& edges() const { return edges_; }

    friend Generator validate_generator(const Matrix& rates, std::vector<std::string> names);
    friend Generator adjoint_generator(const Generator& g, const ProbabilityVector& q);

private:
    Generator(Matrix rates, std::vector<std::string> names);

    Matrix rates_;
    std::vector<std::string> names_;
    EdgeSet edges_;
};

class ProbabilityVector {
public:
    explicit ProbabilityVector(Vector p);

    const Vector& values() const { return p_; }
    double operator()(int x) const { return p_(x); }
    int size() const { return static_cast<int>(p_.size()); }
    bool boundary() const { return boundary_; }

private:
    Vector p_;
    bool boundary_ = false;
};

// Density against the invariant law: sum_x q(x) l(x) = 1.
class LikelihoodVector {
public:
    LikelihoodVector(Vector l, const ProbabilityVector& q);

    const Vector& values() const { return l_; }
    double operator()(int x) const { return l_(x); }
    int size() const { return static_cast<int>(l_.size()); }
    bool boundary() const { return boundary_; }

private:
    Vector l_;
    bool boundary_ = false;
};

struct MarginalCurve {
    std::vector<double> grid;
    std::vector<ProbabilityVector> values;
};

struct LikelihoodCurve {
    std::vector<double> grid;
    std::vector<LikelihoodVector> values;
};

struct BalanceCheck {
    bool holds = false;
    double violation = 0.0;
    int x = 0;
    int y = 0;
};

Generator validate_generator(const Matrix& rates, std::vector<std::string> names = {});

ProbabilityVector stationary_distribution(const Generator& g);

BalanceCheck is_detailed_balance(const Generator& g, const ProbabilityVector& q,
                                 double tol = config::balance_tol);

Generator adjoint_generator(const Generator& g, const ProbabilityVector& q);

Matrix transition_matrix(const Generator& g, double t);

// Propagates a row distribution p over time t: returns p * rho_t.
Vector propagate(const Generator& g, const Vector& p, double t);

MarginalCurve evolve_marginals(const Generator& g, const ProbabilityVector& p0,
                               const std::vector<double>& grid);

LikelihoodCurve likelihood_curve(const MarginalCurve& curve, const ProbabilityVector& q);

LikelihoodVector likelihood(const ProbabilityVector& p, const ProbabilityVector& q);
ProbabilityVector probability(const LikelihoodVector& l, const ProbabilityVector& q);

std::vector<double> uniform_grid(double t0, double t1, int steps);

// Throws NotDetailedBalance with the given operation name in the message.
void require_detailed_balance(const Generator& g, const ProbabilityVector& q, const char* op);

} // namespace ctmc
