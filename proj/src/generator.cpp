#include "ctmc/generator.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>

namespace ctmc {

namespace {

// Each uniformization chunk keeps lambda*t below this so the Poisson weights
// stay far from underflow.
constexpr double chunk_mass = 32.0;

struct PoissonWeights {
    std::vector<double> w;
};

PoissonWeights poisson_weights(double a) {
    PoissonWeights out;
    double term = std::exp(-a);
    double total = term;
    out.w.push_back(term);
    for (int k = 1; total < 1.0 - config::poisson_tail || k <= a; ++k) {
        term *= a / k;
        out.w.push_back(term);
        total += term;
        if (k > 10000) break;
    }
    for (double& v : out.w) v /= total;
    return out;
}

double uniformization_rate(const Generator& g) {
    double lambda = 0.0;
    for (int x = 0; x < g.size(); ++x) lambda = std::max(lambda, g.exit_rate(x));
    return lambda;
}

bool reaches_all(const Matrix& rates, bool transpose) {
    const int n = static_cast<int>(rates.rows());
    std::vector<char> seen(n, 0);
    std::queue<int> todo;
    todo.push(0);
    seen[0] = 1;
    int count = 1;
    while (!todo.empty()) {
        int x = todo.front();
        todo.pop();
        for (int y = 0; y < n; ++y) {
            double r = transpose ? rates(y, x) : rates(x, y);
            if (y != x && r > 0.0 && !seen[y]) {
                seen[y] = 1;
                ++count;
                todo.push(y);
            }
        }
    }
    return count == n;
}

} // namespace

EdgeSet::EdgeSet(const Matrix& rates) : index_(Eigen::MatrixXi::Constant(rates.rows(), rates.cols(), -1)) {
    for (int x = 0; x < rates.rows(); ++x)
        for (int y = 0; y < rates.cols(); ++y)
            if (x != y && (rates(x, y) > 0.0 || rates(y, x) > 0.0)) {
                index_(x, y) = static_cast<int>(edges_.size());
                edges_.emplace_back(x, y);
            }
}

Generator::Generator(Matrix rates, std::vector<std::string> names)
    : rates_(std::move(rates)), names_(std::move(names)), edges_(rates_) {
    if (names_.empty())
        for (int x = 0; x < rates_.rows(); ++x) names_.push_back(std::to_string(x));
}

Generator validate_generator(const Matrix& rates, std::vector<std::string> names) {
    const auto n = rates.rows();
    if (n != rates.cols() || n < 2)
        throw Error(ErrorKind::InvalidInput, "generator must be square with at least 2 states");
    if (!names.empty() && static_cast<Eigen::Index>(names.size()) != n)
        throw Error(ErrorKind::InvalidInput, "state label count does not match the rate matrix");
    if (!rates.allFinite()) throw Error(ErrorKind::InvalidInput, "non-finite rate");

    Matrix k = rates;
    for (int x = 0; x < n; ++x) {
        double off = 0.0;
        for (int y = 0; y < n; ++y) {
            if (y == x) continue;
            if (k(x, y) < 0.0) {
                std::ostringstream msg;
                msg << "rate(" << x << "," << y << ") = " << k(x, y);
                throw Error(ErrorKind::NegativeOffDiagonal, msg.str());
            }
            off += k(x, y);
        }
        if (std::abs(off + k(x, x)) > config::structural_tol) {
            std::ostringstream msg;
            msg << "row " << x << " sums to " << off + k(x, x);
            throw Error(ErrorKind::RowSumNonzero, msg.str());
        }
        k(x, x) = -off;
    }
    if (!reaches_all(k, false) || !reaches_all(k, true))
        throw Error(ErrorKind::Reducible, "positive-rate graph is not strongly connected");
    return Generator(std::move(k), std::move(names));
}

ProbabilityVector::ProbabilityVector(Vector p) : p_(std::move(p)) {
    if (p_.size() < 1 || !p_.allFinite()) throw Error(ErrorKind::InvalidInput, "bad probability vector");
    if (p_.minCoeff() < 0.0) throw Error(ErrorKind::InvalidInput, "negative probability");
    if (std::abs(p_.sum() - 1.0) > config::structural_tol)
        throw Error(ErrorKind::InvalidInput, "probabilities do not sum to 1");
    boundary_ = p_.minCoeff() == 0.0;
}

LikelihoodVector::LikelihoodVector(Vector l, const ProbabilityVector& q) : l_(std::move(l)) {
    if (l_.size() != q.size() || !l_.allFinite())
        throw Error(ErrorKind::InvalidInput, "bad likelihood vector");
    if (l_.minCoeff() < 0.0) throw Error(ErrorKind::InvalidInput, "negative likelihood");
    double mass = q.values().dot(l_);
    if (std::abs(mass - 1.0) > config::structural_tol * std::max(1.0, l_.maxCoeff()))
        throw Error(ErrorKind::InvalidInput, "likelihood does not integrate to 1 against the reference");
    boundary_ = l_.minCoeff() == 0.0;
}

ProbabilityVector stationary_distribution(const Generator& g) {
    const int n = g.size();
    Matrix a = g.rates().transpose();
    a.row(n - 1).setOnes();
    Vector b = Vector::Zero(n);
    b(n - 1) = 1.0;
    Eigen::FullPivLU<Matrix> lu(a);
    if (!lu.isInvertible()) throw Error(ErrorKind::SolveFailed, "stationary system is singular");
    Vector q = lu.solve(b);
    q += lu.solve(b - a * q);
    const double scale = g.rates().cwiseAbs().rowwise().sum().maxCoeff();
    const double residual = (g.rates().transpose() * q).cwiseAbs().maxCoeff();
    if (!q.allFinite() || q.minCoeff() <= 0.0 || residual > 1e-10 * scale)
        throw Error(ErrorKind::SolveFailed, "stationary solve is not accurate");
    q /= q.sum();
    return ProbabilityVector(std::move(q));
}

BalanceCheck is_detailed_balance(const Generator& g, const ProbabilityVector& q, double tol) {
    BalanceCheck out;
    for (int x = 0; x < g.size(); ++x)
        for (int y = x + 1; y < g.size(); ++y) {
            double v = std::abs(q(x) * g.rate(x, y) - q(y) * g.rate(y, x));
            if (v > out.violation) {
                out.violation = v;
                out.x = x;
                out.y = y;
            }
        }
    out.holds = out.violation <= tol;
    return out;
}

void require_detailed_balance(const Generator& g, const ProbabilityVector& q, const char* op) {
    auto db = is_detailed_balance(g, q);
    if (!db.holds) {
        std::ostringstream msg;
        msg << op << " requires detailed balance; violation " << db.violation << " at (" << db.x << ","
            << db.y << ")";
        throw Error(ErrorKind::NotDetailedBalance, msg.str());
    }
}

Generator adjoint_generator(const Generator& g, const ProbabilityVector& q) {
    const int n = g.size();
    Matrix k(n, n);
    for (int y = 0; y < n; ++y) {
        double off = 0.0;
        for (int z = 0; z < n; ++z) {
            if (z == y) continue;
            k(y, z) = q(z) * g.rate(z, y) / q(y);
            off += k(y, z);
        }
        k(y, y) = -off;
    }
    return Generator(std::move(k), g.names());
}

Vector propagate(const Generator& g, const Vector& p, double t) {
    if (t < 0.0) throw Error(ErrorKind::NegativeTime, "negative time");
    if (t == 0.0) return p;
    const double lambda = uniformization_rate(g);
    const int chunks = std::max(1, static_cast<int>(std::ceil(lambda * t / chunk_mass)));
    const auto weights = poisson_weights(lambda * t / chunks);
    Vector cur = p;
    for (int c = 0; c < chunks; ++c) {
        Vector term = cur;
        Vector acc = weights.w[0] * term;
        for (std::size_t k = 1; k < weights.w.size(); ++k) {
            term = term + (g.rates().transpose() * term) / lambda;
            acc += weights.w[k] * term;
        }
        cur = acc;
    }
    return cur;
}

Matrix transition_matrix(const Generator& g, double t) {
    if (t < 0.0) throw Error(ErrorKind::NegativeTime, "negative time");
    const int n = g.size();
    if (t == 0.0) return Matrix::Identity(n, n);
    const double lambda = uniformization_rate(g);
    const int chunks = std::max(1, static_cast<int>(std::ceil(lambda * t / chunk_mass)));
    const auto weights = poisson_weights(lambda * t / chunks);
    const Matrix pi = Matrix::Identity(n, n) + g.rates() / lambda;
    Matrix power = Matrix::Identity(n, n);
    Matrix step = weights.w[0] * power;
    for (std::size_t k = 1; k < weights.w.size(); ++k) {
        power = power * pi;
        step += weights.w[k] * power;
    }
    Matrix out = step;
    for (int c = 1; c < chunks; ++c) out = out * step;
    return out;
}

MarginalCurve evolve_marginals(const Generator& g, const ProbabilityVector& p0,
                               const std::vector<double>& grid) {
    if (grid.empty() || grid.front() < 0.0) throw Error(ErrorKind::NegativeTime, "grid must start at t >= 0");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1])) throw Error(ErrorKind::InvalidInput, "grid must be strictly increasing");
    MarginalCurve out;
    out.grid = grid;
    out.values.reserve(grid.size());
    Vector p = p0.values();
    out.values.emplace_back(p);
    for (std::size_t i = 1; i < grid.size(); ++i) {
        p = propagate(g, p, grid[i] - grid[i - 1]);
        p /= p.sum();
        out.values.emplace_back(p);
    }
    return out;
}

LikelihoodVector likelihood(const ProbabilityVector& p, const ProbabilityVector& q) {
    return LikelihoodVector(p.values().cwiseQuotient(q.values()), q);
}

ProbabilityVector probability(const LikelihoodVector& l, const ProbabilityVector& q) {
    return ProbabilityVector(l.values().cwiseProduct(q.values()));
}

LikelihoodCurve likelihood_curve(const MarginalCurve& curve, const ProbabilityVector& q) {
    LikelihoodCurve out;
    out.grid = curve.grid;
    out.values.reserve(curve.values.size());
    for (const auto& p : curve.values) out.values.push_back(likelihood(p, q));
    return out;
}

std::vector<double> uniform_grid(double t0, double t1, int steps) {
    if (steps < 1 || !(t1 > t0)) throw Error(ErrorKind::InvalidInput, "bad grid");
    std::vector<double> grid(steps + 1);
    const double h = (t1 - t0) / steps;
    for (int i = 0; i <= steps; ++i) grid[i] = t0 + h * i;
    grid[steps] = t1;
    return grid;
}

} // namespace ctmc
