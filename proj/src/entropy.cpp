#include "ctmc/entropy.hpp"

#include <ceres/ceres.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "ctmc/parallel.hpp"
#include "solver_logging.hpp"

namespace ctmc {

double bregman(double eta, double xi, const PhiFunction& phi) {
    if (!(eta > 0.0) || !(xi > 0.0)) throw Error(ErrorKind::NonpositiveArgument, "bregman needs eta, xi > 0");
    if (phi.name == "xlogx" || phi.name == "renyi:1") return xi * psi(eta / xi);
    return std::max(0.0, phi.value(eta) - phi.value(xi) - (eta - xi) * phi.derivative(xi));
}

double phi_entropy(const ProbabilityVector& p, const ProbabilityVector& q, const PhiFunction& phi) {
    if (p.size() != q.size()) throw Error(ErrorKind::InvalidInput, "size mismatch");
    if (p.boundary() && !phi.finite_at_zero())
        throw Error(ErrorKind::BoundaryUnsupported, phi.name + " is infinite at 0");
    const bool kl = phi.name == "xlogx" || phi.name == "renyi:1";
    double acc = 0.0;
    for (int x = 0; x < p.size(); ++x) {
        const double l = p(x) / q(x);
        if (kl) acc += q(x) * psi(l);
        else if (l == 0.0) acc += q(x) * phi.value_at_zero;
        else acc += q(x) * phi.value(l);
    }
    return acc;
}

namespace {

void require_interior(const LikelihoodVector& l) {
    if (l.boundary() || l.values().minCoeff() <= 0.0)
        throw Error(ErrorKind::BoundaryLikelihood, "likelihood must be strictly positive");
}

NodeFunction apply(const Vector& l, const std::function<double(double)>& f) {
    NodeFunction out(l.size());
    for (int x = 0; x < l.size(); ++x) out(x) = f(l(x));
    return out;
}

} // namespace

double fisher_information(const LikelihoodVector& l, const PhiFunction& phi, const Generator& g,
                          const ProbabilityVector& q) {
    require_interior(l);
    return dirichlet_form(l.values(), apply(l.values(), phi.derivative), g, q);
}

FisherForms fisher_information_forms(const LikelihoodVector& l, const PhiFunction& phi, const Generator& g,
                                     const ProbabilityVector& q) {
    FisherForms out;
    out.dirichlet = fisher_information(l, phi, g, q);
    out.symmetrized = out.weighted = std::numeric_limits<double>::quiet_NaN();
    if (!is_detailed_balance(g, q).holds) return out;
    const NodeFunction d = apply(l.values(), phi.derivative);
    double acc = 0.0;
    for (int x = 0; x < g.size(); ++x)
        for (int y = 0; y < g.size(); ++y)
            if (x != y) acc += q(x) * g.rate(x, y) * (l(y) - l(x)) * (d(y) - d(x));
    out.symmetrized = 0.5 * acc;
    out.weighted = weighted_h1_inner(d, d, l, phi, g, q);
    return out;
}

Compensators lambda_compensators(const Vector& l, const PhiFunction& phi, const Generator& adjoint) {
    const int n = adjoint.size();
    Compensators out{NodeFunction::Zero(n), NodeFunction::Zero(n)};
    for (int x = 0; x < n; ++x) {
        double acc = 0.0;
        for (int y = 0; y < n; ++y)
            if (y != x && adjoint.rate(x, y) > 0.0) acc += adjoint.rate(x, y) * bregman(l(y), l(x), phi);
        out.under_q(x) = acc;
        out.under_p(x) = acc / l(x);
    }
    return out;
}

Compensators lambda_compensators(const LikelihoodVector& l, const PhiFunction& phi, const Generator& g,
                                 const ProbabilityVector& q) {
    require_interior(l);
    return lambda_compensators(l.values(), phi, adjoint_generator(g, q));
}

double composite_simpson(const std::vector<double>& values, double h) {
    const std::size_t m = values.size() - 1;
    if (values.size() < 3 || m % 2 != 0)
        throw Error(ErrorKind::InvalidInput, "Simpson needs an even number of intervals");
    double odd = 0.0, even = 0.0;
    for (std::size_t i = 1; i < m; ++i) (i % 2 ? odd : even) += values[i];
    return h / 3.0 * (values.front() + 4.0 * odd + 2.0 * even + values.back());
}

DissipationReport de_bruijn_report(const Generator& g, const ProbabilityVector& p0, const ProbabilityVector& q,
                                   const PhiFunction& phi, double T, int steps) {
    if (!(T > 0.0)) throw Error(ErrorKind::InvalidInput, "T must be positive");
    if (steps < 2 || steps % 2) throw Error(ErrorKind::InvalidInput, "steps must be even and >= 2");
    DissipationReport out;
    double t0 = 0.0;
    ProbabilityVector start = p0;
    if (p0.boundary()) {
        t0 = T / steps;
        start = ProbabilityVector(propagate(g, p0.values(), t0));
        out.shifted_start = true;
    }
    const auto grid = uniform_grid(t0, T, steps);
    const auto curve = evolve_marginals(g, start, grid);
    out.grid = grid;
    for (const auto& p : curve.values) {
        out.entropy.push_back(phi_entropy(p, q, phi));
        out.rate.push_back(fisher_information(likelihood(p, q), phi, g, q));
    }
    out.integral = composite_simpson(out.rate, (T - t0) / steps);
    out.balance_residual = std::abs(out.entropy.front() - out.entropy.back() - out.integral);
    return out;
}

double poincare_constant(const Generator& g, const ProbabilityVector& q) {
    const int n = g.size();
    const Matrix sym = 0.5 * (g.rates() + adjoint_generator(g, q).rates());
    const Vector s = q.values().cwiseSqrt();
    Matrix a = -(s.asDiagonal() * sym * s.cwiseInverse().asDiagonal());
    a = 0.5 * (a + a.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(a, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) throw Error(ErrorKind::EigenFailed, "symmetric eigensolver failed");
    // the kernel is spanned by sqrt(q); the spectrum is sorted ascending
    const double gap = eig.eigenvalues()(1);
    if (!(gap > 0.0) || n < 2) throw Error(ErrorKind::EigenFailed, "no positive spectral gap");
    return 2.0 * gap;
}

namespace {

struct MlsiRatio {
    const Generator* g;
    const Generator* adjoint;
    const ProbabilityVector* q;

    Vector density(const double* u) const {
        const int n = g->size();
        Vector f(n);
        double top = u[0];
        for (int x = 1; x < n; ++x) top = std::max(top, u[x]);
        for (int x = 0; x < n; ++x) f(x) = std::exp(u[x] - top);
        return f / q->values().dot(f);
    }

    double energy(const Vector& f) const {
        double acc = 0.0;
        for (int x = 0; x < f.size(); ++x) {
            double inner = 0.0;
            for (int y = 0; y < f.size(); ++y)
                if (y != x && adjoint->rate(x, y) > 0.0) inner += adjoint->rate(x, y) * psi(f(y) / f(x));
            acc += (*q)(x) * f(x) * inner;
        }
        return acc;
    }

    double entropy(const Vector& f) const {
        double acc = 0.0;
        for (int x = 0; x < f.size(); ++x) acc += (*q)(x) * psi(f(x));
        return acc;
    }

    double ratio(const double* u, double* grad_u) const {
        const int n = g->size();
        const Vector f = density(u);
        const double e = energy(f), h = entropy(f);
        const double r = e / h;
        if (!grad_u) return r;
        Vector de(n), dh(n);
        for (int z = 0; z < n; ++z) {
            double a = 0.0, b = 0.0;
            for (int y = 0; y < n; ++y) {
                if (y == z) continue;
                a += g->rate(z, y) * (std::log(f(z)) - std::log(f(y)) + 1.0);
                b += (*q)(y) * g->rate(y, z) * f(y) / f(z);
            }
            de(z) = (*q)(z) * a - b;
            dh(z) = (*q)(z) * std::log(f(z));
        }
        const Vector df = (de - r * dh) / h;
        const double mix = (df.array() * f.array()).sum();
        for (int z = 0; z < n; ++z) grad_u[z] = f(z) * df(z) - (*q)(z) * f(z) * mix;
        return r;
    }
};

class MlsiCost : public ceres::FirstOrderFunction {
public:
    explicit MlsiCost(MlsiRatio r) : r_(r) {}
    bool Evaluate(const double* u, double* cost, double* gradient) const override {
        *cost = r_.ratio(u, gradient);
        return std::isfinite(*cost);
    }
    int NumParameters() const override { return r_.g->size(); }

private:
    MlsiRatio r_;
};

} // namespace

MlsiEstimate mlsi_constant(const Generator& g, const ProbabilityVector& q, int restarts, std::uint64_t seed,
                           int threads) {
    if (restarts < 1) throw Error(ErrorKind::InvalidInput, "restarts must be positive");
    const int n = g.size();
    const Generator adjoint = adjoint_generator(g, q);
    const MlsiRatio ratio{&g, &adjoint, &q};

    std::vector<double> values(restarts, std::numeric_limits<double>::infinity());
    std::vector<Vector> minimizers(restarts);
    parallel_for(static_cast<std::size_t>(restarts), threads, [&](std::size_t r) {
        std::mt19937_64 rng(splitmix64(seed ^ splitmix64(r + 1)));
        std::normal_distribution<double> normal(0.0, 0.5 + 2.5 * static_cast<double>(r % 4) / 3.0);
        std::vector<double> u(n);
        for (auto& v : u) v = normal(rng);
        detail::quiet_solver_logs();
        ceres::GradientProblem problem(new MlsiCost(ratio));
        ceres::GradientProblemSolver::Options opts;
        opts.logging_type = ceres::SILENT;
        opts.max_num_iterations = 2000;
        opts.function_tolerance = 1e-14;
        opts.gradient_tolerance = 1e-12;
        opts.parameter_tolerance = 1e-14;
        ceres::GradientProblemSolver::Summary summary;
        ceres::Solve(opts, problem, u.data(), &summary);
        const double v = ratio.ratio(u.data(), nullptr);
        if (std::isfinite(v)) {
            values[r] = v;
            minimizers[r] = ratio.density(u.data());
        }
    });

    MlsiEstimate out;
    out.restarts = restarts;
    out.linearization_limit = poincare_constant(g, q);
    out.best_interior = std::numeric_limits<double>::infinity();
    std::vector<Vector> interior;
    bool reached_limit = false;
    for (int r = 0; r < restarts; ++r) {
        if (!std::isfinite(values[r])) continue;
        if (values[r] < out.best_interior) {
            out.best_interior = values[r];
            out.minimizer = minimizers[r];
        }
        if ((minimizers[r].array() - 1.0).abs().maxCoeff() < 1e-3) {
            reached_limit = true;
            continue;
        }
        bool seen = false;
        for (const auto& m : interior) seen = seen || (m - minimizers[r]).cwiseAbs().maxCoeff() < 1e-3;
        if (!seen) interior.push_back(minimizers[r]);
    }
    if (!std::isfinite(out.best_interior)) throw Error(ErrorKind::OptFailed, "no restart produced a finite ratio");
    out.distinct_minima = static_cast<int>(interior.size()) + (reached_limit ? 1 : 0);
    out.interior_attained = out.best_interior < out.linearization_limit;
    out.value = std::min(out.best_interior, out.linearization_limit);
    if (!out.interior_attained) out.minimizer = Vector::Ones(n);
    return out;
}

} // namespace ctmc
