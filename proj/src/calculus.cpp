#include "ctmc/calculus.hpp"

#include <algorithm>
#include <cmath>

namespace ctmc {

namespace {

bool mean_zero(const NodeFunction& f, const ProbabilityVector& q) {
    const double scale = 1.0 + f.cwiseAbs().maxCoeff();
    return std::abs(q.values().dot(f)) <= 1e-11 * scale;
}

// Solves a u = f, q.u = 0 for a generator-like matrix a whose kernel is the
// constants, by bordering with one Lagrange row.
NodeFunction bordered_solve(const Matrix& a, const ProbabilityVector& q, const NodeFunction& f) {
    const int n = static_cast<int>(a.rows());
    Matrix m(n + 1, n + 1);
    m.topLeftCorner(n, n) = a;
    m.topRightCorner(n, 1).setOnes();
    m.bottomLeftCorner(1, n) = q.values().transpose();
    m(n, n) = 0.0;
    Vector rhs(n + 1);
    rhs.head(n) = f;
    rhs(n) = 0.0;
    Eigen::PartialPivLU<Matrix> lu(m);
    Vector sol = lu.solve(rhs);
    sol += lu.solve(rhs - m * sol);
    if (!sol.allFinite()) throw Error(ErrorKind::SolveFailed, "singular bordered system");
    const double res = (m * sol - rhs).cwiseAbs().maxCoeff();
    if (res > 1e-8 * (1.0 + rhs.cwiseAbs().maxCoeff()) * (1.0 + m.cwiseAbs().maxCoeff()))
        throw Error(ErrorKind::SolveFailed, "bordered solve residual too large");
    return sol.head(n);
}

void require_interior(const LikelihoodVector& l) {
    if (l.boundary() || l.values().minCoeff() <= 0.0)
        throw Error(ErrorKind::BoundaryLikelihood, "likelihood must be strictly positive");
}

bool near_diagonal(double pa, double pb, double rel) {
    return std::abs(pa - pb) < rel * (1.0 + std::max(std::abs(pa), std::abs(pb)));
}

} // namespace

EdgeFunction grad(const NodeFunction& f, const Generator& g) {
    const auto& z = g.edges();
    EdgeFunction out(z.size());
    for (int e = 0; e < z.size(); ++e) out(e) = f(z[e].second) - f(z[e].first);
    return out;
}

NodeFunction div(const EdgeFunction& F, const Generator& g) {
    const auto& z = g.edges();
    NodeFunction out = NodeFunction::Zero(g.size());
    for (int e = 0; e < z.size(); ++e) {
        auto [x, y] = z[e];
        int back = z.index(y, x);
        double reverse = back >= 0 ? F(back) : 0.0;
        out(x) += 0.5 * g.rate(x, y) * (F(e) - reverse);
    }
    return out;
}

double l2_inner(const NodeFunction& f, const NodeFunction& g, const ProbabilityVector& q) {
    return (q.values().array() * f.array() * g.array()).sum();
}

double l2_edge_inner(const EdgeFunction& F, const EdgeFunction& G, const EdgeMeasure& c) {
    return (c.array() * F.array() * G.array()).sum();
}

EdgeMeasure conductances(const Generator& g, const ProbabilityVector& q) {
    const auto& z = g.edges();
    EdgeMeasure c(z.size());
    for (int e = 0; e < z.size(); ++e) c(e) = 0.5 * g.rate(z[e].first, z[e].second) * q(z[e].first);
    return c;
}

double dirichlet_form(const NodeFunction& f, const NodeFunction& h, const Generator& g,
                      const ProbabilityVector& q) {
    return -l2_inner(f, g.rates() * h, q);
}

double dirichlet_energy(const NodeFunction& f, const Generator& g, const ProbabilityVector& q) {
    double acc = 0.0;
    for (int y = 0; y < g.size(); ++y)
        for (int x = 0; x < g.size(); ++x)
            if (x != y) {
                double d = f(y) - f(x);
                acc += g.rate(y, x) * q(y) * d * d;
            }
    return 0.5 * acc;
}

double h1_norm(const NodeFunction& f, const Generator& g, const ProbabilityVector& q) {
    return std::sqrt(std::max(0.0, dirichlet_energy(f, g, q)));
}

double h1_inner(const NodeFunction& f, const NodeFunction& h, const Generator& g, const ProbabilityVector& q) {
    require_detailed_balance(g, q, "h1_inner");
    return l2_edge_inner(grad(f, g), grad(h, g), conductances(g, q));
}

NodeFunction solve_generator(const Generator& g, const ProbabilityVector& q, const NodeFunction& f) {
    if (!mean_zero(f, q)) throw Error(ErrorKind::NonzeroMean, "right-hand side is not mean-zero under Q");
    return bordered_solve(g.rates(), q, f);
}

DualNorm h_minus1_norm(const NodeFunction& f, const Generator& g, const ProbabilityVector& q) {
    require_detailed_balance(g, q, "h_minus1_norm");
    DualNorm out;
    if (!mean_zero(f, q)) return out;
    out.potential = bordered_solve(g.rates(), q, f);
    out.value = h1_norm(out.potential, g, q);
    return out;
}

double h_minus1_sup_form(const NodeFunction& f, const NodeFunction& u, const Generator& g,
                         const ProbabilityVector& q) {
    return l2_inner(f, u, q) / h1_norm(u, g, q);
}

double theta_weight(double a, double b, const PhiFunction& phi) {
    if (!(a > 0.0) || !(b > 0.0)) throw Error(ErrorKind::NonpositiveArgument, "theta_weight needs a, b > 0");
    const double pa = phi.derivative(a), pb = phi.derivative(b);
    if (near_diagonal(pa, pb, 1e-8)) return 1.0 / phi.second(0.5 * (a + b));
    return (a - b) / (pa - pb);
}

double theta_weight_da(double a, double b, const PhiFunction& phi) {
    const double pa = phi.derivative(a), pb = phi.derivative(b);
    if (near_diagonal(pa, pb, 1e-5)) {
        const double m = 0.5 * (a + b);
        const double s = phi.second(m);
        return -phi.third(m) / (2.0 * s * s);
    }
    const double theta = (a - b) / (pa - pb);
    return (1.0 - theta * phi.second(a)) / (pa - pb);
}

EdgeMeasure vartheta_edge_weights(const LikelihoodVector& l, const PhiFunction& phi, const Generator& g,
                                  const ProbabilityVector&) {
    require_interior(l);
    const auto& z = g.edges();
    EdgeMeasure w(z.size());
    for (int e = 0; e < z.size(); ++e) w(e) = theta_weight(l(z[e].first), l(z[e].second), phi);
    return w;
}

double weighted_h1_inner(const NodeFunction& f, const NodeFunction& h, const LikelihoodVector& l,
                         const PhiFunction& phi, const Generator& g, const ProbabilityVector& q) {
    require_detailed_balance(g, q, "weighted_h1_inner");
    EdgeMeasure m = conductances(g, q).cwiseProduct(vartheta_edge_weights(l, phi, g, q));
    return l2_edge_inner(grad(f, g), grad(h, g), m);
}

double weighted_h1_norm(const NodeFunction& f, const LikelihoodVector& l, const PhiFunction& phi,
                        const Generator& g, const ProbabilityVector& q) {
    return std::sqrt(std::max(0.0, weighted_h1_inner(f, f, l, phi, g, q)));
}

NodeFunction weighted_divergence_of_gradient(const NodeFunction& u, const EdgeMeasure& vartheta,
                                             const Generator& g) {
    return div(vartheta.cwiseProduct(grad(u, g)), g);
}

DualNorm weighted_h_minus1_norm(const NodeFunction& f, const EdgeMeasure& vartheta, const Generator& g,
                                const ProbabilityVector& q) {
    DualNorm out;
    if (!mean_zero(f, q)) return out;
    const int n = g.size();
    const auto& z = g.edges();
    Matrix lap = Matrix::Zero(n, n);
    for (int e = 0; e < z.size(); ++e) {
        auto [x, y] = z[e];
        lap(x, y) += g.rate(x, y) * vartheta(e);
        lap(x, x) -= g.rate(x, y) * vartheta(e);
    }
    out.potential = bordered_solve(lap, q, -f);
    EdgeFunction gh = grad(out.potential, g);
    out.value = std::sqrt(std::max(0.0, l2_edge_inner(gh, gh, conductances(g, q).cwiseProduct(vartheta))));
    return out;
}

DualNorm weighted_h_minus1_norm(const NodeFunction& f, const LikelihoodVector& l, const PhiFunction& phi,
                                const Generator& g, const ProbabilityVector& q) {
    require_detailed_balance(g, q, "weighted_h_minus1_norm");
    return weighted_h_minus1_norm(f, vartheta_edge_weights(l, phi, g, q), g, q);
}

double weighted_h_minus1_sup_form(const NodeFunction& f, const NodeFunction& u, const LikelihoodVector& l,
                                  const PhiFunction& phi, const Generator& g, const ProbabilityVector& q) {
    return l2_inner(f, u, q) / weighted_h1_norm(u, l, phi, g, q);
}

double modified_h_minus1_norm(const NodeFunction& f, const LikelihoodVector& l, const PhiFunction& phi,
                              const Generator& g, const ProbabilityVector& q) {
    require_detailed_balance(g, q, "modified_h_minus1_norm");
    EdgeMeasure w = vartheta_edge_weights(l, phi, g, q);
    NodeFunction u = solve_generator(g, q, f);
    EdgeFunction gu = grad(u, g);
    return std::sqrt(std::max(0.0, l2_edge_inner(gu, gu, conductances(g, q).cwiseQuotient(w))));
}

} // namespace ctmc
