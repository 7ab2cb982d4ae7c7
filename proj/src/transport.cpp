#include "ctmc/transport.hpp"

#include <ceres/ceres.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ctmc/parallel.hpp"
#include "solver_logging.hpp"

namespace ctmc {

namespace {

constexpr double likelihood_floor = 1e-9;

void require_interior(const LikelihoodVector& l) {
    if (l.boundary() || l.values().minCoeff() <= 0.0)
        throw Error(ErrorKind::BoundaryLikelihood, "likelihood must be strictly positive");
}

NodeFunction phi_prime(const LikelihoodVector& l, const PhiFunction& phi) {
    NodeFunction d(l.size());
    for (int x = 0; x < l.size(); ++x) d(x) = phi.derivative(l(x));
    return d;
}

EdgeMeasure weighted_measure(const LikelihoodVector& l, const PhiFunction& phi, const Generator& g,
                             const ProbabilityVector& q) {
    return conductances(g, q).cwiseProduct(vartheta_edge_weights(l, phi, g, q));
}

void validate_tangent(const LikelihoodVector& l, const TangentRepresentation& t, const EdgeMeasure& vartheta,
                      const Generator& g, const ProbabilityVector& q) {
    if (t.delta.size() != l.size() || t.potential.size() != l.size())
        throw Error(ErrorKind::BadTangent, "tangent size mismatch");
    const double scale = 1.0 + t.delta.cwiseAbs().maxCoeff();
    if (std::abs(q.values().dot(t.delta)) > 1e-10 * scale)
        throw Error(ErrorKind::BadTangent, "tangent is not mean-zero under Q");
    const NodeFunction res = t.delta + weighted_divergence_of_gradient(t.potential, vartheta, g);
    if (res.cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw Error(ErrorKind::BadTangent, "continuity equation violated");
}

// Discrete kinetic action over interior slices parametrized by softmax
// coordinates u_k, l_k = exp(u_k) / sum_x q(x) exp(u_k(x)).
struct ActionModel {
    const Generator* g;
    const ProbabilityVector* q;
    const PhiFunction* phi;
    Vector p0, p1;
    int slices;
    // unordered edges x < y with their base weight q(x) kappa(x,y)
    std::vector<std::pair<int, int>> pairs;
    std::vector<double> base;

    ActionModel(const Generator& gen, const ProbabilityVector& qq, const PhiFunction& f, Vector a, Vector b, int N)
        : g(&gen), q(&qq), phi(&f), p0(std::move(a)), p1(std::move(b)), slices(N) {
        for (int x = 0; x < gen.size(); ++x)
            for (int y = x + 1; y < gen.size(); ++y)
                if (gen.rate(x, y) > 0.0) {
                    pairs.emplace_back(x, y);
                    base.push_back(qq(x) * gen.rate(x, y));
                }
    }

    int n() const { return g->size(); }
    int dims() const { return (slices - 1) * n(); }

    std::vector<Vector> slice_probabilities(const double* u) const {
        std::vector<Vector> p(slices + 1);
        p[0] = p0;
        p[slices] = p1;
        for (int k = 1; k < slices; ++k) {
            const double* uk = u + (k - 1) * n();
            double top = uk[0];
            for (int x = 1; x < n(); ++x) top = std::max(top, uk[x]);
            Vector v(n());
            for (int x = 0; x < n(); ++x) v(x) = (*q)(x) * std::exp(uk[x] - top);
            p[k] = v / v.sum();
        }
        return p;
    }

    // Energy m^T S^+ m of one interval and the potential h with S h = m.
    double interval(const Vector& a, const Vector& b, Vector& h, Vector& mid) const {
        const int nn = n();
        mid = 0.5 * (a + b).cwiseQuotient(q->values());
        Matrix m = Matrix::Zero(nn + 1, nn + 1);
        for (std::size_t e = 0; e < pairs.size(); ++e) {
            auto [x, y] = pairs[e];
            const double w = base[e] * theta_weight(mid(x), mid(y), *phi);
            m(x, x) += w;
            m(y, y) += w;
            m(x, y) -= w;
            m(y, x) -= w;
        }
        m.block(0, nn, nn, 1).setOnes();
        m.block(nn, 0, 1, nn).setOnes();
        Vector rhs = Vector::Zero(nn + 1);
        rhs.head(nn) = b - a;
        rhs.head(nn).array() -= rhs.head(nn).sum() / nn;
        Eigen::PartialPivLU<Matrix> lu(m);
        Vector sol = lu.solve(rhs);
        sol += lu.solve(rhs - m * sol);
        h = sol.head(nn);
        return rhs.head(nn).dot(h);
    }

    double evaluate(const double* u, double* grad) const {
        const int nn = n();
        const auto p = slice_probabilities(u);
        std::vector<Vector> h(slices), mid(slices);
        double action = 0.0;
        for (int k = 0; k < slices; ++k) action += interval(p[k], p[k + 1], h[k], mid[k]);
        action *= slices;
        if (!grad) return action;
        // derivative with respect to the midpoint likelihoods of each interval
        std::vector<Vector> dmid(slices, Vector::Zero(nn));
        for (int k = 0; k < slices; ++k)
            for (std::size_t e = 0; e < pairs.size(); ++e) {
                auto [x, y] = pairs[e];
                const double d = h[k](x) - h[k](y);
                const double s = -d * d * base[e];
                dmid[k](x) += s * theta_weight_da(mid[k](x), mid[k](y), *phi);
                dmid[k](y) += s * theta_weight_da(mid[k](y), mid[k](x), *phi);
            }
        for (int k = 1; k < slices; ++k) {
            Vector gp = 2.0 * h[k - 1] - 2.0 * h[k] + 0.5 * (dmid[k - 1] + dmid[k]).cwiseQuotient(q->values());
            gp *= slices;
            const double mix = p[k].dot(gp);
            for (int x = 0; x < nn; ++x) grad[(k - 1) * nn + x] = p[k](x) * (gp(x) - mix);
        }
        return action;
    }
};

class ActionCost : public ceres::FirstOrderFunction {
public:
    explicit ActionCost(const ActionModel& m) : m_(m) {}
    bool Evaluate(const double* u, double* cost, double* gradient) const override {
        *cost = m_.evaluate(u, gradient);
        return std::isfinite(*cost);
    }
    int NumParameters() const override { return m_.dims(); }

private:
    const ActionModel& m_;
};

std::vector<double> coordinates(const std::vector<Vector>& path, const ProbabilityVector& q) {
    const int n = q.size();
    const int N = static_cast<int>(path.size()) - 1;
    std::vector<double> u((N - 1) * n);
    for (int k = 1; k < N; ++k)
        for (int x = 0; x < n; ++x) u[(k - 1) * n + x] = std::log(path[k](x) / q(x));
    return u;
}

std::vector<Vector> straight_path(const Vector& a, const Vector& b, int N) {
    std::vector<Vector> path(N + 1);
    for (int k = 0; k <= N; ++k) {
        const double t = static_cast<double>(k) / N;
        path[k] = (1.0 - t) * a + t * b;
    }
    return path;
}

// Piecewise-linear resampling at equal cumulative speed.
std::vector<Vector> equal_speed_path(const std::vector<Vector>& path, const std::vector<double>& energy) {
    const int N = static_cast<int>(path.size()) - 1;
    std::vector<double> cum(N + 1, 0.0);
    for (int k = 0; k < N; ++k) cum[k + 1] = cum[k] + std::sqrt(std::max(0.0, energy[k]));
    std::vector<Vector> out(N + 1);
    out[0] = path[0];
    out[N] = path[N];
    int seg = 0;
    for (int k = 1; k < N; ++k) {
        const double target = cum[N] * k / N;
        while (seg < N - 1 && cum[seg + 1] < target) ++seg;
        const double len = cum[seg + 1] - cum[seg];
        const double s = len > 0.0 ? (target - cum[seg]) / len : 0.0;
        out[k] = (1.0 - s) * path[seg] + s * path[seg + 1];
    }
    return out;
}

struct Solve {
    std::vector<double> u;
    double action = std::numeric_limits<double>::infinity();
    double kkt = std::numeric_limits<double>::infinity();
};

double max_abs(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

// Damped Newton steps on a finite-difference Hessian of the analytic
// gradient; L-BFGS alone tends to stall just above tight KKT targets.
void polish(const ActionModel& model, Solve& s, const GeodesicOptions& opts) {
    const int d = model.dims();
    Vector g(d), gp(d), gm(d);
    s.action = model.evaluate(s.u.data(), g.data());
    s.kkt = max_abs(g);
    double damping = 1e-8;
    for (int it = 0; it < 30 && s.kkt > 1e-3 * opts.tol; ++it) {
        Matrix hess(d, d);
        std::vector<double> w = s.u;
        for (int i = 0; i < d; ++i) {
            const double h = 1e-6 * std::max(1.0, std::abs(s.u[i]));
            w[i] = s.u[i] + h;
            model.evaluate(w.data(), gp.data());
            w[i] = s.u[i] - h;
            model.evaluate(w.data(), gm.data());
            w[i] = s.u[i];
            hess.col(i) = (gp - gm) / (2 * h);
        }
        hess = 0.5 * (hess + hess.transpose());
        bool moved = false;
        for (int tries = 0; tries < 12 && !moved; ++tries, damping *= 10) {
            Eigen::LDLT<Matrix> ldlt(hess + damping * Matrix::Identity(d, d));
            if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) continue;
            const Vector step = ldlt.solve(-g);
            std::vector<double> trial(d);
            for (int i = 0; i < d; ++i) trial[i] = s.u[i] + step(i);
            Vector gt(d);
            const double a = model.evaluate(trial.data(), gt.data());
            if (std::isfinite(a) && (a < s.action || max_abs(gt) < s.kkt) && a <= s.action + 1e-14 * std::abs(s.action)) {
                s.u = std::move(trial);
                s.action = a;
                g = gt;
                s.kkt = max_abs(g);
                moved = true;
            }
        }
        if (!moved) break;
        damping = std::max(1e-12, damping * 1e-3);
    }
}

Solve minimize(const ActionModel& model, std::vector<double> u, const GeodesicOptions& opts) {
    if (model.dims() > 0) {
        detail::quiet_solver_logs();
        ceres::GradientProblem problem(new ActionCost(model));
        ceres::GradientProblemSolver::Options o;
        o.logging_type = ceres::SILENT;
        o.max_num_iterations = opts.max_iterations;
        o.max_lbfgs_rank = 30;
        o.function_tolerance = 1e-16;
        o.gradient_tolerance = 1e-3 * opts.tol;
        o.parameter_tolerance = 1e-16;
        ceres::GradientProblemSolver::Summary summary;
        ceres::Solve(o, problem, u.data(), &summary);
    }
    Solve s;
    s.u = std::move(u);
    polish(model, s, opts);
    return s;
}

Vector floored(const ProbabilityVector& p, const ProbabilityVector& q, bool& flag) {
    Vector l = p.values().cwiseQuotient(q.values());
    if (l.minCoeff() < likelihood_floor) {
        flag = true;
        l = l.cwiseMax(likelihood_floor);
        l /= q.values().dot(l);
    }
    return l.cwiseProduct(q.values());
}

} // namespace

TangentRepresentation tangent_from_potential(const LikelihoodVector& l, const NodeFunction& potential,
                                             const PhiFunction& phi, const Generator& g,
                                             const ProbabilityVector& q) {
    require_interior(l);
    const EdgeMeasure w = vartheta_edge_weights(l, phi, g, q);
    return {-weighted_divergence_of_gradient(potential, w, g), potential, grad(potential, g)};
}

TangentRepresentation tangent_from_delta(const LikelihoodVector& l, const NodeFunction& delta,
                                         const PhiFunction& phi, const Generator& g, const ProbabilityVector& q) {
    const DualNorm dn = weighted_h_minus1_norm(delta, l, phi, g, q);
    if (!dn.finite()) throw Error(ErrorKind::BadTangent, "tangent must be mean-zero under Q");
    return {delta, dn.potential, grad(dn.potential, g)};
}

double riemannian_metric(const LikelihoodVector& l, const TangentRepresentation& d1,
                         const TangentRepresentation& d2, const PhiFunction& phi, const Generator& g,
                         const ProbabilityVector& q) {
    require_detailed_balance(g, q, "riemannian_metric");
    require_interior(l);
    const EdgeMeasure w = vartheta_edge_weights(l, phi, g, q);
    validate_tangent(l, d1, w, g, q);
    validate_tangent(l, d2, w, g, q);
    return l2_edge_inner(grad(d1.potential, g), grad(d2.potential, g), conductances(g, q).cwiseProduct(w));
}

NodeFunction gradient_flow_field(const LikelihoodVector& l, const NodeFunction& functional_derivative,
                                 const PhiFunction& phi, const Generator& g, const ProbabilityVector& q) {
    require_detailed_balance(g, q, "gradient_flow_field");
    return weighted_divergence_of_gradient(functional_derivative, vartheta_edge_weights(l, phi, g, q), g);
}

double edi_gap(const LikelihoodVector& l, const TangentRepresentation& tangent, const PhiFunction& phi,
               const Generator& g, const ProbabilityVector& q) {
    require_detailed_balance(g, q, "edi_gap");
    require_interior(l);
    const EdgeMeasure m = weighted_measure(l, phi, g, q);
    const EdgeFunction a = grad(phi_prime(l, phi), g);
    const EdgeFunction v = grad(tangent.potential, g);
    return 2.0 * l2_edge_inner(a, v, m) + l2_edge_inner(v, v, m) + l2_edge_inner(a, a, m);
}

DescentReport steepest_descent_experiment(const LikelihoodVector& l0, const std::vector<NodeFunction>& perturbations,
                                          const PhiFunction& phi, const Generator& g, const ProbabilityVector& q) {
    require_detailed_balance(g, q, "steepest_descent_experiment");
    require_interior(l0);
    const EdgeMeasure m = weighted_measure(l0, phi, g, q);
    const EdgeFunction a = grad(phi_prime(l0, phi), g);
    const double norm_a = std::sqrt(l2_edge_inner(a, a, m));
    DescentReport r;
    r.optimal_slope = -norm_a;
    r.min_margin = std::numeric_limits<double>::infinity();
    for (const auto& psi : perturbations) {
        const EdgeFunction v = grad(psi, g);
        const double nv = std::sqrt(l2_edge_inner(v, v, m));
        if (!(nv > 0.0)) throw Error(ErrorKind::InvalidInput, "perturbation must be non-constant");
        const double slope = l2_edge_inner(a, v, m) / nv;
        const double margin = slope - r.optimal_slope;
        r.slopes.push_back(slope);
        r.margins.push_back(margin);
        r.gradient_equivalent.push_back(margin <= 1e-10 * (1.0 + norm_a));
        r.min_margin = std::min(r.min_margin, margin);
    }
    r.chain_minimizes = perturbations.empty() || r.min_margin >= -1e-10;
    return r;
}

double discrete_action(const std::vector<ProbabilityVector>& slices, const PhiFunction& phi, const Generator& g,
                       const ProbabilityVector& q) {
    const int N = static_cast<int>(slices.size()) - 1;
    ActionModel model(g, q, phi, slices.front().values(), slices.back().values(), N);
    std::vector<Vector> path;
    for (const auto& s : slices) path.push_back(s.values());
    const auto u = coordinates(path, q);
    return model.evaluate(u.data(), nullptr);
}

GeodesicResult benamou_brenier(const ProbabilityVector& p0, const ProbabilityVector& p1, const PhiFunction& phi,
                               const Generator& g, const ProbabilityVector& q, int slices,
                               const GeodesicOptions& opts) {
    require_detailed_balance(g, q, "benamou_brenier");
    if (p0.size() != g.size() || p1.size() != g.size())
        throw Error(ErrorKind::Infeasible, "endpoint size does not match the chain");
    if (slices < 2) throw Error(ErrorKind::InvalidInput, "need at least two slices");
    GeodesicResult out;
    const Vector a = floored(p0, q, out.boundary_flag);
    const Vector b = floored(p1, q, out.boundary_flag);
    const int n = g.size();

    if ((a - b).cwiseAbs().maxCoeff() <= 1e-15) {
        for (int k = 0; k <= slices; ++k) out.slices.emplace_back(a);
        out.potentials.assign(slices, NodeFunction::Zero(n));
        return out;
    }

    const ActionModel model(g, q, phi, a, b, slices);
    Solve best;
    const auto line = straight_path(a, b, slices);
    for (int r = 0; r < std::max(1, opts.restarts); ++r) {
        auto u = coordinates(line, q);
        if (r > 0) {
            Stream rng(opts.seed, static_cast<std::uint64_t>(r));
            for (auto& v : u) v += 0.3 * (2.0 * rng.uniform() - 1.0);
        }
        Solve s = minimize(model, std::move(u), opts);
        if (s.action < best.action) best = std::move(s);
    }

    auto energies = [&](const std::vector<double>& u) {
        const auto p = model.slice_probabilities(u.data());
        std::vector<double> e(slices);
        Vector h, mid;
        for (int k = 0; k < slices; ++k) e[k] = slices * model.interval(p[k], p[k + 1], h, mid);
        return e;
    };
    auto variation = [](const std::vector<double>& e) {
        double mean = 0.0;
        for (double v : e) mean += v;
        mean /= e.size();
        double var = 0.0;
        for (double v : e) var += (v - mean) * (v - mean);
        var /= e.size();
        return mean > 0.0 ? var / (mean * mean) : 0.0;
    };

    auto e = energies(best.u);
    out.speed_variation = variation(e);
    if (out.speed_variation > 0.01) {
        const auto path = equal_speed_path(model.slice_probabilities(best.u.data()), e);
        Solve s = minimize(model, coordinates(path, q), opts);
        out.reparametrized = true;
        if (s.action < best.action) best = std::move(s);
        e = energies(best.u);
        out.speed_variation = variation(e);
    }
    if (!(best.kkt <= opts.tol))
        {
        std::ostringstream msg;
        msg << "KKT residual " << std::scientific << best.kkt << " above tolerance " << opts.tol;
        throw Error(ErrorKind::OptFailed, msg.str());
    }

    const auto p = model.slice_probabilities(best.u.data());
    for (const auto& v : p) out.slices.emplace_back(v / v.sum());
    for (int k = 0; k < slices; ++k) {
        Vector h, mid;
        model.interval(p[k], p[k + 1], h, mid);
        out.potentials.push_back(slices * h);
    }
    out.distance = std::sqrt(std::max(0.0, best.action));
    out.action_residual = best.kkt;
    return out;
}

std::vector<double> midpoint_convexity_ratios(const GeodesicResult& geo, const PhiFunction& phi,
                                              const ProbabilityVector& q) {
    std::vector<double> out;
    const int N = static_cast<int>(geo.slices.size()) - 1;
    if (N < 2 || !(geo.distance > 0.0)) return out;
    std::vector<double> H;
    for (const auto& p : geo.slices) H.push_back(phi_entropy(p, q, phi));
    for (int j = 1; j <= N / 2; j *= 2) {
        const double len = geo.distance * 2.0 * j / N;
        for (int i = j; i + j <= N; ++i) out.push_back(8.0 * (0.5 * H[i - j] + 0.5 * H[i + j] - H[i]) / (len * len));
    }
    return out;
}

ProbabilityVector random_endpoint(const ProbabilityVector& q, std::uint64_t seed, std::uint64_t id) {
    Stream rng(seed, id);
    Vector l(q.size());
    for (int x = 0; x < q.size(); ++x) l(x) = std::exp(1.5 * (2.0 * rng.uniform() - 1.0));
    l /= q.values().dot(l);
    Vector p = l.cwiseProduct(q.values());
    return ProbabilityVector(p / p.sum());
}

RicciEstimate ricci_lower_bound_estimate(const Generator& g, const ProbabilityVector& q, const PhiFunction& phi,
                                         int samples, int slices, std::uint64_t seed, int threads) {
    require_detailed_balance(g, q, "ricci_lower_bound_estimate");
    std::vector<double> kappa(samples, std::numeric_limits<double>::infinity());
    std::vector<char> skipped(samples, 0);
    parallel_for(static_cast<std::size_t>(samples), threads, [&](std::size_t i) {
        const ProbabilityVector a = random_endpoint(q, seed, 2 * i);
        const ProbabilityVector b = i % 3 == 2 ? q : random_endpoint(q, seed, 2 * i + 1);
        if ((a.values() - b.values()).cwiseAbs().maxCoeff() <= 1e-15) {
            skipped[i] = 1;
            return;
        }
        GeodesicOptions opts;
        opts.restarts = 1;
        try {
            const auto geo = benamou_brenier(a, b, phi, g, q, slices, opts);
            for (double r : midpoint_convexity_ratios(geo, phi, q)) kappa[i] = std::min(kappa[i], r);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::OptFailed) throw;
            skipped[i] = 1;
        }
    });
    RicciEstimate out;
    out.kappa = std::numeric_limits<double>::infinity();
    for (int i = 0; i < samples; ++i) {
        if (skipped[i]) {
            ++out.skipped;
            continue;
        }
        ++out.samples_used;
        out.kappa = std::min(out.kappa, kappa[i]);
    }
    return out;
}

HwiReport hwi_check(const ProbabilityVector& p0, const ProbabilityVector& p1, double kappa, const PhiFunction& phi,
                    const Generator& g, const ProbabilityVector& q, int slices, const std::string& kappa_source,
                    const GeodesicOptions& opts) {
    require_detailed_balance(g, q, "hwi_check");
    if (p0.boundary()) throw Error(ErrorKind::BoundaryLikelihood, "hwi_check needs an interior p0");
    HwiReport r;
    r.kappa = kappa;
    r.kappa_source = kappa_source;
    const LikelihoodVector l0 = likelihood(p0, q);
    r.entropy0 = phi_entropy(p0, q, phi);
    r.entropy1 = phi_entropy(p1, q, phi);
    r.fisher = fisher_information(l0, phi, g, q);
    const auto geo = benamou_brenier(p0, p1, phi, g, q, slices, opts);
    r.distance = geo.distance;
    r.lhs = r.entropy0 - r.entropy1;
    r.rhs = std::sqrt(std::max(0.0, r.fisher)) * r.distance - 0.5 * kappa * r.distance * r.distance;
    r.tolerance = 1e-9 * (1.0 + std::abs(r.lhs) + std::abs(r.rhs)) + 10.0 * opts.tol;
    if (r.distance > 0.0) {
        const NodeFunction& psi0 = geo.potentials.front();
        const double norm = weighted_h1_norm(psi0, l0, phi, g, q);
        r.bracket = norm > 0.0 ? -weighted_h1_inner(phi_prime(l0, phi), psi0, l0, phi, g, q) / norm : 0.0;
    }
    r.sharp_rhs = r.bracket * r.distance - 0.5 * kappa * r.distance * r.distance;
    r.holds = r.lhs <= r.rhs + r.tolerance;
    r.bracket_bounded = r.bracket <= std::sqrt(std::max(0.0, r.fisher)) * (1.0 + 1e-12) + 1e-12;
    return r;
}

} // namespace ctmc
