#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ctmc/transport.hpp"
#include "support.hpp"

using namespace ctmc;
using namespace testing_support;

namespace {

std::vector<PhiFunction> presets() { return {phi_xlogx(), phi_quadratic(), phi_renyi(2.0), phi_renyi(3.0)}; }

NodeFunction phi_prime(const LikelihoodVector& l, const PhiFunction& phi) {
    NodeFunction d(l.size());
    for (int x = 0; x < l.size(); ++x) d(x) = phi.derivative(l(x));
    return d;
}

struct Setup {
    Generator g;
    ProbabilityVector q;
};

Setup balanced(int n, std::mt19937_64& rng) {
    auto g = random_chain(n, rng, true);
    auto q = stationary_distribution(g);
    return {g, q};
}

ProbabilityVector perturbed(const LikelihoodVector& l, const NodeFunction& delta, double eps,
                            const ProbabilityVector& q) {
    return ProbabilityVector((l.values() + eps * delta).cwiseProduct(q.values()));
}

} // namespace

TEST_CASE("Riemannian metric") {
    std::mt19937_64 rng(307);
    for (int trial = 0; trial < 40; ++trial) {
        const auto s = balanced(2 + trial % 6, rng);
        const int n = s.g.size();
        const auto phi = presets()[trial % 4];
        const auto l = random_likelihood(s.q, rng);

        const auto flow = tangent_from_delta(l, s.g.rates() * l.values(), phi, s.g, s.q);
        const double i = fisher_information(l, phi, s.g, s.q);
        CHECK(std::abs(riemannian_metric(l, flow, flow, phi, s.g, s.q) - i) <= 1e-10 * (1 + i));

        const auto d1 = tangent_from_potential(l, random_node(n, rng), phi, s.g, s.q);
        const auto d2 = tangent_from_potential(l, random_node(n, rng), phi, s.g, s.q);
        const auto d3 = tangent_from_potential(l, random_node(n, rng), phi, s.g, s.q);
        CHECK(std::abs(s.q.values().dot(d1.delta)) <= 1e-12);
        const double a = 0.7, b = -1.9;
        const auto mix = tangent_from_potential(l, a * d1.potential + b * d2.potential, phi, s.g, s.q);
        const double lhs = riemannian_metric(l, mix, d3, phi, s.g, s.q);
        const double rhs =
            a * riemannian_metric(l, d1, d3, phi, s.g, s.q) + b * riemannian_metric(l, d2, d3, phi, s.g, s.q);
        CHECK(std::abs(lhs - rhs) <= 1e-10 * (1 + std::abs(rhs)));
        CHECK(std::abs(riemannian_metric(l, d1, d2, phi, s.g, s.q) - riemannian_metric(l, d2, d1, phi, s.g, s.q)) <=
              1e-14);

        const auto zero = tangent_from_potential(l, NodeFunction::Zero(n), phi, s.g, s.q);
        CHECK(riemannian_metric(l, zero, d1, phi, s.g, s.q) == 0.0);

        const double dn = weighted_h_minus1_norm(d1.delta, l, phi, s.g, s.q).value;
        CHECK(std::abs(riemannian_metric(l, d1, d1, phi, s.g, s.q) - dn * dn) <= 1e-8 * (1 + dn * dn));

        auto broken = d1;
        broken.delta(0) += 0.1;
        broken.delta(n - 1) -= 0.1 * s.q(0) / s.q(n - 1);
        CHECK_THROWS_AS(riemannian_metric(l, broken, d2, phi, s.g, s.q), Error);
        CHECK_THROWS_AS(tangent_from_delta(l, NodeFunction::Ones(n), phi, s.g, s.q), Error);
    }
    const auto g = cycle3();
    const auto q = stationary_distribution(g);
    const LikelihoodVector one(Vector::Ones(3), q);
    const auto t = tangent_from_potential(one, Vector::Unit(3, 0), phi_xlogx(), g, q);
    CHECK_THROWS_AS(riemannian_metric(one, t, t, phi_xlogx(), g, q), Error);
}

TEST_CASE("gradient flow identity") {
    std::mt19937_64 rng(311);
    for (int trial = 0; trial < 100; ++trial) {
        const auto s = balanced(2 + trial % 7, rng);
        const int n = s.g.size();
        const auto phi = presets()[trial % 4];
        const auto l = random_likelihood(s.q, rng, 1.5);
        const NodeFunction field = gradient_flow_field(l, phi_prime(l, phi), phi, s.g, s.q);
        CHECK((field - s.g.rates() * l.values()).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK(gradient_flow_field(l, NodeFunction::Constant(n, 3.0), phi, s.g, s.q).cwiseAbs().maxCoeff() == 0.0);
        const NodeFunction f = random_node(n, rng);
        CHECK((gradient_flow_field(l, f, phi_quadratic(), s.g, s.q) - 0.5 * s.g.rates() * f).cwiseAbs().maxCoeff() <=
              1e-12);
    }
}

TEST_CASE("energy dissipation inequality") {
    std::mt19937_64 rng(313);
    for (int trial = 0; trial < 20; ++trial) {
        const auto s = balanced(2 + trial % 6, rng);
        const int n = s.g.size();
        const auto phi = presets()[trial % 4];
        const auto l = random_likelihood(s.q, rng);
        const NodeFunction d = phi_prime(l, phi);
        const double norm2 = std::pow(weighted_h1_norm(d, l, phi, s.g, s.q), 2);

        const auto steepest = tangent_from_potential(l, -d, phi, s.g, s.q);
        CHECK(std::abs(edi_gap(l, steepest, phi, s.g, s.q)) <= 1e-10);
        const auto rest = tangent_from_potential(l, NodeFunction::Zero(n), phi, s.g, s.q);
        CHECK(std::abs(edi_gap(l, rest, phi, s.g, s.q) - norm2) <= 1e-12 * (1 + norm2));
        for (int k = 0; k < 500; ++k) {
            const NodeFunction psi = random_node(n, rng, 2.0);
            const double gap = edi_gap(l, tangent_from_potential(l, psi, phi, s.g, s.q), phi, s.g, s.q);
            const double square = std::pow(weighted_h1_norm(psi + d, l, phi, s.g, s.q), 2);
            CHECK(gap >= -1e-10);
            CHECK(std::abs(gap - square) <= 1e-10 * (1 + square));
        }
    }
}

TEST_CASE("steepest descent") {
    std::mt19937_64 rng(317);
    for (int trial = 0; trial < 10; ++trial) {
        const auto s = balanced(3 + trial % 5, rng);
        const int n = s.g.size();
        const auto phi = presets()[trial % 4];
        const auto l = random_likelihood(s.q, rng);
        const NodeFunction d = phi_prime(l, phi);
        std::vector<NodeFunction> perturbations = {-d, -2.5 * d + NodeFunction::Constant(n, 4.0), d};
        for (int k = 0; k < 1000; ++k) perturbations.push_back(random_node(n, rng));
        const auto r = steepest_descent_experiment(l, perturbations, phi, s.g, s.q);
        const double norm = weighted_h1_norm(d, l, phi, s.g, s.q);
        CHECK(std::abs(r.optimal_slope + norm) <= 1e-14);
        CHECK(std::abs(r.slopes[0] + norm) <= 1e-10 * (1 + norm));
        CHECK(r.gradient_equivalent[0]);
        CHECK(r.gradient_equivalent[1]);
        CHECK_FALSE(r.gradient_equivalent[2]);
        CHECK(std::abs(r.slopes[2] - norm) <= 1e-10 * (1 + norm));
        CHECK(r.chain_minimizes);
        CHECK(r.min_margin >= -1e-10);
        for (std::size_t k = 3; k < perturbations.size(); ++k) CHECK_FALSE(r.gradient_equivalent[k]);
    }
    std::mt19937_64 rng2(3);
    const auto s = balanced(4, rng2);
    const auto l = random_likelihood(s.q, rng2);
    CHECK_THROWS_AS(steepest_descent_experiment(l, {NodeFunction::Ones(4)}, phi_xlogx(), s.g, s.q), Error);
}

TEST_CASE("Benamou-Brenier distance") {
    std::mt19937_64 rng(331);
    const auto phi = phi_xlogx();
    for (int trial = 0; trial < 5; ++trial) {
        const auto s = balanced(3 + trial % 3, rng);
        const auto p0 = random_probability(s.g.size(), rng);
        const auto p1 = random_probability(s.g.size(), rng);

        const auto same = benamou_brenier(p0, p0, phi, s.g, s.q, 16);
        CHECK(same.distance == 0.0);
        CHECK(same.slices.size() == 17);

        GeodesicOptions opts;
        const auto fwd = benamou_brenier(p0, p1, phi, s.g, s.q, 16, opts);
        const auto bwd = benamou_brenier(p1, p0, phi, s.g, s.q, 16, opts);
        CHECK(fwd.distance > 0.0);
        CHECK(std::abs(fwd.distance - bwd.distance) <= 2 * opts.tol);
        CHECK(fwd.action_residual <= opts.tol);
        CHECK_FALSE(fwd.boundary_flag);
        REQUIRE(fwd.slices.size() == 17);
        REQUIRE(fwd.potentials.size() == 16);
        for (const auto& p : fwd.slices) CHECK(std::abs(p.values().sum() - 1.0) <= 1e-14);
        CHECK((fwd.slices.front().values() - p0.values()).cwiseAbs().maxCoeff() <= 1e-15);
        CHECK((fwd.slices.back().values() - p1.values()).cwiseAbs().maxCoeff() <= 1e-15);
        const double action = discrete_action(fwd.slices, phi, s.g, s.q);
        CHECK(std::abs(action - fwd.distance * fwd.distance) <= 1e-10 * (1 + action));
        CHECK(fwd.speed_variation <= 0.01);

        // each potential moves its interval by the continuity equation at the midpoint weights
        for (int k = 0; k < 16; ++k) {
            const Vector mid = 0.5 * (fwd.slices[k].values() + fwd.slices[k + 1].values());
            const auto lm = likelihood(ProbabilityVector(mid), s.q);
            const EdgeMeasure w = vartheta_edge_weights(lm, phi, s.g, s.q);
            const Vector delta = 16.0 * (fwd.slices[k + 1].values() - fwd.slices[k].values()).cwiseQuotient(s.q.values());
            const Vector res = delta + weighted_divergence_of_gradient(fwd.potentials[k], w, s.g);
            CHECK(res.cwiseAbs().maxCoeff() <= 1e-9 * (1 + delta.cwiseAbs().maxCoeff()));
        }

        // the straight line is feasible, so its action bounds the minimum
        std::vector<ProbabilityVector> line;
        for (int k = 0; k <= 16; ++k) line.emplace_back((1.0 - k / 16.0) * p0.values() + (k / 16.0) * p1.values());
        CHECK(fwd.distance * fwd.distance <= discrete_action(line, phi, s.g, s.q) * (1 + 1e-12));
    }

    const auto s = balanced(3, rng);
    const auto vertex = benamou_brenier(ProbabilityVector(Vector::Unit(3, 0)), s.q, phi, s.g, s.q, 16);
    CHECK(vertex.boundary_flag);
    CHECK(std::isfinite(vertex.distance));

    const auto c = cycle3();
    const auto qc = stationary_distribution(c);
    CHECK_THROWS_AS(benamou_brenier(qc, qc, phi, c, qc, 16), Error);
}

TEST_CASE("triangle inequality on sampled triples") {
    std::mt19937_64 rng(337);
    const GeodesicOptions opts;
    for (int trial = 0; trial < 6; ++trial) {
        const auto s = balanced(3 + trial % 2, rng);
        const auto phi = presets()[trial % 4];
        const int n = s.g.size();
        const auto a = random_probability(n, rng), b = random_probability(n, rng), c = random_probability(n, rng);
        const double ab = benamou_brenier(a, b, phi, s.g, s.q, 16, opts).distance;
        const double bc = benamou_brenier(b, c, phi, s.g, s.q, 16, opts).distance;
        const double ac = benamou_brenier(a, c, phi, s.g, s.q, 16, opts).distance;
        CHECK(ac <= ab + bc + 3 * opts.tol);
    }
}

TEST_CASE("local expansion of the distance") {
    std::mt19937_64 rng(347);
    for (int trial = 0; trial < 3; ++trial) {
        const auto s = balanced(3 + trial, rng);
        const auto phi = presets()[trial % 4];
        const auto l = random_likelihood(s.q, rng, 0.5);
        const NodeFunction delta = mean_zero(random_node(s.g.size(), rng), s.q);
        const double eps = 1e-3;
        const auto geo = benamou_brenier(ProbabilityVector(l.values().cwiseProduct(s.q.values())),
                                         perturbed(l, delta, eps, s.q), phi, s.g, s.q, 64);
        const double norm = weighted_h_minus1_norm(delta, l, phi, s.g, s.q).value;
        CHECK(std::abs(geo.distance / eps - norm) <= 0.02 * norm);
    }
}

TEST_CASE("Ricci lower bound estimate") {
    std::mt19937_64 rng(349);
    const auto s = balanced(3, rng);
    const auto phi = phi_xlogx();
    const auto few = ricci_lower_bound_estimate(s.g, s.q, phi, 10, 16, 5);
    const auto many = ricci_lower_bound_estimate(s.g, s.q, phi, 40, 16, 5);
    CHECK(few.samples_used == 10);
    CHECK(many.samples_used == 40);
    CHECK(many.kappa <= few.kappa);
    CHECK(std::isfinite(many.kappa));
    const auto threaded = ricci_lower_bound_estimate(s.g, s.q, phi, 10, 16, 5, 3);
    CHECK(threaded.kappa == few.kappa);

    // held-out geodesics satisfy the midpoint inequality with the estimate
    int violations = 0;
    for (std::uint64_t i = 0; i < 20; ++i) {
        const auto a = random_endpoint(s.q, 99, 2 * i), b = random_endpoint(s.q, 99, 2 * i + 1);
        const auto geo = benamou_brenier(a, b, phi, s.g, s.q, 16);
        const double h0 = phi_entropy(a, s.q, phi), h1 = phi_entropy(b, s.q, phi);
        const double hm = phi_entropy(geo.slices[8], s.q, phi);
        const double w2 = geo.distance * geo.distance;
        violations += hm > 0.5 * h0 + 0.5 * h1 - many.kappa / 8 * w2 + 1e-7;
    }
    CHECK(violations == 0);

    // coincident endpoints are skipped
    const auto c = random_endpoint(s.q, 1, 0);
    CHECK(midpoint_convexity_ratios(benamou_brenier(c, c, phi, s.g, s.q, 16), phi, s.q).empty());
}

TEST_CASE("HWI inequality") {
    std::mt19937_64 rng(353);
    for (int trial = 0; trial < 4; ++trial) {
        const auto s = balanced(3 + trial % 2, rng);
        const auto phi = presets()[trial % 3];
        const auto p0 = random_probability(s.g.size(), rng);
        const auto kappa = ricci_lower_bound_estimate(s.g, s.q, phi, 30, 16, trial);
        const auto r = hwi_check(p0, s.q, kappa.kappa, phi, s.g, s.q, 16, "estimate");
        CHECK(r.kappa_source == "estimate");
        CHECK(std::abs(r.entropy1) <= 1e-15);
        CHECK(std::abs(r.fisher - fisher_information(likelihood(p0, s.q), phi, s.g, s.q)) <= 1e-15);
        CHECK(r.holds);
        CHECK(r.bracket_bounded);
        CHECK(r.sharp_rhs <= r.rhs + 1e-12);

        const auto same = hwi_check(p0, p0, kappa.kappa, phi, s.g, s.q, 16);
        CHECK(same.distance == 0.0);
        CHECK(same.lhs == 0.0);
        CHECK(same.rhs == 0.0);
        CHECK(same.holds);
        CHECK(same.kappa_source == "input");
    }
}
