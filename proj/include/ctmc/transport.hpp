#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctmc/entropy.hpp"

namespace ctmc {

// A tangent at l: delta + div(vartheta_l grad potential) = 0.
struct TangentRepresentation {
    NodeFunction delta;
    NodeFunction potential;
    EdgeFunction velocity;
};

TangentRepresentation tangent_from_potential(const LikelihoodVector& l, const NodeFunction& potential,
                                             const PhiFunction& phi, const Generator& g,
                                             const ProbabilityVector& q);
TangentRepresentation tangent_from_delta(const LikelihoodVector& l, const NodeFunction& delta,
                                         const PhiFunction& phi, const Generator& g, const ProbabilityVector& q);

double riemannian_metric(const LikelihoodVector& l, const TangentRepresentation& d1,
                         const TangentRepresentation& d2, const PhiFunction& phi, const Generator& g,
                         const ProbabilityVector& q);

NodeFunction gradient_flow_field(const LikelihoodVector& l, const NodeFunction& functional_derivative,
                                 const PhiFunction& phi, const Generator& g, const ProbabilityVector& q);

double edi_gap(const LikelihoodVector& l, const TangentRepresentation& tangent, const PhiFunction& phi,
               const Generator& g, const ProbabilityVector& q);

struct DescentReport {
    double optimal_slope = 0.0;
    std::vector<double> slopes;
    std::vector<double> margins;
    std::vector<bool> gradient_equivalent;
    double min_margin = 0.0;
    bool chain_minimizes = false;
};

DescentReport steepest_descent_experiment(const LikelihoodVector& l0, const std::vector<NodeFunction>& perturbations,
                                          const PhiFunction& phi, const Generator& g, const ProbabilityVector& q);

struct GeodesicOptions {
    double tol = 1e-7;
    int max_iterations = 4000;
    int restarts = 4;
    std::uint64_t seed = 7;
};

struct GeodesicResult {
    double distance = 0.0;
    // N + 1 slices on [0, 1]
    std::vector<ProbabilityVector> slices;
    // potential driving slice k to slice k + 1, for k < N
    std::vector<NodeFunction> potentials;
    double action_residual = 0.0;
    bool boundary_flag = false;
    // variance of the per-interval action relative to its mean
    double speed_variation = 0.0;
    bool reparametrized = false;
};

GeodesicResult benamou_brenier(const ProbabilityVector& p0, const ProbabilityVector& p1, const PhiFunction& phi,
                               const Generator& g, const ProbabilityVector& q, int slices = 32,
                               const GeodesicOptions& opts = {});

// Action of a discrete path with fixed slices.
double discrete_action(const std::vector<ProbabilityVector>& slices, const PhiFunction& phi, const Generator& g,
                       const ProbabilityVector& q);

struct RicciEstimate {
    double kappa = 0.0;
    int samples_used = 0;
    // coincident endpoints, or geodesics whose optimizer did not converge
    int skipped = 0;
};

// Pair i is drawn from the stream (seed, i), so sample sets nest in `samples`.
RicciEstimate ricci_lower_bound_estimate(const Generator& g, const ProbabilityVector& q, const PhiFunction& phi,
                                         int samples, int slices, std::uint64_t seed, int threads = 0);

// Midpoint-convexity ratios 8[H(a)/2 + H(b)/2 - H(mid)]/len^2 over the
// sub-segments of a computed geodesic with half-widths 1, 2, 4, ... slices.
std::vector<double> midpoint_convexity_ratios(const GeodesicResult& geo, const PhiFunction& phi,
                                              const ProbabilityVector& q);

ProbabilityVector random_endpoint(const ProbabilityVector& q, std::uint64_t seed, std::uint64_t id);

struct HwiReport {
    double distance = 0.0;
    double fisher = 0.0;
    double entropy0 = 0.0;
    double entropy1 = 0.0;
    double kappa = 0.0;
    std::string kappa_source;
    double lhs = 0.0;
    double rhs = 0.0;
    double tolerance = 0.0;
    double bracket = 0.0;
    double sharp_rhs = 0.0;
    bool holds = false;
    bool bracket_bounded = false;
};

HwiReport hwi_check(const ProbabilityVector& p0, const ProbabilityVector& p1, double kappa, const PhiFunction& phi,
                    const Generator& g, const ProbabilityVector& q, int slices = 32,
                    const std::string& kappa_source = "input", const GeodesicOptions& opts = {});

} // namespace ctmc
