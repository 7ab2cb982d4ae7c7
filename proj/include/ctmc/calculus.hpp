#pragma once

#include <limits>

#include "ctmc/generator.hpp"
#include "ctmc/phi.hpp"

namespace ctmc {

// Values indexed by the edges of a generator's EdgeSet.
using EdgeFunction = Eigen::VectorXd;
// Strictly positive per-edge weights.
using EdgeMeasure = Eigen::VectorXd;

// Norm of a dual problem together with the potential attaining it.
struct DualNorm {
    double value = std::numeric_limits<double>::infinity();
    NodeFunction potential;
    bool finite() const { return value < std::numeric_limits<double>::infinity(); }
};

EdgeFunction grad(const NodeFunction& f, const Generator& g);
NodeFunction div(const EdgeFunction& F, const Generator& g);

double l2_inner(const NodeFunction& f, const NodeFunction& g, const ProbabilityVector& q);
double l2_edge_inner(const EdgeFunction& F, const EdgeFunction& G, const EdgeMeasure& c);

// c(x,y) = kappa(x,y) q(x) / 2
EdgeMeasure conductances(const Generator& g, const ProbabilityVector& q);

double dirichlet_form(const NodeFunction& f, const NodeFunction& h, const Generator& g,
                      const ProbabilityVector& q);
// 1/2 sum_x sum_y kappa(y,x) q(y) (f(y) - f(x))^2
double dirichlet_energy(const NodeFunction& f, const Generator& g, const ProbabilityVector& q);

double h1_norm(const NodeFunction& f, const Generator& g, const ProbabilityVector& q);
double h1_inner(const NodeFunction& f, const NodeFunction& h, const Generator& g, const ProbabilityVector& q);

// Solves K u = f with sum q u = 0. Requires sum q f = 0.
NodeFunction solve_generator(const Generator& g, const ProbabilityVector& q, const NodeFunction& f);

DualNorm h_minus1_norm(const NodeFunction& f, const Generator& g, const ProbabilityVector& q);
// <f,u>_Q / ||u||_{H1} for a trial u
double h_minus1_sup_form(const NodeFunction& f, const NodeFunction& u, const Generator& g,
                         const ProbabilityVector& q);

double theta_weight(double a, double b, const PhiFunction& phi);
// partial derivative of theta_weight in its first argument
double theta_weight_da(double a, double b, const PhiFunction& phi);

EdgeMeasure vartheta_edge_weights(const LikelihoodVector& l, const PhiFunction& phi, const Generator& g,
                                  const ProbabilityVector& q);

double weighted_h1_inner(const NodeFunction& f, const NodeFunction& h, const LikelihoodVector& l,
                         const PhiFunction& phi, const Generator& g, const ProbabilityVector& q);
double weighted_h1_norm(const NodeFunction& f, const LikelihoodVector& l, const PhiFunction& phi,
                        const Generator& g, const ProbabilityVector& q);

// div(vartheta grad u)
NodeFunction weighted_divergence_of_gradient(const NodeFunction& u, const EdgeMeasure& vartheta,
                                             const Generator& g);

// Solves f + div(vartheta grad h) = 0 on the mean-zero slice.
DualNorm weighted_h_minus1_norm(const NodeFunction& f, const LikelihoodVector& l, const PhiFunction& phi,
                                const Generator& g, const ProbabilityVector& q);
DualNorm weighted_h_minus1_norm(const NodeFunction& f, const EdgeMeasure& vartheta, const Generator& g,
                                const ProbabilityVector& q);
double weighted_h_minus1_sup_form(const NodeFunction& f, const NodeFunction& u, const LikelihoodVector& l,
                                  const PhiFunction& phi, const Generator& g, const ProbabilityVector& q);

double modified_h_minus1_norm(const NodeFunction& f, const LikelihoodVector& l, const PhiFunction& phi,
                              const Generator& g, const ProbabilityVector& q);

} // namespace ctmc
