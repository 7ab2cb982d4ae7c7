#pragma once

#include <cstdint>
#include <vector>

#include "ctmc/calculus.hpp"
#include "ctmc/phi.hpp"

namespace ctmc {

struct DissipationReport {
    std::vector<double> grid;
    std::vector<double> entropy;
    std::vector<double> rate;
    double integral = 0.0;
    double balance_residual = 0.0;
    // true when p0 had zero entries and the grid starts after one step
    bool shifted_start = false;
};

struct FisherForms {
    double dirichlet = 0.0;
    double symmetrized = 0.0;
    double weighted = 0.0;
};

struct Compensators {
    NodeFunction under_q;
    NodeFunction under_p;
};

struct MlsiEstimate {
    double value = 0.0;
    NodeFunction minimizer;
    int distinct_minima = 0;
    int restarts = 0;
    double best_interior = 0.0;
    // value of the ratio in the f -> 1 limit (the Poincare constant)
    double linearization_limit = 0.0;
    bool interior_attained = false;
};

double bregman(double eta, double xi, const PhiFunction& phi);

double phi_entropy(const ProbabilityVector& p, const ProbabilityVector& q, const PhiFunction& phi);

double fisher_information(const LikelihoodVector& l, const PhiFunction& phi, const Generator& g,
                          const ProbabilityVector& q);
// weighted and symmetrized forms are NaN unless detailed balance holds
FisherForms fisher_information_forms(const LikelihoodVector& l, const PhiFunction& phi, const Generator& g,
                                     const ProbabilityVector& q);

Compensators lambda_compensators(const LikelihoodVector& l, const PhiFunction& phi, const Generator& g,
                                 const ProbabilityVector& q);
// Same, with a precomputed adjoint generator.
Compensators lambda_compensators(const Vector& l, const PhiFunction& phi, const Generator& adjoint);

double composite_simpson(const std::vector<double>& values, double h);

DissipationReport de_bruijn_report(const Generator& g, const ProbabilityVector& p0, const ProbabilityVector& q,
                                   const PhiFunction& phi, double T, int steps);

double poincare_constant(const Generator& g, const ProbabilityVector& q);

MlsiEstimate mlsi_constant(const Generator& g, const ProbabilityVector& q, int restarts = 8,
                           std::uint64_t seed = 1, int threads = 0);

} // namespace ctmc
