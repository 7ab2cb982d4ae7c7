#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctmc/entropy.hpp"

namespace ctmc {

struct Path {
    double horizon = 0.0;
    std::vector<double> jump_times;
    std::vector<int> states;
    char law = 'P';

    int state_at(double t) const;
};

struct MartingaleTestReport {
    std::string functional;
    std::vector<double> checkpoints;
    std::vector<double> estimate;
    std::vector<double> std_error;
    std::vector<double> target;
    std::vector<double> z_scores;
    std::size_t paths_used = 0;
    std::uint64_t seed = 0;
    double threshold = 4.0;
    bool pass = false;
};

// Per-state comparison of a conditional expectation with its exact value.
struct SliceReport {
    std::vector<double> estimate;
    std::vector<double> std_error;
    std::vector<double> target;
    std::vector<double> z_scores;
    std::vector<std::size_t> counts;
    bool pass = false;
};

struct RateReport {
    Matrix empirical;
    Matrix expected;
    Matrix z_scores;
    std::vector<std::size_t> starts;
    bool pass = false;
};

// Path `id` of the stream family `seed`.
Path sample_path(const Generator& g, const ProbabilityVector& initial, double T, std::uint64_t seed,
                 std::uint64_t id = 0);

Path reverse_path(const Path& path, double T);

double ergodic_average(const Path& path, const NodeFunction& f);

// l(t, .) on [0, T] from exact evolution on a grid of step T/4096 and cubic
// Hermite interpolation with derivatives from the backward equation.
class LikelihoodTable {
public:
    LikelihoodTable(const Generator& g, const ProbabilityVector& p0, const ProbabilityVector& q, double T,
                    int intervals = 4096);
    Vector at(double t) const;
    double at(double t, int x) const;
    double horizon() const { return T_; }

private:
    double T_;
    double h_;
    std::vector<Vector> values_;
    std::vector<Vector> slopes_;
};

MartingaleTestReport martingale_test_reversed_likelihood(const Generator& g, const ProbabilityVector& p0,
                                                         const ProbabilityVector& q, double T,
                                                         const std::vector<double>& checkpoints,
                                                         std::size_t n_paths, std::uint64_t seed,
                                                         int threads = 0);

// measure 'Q': Phi(l) with Lambda^Q, Q-start; measure 'P': Phi(l)/l with
// Lambda^P, P-start.
MartingaleTestReport compensator_test(const Generator& g, const ProbabilityVector& p0, const ProbabilityVector& q,
                                      const PhiFunction& phi, char measure, double T,
                                      const std::vector<double>& checkpoints, std::size_t n_paths,
                                      std::uint64_t seed, int threads = 0);

// E[l(T-s2, Xr(s2)) | Xr(s1) = y] against l(T-s1, y) under a Q-start.
SliceReport conditional_martingale_slice(const Generator& g, const ProbabilityVector& p0,
                                         const ProbabilityVector& q, double T, double s1, double s2,
                                         std::size_t n_paths, std::uint64_t seed, int threads = 0);

// Empirical jump rates over a short window h from `initial`; with reversed
// set the paths are reflected and compared with the adjoint rates.
RateReport empirical_rates(const Generator& g, const ProbabilityVector& initial, double h, std::size_t n_paths,
                           std::uint64_t seed, bool reversed, int threads = 0);

// Ergodic averages of f over batches of one long path, compared with <f>_Q.
MartingaleTestReport ergodic_test(const Generator& g, const ProbabilityVector& q, const NodeFunction& f,
                                  double T, int batches, std::uint64_t seed);

} // namespace ctmc
