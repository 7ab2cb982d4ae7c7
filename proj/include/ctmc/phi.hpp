#pragma once

#include <functional>
#include <string>

namespace ctmc {

// Convex entropy generator with Phi(1) = 0, given by its value and first
// three derivatives on (0, inf).
struct PhiFunction {
    std::string name;
    std::function<double(double)> value;
    std::function<double(double)> derivative;
    std::function<double(double)> second;
    std::function<double(double)> third;
    // limit of Phi at 0+, NaN when infinite
    double value_at_zero = 0.0;

    bool finite_at_zero() const { return value_at_zero == value_at_zero; }
};

PhiFunction phi_xlogx();
PhiFunction phi_quadratic();
PhiFunction phi_renyi(double m);

// "xlogx" | "quadratic" | "renyi:<m>", m > 1; "renyi:1" aliases xlogx.
PhiFunction parse_phi(const std::string& preset);

// r log r - r + 1, accurate near r = 1
double psi(double r);

} // namespace ctmc
