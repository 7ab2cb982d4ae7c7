#include "ctmc/phi.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>

#include "ctmc/error.hpp"

namespace ctmc {

PhiFunction phi_xlogx() {
    PhiFunction f;
    f.name = "xlogx";
    f.value = [](double x) { return x > 0.0 ? x * std::log(x) : 0.0; };
    f.derivative = [](double x) { return std::log(x) + 1.0; };
    f.second = [](double x) { return 1.0 / x; };
    f.third = [](double x) { return -1.0 / (x * x); };
    f.value_at_zero = 0.0;
    return f;
}

PhiFunction phi_quadratic() {
    PhiFunction f;
    f.name = "quadratic";
    f.value = [](double x) { return x * x - 1.0; };
    f.derivative = [](double x) { return 2.0 * x; };
    f.second = [](double) { return 2.0; };
    f.third = [](double) { return 0.0; };
    f.value_at_zero = -1.0;
    return f;
}

PhiFunction phi_renyi(double m) {
    if (!(m > 1.0) || !std::isfinite(m))
        throw Error(ErrorKind::InvalidInput, "renyi order must exceed 1");
    PhiFunction f;
    f.name = "renyi:" + std::to_string(m);
    f.value = [m](double x) { return (std::pow(x, m) - 1.0) / (m - 1.0); };
    f.derivative = [m](double x) { return m * std::pow(x, m - 1.0) / (m - 1.0); };
    f.second = [m](double x) { return m * std::pow(x, m - 2.0); };
    f.third = [m](double x) { return m * (m - 2.0) * std::pow(x, m - 3.0); };
    f.value_at_zero = -1.0 / (m - 1.0);
    return f;
}

PhiFunction parse_phi(const std::string& preset) {
    if (preset == "xlogx") return phi_xlogx();
    if (preset == "quadratic") return phi_quadratic();
    const std::string prefix = "renyi:";
    if (preset.rfind(prefix, 0) == 0) {
        const std::string num = preset.substr(prefix.size());
        char* end = nullptr;
        double m = std::strtod(num.c_str(), &end);
        if (num.empty() || end != num.c_str() + num.size())
            throw Error(ErrorKind::InvalidInput, "bad renyi order '" + num + "'");
        if (m == 1.0) {
            auto f = phi_xlogx();
            f.name = "renyi:1";
            return f;
        }
        auto f = phi_renyi(m);
        f.name = preset;
        return f;
    }
    throw Error(ErrorKind::InvalidInput, "unknown phi preset '" + preset + "'");
}

double psi(double r) {
    const double d = r - 1.0;
    if (std::abs(d) < 1e-3) {
        // sum_{k>=2} (-1)^k d^k / (k(k-1))
        double term = d * d, acc = 0.0;
        for (int k = 2; k < 12; ++k) {
            acc += term / (k * (k - 1.0));
            term *= -d;
        }
        return acc;
    }
    if (r == 0.0) return 1.0;
    return r * std::log(r) - r + 1.0;
}

} // namespace ctmc
