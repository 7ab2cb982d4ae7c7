#include "ctmc/chain_io.hpp"

#include <cmath>
#include <fstream>

namespace ctmc {

namespace {

Matrix from_triples(const nlohmann::json& triples, int n) {
    Matrix k = Matrix::Zero(n, n);
    std::vector<std::optional<double>> diagonal(n);
    for (const auto& t : triples) {
        if (!t.is_array() || t.size() != 3) throw Error(ErrorKind::InvalidInput, "triple must be [i, j, rate]");
        const long i = t[0].get<long>(), j = t[1].get<long>();
        if (i < 0 || j < 0 || i >= n || j >= n) throw Error(ErrorKind::InvalidInput, "triple index out of range");
        const double r = t[2].get<double>();
        if (i == j) diagonal[i] = r;
        else k(i, j) += r;
    }
    for (int x = 0; x < n; ++x) {
        const double off = k.row(x).sum();
        if (diagonal[x] && std::abs(*diagonal[x] + off) > config::structural_tol)
            throw Error(ErrorKind::RowSumNonzero, "explicit diagonal of row " + std::to_string(x) +
                                                      " disagrees with the off-diagonal rates");
        k(x, x) = -off;
    }
    return k;
}

} // namespace

ChainDefinition parse_chain(const nlohmann::json& doc) {
    try {
        std::vector<std::string> names;
        if (doc.contains("states")) names = doc.at("states").get<std::vector<std::string>>();
        const auto& rates = doc.at("rates");
        Matrix k;
        if (rates.is_object()) {
            if (names.empty()) throw Error(ErrorKind::InvalidInput, "triples require a states list");
            k = from_triples(rates.at("triples"), static_cast<int>(names.size()));
        } else {
            const auto rows = rates.get<std::vector<std::vector<double>>>();
            const int n = static_cast<int>(rows.size());
            k.resize(n, n);
            for (int x = 0; x < n; ++x) {
                if (static_cast<int>(rows[x].size()) != n) throw Error(ErrorKind::InvalidInput, "rate matrix is not square");
                for (int y = 0; y < n; ++y) k(x, y) = rows[x][y];
            }
        }
        ChainDefinition chain{validate_generator(k, names), std::nullopt};
        if (doc.contains("initial")) {
            const auto v = doc.at("initial").get<std::vector<double>>();
            if (static_cast<int>(v.size()) != chain.generator.size())
                throw Error(ErrorKind::InvalidInput, "initial vector has the wrong length");
            chain.initial = ProbabilityVector(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
        }
        return chain;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::InvalidInput, std::string("malformed chain file: ") + e.what());
    }
}

ChainDefinition load_chain(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::InvalidInput, "cannot open " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::InvalidInput, std::string("invalid JSON in ") + path + ": " + e.what());
    }
    return parse_chain(doc);
}

} // namespace ctmc
