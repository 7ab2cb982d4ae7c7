#pragma once

#include <nlohmann/json.hpp>

#include <optional>
#include <string>

#include "ctmc/generator.hpp"

namespace ctmc {

struct ChainDefinition {
    Generator generator;
    std::optional<ProbabilityVector> initial;
};

// { "states": [...], "rates": [[...]] | {"triples": [[i, j, rate], ...]}, "initial": [...] }
ChainDefinition parse_chain(const nlohmann::json& doc);
ChainDefinition load_chain(const std::string& path);

} // namespace ctmc
