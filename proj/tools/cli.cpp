#include "cli.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <random>
#include <sstream>

#include "ctmc/chain_io.hpp"
#include "ctmc/parallel.hpp"
#include "ctmc/trajectory.hpp"
#include "ctmc/transport.hpp"

namespace ctmc::cli {

namespace {

using nlohmann::ordered_json;

struct Options {
    std::string command;
    std::string chain;
    std::string phi = "xlogx";
    std::string format = "csv";
    std::string output;
    std::string test = "reversed-likelihood";
    std::string measure = "Q";
    std::string p0;
    std::string p1;
    std::optional<double> T;
    std::optional<int> steps;
    std::optional<double> tol;
    std::optional<double> kappa;
    std::optional<std::uint64_t> seed;
    std::size_t paths = 100000;
    int threads = 0;
    int slices = 32;
    int samples = 0;
    int restarts = 8;
    int checkpoints = 5;
    int batches = 50;
    bool no_header = false;
};

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<ordered_json>> rows;
};

struct Result {
    ordered_json config = ordered_json::object();
    ordered_json summary = ordered_json::object();
    Table table;
    std::optional<bool> pass;
};

// Usage-level failure, reported with exit code 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}

std::string cell(const ordered_json& v) {
    if (v.is_number_float()) return number(v.get<double>());
    if (v.is_string()) return v.get<std::string>();
    if (v.is_null()) return "nan";
    return v.dump();
}

std::string timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm utc{};
    gmtime_r(&now, &utc);
    std::ostringstream s;
    s << std::put_time(&utc, "%Y-%m-%dT%H:%M:%SZ");
    return s.str();
}

ordered_json json_value(double v) {
    if (!std::isfinite(v)) return number(v);
    return v;
}

void emit(const Options& o, const Result& r, std::ostream& out) {
    if (o.format == "json") {
        ordered_json doc;
        doc["command"] = o.command;
        if (!o.no_header) doc["generated"] = timestamp();
        doc["config"] = r.config;
        doc["summary"] = r.summary;
        if (r.pass) doc["verdict"] = *r.pass ? "PASS" : "FAIL";
        ordered_json rows = ordered_json::array();
        for (const auto& row : r.table.rows) {
            ordered_json obj;
            for (std::size_t c = 0; c < row.size(); ++c) obj[r.table.columns[c]] = row[c];
            rows.push_back(obj);
        }
        doc["rows"] = rows;
        out << doc.dump(2) << '\n';
        return;
    }
    if (!o.no_header) out << "# ctmc " << o.command << " generated " << timestamp() << '\n';
    for (const auto& [k, v] : r.config.items()) out << "# " << k << '=' << cell(v) << '\n';
    if (!r.table.columns.empty()) {
        for (std::size_t c = 0; c < r.table.columns.size(); ++c) out << (c ? "," : "") << r.table.columns[c];
        out << '\n';
        for (const auto& row : r.table.rows) {
            for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << cell(row[c]);
            out << '\n';
        }
    }
    for (const auto& [k, v] : r.summary.items()) out << "# " << k << '=' << cell(v) << '\n';
    if (r.pass) out << "# verdict=" << (*r.pass ? "PASS" : "FAIL") << '\n';
}

Vector parse_vector(const std::string& text) {
    std::string s = text;
    for (char& c : s)
        if (c == '[' || c == ']' || c == ',' || c == ';') c = ' ';
    std::istringstream in(s);
    std::vector<double> v;
    std::string tok;
    while (in >> tok) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw UsageError("cannot parse number '" + tok + "' in '" + text + "'");
        }
    }
    return Eigen::Map<Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

ProbabilityVector distribution(const std::string& text, const Generator& g, const char* flag) {
    const Vector v = parse_vector(text);
    if (v.size() != g.size())
        throw UsageError(std::string(flag) + " has " + std::to_string(v.size()) + " entries, the chain has " +
                         std::to_string(g.size()) + " states");
    return ProbabilityVector(v);
}

ProbabilityVector initial_law(const Options& o, const ChainDefinition& chain) {
    if (!o.p0.empty()) return distribution(o.p0, chain.generator, "--p0");
    if (chain.initial) return *chain.initial;
    throw UsageError(o.command + " needs an initial law: pass --p0 or add \"initial\" to the chain file");
}

std::uint64_t resolve_seed(Options& o) {
    if (!o.seed) {
        std::random_device rd;
        o.seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    }
    return *o.seed;
}

void require_balance(const Options& o, const Generator& g, const ProbabilityVector& q) {
    const auto db = is_detailed_balance(g, q);
    if (db.holds) return;
    std::ostringstream s;
    s << o.command << " needs a chain in detailed balance: the Theta-weighted geometry is only defined for "
      << "reversible chains; q(x)k(x,y) - q(y)k(y,x) = " << number(db.violation) << " at (" << g.names()[db.x]
      << ", " << g.names()[db.y] << ")";
    throw UsageError(s.str());
}

std::vector<double> checkpoints(double T, int count) {
    if (count < 2) throw UsageError("--checkpoints must be at least 2");
    std::vector<double> cps;
    for (int k = 0; k < count; ++k) cps.push_back(T * k / (count - 1));
    cps.back() = T;
    return cps;
}

void add_report(Result& r, const MartingaleTestReport& m) {
    r.summary["functional"] = m.functional;
    r.summary["paths_used"] = m.paths_used;
    r.summary["seed"] = m.seed;
    r.summary["threshold"] = m.threshold;
    r.table.columns = {"checkpoint", "estimate", "stderr", "target", "z"};
    for (std::size_t c = 0; c < m.checkpoints.size(); ++c)
        r.table.rows.push_back({m.checkpoints[c], json_value(m.estimate[c]), json_value(m.std_error[c]),
                                json_value(m.target[c]), json_value(m.z_scores[c])});
    r.pass = m.pass;
}

Result cmd_validate(Options& o, const ChainDefinition& chain) {
    const auto& g = chain.generator;
    const auto q = stationary_distribution(g);
    const auto db = is_detailed_balance(g, q);
    Result r;
    r.table.columns = {"state", "stationary"};
    for (int x = 0; x < g.size(); ++x) r.table.rows.push_back({g.names()[x], q(x)});
    r.summary["states"] = g.size();
    r.summary["edges"] = g.edges().size();
    r.summary["detailed_balance"] = db.holds;
    r.summary["balance_violation"] = db.violation;
    if (!db.holds) r.summary["violation_pair"] = g.names()[db.x] + ":" + g.names()[db.y];
    (void)o;
    return r;
}

Result cmd_stationary(Options&, const ChainDefinition& chain) {
    const auto q = stationary_distribution(chain.generator);
    Result r;
    r.table.columns = {"state", "probability"};
    for (int x = 0; x < q.size(); ++x) r.table.rows.push_back({chain.generator.names()[x], q(x)});
    return r;
}

Result cmd_evolve(Options& o, const ChainDefinition& chain) {
    const auto& g = chain.generator;
    const double T = o.T.value_or(5.0);
    const int steps = o.steps.value_or(100);
    const auto p0 = initial_law(o, chain);
    const auto curve = evolve_marginals(g, p0, uniform_grid(0.0, T, steps));
    Result r;
    r.config["T"] = T;
    r.config["steps"] = steps;
    r.table.columns = {"t"};
    for (const auto& name : g.names()) r.table.columns.push_back("p[" + name + "]");
    for (std::size_t i = 0; i < curve.grid.size(); ++i) {
        std::vector<ordered_json> row = {curve.grid[i]};
        for (int x = 0; x < g.size(); ++x) row.push_back(curve.values[i](x));
        r.table.rows.push_back(row);
    }
    return r;
}

Result cmd_dissipation(Options& o, const ChainDefinition& chain) {
    const auto& g = chain.generator;
    const auto q = stationary_distribution(g);
    const double T = o.T.value_or(5.0);
    const int steps = o.steps.value_or(2000);
    const double tol = o.tol.value_or(1e-8);
    const auto phi = parse_phi(o.phi);
    const auto rep = de_bruijn_report(g, initial_law(o, chain), q, phi, T, steps);
    Result r;
    r.config["phi"] = phi.name;
    r.config["T"] = T;
    r.config["steps"] = steps;
    r.config["tol"] = tol;
    r.table.columns = {"t", "entropy", "rate"};
    for (std::size_t i = 0; i < rep.grid.size(); ++i) r.table.rows.push_back({rep.grid[i], rep.entropy[i], rep.rate[i]});
    r.summary["integral"] = rep.integral;
    r.summary["residual"] = rep.balance_residual;
    r.summary["shifted_start"] = rep.shifted_start;
    r.pass = rep.balance_residual <= tol;
    return r;
}

Result cmd_constants(Options& o, const ChainDefinition& chain) {
    const auto& g = chain.generator;
    const auto q = stationary_distribution(g);
    const auto seed = resolve_seed(o);
    const auto est = mlsi_constant(g, q, o.restarts, seed, o.threads);
    Result r;
    r.config["seed"] = seed;
    r.config["restarts"] = o.restarts;
    r.summary["poincare"] = poincare_constant(g, q);
    r.summary["mlsi_estimate"] = est.value;
    r.summary["mlsi_best_interior"] = est.best_interior;
    r.summary["linearization_limit"] = est.linearization_limit;
    r.summary["interior_attained"] = est.interior_attained;
    r.summary["distinct_minima"] = est.distinct_minima;
    r.table.columns = {"state", "mlsi_minimizer"};
    for (int x = 0; x < g.size(); ++x) r.table.rows.push_back({g.names()[x], est.minimizer(x)});
    return r;
}

Result cmd_simulate(Options& o, const ChainDefinition& chain) {
    const auto& g = chain.generator;
    const auto q = stationary_distribution(g);
    const auto seed = resolve_seed(o);
    Result r;
    r.config["test"] = o.test;
    r.config["seed"] = seed;
    if (o.test == "ergodic") {
        const double T = o.T.value_or(1e4);
        r.config["T"] = T;
        r.config["batches"] = o.batches;
        r.table.columns = {"state", "estimate", "stderr", "target", "z"};
        bool pass = true;
        for (int x = 0; x < g.size(); ++x) {
            const auto m = ergodic_test(g, q, Vector::Unit(g.size(), x), T, o.batches, seed);
            r.table.rows.push_back({g.names()[x], m.estimate[0], json_value(m.std_error[0]), m.target[0],
                                    json_value(m.z_scores[0])});
            pass = pass && m.pass;
        }
        r.summary["threshold"] = 4.0;
        r.pass = pass;
        return r;
    }
    const double T = o.T.value_or(2.0);
    const auto p0 = initial_law(o, chain);
    r.config["T"] = T;
    r.config["paths"] = o.paths;
    const auto cps = checkpoints(T, o.checkpoints);
    if (o.test == "reversed-likelihood") {
        add_report(r, martingale_test_reversed_likelihood(g, p0, q, T, cps, o.paths, seed, o.threads));
    } else if (o.test == "compensator") {
        if (o.measure != "P" && o.measure != "Q") throw UsageError("--measure must be P or Q");
        const auto phi = parse_phi(o.phi);
        r.config["phi"] = phi.name;
        r.config["measure"] = o.measure;
        add_report(r, compensator_test(g, p0, q, phi, o.measure[0], T, cps, o.paths, seed, o.threads));
    } else {
        throw UsageError("unknown --test '" + o.test + "'");
    }
    return r;
}

Result cmd_metric(Options& o, const ChainDefinition& chain) {
    const auto& g = chain.generator;
    const auto q = stationary_distribution(g);
    require_balance(o, g, q);
    const auto phi = parse_phi(o.phi);
    const auto p0 = initial_law(o, chain);
    const auto p1 = o.p1.empty() ? q : distribution(o.p1, g, "--p1");
    GeodesicOptions opts;
    if (o.tol) opts.tol = *o.tol;
    const auto geo = benamou_brenier(p0, p1, phi, g, q, o.slices, opts);
    Result r;
    r.config["phi"] = phi.name;
    r.config["slices"] = o.slices;
    r.config["tol"] = opts.tol;
    r.summary["distance"] = geo.distance;
    r.summary["action_residual"] = geo.action_residual;
    r.summary["boundary_flag"] = geo.boundary_flag;
    r.summary["speed_variation"] = geo.speed_variation;
    r.summary["reparametrized"] = geo.reparametrized;
    r.table.columns = {"slice_index", "t", "state", "probability", "potential"};
    const int N = static_cast<int>(geo.slices.size()) - 1;
    for (int k = 0; k <= N; ++k)
        for (int x = 0; x < g.size(); ++x) {
            const double psi = geo.potentials.empty() ? 0.0 : geo.potentials[std::min(k, N - 1)](x);
            r.table.rows.push_back({k, static_cast<double>(k) / N, g.names()[x], geo.slices[k](x), psi});
        }
    return r;
}

// Likelihoods to examine: the initial law if one is given, otherwise seeded
// random draws.
std::vector<LikelihoodVector> likelihood_samples(Options& o, const ChainDefinition& chain, const ProbabilityVector& q,
                                                 Result& r, int fallback) {
    std::vector<LikelihoodVector> out;
    if (!o.p0.empty() || chain.initial) {
        const auto p0 = initial_law(o, chain);
        if (p0.boundary()) throw UsageError(o.command + " needs an interior initial law");
        out.push_back(likelihood(p0, q));
        return out;
    }
    const auto seed = resolve_seed(o);
    const int count = o.samples > 0 ? o.samples : fallback;
    r.config["seed"] = seed;
    r.config["samples"] = count;
    for (int i = 0; i < count; ++i) out.push_back(likelihood(random_endpoint(q, seed, i), q));
    return out;
}

Result cmd_gradient_flow(Options& o, const ChainDefinition& chain) {
    const auto& g = chain.generator;
    const auto q = stationary_distribution(g);
    require_balance(o, g, q);
    const auto phi = parse_phi(o.phi);
    const double tol = o.tol.value_or(1e-10);
    Result r;
    r.config["phi"] = phi.name;
    r.config["tol"] = tol;
    const auto ls = likelihood_samples(o, chain, q, r, 100);
    r.table.columns = {"sample", "residual"};
    double worst = 0.0;
    for (std::size_t i = 0; i < ls.size(); ++i) {
        NodeFunction d(g.size());
        for (int x = 0; x < g.size(); ++x) d(x) = phi.derivative(ls[i](x));
        const double res = (gradient_flow_field(ls[i], d, phi, g, q) - g.rates() * ls[i].values()).cwiseAbs().maxCoeff();
        worst = std::max(worst, res);
        r.table.rows.push_back({i, res});
    }
    r.summary["max_residual"] = worst;
    r.pass = worst <= tol;
    return r;
}

Result cmd_descent(Options& o, const ChainDefinition& chain) {
    const auto& g = chain.generator;
    const auto q = stationary_distribution(g);
    require_balance(o, g, q);
    const auto phi = parse_phi(o.phi);
    const auto seed = resolve_seed(o);
    const int count = o.samples > 0 ? o.samples : 1000;
    const auto l0 = !o.p0.empty() || chain.initial ? likelihood(initial_law(o, chain), q)
                                                  : likelihood(random_endpoint(q, seed, 0), q);
    std::vector<NodeFunction> perturbations;
    NodeFunction steepest(g.size());
    for (int x = 0; x < g.size(); ++x) steepest(x) = -phi.derivative(l0(x));
    perturbations.push_back(steepest);
    for (int i = 0; i < count; ++i) {
        Stream rng(seed, static_cast<std::uint64_t>(i) + 1);
        NodeFunction psi(g.size());
        for (int x = 0; x < g.size(); ++x) psi(x) = 2.0 * rng.uniform() - 1.0;
        perturbations.push_back(psi);
    }
    const auto rep = steepest_descent_experiment(l0, perturbations, phi, g, q);
    Result r;
    r.config["phi"] = phi.name;
    r.config["seed"] = seed;
    r.config["samples"] = count;
    r.summary["optimal_slope"] = rep.optimal_slope;
    r.summary["min_margin"] = rep.min_margin;
    r.summary["chain_minimizes"] = rep.chain_minimizes;
    r.table.columns = {"perturbation", "slope", "margin", "gradient_equivalent"};
    for (std::size_t i = 0; i < rep.slopes.size(); ++i)
        r.table.rows.push_back({i, rep.slopes[i], rep.margins[i], static_cast<bool>(rep.gradient_equivalent[i])});
    r.pass = rep.chain_minimizes;
    return r;
}

Result cmd_ricci(Options& o, const ChainDefinition& chain) {
    const auto& g = chain.generator;
    const auto q = stationary_distribution(g);
    require_balance(o, g, q);
    const auto phi = parse_phi(o.phi);
    const auto seed = resolve_seed(o);
    const int count = o.samples > 0 ? o.samples : 30;
    const auto est = ricci_lower_bound_estimate(g, q, phi, count, o.slices, seed, o.threads);
    Result r;
    r.config["phi"] = phi.name;
    r.config["seed"] = seed;
    r.config["samples"] = count;
    r.config["slices"] = o.slices;
    r.summary["kappa_estimate"] = json_value(est.kappa);
    r.summary["samples_used"] = est.samples_used;
    r.summary["skipped"] = est.skipped;
    r.summary["note"] = "upper bound on the true Ricci lower bound; not a certificate";
    return r;
}

Result cmd_hwi(Options& o, const ChainDefinition& chain) {
    const auto& g = chain.generator;
    const auto q = stationary_distribution(g);
    require_balance(o, g, q);
    const auto phi = parse_phi(o.phi);
    const auto p0 = initial_law(o, chain);
    const auto p1 = o.p1.empty() ? q : distribution(o.p1, g, "--p1");
    Result r;
    r.config["phi"] = phi.name;
    r.config["slices"] = o.slices;
    double kappa = 0.0;
    std::string source = "input";
    if (o.kappa) {
        kappa = *o.kappa;
    } else {
        const auto seed = resolve_seed(o);
        const int count = o.samples > 0 ? o.samples : 30;
        r.config["seed"] = seed;
        r.config["samples"] = count;
        kappa = ricci_lower_bound_estimate(g, q, phi, count, o.slices, seed, o.threads).kappa;
        source = "estimate";
    }
    GeodesicOptions opts;
    if (o.tol) opts.tol = *o.tol;
    r.config["tol"] = opts.tol;
    const auto rep = hwi_check(p0, p1, kappa, phi, g, q, o.slices, source, opts);
    r.summary["distance"] = rep.distance;
    r.summary["fisher"] = rep.fisher;
    r.summary["entropy0"] = rep.entropy0;
    r.summary["entropy1"] = rep.entropy1;
    r.summary["kappa"] = json_value(rep.kappa);
    r.summary["kappa_source"] = rep.kappa_source;
    r.summary["lhs"] = rep.lhs;
    r.summary["rhs"] = json_value(rep.rhs);
    r.summary["tolerance"] = rep.tolerance;
    r.summary["bracket"] = rep.bracket;
    r.summary["sharp_rhs"] = json_value(rep.sharp_rhs);
    r.summary["holds"] = rep.holds;
    r.summary["bracket_bounded"] = rep.bracket_bounded;
    r.pass = rep.holds && rep.bracket_bounded;
    return r;
}

bool input_error(ErrorKind k) {
    switch (k) {
    case ErrorKind::InvalidInput:
    case ErrorKind::NegativeOffDiagonal:
    case ErrorKind::RowSumNonzero:
    case ErrorKind::Reducible:
    case ErrorKind::NegativeTime:
    case ErrorKind::NonpositiveArgument:
    case ErrorKind::BoundaryLikelihood:
    case ErrorKind::BoundaryUnsupported:
    case ErrorKind::NonzeroMean:
    case ErrorKind::NotDetailedBalance:
    case ErrorKind::HorizonMismatch:
    case ErrorKind::BadTangent:
    case ErrorKind::Infeasible:
        return true;
    default:
        return false;
    }
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Dissipation, entropy and transport diagnostics for finite Markov chains", "ctmc"};
    app.require_subcommand(1);

    auto add = [&](const std::string& name, const std::string& help) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("chain", o.chain, "chain file (JSON)")->required();
        sub->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
        sub->add_option("--output", o.output, "write results to this file instead of stdout");
        sub->add_flag("--no-header", o.no_header, "omit the timestamp header");
        return sub;
    };
    auto with_phi = [&](CLI::App* sub) { sub->add_option("--phi", o.phi, "xlogx | quadratic | renyi:<m>"); };
    auto with_seed = [&](CLI::App* sub) {
        sub->add_option("--seed", o.seed, "random seed; drawn and printed when omitted");
        sub->add_option("--threads", o.threads, "worker cap (default: CTMC_THREADS or all cores)");
    };
    auto with_p0 = [&](CLI::App* sub) { sub->add_option("--p0", o.p0, "initial law, e.g. 0.7,0.2,0.1"); };

    add("validate", "check a chain and report its stationary law and detailed balance");
    add("stationary", "stationary distribution");
    auto* evolve = add("evolve", "marginal laws on a uniform grid");
    with_p0(evolve);
    evolve->add_option("--T", o.T, "horizon");
    evolve->add_option("--steps", o.steps, "grid intervals");

    auto* dissipation = add("dissipation", "entropy, dissipation rate and the de Bruijn balance");
    dissipation->alias("debruijn");
    with_phi(dissipation);
    with_p0(dissipation);
    dissipation->add_option("--T", o.T, "horizon");
    dissipation->add_option("--steps", o.steps, "even number of Simpson intervals");
    dissipation->add_option("--tol", o.tol, "largest accepted balance residual");

    auto* constants = add("constants", "Poincare constant and modified log-Sobolev estimate");
    with_seed(constants);
    constants->add_option("--restarts", o.restarts, "optimizer restarts");

    auto* simulate = add("simulate", "Monte Carlo martingale tests along reversed paths");
    with_phi(simulate);
    with_p0(simulate);
    with_seed(simulate);
    simulate->add_option("--test", o.test, "reversed-likelihood | compensator | ergodic")
        ->check(CLI::IsMember({"reversed-likelihood", "compensator", "ergodic"}));
    simulate->add_option("--measure", o.measure, "P or Q (compensator test)");
    simulate->add_option("--T", o.T, "horizon");
    simulate->add_option("--paths", o.paths, "number of paths");
    simulate->add_option("--checkpoints", o.checkpoints, "equally spaced checkpoints on [0, T]");
    simulate->add_option("--batches", o.batches, "batches for the ergodic test");

    auto* metric = add("metric", "transport distance and geodesic");
    with_phi(metric);
    with_p0(metric);
    metric->add_option("--p1", o.p1, "target law (default: stationary)");
    metric->add_option("--slices", o.slices, "time slices");
    metric->add_option("--tol", o.tol, "optimizer KKT tolerance");

    auto* flow = add("gradient-flow", "check that the chain is the entropy gradient flow");
    with_phi(flow);
    with_p0(flow);
    with_seed(flow);
    flow->add_option("--samples", o.samples, "random likelihoods when no initial law is given");
    flow->add_option("--tol", o.tol, "largest accepted residual");

    auto* descent = add("descent", "steepest-descent comparison against random perturbations");
    with_phi(descent);
    with_p0(descent);
    with_seed(descent);
    descent->add_option("--samples", o.samples, "random perturbations");

    auto* hwi = add("hwi", "HWI inequality between two laws");
    with_phi(hwi);
    with_p0(hwi);
    with_seed(hwi);
    hwi->add_option("--p1", o.p1, "second law (default: stationary)");
    hwi->add_option("--kappa", o.kappa, "curvature bound (default: estimated)");
    hwi->add_option("--samples", o.samples, "geodesics for the curvature estimate");
    hwi->add_option("--slices", o.slices, "time slices");
    hwi->add_option("--tol", o.tol, "optimizer KKT tolerance");

    auto* ricci = add("ricci", "sampled Ricci lower-bound estimate");
    with_phi(ricci);
    with_seed(ricci);
    ricci->add_option("--samples", o.samples, "endpoint pairs");
    ricci->add_option("--slices", o.slices, "time slices");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    const auto* chosen = app.get_subcommands().front();
    o.command = chosen->get_name();

    try {
        const ChainDefinition chain = load_chain(o.chain);
        Result r;
        if (o.command == "validate") r = cmd_validate(o, chain);
        else if (o.command == "stationary") r = cmd_stationary(o, chain);
        else if (o.command == "evolve") r = cmd_evolve(o, chain);
        else if (o.command == "dissipation") r = cmd_dissipation(o, chain);
        else if (o.command == "constants") r = cmd_constants(o, chain);
        else if (o.command == "simulate") r = cmd_simulate(o, chain);
        else if (o.command == "metric") r = cmd_metric(o, chain);
        else if (o.command == "gradient-flow") r = cmd_gradient_flow(o, chain);
        else if (o.command == "descent") r = cmd_descent(o, chain);
        else if (o.command == "hwi") r = cmd_hwi(o, chain);
        else r = cmd_ricci(o, chain);
        r.config["chain"] = o.chain;
        r.config["threads"] = o.threads > 0 ? o.threads : default_threads();
        if (o.seed) err << "seed: " << *o.seed << '\n';

        if (o.output.empty()) {
            emit(o, r, out);
        } else {
            std::ofstream file(o.output);
            if (!file) throw UsageError("cannot write " + o.output);
            emit(o, r, file);
        }
        return r.pass.value_or(true) ? 0 : 1;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return input_error(e.kind()) ? 2 : 1;
    }
}

} // namespace ctmc::cli
