#include "ctmc/trajectory.hpp"

#include <algorithm>
#include <cmath>

#include "ctmc/parallel.hpp"

namespace ctmc {

namespace {

constexpr int sojourn_panels = 16;

int draw_state(const Vector& weights, double u) {
    double acc = 0.0;
    const double total = weights.sum();
    for (int x = 0; x < weights.size(); ++x) {
        acc += weights(x);
        if (u * total < acc) return x;
    }
    for (int x = static_cast<int>(weights.size()) - 1; x >= 0; --x)
        if (weights(x) > 0.0) return x;
    return 0;
}

struct Moments {
    double mean = 0.0;
    double se = 0.0;
};

// Sequential in path order, so the result does not depend on scheduling.
Moments moments(const std::vector<double>& v, std::size_t stride, std::size_t col) {
    const std::size_t n = v.size() / stride;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += v[i * stride + col];
    Moments m;
    m.mean = sum / n;
    if (n < 2) return m;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = v[i * stride + col] - m.mean;
        ss += d * d;
    }
    m.se = std::sqrt(ss / (n - 1) / n);
    return m;
}

double z_score(double estimate, double target, double se) {
    const double diff = estimate - target;
    if (std::abs(diff) <= 1e-12 * (1.0 + std::abs(target))) return 0.0;
    return se > 0.0 ? diff / se : std::copysign(INFINITY, diff);
}

void finish(MartingaleTestReport& r) {
    r.pass = true;
    for (double z : r.z_scores) r.pass = r.pass && std::abs(z) <= r.threshold;
}

void check_checkpoints(const std::vector<double>& cps, double T) {
    for (std::size_t i = 0; i < cps.size(); ++i) {
        if (cps[i] < 0.0 || cps[i] > T) throw Error(ErrorKind::InvalidInput, "checkpoint outside [0, T]");
        if (i && cps[i] <= cps[i - 1]) throw Error(ErrorKind::InvalidInput, "checkpoints must increase");
    }
}

} // namespace

int Path::state_at(double t) const {
    auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
    return states[static_cast<std::size_t>(it - jump_times.begin())];
}

Path sample_path(const Generator& g, const ProbabilityVector& initial, double T, std::uint64_t seed,
                 std::uint64_t id) {
    if (!(T > 0.0)) throw Error(ErrorKind::InvalidInput, "horizon must be positive");
    Stream rng(seed, id);
    Path path;
    path.horizon = T;
    int x = draw_state(initial.values(), rng.uniform());
    path.states.push_back(x);
    double t = 0.0;
    const int n = g.size();
    Vector out(n);
    for (;;) {
        t += rng.exponential(g.exit_rate(x));
        if (t >= T) break;
        for (int y = 0; y < n; ++y) out(y) = y == x ? 0.0 : g.rate(x, y);
        x = draw_state(out, rng.uniform());
        path.jump_times.push_back(t);
        path.states.push_back(x);
    }
    return path;
}

Path reverse_path(const Path& path, double T) {
    if (path.horizon != T) throw Error(ErrorKind::HorizonMismatch, "path horizon differs from T");
    Path out;
    out.horizon = T;
    out.law = path.law;
    out.states.assign(path.states.rbegin(), path.states.rend());
    out.jump_times.reserve(path.jump_times.size());
    for (auto it = path.jump_times.rbegin(); it != path.jump_times.rend(); ++it) out.jump_times.push_back(T - *it);
    return out;
}

double ergodic_average(const Path& path, const NodeFunction& f) {
    double acc = 0.0, start = 0.0;
    for (std::size_t i = 0; i < path.states.size(); ++i) {
        const double end = i < path.jump_times.size() ? path.jump_times[i] : path.horizon;
        acc += f(path.states[i]) * (end - start);
        start = end;
    }
    return acc / path.horizon;
}

LikelihoodTable::LikelihoodTable(const Generator& g, const ProbabilityVector& p0, const ProbabilityVector& q,
                                 double T, int intervals)
    : T_(T), h_(T / intervals) {
    const Generator adjoint = adjoint_generator(g, q);
    Vector p = p0.values();
    values_.reserve(intervals + 1);
    for (int i = 0; i <= intervals; ++i) {
        if (i) p = propagate(g, p, h_);
        Vector l = p.cwiseQuotient(q.values());
        slopes_.push_back(adjoint.rates() * l);
        values_.push_back(std::move(l));
    }
}

Vector LikelihoodTable::at(double t) const {
    const int last = static_cast<int>(values_.size()) - 1;
    const double pos = std::clamp(t / h_, 0.0, static_cast<double>(last));
    const int i = std::min(static_cast<int>(pos), last - 1);
    const double s = pos - i;
    const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
    const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
    return h00 * values_[i] + h10 * h_ * slopes_[i] + h01 * values_[i + 1] + h11 * h_ * slopes_[i + 1];
}

double LikelihoodTable::at(double t, int x) const {
    const int last = static_cast<int>(values_.size()) - 1;
    const double pos = std::clamp(t / h_, 0.0, static_cast<double>(last));
    const int i = std::min(static_cast<int>(pos), last - 1);
    const double s = pos - i;
    const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
    const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
    return h00 * values_[i](x) + h10 * h_ * slopes_[i](x) + h01 * values_[i + 1](x) + h11 * h_ * slopes_[i + 1](x);
}

MartingaleTestReport martingale_test_reversed_likelihood(const Generator& g, const ProbabilityVector& p0,
                                                         const ProbabilityVector& q, double T,
                                                         const std::vector<double>& checkpoints,
                                                         std::size_t n_paths, std::uint64_t seed, int threads) {
    check_checkpoints(checkpoints, T);
    const LikelihoodTable table(g, p0, q, T);
    const std::size_t nc = checkpoints.size();
    std::vector<double> vals(n_paths * nc);
    parallel_for(n_paths, threads, [&](std::size_t i) {
        Path rev = reverse_path(sample_path(g, q, T, seed, i), T);
        rev.law = 'Q';
        for (std::size_t c = 0; c < nc; ++c) {
            const double s = checkpoints[c];
            vals[i * nc + c] = table.at(T - s, rev.state_at(s));
        }
    });
    MartingaleTestReport r;
    r.functional = "reversed-likelihood";
    r.checkpoints = checkpoints;
    r.paths_used = n_paths;
    r.seed = seed;
    for (std::size_t c = 0; c < nc; ++c) {
        const auto m = moments(vals, nc, c);
        r.estimate.push_back(m.mean);
        r.std_error.push_back(m.se);
        r.target.push_back(1.0);
        r.z_scores.push_back(z_score(m.mean, 1.0, m.se));
    }
    finish(r);
    return r;
}

MartingaleTestReport compensator_test(const Generator& g, const ProbabilityVector& p0, const ProbabilityVector& q,
                                      const PhiFunction& phi, char measure, double T,
                                      const std::vector<double>& checkpoints, std::size_t n_paths,
                                      std::uint64_t seed, int threads) {
    if (measure != 'P' && measure != 'Q') throw Error(ErrorKind::InvalidInput, "measure must be P or Q");
    if (p0.boundary()) throw Error(ErrorKind::BoundaryLikelihood, "compensator test needs an interior p0");
    check_checkpoints(checkpoints, T);
    const LikelihoodTable table(g, p0, q, T);
    const Generator adjoint = adjoint_generator(g, q);
    const bool under_p = measure == 'P';
    const ProbabilityVector& start = under_p ? p0 : q;

    auto functional = [&](double t, int x) {
        const double l = table.at(t, x);
        return under_p ? phi.value(l) / l : phi.value(l);
    };
    auto rate = [&](double t, int x) {
        const Vector l = table.at(t);
        double acc = 0.0;
        for (int y = 0; y < adjoint.size(); ++y)
            if (y != x && adjoint.rate(x, y) > 0.0) acc += adjoint.rate(x, y) * bregman(l(y), l(x), phi);
        return under_p ? acc / l(x) : acc;
    };
    // integral of rate(T - u, x) over u in [a, b]
    auto sojourn = [&](double a, double b, int x) {
        if (b <= a) return 0.0;
        const double h = (b - a) / sojourn_panels;
        double acc = rate(T - a, x) + rate(T - b, x);
        for (int k = 1; k < sojourn_panels; ++k) acc += (k % 2 ? 4.0 : 2.0) * rate(T - a - k * h, x);
        return acc * h / 3.0;
    };

    const std::size_t nc = checkpoints.size();
    std::vector<double> vals(n_paths * nc);
    parallel_for(n_paths, threads, [&](std::size_t i) {
        Path rev = reverse_path(sample_path(g, start, T, seed, i), T);
        rev.law = measure;
        double integral = 0.0, done = 0.0;
        std::size_t piece = 0;
        for (std::size_t c = 0; c < nc; ++c) {
            const double s = checkpoints[c];
            while (done < s) {
                const double end = piece < rev.jump_times.size() ? std::min(rev.jump_times[piece], s) : s;
                integral += sojourn(done, end, rev.states[piece]);
                done = end;
                if (piece < rev.jump_times.size() && done >= rev.jump_times[piece]) ++piece;
            }
            vals[i * nc + c] = functional(T - s, rev.state_at(s)) - integral;
        }
    });

    const double target = phi_entropy(ProbabilityVector(propagate(g, p0.values(), T)), q, phi);
    MartingaleTestReport r;
    r.functional = std::string("compensator:") + phi.name + ":" + measure;
    r.checkpoints = checkpoints;
    r.paths_used = n_paths;
    r.seed = seed;
    for (std::size_t c = 0; c < nc; ++c) {
        const auto m = moments(vals, nc, c);
        r.estimate.push_back(m.mean);
        r.std_error.push_back(m.se);
        r.target.push_back(target);
        r.z_scores.push_back(z_score(m.mean, target, m.se));
    }
    finish(r);
    return r;
}

SliceReport conditional_martingale_slice(const Generator& g, const ProbabilityVector& p0,
                                         const ProbabilityVector& q, double T, double s1, double s2,
                                         std::size_t n_paths, std::uint64_t seed, int threads) {
    if (!(0.0 <= s1 && s1 < s2 && s2 <= T)) throw Error(ErrorKind::InvalidInput, "need 0 <= s1 < s2 <= T");
    const LikelihoodTable table(g, p0, q, T);
    std::vector<int> state(n_paths);
    std::vector<double> val(n_paths);
    parallel_for(n_paths, threads, [&](std::size_t i) {
        const Path rev = reverse_path(sample_path(g, q, T, seed, i), T);
        state[i] = rev.state_at(s1);
        val[i] = table.at(T - s2, rev.state_at(s2));
    });
    const int n = g.size();
    SliceReport r;
    r.pass = true;
    for (int y = 0; y < n; ++y) {
        std::vector<double> group;
        for (std::size_t i = 0; i < n_paths; ++i)
            if (state[i] == y) group.push_back(val[i]);
        const double target = table.at(T - s1, y);
        r.counts.push_back(group.size());
        r.target.push_back(target);
        if (group.empty()) {
            r.estimate.push_back(NAN);
            r.std_error.push_back(NAN);
            r.z_scores.push_back(0.0);
            continue;
        }
        const auto m = moments(group, 1, 0);
        r.estimate.push_back(m.mean);
        r.std_error.push_back(m.se);
        r.z_scores.push_back(z_score(m.mean, target, m.se));
        r.pass = r.pass && std::abs(r.z_scores.back()) <= 4.0;
    }
    return r;
}

RateReport empirical_rates(const Generator& g, const ProbabilityVector& initial, double h, std::size_t n_paths,
                           std::uint64_t seed, bool reversed, int threads) {
    const int n = g.size();
    std::vector<int> from(n_paths), to(n_paths);
    parallel_for(n_paths, threads, [&](std::size_t i) {
        Path p = sample_path(g, initial, h, seed, i);
        if (reversed) p = reverse_path(p, h);
        from[i] = p.states.front();
        to[i] = p.states.back();
    });
    RateReport r;
    r.expected = reversed ? adjoint_generator(g, stationary_distribution(g)).rates() : g.rates();
    r.empirical = Matrix::Zero(n, n);
    r.z_scores = Matrix::Zero(n, n);
    r.starts.assign(n, 0);
    for (std::size_t i = 0; i < n_paths; ++i) {
        ++r.starts[from[i]];
        if (from[i] != to[i]) r.empirical(from[i], to[i]) += 1.0;
    }
    r.pass = true;
    for (int x = 0; x < n; ++x) {
        if (!r.starts[x]) continue;
        double out = 0.0;
        for (int y = 0; y < n; ++y) {
            if (y == x) continue;
            const double count = r.empirical(x, y);
            const double prob = r.expected(x, y) * h;
            r.empirical(x, y) = count / (r.starts[x] * h);
            out += r.empirical(x, y);
            if (r.expected(x, y) <= 0.0) continue;
            const double se = std::sqrt(prob * (1.0 - prob) / r.starts[x]) / h;
            r.z_scores(x, y) = (r.empirical(x, y) - r.expected(x, y)) / se;
            r.pass = r.pass && std::abs(r.z_scores(x, y)) <= 4.0;
        }
        r.empirical(x, x) = -out;
    }
    return r;
}

MartingaleTestReport ergodic_test(const Generator& g, const ProbabilityVector& q, const NodeFunction& f,
                                  double T, int batches, std::uint64_t seed) {
    if (batches < 2) throw Error(ErrorKind::InvalidInput, "need at least two batches");
    const Path path = sample_path(g, q, T, seed, 0);
    const double width = T / batches;
    std::vector<double> means(batches, 0.0);
    double start = 0.0;
    for (std::size_t i = 0; i < path.states.size(); ++i) {
        const double end = i < path.jump_times.size() ? path.jump_times[i] : T;
        double a = start;
        while (a < end) {
            const int b = std::min(batches - 1, static_cast<int>(a / width));
            const double stop = std::min(end, (b + 1) * width);
            means[b] += f(path.states[i]) * (stop - a) / width;
            a = stop > a ? stop : end;
        }
        start = end;
    }
    const auto m = moments(means, 1, 0);
    const double target = l2_inner(f, Vector::Ones(f.size()), q);
    MartingaleTestReport r;
    r.functional = "ergodic";
    r.checkpoints = {T};
    r.estimate = {ergodic_average(path, f)};
    r.std_error = {m.se};
    r.target = {target};
    r.z_scores = {z_score(r.estimate[0], target, m.se)};
    r.paths_used = 1;
    r.seed = seed;
    finish(r);
    return r;
}

} // namespace ctmc
