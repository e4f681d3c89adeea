#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "markov_core.hpp"
#include "models.hpp"

namespace mcmclab {

enum class AcceptanceKind { metropolis, heatbath };

struct AcceptanceRule {
    AcceptanceKind kind = AcceptanceKind::metropolis;
    double q = 1.0;

    // metropolis: q min(1, e^{-beta dH});  heatbath: q / (1 + e^{beta dH})
    double probability(double dH, double beta) const {
        if (kind == AcceptanceKind::metropolis) return dH <= 0.0 ? q : q * std::exp(-beta * dH);
        return q / (1.0 + std::exp(beta * dH));
    }

    static AcceptanceRule for_model(const IsingModel& model, AcceptanceKind kind = AcceptanceKind::metropolis) {
        return AcceptanceRule{kind, model.q};
    }
};

// Off-diagonal entries from the rule on a symmetric neighbor relation; the
// diagonal completes each row.
inline StochasticMatrix metropolis_matrix(const Vector& H, const std::vector<StateSet>& neighbors, double beta,
                                          const AcceptanceRule& rule) {
    const auto n = static_cast<std::size_t>(H.size());
    if (neighbors.size() != n) fail(Errc::DimensionMismatch, "neighbor lists must cover every state");
    Matrix P = Matrix::Zero(H.size(), H.size());
    for (std::size_t x = 0; x < n; ++x)
        for (auto y : neighbors[x]) {
            if (y >= n) fail(Errc::InvalidArgument, "neighbor index out of range", y);
            if (y == x) fail(Errc::InvalidArgument, "neighbor relation must be irreflexive", x);
            if (std::find(neighbors[y].begin(), neighbors[y].end(), x) == neighbors[y].end())
                fail(Errc::InvalidArgument, "neighbor relation must be symmetric", x);
            const auto xi = static_cast<Eigen::Index>(x), yi = static_cast<Eigen::Index>(y);
            P(xi, yi) = rule.probability(H(yi) - H(xi), beta);
        }
    for (Eigen::Index x = 0; x < P.rows(); ++x) {
        const double off = P.row(x).sum();
        double diag = 1.0 - off;
        if (diag < -1e-12)
            fail(Errc::DiagonalNegative, "q too large: diagonal entry would be negative", static_cast<std::size_t>(x),
                 diag);
        P(x, x) = std::max(diag, 0.0);
    }
    return StochasticMatrix::validate(std::move(P));
}

inline StochasticMatrix ising_glauber_matrix(const IsingModel& model, const AcceptanceRule& rule) {
    return metropolis_matrix(ising_energies(model), glauber_neighbors(model.N), model.beta, rule);
}

// ---------------------------------------------------------------------------
// Spin dynamics

struct FlipOutcome {
    std::size_t k = 0;
    bool accepted = false;
    int dm = 0;
    double dH = 0.0;
};

inline void check_rule_rate(const IsingModel& model, const AcceptanceRule& rule) {
    if (!(rule.q > 0.0) || rule.q * static_cast<double>(model.N) > 1.0 + 1e-12)
        fail(Errc::ParameterOutOfRange, "acceptance rate q must satisfy 0 < qN <= 1", std::nullopt, rule.q);
}

// Propose a uniform site k; accept with N * rule(dH), so that the one-step
// kernel is exactly the metropolis_matrix entry. dm = -2 * (old spin).
inline FlipOutcome glauber_step(const IsingModel& model, SpinConfig& x, const AcceptanceRule& rule, RngStream& rng) {
    FlipOutcome out;
    out.k = static_cast<std::size_t>(rng.index(model.N));
    const double dH = ising_delta(model, x, out.k);
    const double accept = static_cast<double>(model.N) * rule.probability(dH, model.beta);
    if (rng.uniform() < accept) {
        out.accepted = true;
        out.dm = -2 * x.spins[out.k];
        out.dH = dH;
        x.spins[out.k] = static_cast<signed char>(-x.spins[out.k]);
    }
    return out;
}

struct ExchangeOutcome {
    std::size_t i = 0;
    std::size_t j = 0;
    bool accepted = false;
    bool no_opposite_pair = false;  // all spins equal: identity step
    double dH = 0.0;
};

namespace detail {

// Energy change of swapping spins i and j (opposite signs); only bonds touching
// i or j change, the field term is invariant.
inline double exchange_delta(const SpinConfig& x, std::size_t i, std::size_t j) {
    const std::size_t N = x.size();
    std::size_t bonds[4] = {(i + N - 1) % N, i, (j + N - 1) % N, j};
    std::sort(bonds, bonds + 4);
    const std::size_t* end = std::unique(bonds, bonds + 4);
    auto spin_after = [&](std::size_t s) -> int {
        if (s == i) return x.spins[j];
        if (s == j) return x.spins[i];
        return x.spins[s];
    };
    double before = 0.0, after = 0.0;
    for (const std::size_t* b = bonds; b != end; ++b) {
        const std::size_t u = *b, v = (*b + 1) % N;
        before -= x.spins[u] * x.spins[v];
        after -= spin_after(u) * spin_after(v);
    }
    return after - before;
}

} // namespace detail

// Uniform pair (one + site, one - site); the proposal is symmetric because the
// number of such pairs is fixed by m. Acceptance N * rule(dH), as for flips.
inline ExchangeOutcome kawasaki_step(const IsingModel& model, SpinConfig& x, const AcceptanceRule& rule,
                                     RngStream& rng) {
    ExchangeOutcome out;
    std::vector<std::size_t> plus, minus;
    for (std::size_t k = 0; k < x.size(); ++k) (x.spins[k] > 0 ? plus : minus).push_back(k);
    if (plus.empty() || minus.empty()) {
        out.no_opposite_pair = true;
        return out;
    }
    out.i = plus[rng.index(plus.size())];
    out.j = minus[rng.index(minus.size())];
    const double dH = detail::exchange_delta(x, out.i, out.j);
    const double accept = static_cast<double>(model.N) * rule.probability(dH, model.beta);
    if (rng.uniform() < accept) {
        out.accepted = true;
        out.dH = dH;
        std::swap(x.spins[out.i], x.spins[out.j]);
    }
    return out;
}

struct TracePoint {
    std::size_t step = 0;
    int magnetization = 0;
    double energy = 0.0;
};

struct GlauberRun {
    SpinConfig final_state;
    int magnetization = 0;    // tracked incrementally
    double energy = 0.0;      // tracked incrementally
    std::size_t accepted = 0;
    std::vector<std::uint64_t> visits;  // per configuration index, states after each step
    std::vector<TracePoint> trace;
};

inline GlauberRun simulate_glauber(const IsingModel& model, SpinConfig x, const AcceptanceRule& rule,
                                   std::size_t steps, RngStream& rng, std::size_t record_every = 0,
                                   bool track_visits = false) {
    check_rule_rate(model, rule);
    if (x.size() != model.N) fail(Errc::DimensionMismatch, "configuration length differs from N");
    if (track_visits && model.N > 24) fail(Errc::InvalidArgument, "visit histogram limited to N <= 24");
    GlauberRun run;
    run.magnetization = magnetization(x);
    run.energy = ising_energy(model, x);
    if (track_visits) run.visits.assign(std::size_t{1} << model.N, 0);
    std::uint64_t idx = track_visits ? x.index() : 0;
    if (record_every > 0) run.trace.push_back({0, run.magnetization, run.energy});
    for (std::size_t s = 1; s <= steps; ++s) {
        const FlipOutcome o = glauber_step(model, x, rule, rng);
        if (o.accepted) {
            ++run.accepted;
            run.magnetization += o.dm;
            run.energy += o.dH;
            idx ^= (std::uint64_t{1} << o.k);
        }
        if (track_visits) ++run.visits[idx];
        if (record_every > 0 && s % record_every == 0) run.trace.push_back({s, run.magnetization, run.energy});
    }
    run.final_state = std::move(x);
    return run;
}

// ---------------------------------------------------------------------------
// Estimators and planners

struct SamplePlan {
    double delta = 0.0;
    double eps = 0.0;
    std::uint64_t n_required = 0;        // Chebychev, rigorous
    std::uint64_t n_clt_heuristic = 0;   // 2 var log(1/eps) / delta^2, not rigorous
};

namespace detail {
// Ceiling that ignores relative rounding noise below 1e-9.
inline std::uint64_t snapped_ceil(double v) {
    const double r = std::round(v);
    if (std::abs(v - r) <= 1e-9 * std::max(1.0, std::abs(v))) v = r;
    return static_cast<std::uint64_t>(std::ceil(v));
}
} // namespace detail

inline SamplePlan plan_samples(double delta, double eps, double var_bound, std::optional<double> rho = std::nullopt) {
    if (!(delta > 0.0)) fail(Errc::ParameterOutOfRange, "delta must be positive", std::nullopt, delta);
    if (!(eps > 0.0 && eps < 1.0)) fail(Errc::ParameterOutOfRange, "eps must lie in (0,1)", std::nullopt, eps);
    if (!(var_bound > 0.0)) fail(Errc::ParameterOutOfRange, "var_bound must be positive", std::nullopt, var_bound);
    double factor = 1.0;
    if (rho) {
        if (!(*rho >= 0.0 && *rho < 1.0)) fail(Errc::ParameterOutOfRange, "rho must lie in [0,1)", std::nullopt, *rho);
        factor = (1.0 + *rho) / (1.0 - *rho);
    }
    SamplePlan p;
    p.delta = delta;
    p.eps = eps;
    p.n_required = detail::snapped_ceil(var_bound * factor / (delta * delta * eps));
    p.n_clt_heuristic = detail::snapped_ceil(2.0 * var_bound * factor * std::log(1.0 / eps) / (delta * delta));
    return p;
}

struct EstimatorReport {
    std::size_t n = 0;
    double mean = 0.0;
    double variance_estimate = 0.0;         // of the estimator S_n
    std::optional<double> variance_bound;   // of S_n, when a rigorous bound is available
    double ci_halfwidth = 0.0;              // Chebychev at planner.eps
    SamplePlan planner;
};

struct EstimatorOptions {
    std::size_t batches = 16;
    std::optional<double> rho;      // spectral radius, for the stationary variance bound
    std::optional<double> var_pi;   // Var of Y under pi
    double delta = 1e-2;
    double eps = 1e-3;
};

namespace detail {

struct Welford {
    std::size_t k = 0;
    double mean = 0.0;
    double m2 = 0.0;
    void add(double y) {
        ++k;
        const double d = y - mean;
        mean += d / static_cast<double>(k);
        m2 += d * (y - mean);
    }
    double sample_variance() const { return k > 1 ? m2 / static_cast<double>(k - 1) : 0.0; }
};

inline EstimatorReport finish_report(std::size_t n, double mean, double var_est, const EstimatorOptions& opt) {
    EstimatorReport r;
    r.n = n;
    r.mean = mean;
    r.variance_estimate = var_est;
    double per_sample = var_est * static_cast<double>(n);
    if (opt.var_pi) {
        per_sample = *opt.var_pi;
        const double factor = opt.rho ? (1.0 + *opt.rho) / (1.0 - *opt.rho) : 1.0;
        r.variance_bound = factor * *opt.var_pi / static_cast<double>(n);
    }
    const double v = r.variance_bound.value_or(var_est);
    r.ci_halfwidth = std::sqrt(v / opt.eps);
    r.planner.delta = opt.delta;
    r.planner.eps = opt.eps;
    if (per_sample > 0.0) r.planner = plan_samples(opt.delta, opt.eps, per_sample, opt.rho);
    return r;
}

} // namespace detail

// S_n = (1/n) sum_{m<n} Y(X_m) after burn_in steps; variance of S_n from batch means.
template <class State, class Step, class Observable>
EstimatorReport mcmc_estimate(State x, Step&& step, Observable&& Y, std::size_t n, std::size_t burn_in,
                              RngStream& rng, const EstimatorOptions& opt = {}) {
    if (n < 1) fail(Errc::InvalidArgument, "need at least one sample");
    if (opt.rho && !(*opt.rho >= 0.0 && *opt.rho < 1.0))
        fail(Errc::ParameterOutOfRange, "rho must lie in [0,1)", std::nullopt, *opt.rho);
    for (std::size_t i = 0; i < burn_in; ++i) step(x, rng);
    const std::size_t B = std::max<std::size_t>(1, std::min(opt.batches, n));
    const std::size_t size = n / B;
    detail::Welford all, batch_means, current;
    for (std::size_t m = 0; m < n; ++m) {
        const double y = static_cast<double>(Y(x));
        all.add(y);
        if (m < size * B) {
            current.add(y);
            if (current.k == size) {
                batch_means.add(current.mean);
                current = {};
            }
        }
        if (m + 1 < n) step(x, rng);
    }
    const double var_est = B > 1 ? batch_means.sample_variance() / static_cast<double>(B) : 0.0;
    return detail::finish_report(n, all.mean, var_est, opt);
}

// Finite-chain convenience wrapper.
inline EstimatorReport mcmc_estimate_chain(const StochasticMatrix& P, std::size_t x0, const Vector& Y, std::size_t n,
                                           std::size_t burn_in, RngStream& rng, const EstimatorOptions& opt = {}) {
    check_dim(P, Y.size(), "observable");
    const RowSampler sampler(P);
    return mcmc_estimate(
        x0, [&](std::size_t& x, RngStream& r) { x = sampler.step(x, r); },
        [&](std::size_t x) { return Y(static_cast<Eigen::Index>(x)); }, n, burn_in, rng, opt);
}

// f(x) >= 0 describes the set.
using Inequality = std::function<double(const Vector&)>;

inline Inequality affine_inequality(Vector a, double b) {
    return [a = std::move(a), b](const Vector& x) { return a.dot(x) + b; };
}

inline Inequality ball_inequality(Vector center, double radius) {
    return [c = std::move(center), radius](const Vector& x) { return radius * radius - (x - c).squaredNorm(); };
}

// Hit-or-miss volume of {x in [0,1]^dim : f_i(x) >= 0 for all i}. The variance
// bound uses p(1-p) <= 1/4.
inline EstimatorReport mc_volume(std::size_t dim, const std::vector<Inequality>& inequalities, std::size_t n,
                                 RngStream& rng, double eps = 1e-3, double delta = 1e-2) {
    if (dim < 1) fail(Errc::InvalidArgument, "dimension must be at least 1");
    if (n < 1) fail(Errc::InvalidArgument, "need at least one sample");
    Vector x(static_cast<Eigen::Index>(dim));
    detail::Welford w;
    for (std::size_t s = 0; s < n; ++s) {
        for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.uniform();
        bool inside = true;
        for (const auto& f : inequalities)
            if (!(f(x) >= 0.0)) { inside = false; break; }
        w.add(inside ? 1.0 : 0.0);
    }
    EstimatorOptions opt;
    opt.eps = eps;
    opt.delta = delta;
    opt.var_pi = 0.25;
    EstimatorReport r = detail::finish_report(n, w.mean, w.mean * (1.0 - w.mean) / static_cast<double>(n), opt);
    return r;
}

// ---------------------------------------------------------------------------
// Base generators

inline double exponential_from_uniform(double lambda, double u) {
    if (!(lambda > 0.0)) fail(Errc::ParameterOutOfRange, "lambda must be positive", std::nullopt, lambda);
    return -std::log1p(-u) / lambda;
}

inline double sample_exponential(double lambda, RngStream& rng) { return exponential_from_uniform(lambda, rng.uniform()); }

inline std::pair<double, double> normal_pair_from_uniforms(double u, double v) {
    const double r = std::sqrt(-2.0 * std::log1p(-u));
    const double phi = 2.0 * std::numbers::pi * v;
    return {r * std::cos(phi), r * std::sin(phi)};
}

inline std::pair<double, double> sample_normal_pair(RngStream& rng) {
    const double u = rng.uniform();
    const double v = rng.uniform();
    return normal_pair_from_uniforms(u, v);
}

} // namespace mcmclab
