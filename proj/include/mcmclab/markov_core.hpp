#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace mcmclab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using StateSet = std::vector<std::size_t>;

namespace detail {

// Divide by the sum, then push the last bit of rounding error into the largest
// entry so the sequential sum is exactly 1.
template <class Vec>
void renormalize_exact(Vec&& v) {
    const double s = v.sum();
    if (s == 1.0) return;
    v /= s;
    Eigen::Index arg = 0;
    v.maxCoeff(&arg);
    for (int pass = 0; pass < 3; ++pass) {
        const double t = v.sum();
        if (t == 1.0) break;
        v(arg) += 1.0 - t;
    }
}

inline std::vector<bool> membership(std::size_t n, const StateSet& set) {
    std::vector<bool> in(n, false);
    for (auto s : set) {
        if (s >= n) fail(Errc::InvalidArgument, "state index out of range", s);
        in[s] = true;
    }
    return in;
}

} // namespace detail

class StochasticMatrix {
public:
    StochasticMatrix() = default;

    static StochasticMatrix validate(Matrix raw, double row_tol = 1e-9) {
        if (raw.rows() != raw.cols())
            fail(Errc::DimensionMismatch, "transition matrix must be square");
        if (raw.rows() == 0) fail(Errc::DimensionMismatch, "transition matrix must have at least one state");
        if (!(row_tol >= 0.0)) fail(Errc::InvalidArgument, "row_tol must be nonnegative");
        const Eigen::Index n = raw.rows();
        for (Eigen::Index x = 0; x < n; ++x) {
            for (Eigen::Index y = 0; y < n; ++y) {
                const double v = raw(x, y);
                if (!std::isfinite(v) || v < 0.0)
                    fail(Errc::NegativeEntry,
                         "entry (" + std::to_string(x) + "," + std::to_string(y) + ") is negative or not finite",
                         static_cast<std::size_t>(x), v);
            }
            const double s = raw.row(x).sum();
            if (std::abs(s - 1.0) > row_tol)
                fail(Errc::RowSumOutOfTolerance, "row " + std::to_string(x) + " sums to " + std::to_string(s),
                     static_cast<std::size_t>(x), s);
            detail::renormalize_exact(raw.row(x));
        }
        StochasticMatrix p;
        p.m_ = std::move(raw);
        p.row_tol_ = row_tol;
        return p;
    }

    std::size_t size() const { return static_cast<std::size_t>(m_.rows()); }
    const Matrix& matrix() const { return m_; }
    double operator()(std::size_t x, std::size_t y) const {
        return m_(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y));
    }
    double row_tol() const { return row_tol_; }

private:
    Matrix m_;
    double row_tol_ = 1e-9;
};

class SignedMeasure {
public:
    SignedMeasure() = default;
    explicit SignedMeasure(Vector w) : w_(std::move(w)) {}
    const Vector& weights() const { return w_; }
    std::size_t size() const { return static_cast<std::size_t>(w_.size()); }
    double mass() const { return w_.sum(); }
    double l1_norm() const { return w_.lpNorm<1>(); }
    double operator[](std::size_t i) const { return w_(static_cast<Eigen::Index>(i)); }

private:
    Vector w_;
};

class ProbabilityVector {
public:
    ProbabilityVector() = default;

    static ProbabilityVector validate(Vector w, double tol = 1e-9) {
        if (w.size() == 0) fail(Errc::DimensionMismatch, "probability vector must be nonempty");
        for (Eigen::Index i = 0; i < w.size(); ++i)
            if (!std::isfinite(w(i)) || w(i) < 0.0)
                fail(Errc::NegativeEntry, "probability weight " + std::to_string(i) + " is negative",
                     static_cast<std::size_t>(i), w(i));
        const double s = w.sum();
        if (std::abs(s - 1.0) > tol)
            fail(Errc::RowSumOutOfTolerance, "probability weights sum to " + std::to_string(s), std::nullopt, s);
        detail::renormalize_exact(w);
        ProbabilityVector p;
        p.w_ = std::move(w);
        return p;
    }

    static ProbabilityVector dirac(std::size_t n, std::size_t x) {
        if (x >= n) fail(Errc::InvalidArgument, "dirac state out of range", x);
        Vector w = Vector::Zero(static_cast<Eigen::Index>(n));
        w(static_cast<Eigen::Index>(x)) = 1.0;
        return validate(std::move(w));
    }

    static ProbabilityVector uniform(std::size_t n) {
        return validate(Vector::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n)));
    }

    static ProbabilityVector uniform_on(std::size_t n, const StateSet& set) {
        if (set.empty()) fail(Errc::EmptySet, "uniform_on needs a nonempty set");
        auto in = detail::membership(n, set);
        const double k = static_cast<double>(std::count(in.begin(), in.end(), true));
        Vector w = Vector::Zero(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i)
            if (in[i]) w(static_cast<Eigen::Index>(i)) = 1.0 / k;
        return validate(std::move(w));
    }

    const Vector& weights() const { return w_; }
    std::size_t size() const { return static_cast<std::size_t>(w_.size()); }
    double operator[](std::size_t i) const { return w_(static_cast<Eigen::Index>(i)); }
    SignedMeasure as_signed() const { return SignedMeasure(w_); }

private:
    Vector w_;
};

struct ChainStructureReport {
    std::vector<StateSet> classes;   // sorted members, ordered by smallest member
    std::vector<bool> closed_flags;
    bool irreducible = false;
    std::vector<std::size_t> periods;  // 0 for a class with no cycle (single state, no self-loop)
    bool aperiodic = false;
    std::optional<Vector> reversible_vector;  // normalized to sum 1
};

struct FirstPassageLaw {
    StateSet target;
    std::vector<double> probabilities;  // probabilities[m-1] = P[tau = m]
    std::size_t horizon = 0;
    double residual = 0.0;               // P[tau > horizon]
};

// ---------------------------------------------------------------------------
// Evolution

inline void check_dim(const StochasticMatrix& P, Eigen::Index n, const char* what) {
    if (static_cast<Eigen::Index>(P.size()) != n)
        fail(Errc::DimensionMismatch, std::string(what) + " has length " + std::to_string(n) +
                                          ", chain has " + std::to_string(P.size()) + " states");
}

inline SignedMeasure evolve_measure(const SignedMeasure& mu, const StochasticMatrix& P, std::size_t n) {
    check_dim(P, mu.weights().size(), "measure");
    Vector v = mu.weights();
    const Matrix Pt = P.matrix().transpose();
    for (std::size_t k = 0; k < n; ++k) v = Pt * v;
    return SignedMeasure(std::move(v));
}

inline ProbabilityVector evolve_measure(const ProbabilityVector& mu, const StochasticMatrix& P, std::size_t n) {
    Vector v = evolve_measure(mu.as_signed(), P, n).weights();
    v = v.cwiseMax(0.0);
    return ProbabilityVector::validate(std::move(v));
}

inline Vector apply_to_function(const StochasticMatrix& P, const Vector& f, std::size_t n) {
    check_dim(P, f.size(), "function");
    Vector g = f;
    for (std::size_t k = 0; k < n; ++k) g = P.matrix() * g;
    return g;
}

inline Matrix matrix_power(const Matrix& A, std::size_t n) {
    Matrix result = Matrix::Identity(A.rows(), A.cols());
    Matrix base = A;
    while (n > 0) {
        if (n & 1u) result = result * base;
        n >>= 1u;
        if (n > 0) base = base * base;
    }
    return result;
}

inline StochasticMatrix matrix_power(const StochasticMatrix& P, std::size_t n) {
    return StochasticMatrix::validate(matrix_power(P.matrix(), n), 1e-9);
}

// ---------------------------------------------------------------------------
// Structure

namespace detail {

inline std::vector<std::vector<std::size_t>> adjacency(const Matrix& m) {
    const auto n = static_cast<std::size_t>(m.rows());
    std::vector<std::vector<std::size_t>> adj(n);
    for (std::size_t x = 0; x < n; ++x)
        for (std::size_t y = 0; y < n; ++y)
            if (m(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) > 0.0) adj[x].push_back(y);
    return adj;
}

// Iterative Tarjan; returns component id per state.
inline std::vector<std::size_t> scc(const std::vector<std::vector<std::size_t>>& adj, std::size_t& ncomp) {
    const std::size_t n = adj.size();
    constexpr std::size_t unset = static_cast<std::size_t>(-1);
    std::vector<std::size_t> index(n, unset), low(n, 0), comp(n, unset);
    std::vector<bool> on_stack(n, false);
    std::vector<std::size_t> stack;
    std::size_t counter = 0;
    ncomp = 0;
    struct Frame { std::size_t v; std::size_t edge; };
    for (std::size_t root = 0; root < n; ++root) {
        if (index[root] != unset) continue;
        std::vector<Frame> call{{root, 0}};
        index[root] = low[root] = counter++;
        stack.push_back(root);
        on_stack[root] = true;
        while (!call.empty()) {
            Frame& f = call.back();
            if (f.edge < adj[f.v].size()) {
                const std::size_t w = adj[f.v][f.edge++];
                if (index[w] == unset) {
                    index[w] = low[w] = counter++;
                    stack.push_back(w);
                    on_stack[w] = true;
                    call.push_back({w, 0});
                } else if (on_stack[w]) {
                    low[f.v] = std::min(low[f.v], index[w]);
                }
            } else {
                const std::size_t v = f.v;
                if (low[v] == index[v]) {
                    std::size_t w;
                    do {
                        w = stack.back();
                        stack.pop_back();
                        on_stack[w] = false;
                        comp[w] = ncomp;
                    } while (w != v);
                    ++ncomp;
                }
                call.pop_back();
                if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
            }
        }
    }
    return comp;
}

inline std::optional<Vector> reversible_vector(const Matrix& m) {
    const Eigen::Index n = m.rows();
    for (Eigen::Index x = 0; x < n; ++x)
        for (Eigen::Index y = x + 1; y < n; ++y)
            if ((m(x, y) > 0.0) != (m(y, x) > 0.0)) return std::nullopt;

    Vector alpha = Vector::Constant(n, -1.0);
    for (Eigen::Index root = 0; root < n; ++root) {
        if (alpha(root) >= 0.0) continue;
        alpha(root) = 1.0;
        std::queue<Eigen::Index> q;
        q.push(root);
        while (!q.empty()) {
            const Eigen::Index x = q.front();
            q.pop();
            for (Eigen::Index y = 0; y < n; ++y) {
                if (y == x || m(x, y) <= 0.0 || alpha(y) >= 0.0) continue;
                alpha(y) = alpha(x) * m(x, y) / m(y, x);
                q.push(y);
            }
        }
    }
    for (Eigen::Index x = 0; x < n; ++x)
        for (Eigen::Index y = x + 1; y < n; ++y) {
            const double a = alpha(x) * m(x, y);
            const double b = alpha(y) * m(y, x);
            if (std::abs(a - b) > 1e-9 * std::max(a, b)) return std::nullopt;
        }
    alpha /= alpha.sum();
    return alpha;
}

} // namespace detail

inline ChainStructureReport classify(const StochasticMatrix& P) {
    const Matrix& m = P.matrix();
    const std::size_t n = P.size();
    auto adj = detail::adjacency(m);
    std::size_t ncomp = 0;
    auto comp = detail::scc(adj, ncomp);

    std::vector<StateSet> raw(ncomp);
    for (std::size_t x = 0; x < n; ++x) raw[comp[x]].push_back(x);
    std::vector<std::size_t> order(ncomp);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return raw[a].front() < raw[b].front(); });

    ChainStructureReport r;
    std::vector<std::size_t> level(n, 0);
    std::vector<bool> seen(n, false);
    for (std::size_t c : order) {
        const StateSet& cls = raw[c];
        bool closed = true;
        for (auto x : cls)
            for (auto y : adj[x])
                if (comp[y] != c) closed = false;

        // BFS levels inside the class; period = gcd of level[u] + 1 - level[v].
        std::queue<std::size_t> q;
        q.push(cls.front());
        seen[cls.front()] = true;
        level[cls.front()] = 0;
        std::size_t g = 0;
        while (!q.empty()) {
            const std::size_t u = q.front();
            q.pop();
            for (auto v : adj[u]) {
                if (comp[v] != c) continue;
                if (!seen[v]) {
                    seen[v] = true;
                    level[v] = level[u] + 1;
                    q.push(v);
                } else {
                    const long diff = static_cast<long>(level[u]) + 1 - static_cast<long>(level[v]);
                    g = std::gcd(g, static_cast<std::size_t>(std::labs(diff)));
                }
            }
        }
        r.classes.push_back(cls);
        r.closed_flags.push_back(closed);
        r.periods.push_back(g);
    }
    r.irreducible = (ncomp == 1);
    r.aperiodic = std::all_of(r.periods.begin(), r.periods.end(), [](std::size_t p) { return p <= 1; });
    r.reversible_vector = detail::reversible_vector(m);
    return r;
}

inline bool is_irreducible(const StochasticMatrix& P) {
    std::size_t ncomp = 0;
    detail::scc(detail::adjacency(P.matrix()), ncomp);
    return ncomp == 1;
}

// ---------------------------------------------------------------------------
// Invariant law, hitting and return times

inline double l1_residual(const Vector& pi, const Matrix& P) {
    return (P.transpose() * pi - pi).lpNorm<1>();
}

inline ProbabilityVector invariant_distribution(const StochasticMatrix& P) {
    if (!is_irreducible(P)) fail(Errc::NotIrreducible, "invariant distribution requires an irreducible chain");
    const Eigen::Index n = static_cast<Eigen::Index>(P.size());
    Matrix A = P.matrix().transpose() - Matrix::Identity(n, n);
    A.row(n - 1).setOnes();
    Vector b = Vector::Zero(n);
    b(n - 1) = 1.0;
    Eigen::FullPivLU<Matrix> lu(A);
    if (!lu.isInvertible()) fail(Errc::SingularSystem, "normalized invariance system is singular");
    Vector pi = lu.solve(b);
    for (int it = 0; it < 4 && l1_residual(pi, P.matrix()) > 1e-13; ++it) pi += lu.solve(b - A * pi);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (pi(i) < -1e-10) fail(Errc::SingularSystem, "invariant solve produced a negative weight", i, pi(i));
        pi(i) = std::max(pi(i), 0.0);
    }
    pi /= pi.sum();
    if (l1_residual(pi, P.matrix()) > 1e-10)
        fail(Errc::SingularSystem, "invariant residual above 1e-10", std::nullopt, l1_residual(pi, P.matrix()));
    return ProbabilityVector::validate(std::move(pi));
}

// h(x) = E_x[hitting time of target] (0 on the target), from (I - P restricted)h = 1.
inline Vector mean_hitting_times(const StochasticMatrix& P, const StateSet& target) {
    if (target.empty()) fail(Errc::EmptyTargetSet, "target set is empty");
    const std::size_t n = P.size();
    auto in = detail::membership(n, target);
    std::vector<Eigen::Index> rest;
    for (std::size_t x = 0; x < n; ++x)
        if (!in[x]) rest.push_back(static_cast<Eigen::Index>(x));
    Vector h = Vector::Zero(static_cast<Eigen::Index>(n));
    if (rest.empty()) return h;
    const auto k = static_cast<Eigen::Index>(rest.size());
    Matrix A(k, k);
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < k; ++j) A(i, j) = (i == j ? 1.0 : 0.0) - P.matrix()(rest[i], rest[j]);
    Eigen::FullPivLU<Matrix> lu(A);
    if (!lu.isInvertible()) fail(Errc::SingularSystem, "target is not reachable from every state");
    Vector ones = Vector::Ones(k);
    Vector sol = lu.solve(ones);
    sol += lu.solve(ones - A * sol);
    for (Eigen::Index i = 0; i < k; ++i) h(rest[i]) = sol(i);
    return h;
}

inline double mean_return_time(const StochasticMatrix& P, std::size_t x) {
    if (x >= P.size()) fail(Errc::InvalidArgument, "state out of range", x);
    const ProbabilityVector pi = invariant_distribution(P);
    if (pi[x] <= 0.0) fail(Errc::SingularSystem, "invariant weight is zero", x);
    return 1.0 / pi[x];
}

// Same quantity from the first-step equations: 1 + sum_y p_xy E_y[tau_x].
inline double mean_return_time_first_step(const StochasticMatrix& P, std::size_t x) {
    if (!is_irreducible(P)) fail(Errc::NotIrreducible, "return time requires an irreducible chain");
    const Vector h = mean_hitting_times(P, {x});
    return 1.0 + P.matrix().row(static_cast<Eigen::Index>(x)).dot(h);
}

inline Vector absorption_probability(const StochasticMatrix& P, const StateSet& absorbing, std::size_t target) {
    const std::size_t n = P.size();
    auto in = detail::membership(n, absorbing);
    if (target >= n || !in[target]) fail(Errc::InvalidArgument, "target must be one of the absorbing states", target);
    for (auto a : absorbing)
        if (std::abs(P(a, a) - 1.0) > 1e-12) fail(Errc::NotAbsorbing, "state is not absorbing", a, P(a, a));
    std::vector<Eigen::Index> rest;
    for (std::size_t x = 0; x < n; ++x)
        if (!in[x]) rest.push_back(static_cast<Eigen::Index>(x));
    Vector h = Vector::Zero(static_cast<Eigen::Index>(n));
    h(static_cast<Eigen::Index>(target)) = 1.0;
    if (rest.empty()) return h;
    const auto k = static_cast<Eigen::Index>(rest.size());
    Matrix A(k, k);
    Vector r(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = 0; j < k; ++j) A(i, j) = (i == j ? 1.0 : 0.0) - P.matrix()(rest[i], rest[j]);
        r(i) = P.matrix()(rest[i], static_cast<Eigen::Index>(target));
    }
    Eigen::FullPivLU<Matrix> lu(A);
    if (!lu.isInvertible()) fail(Errc::SingularSystem, "some transient state never reaches the absorbing set");
    Vector sol = lu.solve(r);
    sol += lu.solve(r - A * sol);
    for (Eigen::Index i = 0; i < k; ++i) h(rest[i]) = sol(i);
    return h;
}

inline FirstPassageLaw first_passage_law(const StochasticMatrix& P, std::size_t start, const StateSet& target,
                                         std::size_t M) {
    if (target.empty()) fail(Errc::EmptyTargetSet, "target set is empty");
    if (M < 1) fail(Errc::InvalidArgument, "horizon must be at least 1");
    const std::size_t n = P.size();
    if (start >= n) fail(Errc::InvalidArgument, "start state out of range", start);
    auto in = detail::membership(n, target);
    const auto N = static_cast<Eigen::Index>(n);

    Vector into_target = Vector::Zero(N);  // P(y, target set)
    Matrix killed = P.matrix();
    for (Eigen::Index y = 0; y < N; ++y)
        if (in[static_cast<std::size_t>(y)]) {
            into_target += P.matrix().col(y);
            killed.col(y).setZero();
        }
    const Matrix killed_t = killed.transpose();

    FirstPassageLaw law;
    law.target = target;
    law.horizon = M;
    law.probabilities.reserve(M);
    Vector v = Vector::Zero(N);
    v(static_cast<Eigen::Index>(start)) = 1.0;
    for (std::size_t m = 1; m <= M; ++m) {
        law.probabilities.push_back(v.dot(into_target));
        v = killed_t * v;
    }
    law.residual = v.sum();
    return law;
}

// ---------------------------------------------------------------------------
// Sampling helpers

// Cumulative rows for inverse-CDF sampling of transitions.
class RowSampler {
public:
    explicit RowSampler(const StochasticMatrix& P) : n_(P.size()), cum_(n_ * n_) {
        for (std::size_t x = 0; x < n_; ++x) {
            double acc = 0.0;
            for (std::size_t y = 0; y < n_; ++y) {
                acc += P(x, y);
                cum_[x * n_ + y] = acc;
            }
        }
    }

    std::size_t step(std::size_t x, RngStream& rng) const {
        const double* row = cum_.data() + x * n_;
        return draw(row, rng.uniform() * row[n_ - 1]);
    }

    std::size_t size() const { return n_; }

private:
    std::size_t draw(const double* row, double u) const {
        const double* it = std::upper_bound(row, row + n_, u);
        std::size_t y = static_cast<std::size_t>(it - row);
        if (y < n_) return y;  // row[y] > u >= row[y-1], so p_y > 0
        y = n_ - 1;
        while (y > 0 && row[y] == row[y - 1]) --y;
        return y;
    }

    std::size_t n_;
    std::vector<double> cum_;
};

inline std::size_t sample_from(const ProbabilityVector& mu, RngStream& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        if (mu[i] <= 0.0) continue;
        last_positive = i;
        acc += mu[i];
        if (u < acc) return i;
    }
    return last_positive;
}

struct CouplingResult {
    std::vector<double> tail;         // P[tau_diag > n], n = 0..n_max
    std::vector<double> std_error;    // binomial standard error of each tail estimate
    std::vector<double> exact_l1;     // ||nu P^n - pi||_1
    std::size_t replicas = 0;
};

// Independent product chain started from (nu, pi); records the first time the
// two coordinates agree. Replica r uses rng.derive(r).
inline CouplingResult coupling_diagonal_time(const StochasticMatrix& P, const ProbabilityVector& nu,
                                             const ProbabilityVector& pi, std::size_t n_max,
                                             std::size_t replicas, const RngStream& rng) {
    check_dim(P, nu.weights().size(), "nu");
    check_dim(P, pi.weights().size(), "pi");
    if (replicas == 0) fail(Errc::InvalidArgument, "need at least one replica");
    const RowSampler sampler(P);
    const std::size_t never = n_max + 1;
    std::vector<std::size_t> meet(replicas, never);
    parallel_for(replicas, [&](std::size_t r) {
        RngStream s = rng.derive(r);
        std::size_t x = sample_from(nu, s);
        std::size_t y = sample_from(pi, s);
        for (std::size_t n = 0; n <= n_max; ++n) {
            if (x == y) {
                meet[r] = n;
                return;
            }
            if (n == n_max) break;
            x = sampler.step(x, s);
            y = sampler.step(y, s);
        }
    });

    CouplingResult out;
    out.replicas = replicas;
    std::vector<std::size_t> alive(n_max + 1, 0);
    for (auto t : meet)
        for (std::size_t n = 0; n <= n_max && n < t; ++n) ++alive[n];
    Vector v = nu.weights();
    const Matrix Pt = P.matrix().transpose();
    for (std::size_t n = 0; n <= n_max; ++n) {
        const double t = static_cast<double>(alive[n]) / static_cast<double>(replicas);
        out.tail.push_back(t);
        out.std_error.push_back(std::sqrt(t * (1.0 - t) / static_cast<double>(replicas)));
        out.exact_l1.push_back((v - pi.weights()).lpNorm<1>());
        v = Pt * v;
    }
    return out;
}

} // namespace mcmclab
