#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "lyapunov.hpp"
#include "markov_core.hpp"

namespace mcmclab {

struct DensityKernel {
    std::string name;
    std::function<double(double, double)> density;      // p(x, y)
    std::function<double(double, RngStream&)> sampler;  // draws y ~ p(x, .)
};

inline double gaussian_density(double y, double mean, double sigma) {
    const double z = (y - mean) / sigma;
    return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

struct Ar1Model {
    double a = 0.0;
    double sigma = 1.0;
};

inline DensityKernel ar1_kernel(const Ar1Model& m) {
    if (!(m.sigma > 0.0)) fail(Errc::ParameterOutOfRange, "sigma must be positive", std::nullopt, m.sigma);
    return DensityKernel{"ar1", [m](double x, double y) { return gaussian_density(y, m.a * x, m.sigma); },
                         [m](double x, RngStream& rng) { return m.a * x + m.sigma * rng.normal(); }};
}

inline DensityKernel gaussian_walk_kernel(double sigma) {
    DensityKernel k = ar1_kernel({1.0, sigma});
    k.name = "gaussian-walk";
    return k;
}

// y = F(x) + sigma * noise
inline DensityKernel noisy_map_kernel(std::function<double(double)> F, double sigma, std::string name = "noisy-map") {
    if (!(sigma > 0.0)) fail(Errc::ParameterOutOfRange, "sigma must be positive", std::nullopt, sigma);
    return DensityKernel{std::move(name), [F, sigma](double x, double y) { return gaussian_density(y, F(x), sigma); },
                         [F, sigma](double x, RngStream& rng) { return F(x) + sigma * rng.normal(); }};
}

// x-independent kernel: every row is the same law mu.
inline DensityKernel iid_kernel(std::function<double(double)> mu, std::function<double(RngStream&)> draw) {
    return DensityKernel{"iid", [mu](double, double y) { return mu(y); },
                         [draw](double, RngStream& rng) { return draw(rng); }};
}

struct GridChain {
    double L = 0.0;
    Vector nodes;
    Vector weights;   // trapezoid weights
    StochasticMatrix matrix;
    Vector defects;   // 1 - (row integral before renormalization)

    std::size_t size() const { return static_cast<std::size_t>(nodes.size()); }

    std::size_t nearest_node(double x) const {
        const double h = nodes(1) - nodes(0);
        const double k = std::round((x + L) / h);
        return static_cast<std::size_t>(std::clamp(k, 0.0, double(nodes.size() - 1)));
    }

    StateSet nodes_in(double lo, double hi) const {
        StateSet s;
        for (Eigen::Index i = 0; i < nodes.size(); ++i)
            if (nodes(i) >= lo && nodes(i) <= hi) s.push_back(static_cast<std::size_t>(i));
        return s;
    }
};

struct DiscretizeOptions {
    double tail_tol = 1e-6;
    // Rows with |x| <= checked_fraction * L must lose at most tail_tol of mass.
    // Rows closer to the edge are renormalized without the check.
    double checked_fraction = 0.5;
};

inline GridChain discretize(const DensityKernel& kernel, double L, std::size_t M, DiscretizeOptions opt = {}) {
    if (M < 16) fail(Errc::InvalidArgument, "need at least 16 nodes");
    if (!(L > 0.0)) fail(Errc::InvalidArgument, "half-width must be positive");
    GridChain g;
    g.L = L;
    const auto n = static_cast<Eigen::Index>(M);
    const double h = 2.0 * L / static_cast<double>(M - 1);
    g.nodes.resize(n);
    g.weights = Vector::Constant(n, h);
    g.weights(0) = g.weights(n - 1) = h / 2.0;
    for (Eigen::Index i = 0; i < n; ++i) g.nodes(i) = -L + h * static_cast<double>(i);
    g.nodes(n - 1) = L;

    Matrix P(n, n);
    g.defects.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) P(i, j) = kernel.density(g.nodes(i), g.nodes(j)) * g.weights(j);
        const double s = P.row(i).sum();
        g.defects(i) = 1.0 - s;
        if (std::abs(g.nodes(i)) <= opt.checked_fraction * L && std::abs(g.defects(i)) > opt.tail_tol)
            fail(Errc::TailMassTooLarge, "row " + std::to_string(i) + " loses too much mass outside the window",
                 static_cast<std::size_t>(i), g.defects(i));
        if (!(s > 0.0))
            fail(Errc::TailMassTooLarge, "row " + std::to_string(i) + " has no mass inside the window",
                 static_cast<std::size_t>(i), g.defects(i));
        P.row(i) /= s;
    }
    g.matrix = StochasticMatrix::validate(std::move(P), 1e-9);
    return g;
}

// Row x of the n-step matrix divided by the quadrature weights.
inline Vector nstep_density(const GridChain& chain, std::size_t x, std::size_t n) {
    if (n < 1) fail(Errc::InvalidArgument, "n must be at least 1");
    if (x >= chain.size()) fail(Errc::InvalidArgument, "node out of range", x);
    Vector row = chain.matrix.matrix().row(static_cast<Eigen::Index>(x)).transpose();
    const Matrix Pt = chain.matrix.matrix().transpose();
    for (std::size_t k = 1; k < n; ++k) row = Pt * row;
    return row.cwiseQuotient(chain.weights);
}

// p with the columns of B zeroed.
inline Matrix killed_matrix(const GridChain& chain, const StateSet& B) {
    if (B.empty()) fail(Errc::EmptySet, "B is empty");
    Matrix K = chain.matrix.matrix();
    for (auto b : B) {
        if (b >= chain.size()) fail(Errc::InvalidArgument, "node out of range", b);
        K.col(static_cast<Eigen::Index>(b)).setZero();
    }
    return K;
}

// (p_killed)^n for n = 1..n_max.
inline std::vector<Matrix> killed_kernel_powers(const GridChain& chain, const StateSet& B, std::size_t n_max) {
    const Matrix K = killed_matrix(chain, B);
    std::vector<Matrix> out;
    out.reserve(n_max);
    Matrix cur = K;
    for (std::size_t n = 1; n <= n_max; ++n) {
        out.push_back(cur);
        if (n < n_max) cur = cur * K;
    }
    return out;
}

// P_x[tau_B > n] for n = 0..n_max (row sums of the killed powers), without
// storing the matrices.
inline Vector survival_probabilities(const GridChain& chain, const StateSet& B, std::size_t x, std::size_t n_max) {
    const Matrix Kt = killed_matrix(chain, B).transpose();
    Vector v = Vector::Zero(static_cast<Eigen::Index>(chain.size()));
    v(static_cast<Eigen::Index>(x)) = 1.0;
    Vector s(static_cast<Eigen::Index>(n_max + 1));
    for (std::size_t n = 0; n <= n_max; ++n) {
        s(static_cast<Eigen::Index>(n)) = v.sum();
        v = Kt * v;
    }
    return s;
}

struct PotentialKernel {
    Matrix g;                  // sum_{n>=1} (p_killed)^n; columns in B are zero
    std::size_t terms = 0;     // number of Neumann terms summed
    Vector expected_hitting;   // E_x[tau_B] = 1 + row sum of g
};

// Neumann series summed in doubling blocks: S_{2m} = S_m + K^m S_m, stopping
// once a block's row-sum norm drops below tol. Divergence is detected when
// ||K^m||_inf never falls below 1, which happens iff the spectral radius is 1.
inline PotentialKernel potential_kernel(const GridChain& chain, const StateSet& B, double tol = 1e-10) {
    const Matrix K = killed_matrix(chain, B);
    auto inf_norm = [](const Matrix& A) { return A.cwiseAbs().rowwise().sum().maxCoeff(); };
    PotentialKernel out;
    if (inf_norm(K) == 0.0) {
        out.g = Matrix::Zero(K.rows(), K.cols());
        out.terms = 1;
        out.expected_hitting = Vector::Ones(K.rows());
        return out;
    }
    Matrix S = K;
    Matrix Km = K;
    std::size_t m = 1;
    bool contracting = inf_norm(K) < 1.0;
    for (int doubling = 0; doubling < 62; ++doubling) {
        const Matrix inc = Km * S;
        S += inc;
        Km = Km * Km;
        m *= 2;
        contracting = contracting || inf_norm(Km) < 1.0;
        if (contracting && inf_norm(inc) < tol) {
            out.g = std::move(S);
            out.terms = m;
            out.expected_hitting = (out.g.rowwise().sum().array() + 1.0).matrix();
            return out;
        }
        if (!contracting && doubling >= 40) break;
    }
    fail(Errc::SeriesDiverges, "killed kernel has spectral radius 1; B is not reached from every node");
}

// sum_{x in B} pi(x) [f(x) + sum_y g(x,y) f(y)], which equals pi(f).
inline double nummelin_expectation(const PotentialKernel& pot, const StateSet& B, const Vector& pi, const Vector& f) {
    double s = 0.0;
    for (auto b : B) {
        const auto x = static_cast<Eigen::Index>(b);
        s += pi(x) * (f(x) + pot.g.row(x).dot(f));
    }
    return s;
}

// Fixed point of the grid chain by power iteration.
inline ProbabilityVector grid_invariant(const GridChain& chain, double tol = 1e-14, std::size_t max_iter = 100000) {
    const Matrix Pt = chain.matrix.matrix().transpose();
    Vector v = chain.weights / chain.weights.sum();
    for (std::size_t it = 0; it < max_iter; ++it) {
        Vector next = Pt * v;
        next /= next.sum();
        const double change = (next - v).lpNorm<1>();
        v = std::move(next);
        if (change < tol) break;
    }
    return ProbabilityVector::validate(v.cwiseMax(0.0), 1e-9);
}

// ---------------------------------------------------------------------------
// AR(1): X_{n+1} = a X_n + sigma xi_n

inline void require_contracting(const Ar1Model& m) {
    if (!(std::abs(m.a) < 1.0)) fail(Errc::NotContracting, "|a| must be below 1", std::nullopt, m.a);
    if (!(m.sigma > 0.0)) fail(Errc::ParameterOutOfRange, "sigma must be positive", std::nullopt, m.sigma);
}

// V = x^2: LV = -(1 - a^2) x^2 + sigma^2.
inline DriftCertificate ar1_drift(const Ar1Model& m) {
    require_contracting(m);
    return DriftCertificate{DriftKind::geometric, 1.0 - m.a * m.a, m.sigma * m.sigma, {}, {}, {}};
}

struct GaussianLaw {
    double mean = 0.0;
    double variance = 0.0;
};

inline GaussianLaw ar1_invariant(const Ar1Model& m) {
    require_contracting(m);
    return {0.0, m.sigma * m.sigma / (1.0 - m.a * m.a)};
}

inline double ar1_default_R(const Ar1Model& m) {
    require_contracting(m);
    return 4.0 * m.sigma * m.sigma / (1.0 - m.a * m.a);
}

// Default window: 8 invariant standard deviations.
inline double ar1_default_L(const Ar1Model& m) { return 8.0 * std::sqrt(ar1_invariant(m).variance); }

struct ContinuousMinorization {
    double R = 0.0;
    double k_half_width = 0.0;   // K = [-sqrt R, sqrt R]
    double alpha = 0.0;
    double shift = 0.0;          // |a| sqrt R
    double sigma = 1.0;

    // Lower envelope inf_{x in K} p(x, y) = alpha * nu(y).
    double envelope(double y) const {
        if (std::abs(y) > k_half_width) return 0.0;
        return gaussian_density(std::abs(y) + shift, 0.0, sigma);
    }
    double nu_density(double y) const { return envelope(y) / alpha; }
};

namespace detail {
template <class F>
double simpson(F&& f, double lo, double hi, std::size_t intervals) {
    if (intervals % 2) ++intervals;
    const double h = (hi - lo) / static_cast<double>(intervals);
    double s = f(lo) + f(hi);
    for (std::size_t i = 1; i < intervals; ++i) s += (i % 2 ? 4.0 : 2.0) * f(lo + h * static_cast<double>(i));
    return s * h / 3.0;
}
} // namespace detail

// The infimum over K is attained at x = +-sqrt R. alpha is the mass of the
// envelope, integrated with Simpson's rule on [0, sqrt R] (the envelope is
// even and smooth there).
inline ContinuousMinorization ar1_minorization(const Ar1Model& m, std::optional<double> R_opt = std::nullopt) {
    require_contracting(m);
    const double R = R_opt.value_or(ar1_default_R(m));
    const double R_min = 2.0 * m.sigma * m.sigma / (1.0 - m.a * m.a);
    if (!(R > R_min))
        fail(Errc::ParameterOutOfRange, "R must exceed 2 sigma^2/(1-a^2) = " + std::to_string(R_min), std::nullopt, R);
    ContinuousMinorization c;
    c.R = R;
    c.k_half_width = std::sqrt(R);
    c.shift = std::abs(m.a) * c.k_half_width;
    c.sigma = m.sigma;
    c.alpha = 2.0 * detail::simpson([&](double y) { return gaussian_density(y + c.shift, 0.0, m.sigma); }, 0.0,
                                    c.k_half_width, 4000);
    return c;
}

// Closed-form drift plus the continuous minorization, in the finite
// certificate types (K and nu left empty: they live on the real line).
inline ConvergenceCertificate ar1_certificate(const Ar1Model& m, std::optional<double> R = std::nullopt,
                                              std::optional<double> alpha0 = std::nullopt,
                                              std::optional<double> gamma0 = std::nullopt) {
    const DriftCertificate drift = ar1_drift(m);
    const ContinuousMinorization cm = ar1_minorization(m, R);
    MinorizationCertificate minor;
    minor.R = cm.R;
    minor.alpha = cm.alpha;
    return hairer_mattingly_constants(drift, minor, alpha0, gamma0);
}

// ---------------------------------------------------------------------------
// Harris recurrence diagnostics

struct HarrisDiagnostics {
    double hit_fraction = 0.0;
    double mean_hitting_estimate = 0.0;  // mean of min(tau_A, cap)
    std::size_t censored = 0;            // replicas that never hit A within cap
    bool censoring = false;
};

inline HarrisDiagnostics harris_diagnostics(const DensityKernel& kernel, double x0, double lo, double hi,
                                            std::size_t cap, std::size_t replicas, const RngStream& rng) {
    if (cap < 1) fail(Errc::InvalidArgument, "cap must be at least 1");
    if (replicas < 1) fail(Errc::InvalidArgument, "need at least one replica");
    std::vector<std::size_t> tau(replicas, 0);
    std::vector<char> hit(replicas, 0);
    parallel_for(replicas, [&](std::size_t r) {
        RngStream s = rng.derive(r);
        double x = x0;
        for (std::size_t n = 1; n <= cap; ++n) {
            x = kernel.sampler(x, s);
            if (x >= lo && x <= hi) {
                tau[r] = n;
                hit[r] = 1;
                return;
            }
        }
        tau[r] = cap;
    });
    HarrisDiagnostics d;
    double sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t r = 0; r < replicas; ++r) {
        sum += static_cast<double>(tau[r]);
        hits += hit[r] ? 1 : 0;
    }
    d.hit_fraction = static_cast<double>(hits) / static_cast<double>(replicas);
    d.mean_hitting_estimate = sum / static_cast<double>(replicas);
    d.censored = replicas - hits;
    d.censoring = d.censored > 0;
    return d;
}

// ---------------------------------------------------------------------------
// Presets: "ar1:a=0.5,sigma=1", "gaussian-walk:sigma=1", "noisy-map:logistic,r=3.2,sigma=0.1"

struct KernelPreset {
    DensityKernel kernel;
    std::optional<Ar1Model> ar1;
    double default_L = 10.0;
    std::map<std::string, double> params;
};

inline KernelPreset parse_kernel_preset(const std::string& spec) {
    const auto colon = spec.find(':');
    const std::string name = spec.substr(0, colon);
    std::map<std::string, double> params;
    std::string map_name;
    if (colon != std::string::npos) {
        std::string rest = spec.substr(colon + 1);
        std::size_t pos = 0;
        while (pos <= rest.size()) {
            const auto comma = rest.find(',', pos);
            const std::string item = rest.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
            if (!item.empty()) {
                const auto eq = item.find('=');
                if (eq == std::string::npos) {
                    map_name = item;
                } else {
                    try {
                        params[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
                    } catch (const std::exception&) {
                        fail(Errc::ParseError, "bad number in kernel preset: " + item);
                    }
                }
            }
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
    }
    auto get = [&](const std::string& k, double def) {
        auto it = params.find(k);
        return it == params.end() ? def : it->second;
    };
    KernelPreset p;
    p.params = params;
    if (name == "ar1") {
        Ar1Model m{get("a", 0.5), get("sigma", 1.0)};
        p.kernel = ar1_kernel(m);
        p.ar1 = m;
        p.default_L = std::abs(m.a) < 1.0 ? ar1_default_L(m) : 10.0 * m.sigma;
    } else if (name == "gaussian-walk") {
        const double sigma = get("sigma", 1.0);
        p.kernel = gaussian_walk_kernel(sigma);
        p.default_L = 10.0 * sigma;
    } else if (name == "noisy-map") {
        if (!map_name.empty() && map_name != "logistic")
            fail(Errc::ParseError, "unknown map '" + map_name + "' (supported: logistic)");
        const double r = get("r", 3.2);
        const double sigma = get("sigma", 0.1);
        p.kernel = noisy_map_kernel([r](double x) { return r * x * (1.0 - x); }, sigma, "noisy-map:logistic");
        p.default_L = 2.0;
    } else {
        fail(Errc::ParseError, "unknown kernel preset '" + name + "'");
    }
    return p;
}

} // namespace mcmclab
