#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "markov_core.hpp"

namespace mcmclab {

enum class DriftKind { geometric, bounded, setwise };

inline const char* drift_kind_name(DriftKind k) {
    switch (k) {
    case DriftKind::geometric: return "geometric";
    case DriftKind::bounded: return "bounded";
    case DriftKind::setwise: return "setwise";
    }
    return "unknown";
}

// geometric: LV <= -cV + d;  bounded: LV <= cV + d;  setwise: LV <= -c f + d 1_K.
// V may be empty for closed-form certificates on continuous spaces.
struct DriftCertificate {
    DriftKind kind = DriftKind::geometric;
    double c = 0.0;
    double d = 0.0;
    Vector V;
    Vector f;      // setwise only
    StateSet K;    // setwise only
};

struct MinorizationCertificate {
    double R = 0.0;
    StateSet K;
    double alpha = 0.0;
    Vector nu;
};

struct ConvergenceCertificate {
    double alpha0 = 0.0;
    double gamma0 = 0.0;
    double beta = 0.0;
    double gamma_bar = 1.0;
    double M_bound = 0.0;            // max{1+gamma, 2+beta d}/(1-gamma_bar)
    std::optional<double> M_sup;     // sup form over the values of V, when V is known
    double gamma = 1.0;              // 1 - c
    double d_used = 0.0;             // d after flooring at 1e-12
};

inline Vector generator_apply(const StochasticMatrix& P, const Vector& V) {
    check_dim(P, V.size(), "V");
    return P.matrix() * V - V;
}

struct DynkinAudit {
    double lhs = 0.0;
    double rhs = 0.0;
    double gap = 0.0;
};

// E_x[V(X_n)] against V(x) + sum_{m<n} E_x[(LV)(X_m)].
inline DynkinAudit dynkin_audit(const StochasticMatrix& P, const Vector& V, std::size_t x, std::size_t n) {
    check_dim(P, V.size(), "V");
    if (x >= P.size()) fail(Errc::InvalidArgument, "state out of range", x);
    const Vector LV = generator_apply(P, V);
    Vector mu = Vector::Zero(V.size());
    mu(static_cast<Eigen::Index>(x)) = 1.0;
    const Matrix Pt = P.matrix().transpose();
    DynkinAudit a;
    a.rhs = V(static_cast<Eigen::Index>(x));
    for (std::size_t m = 0; m < n; ++m) {
        a.rhs += mu.dot(LV);
        mu = Pt * mu;
    }
    a.lhs = mu.dot(V);
    a.gap = std::abs(a.lhs - a.rhs);
    return a;
}

// Largest violation of the declared inequality over all states (<= 0 means it holds).
inline double drift_violation(const StochasticMatrix& P, const DriftCertificate& cert) {
    check_dim(P, cert.V.size(), "V");
    const Vector LV = generator_apply(P, cert.V);
    double worst = -INFINITY;
    for (Eigen::Index x = 0; x < LV.size(); ++x) {
        double rhs = 0.0;
        switch (cert.kind) {
        case DriftKind::geometric: rhs = -cert.c * cert.V(x) + cert.d; break;
        case DriftKind::bounded: rhs = cert.c * cert.V(x) + cert.d; break;
        case DriftKind::setwise: {
            const bool inK = std::find(cert.K.begin(), cert.K.end(), static_cast<std::size_t>(x)) != cert.K.end();
            rhs = -cert.c * cert.f(x) + (inK ? cert.d : 0.0);
            break;
        }
        }
        worst = std::max(worst, LV(x) - rhs);
    }
    return worst;
}

inline bool verify_drift(const StochasticMatrix& P, const DriftCertificate& cert, double tol = 1e-9) {
    if (cert.V.size() == 0) return false;
    for (Eigen::Index x = 0; x < cert.V.size(); ++x)
        if (cert.V(x) < 0.0) return false;
    return drift_violation(P, cert) <= tol;
}

// E_x[V(X_n)] <= (1+c)^n V(x) + ((1+c)^n - 1) d / c for a bounded-growth certificate.
inline double subexponential_bound(const StochasticMatrix& P, const DriftCertificate& cert, std::size_t x,
                                   std::size_t n) {
    if (cert.kind != DriftKind::bounded || !verify_drift(P, cert))
        fail(Errc::CertificateInvalid, "subexponential bound needs a verified bounded-growth certificate");
    if (x >= P.size()) fail(Errc::InvalidArgument, "state out of range", x);
    const double g = std::pow(1.0 + cert.c, static_cast<double>(n));
    const double tail = cert.c > 0.0 ? (g - 1.0) * cert.d / cert.c : static_cast<double>(n) * cert.d;
    return g * cert.V(static_cast<Eigen::Index>(x)) + tail;
}

// d pivots on the states with the smallest V (pivot_quantile of them, at least
// one, plus every state with V = 0); c is then the largest constant making the
// inequality hold everywhere, capped at 1. When that c is not positive the
// pivot set is doubled until it is. If even the full set fails (the largest
// drift sits at a state with V > 0), d falls back to twice the largest drift.
inline DriftCertificate fit_geometric_drift(const StochasticMatrix& P, const Vector& V, double pivot_quantile = 0.05) {
    check_dim(P, V.size(), "V");
    if (V.size() == 0 || V.maxCoeff() == V.minCoeff()) fail(Errc::NoValidDrift, "V is constant");
    if (V.minCoeff() < 0.0) fail(Errc::InvalidArgument, "V must be nonnegative");
    const Vector r = generator_apply(P, V);
    const auto n = static_cast<std::size_t>(V.size());
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return V(static_cast<Eigen::Index>(a)) < V(static_cast<Eigen::Index>(b));
    });
    auto pivots = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(pivot_quantile * double(n))));
    double c = 0.0, d = 0.0;
    while (true) {
        d = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto x = static_cast<Eigen::Index>(order[i]);
            if (i < pivots || V(x) == 0.0) d = std::max(d, r(x));
        }
        c = INFINITY;
        for (Eigen::Index x = 0; x < V.size(); ++x)
            if (V(x) > 0.0) c = std::min(c, (d - r(x)) / V(x));
        if (c > 0.0 || pivots >= n) break;
        pivots = std::min(n, 2 * pivots);
    }
    if (!(c > 0.0) && r.maxCoeff() > 0.0) {
        d = 2.0 * r.maxCoeff();
        c = INFINITY;
        for (Eigen::Index x = 0; x < V.size(); ++x)
            if (V(x) > 0.0) c = std::min(c, (d - r(x)) / V(x));
    }
    if (!(c > 0.0)) fail(Errc::NoValidDrift, "no positive c satisfies the drift inequality", std::nullopt, c);
    c = std::min(c, 1.0);

    DriftCertificate cert{DriftKind::geometric, c, d, V, {}, {}};
    if (!verify_drift(P, cert)) fail(Errc::NoValidDrift, "fitted certificate failed verification");
    return cert;
}

// Drift for the T-step chain: c_T = 1 - (1-c)^T, d_T = c_T d / c.
inline DriftCertificate accelerate_drift(const DriftCertificate& cert, std::size_t T) {
    if (cert.kind != DriftKind::geometric) fail(Errc::InvalidArgument, "acceleration needs a geometric certificate");
    if (T < 1) fail(Errc::InvalidArgument, "T must be at least 1");
    if (!(cert.c > 0.0)) fail(Errc::CertificateInvalid, "c must be positive");
    DriftCertificate out = cert;
    out.c = 1.0 - std::pow(1.0 - cert.c, static_cast<double>(T));
    out.d = out.c * cert.d / cert.c;
    return out;
}

// nu~(y) = min over K of p_xy; alpha = sum nu~. The decomposition is the
// tightest possible for this K.
inline MinorizationCertificate find_minorization(const StochasticMatrix& P, const DriftCertificate& cert, double R) {
    check_dim(P, cert.V.size(), "V");
    if (!(cert.c > 0.0)) fail(Errc::CertificateInvalid, "drift constant c must be positive");
    if (!(R > 2.0 * cert.d / cert.c))
        fail(Errc::ParameterOutOfRange, "R must exceed 2d/c = " + std::to_string(2.0 * cert.d / cert.c), std::nullopt, R);
    MinorizationCertificate m;
    m.R = R;
    for (Eigen::Index x = 0; x < cert.V.size(); ++x)
        if (cert.V(x) < R) m.K.push_back(static_cast<std::size_t>(x));
    if (m.K.empty()) fail(Errc::EmptyK, "no state has V < R");
    const auto n = static_cast<Eigen::Index>(P.size());
    Vector nu = Vector::Constant(n, INFINITY);
    for (auto x : m.K) nu = nu.cwiseMin(P.matrix().row(static_cast<Eigen::Index>(x)).transpose());
    m.alpha = nu.sum();
    if (!(m.alpha > 0.0))
        fail(Errc::AlphaZero, "rows of K have disjoint supports; accelerate the chain (increase T)");
    m.nu = nu / m.alpha;
    return m;
}

inline bool verify_minorization(const StochasticMatrix& P, const DriftCertificate& drift,
                                const MinorizationCertificate& minor, double tol = 1e-12) {
    if (static_cast<std::size_t>(minor.nu.size()) != P.size()) return false;
    if (!(minor.alpha > 0.0 && minor.alpha <= 1.0 + 1e-12)) return false;
    if (std::abs(minor.nu.sum() - 1.0) > 1e-9 || minor.nu.minCoeff() < 0.0) return false;
    if (!(minor.R > 2.0 * drift.d / drift.c)) return false;
    for (Eigen::Index x = 0; x < drift.V.size(); ++x) {
        const bool listed = std::find(minor.K.begin(), minor.K.end(), static_cast<std::size_t>(x)) != minor.K.end();
        if (listed != (drift.V(x) < minor.R)) return false;
    }
    for (auto x : minor.K)
        for (Eigen::Index y = 0; y < minor.nu.size(); ++y)
            if (P(x, static_cast<std::size_t>(y)) < minor.alpha * minor.nu(y) - tol) return false;
    return true;
}

inline ConvergenceCertificate hairer_mattingly_constants(const DriftCertificate& drift,
                                                         const MinorizationCertificate& minor,
                                                         std::optional<double> alpha0 = std::nullopt,
                                                         std::optional<double> gamma0 = std::nullopt) {
    if (drift.kind != DriftKind::geometric) fail(Errc::CertificateInvalid, "need a geometric drift certificate");
    ConvergenceCertificate cc;
    cc.gamma = 1.0 - drift.c;
    cc.d_used = std::max(drift.d, 1e-12);
    const double alpha = minor.alpha;
    const double R = minor.R;
    const double lower_gamma0 = cc.gamma + 2.0 * cc.d_used / R;

    cc.alpha0 = alpha0.value_or(alpha / 2.0);
    cc.gamma0 = gamma0.value_or((lower_gamma0 + 1.0) / 2.0);
    if (!(cc.alpha0 > 0.0))
        fail(Errc::ParameterOutOfRange, "alpha0 must be positive", std::nullopt, cc.alpha0);
    if (!(cc.alpha0 < alpha))
        fail(Errc::ParameterOutOfRange, "alpha0 must be smaller than alpha = " + std::to_string(alpha), std::nullopt,
             cc.alpha0);
    if (!(lower_gamma0 < 1.0))
        fail(Errc::ParameterOutOfRange, "gamma + 2d/R must be below 1 (R too small)", std::nullopt, lower_gamma0);
    if (!(cc.gamma0 > lower_gamma0))
        fail(Errc::ParameterOutOfRange, "gamma0 must exceed gamma + 2d/R = " + std::to_string(lower_gamma0),
             std::nullopt, cc.gamma0);
    if (!(cc.gamma0 < 1.0)) fail(Errc::ParameterOutOfRange, "gamma0 must be below 1", std::nullopt, cc.gamma0);

    cc.beta = cc.alpha0 / cc.d_used;
    const double Rb = R * cc.beta;
    cc.gamma_bar = std::max(1.0 - (alpha - cc.alpha0), (2.0 + Rb * cc.gamma0) / (2.0 + Rb));
    cc.M_bound = std::max(1.0 + cc.gamma, 2.0 + cc.beta * cc.d_used) / (1.0 - cc.gamma_bar);
    if (drift.V.size() > 0) {
        double s = 0.0;
        for (Eigen::Index x = 0; x < drift.V.size(); ++x) {
            const double v = drift.V(x);
            s = std::max(s, (2.0 + cc.beta * ((1.0 + cc.gamma) * v + cc.d_used)) / (1.0 + cc.beta * v));
        }
        cc.M_sup = s / (1.0 - cc.gamma_bar);
    }
    return cc;
}

// sup |f| / (1 + V)
inline double weighted_norm(const Vector& f, const Vector& V, double beta = 1.0) {
    if (f.size() != V.size()) fail(Errc::DimensionMismatch, "f and V differ in length");
    return (f.array().abs() / (1.0 + beta * V.array())).maxCoeff();
}

// sum (1 + beta V)|mu - nu|; beta = 0 gives the total variation (l1) distance.
inline double weighted_distance(const Vector& mu, const Vector& nu, const Vector& V, double beta) {
    if (mu.size() != nu.size() || mu.size() != V.size())
        fail(Errc::DimensionMismatch, "measures and V differ in length");
    return ((1.0 + beta * V.array()) * (mu - nu).array().abs()).sum();
}

struct ContractionAudit {
    double worst_ratio = 0.0;
    std::size_t pairs = 0;
    bool passed = true;
};

// Random pairs: Dirac pairs (the extreme points of the problem) alternating
// with random full-support mixtures.
inline ContractionAudit contraction_audit(const StochasticMatrix& P, const DriftCertificate& drift,
                                          const MinorizationCertificate& minor, const ConvergenceCertificate& cert,
                                          std::size_t trials, RngStream& rng) {
    if (!verify_drift(P, drift)) fail(Errc::CertificateInvalid, "drift inequality does not hold for this chain");
    if (!verify_minorization(P, drift, minor))
        fail(Errc::CertificateInvalid, "minorization does not hold for this chain");
    const auto n = static_cast<Eigen::Index>(P.size());
    const Matrix Pt = P.matrix().transpose();
    const Vector& V = drift.V;
    ContractionAudit a;
    for (std::size_t t = 0; t < trials; ++t) {
        Vector mu = Vector::Zero(n), nu = Vector::Zero(n);
        switch (t % 3) {
        case 0:
            mu(static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(n)))) = 1.0;
            nu(static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(n)))) = 1.0;
            break;
        case 1:
            for (Eigen::Index i = 0; i < n; ++i) {
                mu(i) = -std::log1p(-rng.uniform());
                nu(i) = -std::log1p(-rng.uniform());
            }
            mu /= mu.sum();
            nu /= nu.sum();
            break;
        default: {
            // Two-point mixtures: one mass placed inside K, one far out.
            const auto k = static_cast<Eigen::Index>(minor.K[rng.index(minor.K.size())]);
            const auto y = static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(n)));
            const double w = rng.uniform();
            mu(k) += w;
            mu(y) += 1.0 - w;
            nu(static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(n)))) = 1.0;
            break;
        }
        }
        const double before = weighted_distance(mu, nu, V, cert.beta);
        if (before <= 0.0) continue;
        const double after = weighted_distance(Pt * mu, Pt * nu, V, cert.beta);
        const double ratio = after / before;
        a.worst_ratio = std::max(a.worst_ratio, ratio);
        ++a.pairs;
    }
    a.passed = a.worst_ratio <= cert.gamma_bar + 1e-9;
    return a;
}

struct ConvergencePoint {
    std::size_t n = 0;
    double exact = 0.0;       // |E_x f(X_n) - pi(f)|
    double bound = 0.0;       // (1 + V(x)) M gamma_bar^n ||f - pi(f)||_{1+V}
    double bound_beta = 0.0;  // (1 + beta V(x)) M gamma_bar^n ||f - pi(f)||_{1+beta V}
};

// Exact error and both bound forms for n = 0..n_max from state x, with M = M_bound.
inline std::vector<ConvergencePoint> convergence_bound_series(const StochasticMatrix& P, const DriftCertificate& drift,
                                                              const MinorizationCertificate& minor,
                                                              const ConvergenceCertificate& cert, const Vector& f,
                                                              std::size_t x, std::size_t n_max) {
    check_dim(P, f.size(), "f");
    if (x >= P.size()) fail(Errc::InvalidArgument, "state out of range", x);
    if (!verify_drift(P, drift)) fail(Errc::CertificateInvalid, "drift inequality does not hold for this chain");
    if (!verify_minorization(P, drift, minor))
        fail(Errc::CertificateInvalid, "minorization does not hold for this chain");
    const ProbabilityVector pi = invariant_distribution(P);
    const double pif = pi.weights().dot(f);
    const Vector fhat = f.array() - pif;
    const Vector& V = drift.V;
    const auto xi = static_cast<Eigen::Index>(x);
    const double M = cert.M_bound;
    const double norm1 = weighted_norm(fhat, V, 1.0);
    const double normb = weighted_norm(fhat, V, cert.beta);

    std::vector<ConvergencePoint> out;
    Vector g = f;
    for (std::size_t n = 0; n <= n_max; ++n) {
        const double decay = M * std::pow(cert.gamma_bar, static_cast<double>(n));
        out.push_back({n, std::abs(g(xi) - pif), (1.0 + V(xi)) * decay * norm1,
                       (1.0 + cert.beta * V(xi)) * decay * normb});
        g = P.matrix() * g;
    }
    return out;
}

inline ConvergencePoint convergence_bound(const StochasticMatrix& P, const DriftCertificate& drift,
                                          const MinorizationCertificate& minor, const ConvergenceCertificate& cert,
                                          const Vector& f, std::size_t x, std::size_t n) {
    return convergence_bound_series(P, drift, minor, cert, f, x, n).back();
}

} // namespace mcmclab
