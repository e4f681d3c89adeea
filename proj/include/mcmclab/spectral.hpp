#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "markov_core.hpp"

namespace mcmclab {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;

struct SpectralReport {
    std::vector<Complex> eigenvalues;  // with multiplicity, sorted by modulus descending
    double rho = 0.0;
    double gap = 1.0;
    ProbabilityVector pi;
    Matrix pi0;                        // 1 pi
    std::size_t unit_modulus_count = 0;
};

struct SpectralProjector {
    Complex lambda;
    ComplexMatrix projector;
};

namespace detail {

inline void sort_spectrum(std::vector<Complex>& ev) {
    std::sort(ev.begin(), ev.end(), [](const Complex& a, const Complex& b) {
        const double ma = std::abs(a), mb = std::abs(b);
        if (std::abs(ma - mb) > 1e-12) return ma > mb;
        if (std::abs(a.real() - b.real()) > 1e-12) return a.real() > b.real();
        return a.imag() > b.imag();
    });
}

} // namespace detail

// All eigenvalues of P (no irreducibility requirement).
inline std::vector<Complex> eigenvalues(const StochasticMatrix& P) {
    Eigen::EigenSolver<Matrix> es(P.matrix(), false);
    if (es.info() != Eigen::Success) fail(Errc::EigensolverFailure, "QR iteration did not converge");
    std::vector<Complex> ev(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
    detail::sort_spectrum(ev);
    return ev;
}

inline SpectralReport full_spectrum(const StochasticMatrix& P) {
    SpectralReport r;
    r.eigenvalues = eigenvalues(P);
    if (!is_irreducible(P)) fail(Errc::NotIrreducible, "spectral gap requires an irreducible chain");

    std::size_t one = 0;
    for (std::size_t i = 1; i < r.eigenvalues.size(); ++i)
        if (std::abs(r.eigenvalues[i] - 1.0) < std::abs(r.eigenvalues[one] - 1.0)) one = i;
    r.rho = 0.0;
    for (std::size_t i = 0; i < r.eigenvalues.size(); ++i) {
        if (i == one) continue;
        if (std::abs(r.eigenvalues[i] - 1.0) <= 1e-8)
            fail(Errc::NotIrreducible, "eigenvalue 1 is not simple");
        r.rho = std::max(r.rho, std::abs(r.eigenvalues[i]));
    }
    r.gap = 1.0 - r.rho;
    for (const auto& l : r.eigenvalues)
        if (std::abs(std::abs(l) - 1.0) <= 1e-8) ++r.unit_modulus_count;
    r.pi = invariant_distribution(P);
    const auto n = static_cast<Eigen::Index>(P.size());
    r.pi0 = Vector::Ones(n) * r.pi.weights().transpose();
    return r;
}

namespace detail {

struct EigenBasis {
    Eigen::VectorXcd lambda;
    ComplexMatrix S;
    ComplexMatrix S_inv;
    double condition = 0.0;
};

inline EigenBasis eigen_basis(const StochasticMatrix& P, double max_condition = 1e8) {
    Eigen::EigenSolver<Matrix> es(P.matrix(), true);
    if (es.info() != Eigen::Success) fail(Errc::EigensolverFailure, "QR iteration did not converge");
    EigenBasis b;
    b.lambda = es.eigenvalues();
    b.S = es.eigenvectors();
    Eigen::JacobiSVD<ComplexMatrix> svd(b.S);
    const auto& sv = svd.singularValues();
    const double smin = sv(sv.size() - 1);
    b.condition = smin > 0.0 ? sv(0) / smin : INFINITY;
    if (!(b.condition <= max_condition))
        fail(Errc::NonDiagonalizable, "eigenvector matrix is ill-conditioned; use direct powering", std::nullopt,
             b.condition);
    b.S_inv = b.S.inverse();
    return b;
}

} // namespace detail

// Right eigenvector times left eigenvector, one projector per eigenvalue copy.
inline std::vector<SpectralProjector> spectral_projectors(const StochasticMatrix& P) {
    auto b = detail::eigen_basis(P);
    std::vector<SpectralProjector> out;
    for (Eigen::Index j = 0; j < b.lambda.size(); ++j)
        out.push_back({b.lambda(j), b.S.col(j) * b.S_inv.row(j)});
    return out;
}

// P^n = sum_j lambda_j^n Pi_j. Throws NonDiagonalizable when the eigenbasis is
// too ill-conditioned to trust (cond > 1e8); callers fall back to matrix_power.
inline Matrix dunford_power(const StochasticMatrix& P, std::size_t n) {
    const auto N = static_cast<Eigen::Index>(P.size());
    if (n == 0) return Matrix::Identity(N, N);
    auto b = detail::eigen_basis(P);
    Eigen::VectorXcd ln(N);
    for (Eigen::Index j = 0; j < N; ++j) ln(j) = std::pow(b.lambda(j), static_cast<int>(n));
    return (b.S * ln.asDiagonal() * b.S_inv).real();
}

struct BoundWithExact {
    double bound = 0.0;
    double exact = 0.0;
};

inline BoundWithExact reversible_convergence_bound(const StochasticMatrix& P, const ProbabilityVector& nu,
                                                   const Vector& f, std::size_t n) {
    check_dim(P, nu.weights().size(), "nu");
    check_dim(P, f.size(), "f");
    const auto report = classify(P);
    if (!report.reversible_vector) fail(Errc::NotReversible, "chain has no reversible vector");
    const SpectralReport spec = full_spectrum(P);
    const Vector& pi = spec.pi.weights();
    for (Eigen::Index x = 0; x < pi.size(); ++x)
        if (pi(x) <= 0.0) fail(Errc::ZeroPiEntry, "invariant weight is zero", static_cast<std::size_t>(x));

    const Vector diff = nu.weights() - pi;
    const double l1 = diff.lpNorm<1>();
    const double sup_ratio = (nu.weights().cwiseQuotient(pi).array() - 1.0).abs().maxCoeff();
    BoundWithExact out;
    out.bound = std::pow(spec.rho, static_cast<double>(n)) * f.lpNorm<Eigen::Infinity>() * std::sqrt(l1 * sup_ratio);
    const Vector nuPn = evolve_measure(nu.as_signed(), P, n).weights();
    out.exact = std::abs(nuPn.dot(f) - pi.dot(f));
    return out;
}

struct UniformNuBounds {
    double delta = 0.0;        // pi(X0 complement)
    double c = 0.0;            // max pi / min pi - 1 on X0
    double l1_bound = 0.0;     // 2 delta + c
    double sup_bound = 0.0;    // max{1, (c + delta)/(1 - delta)}
    double exact_l1 = 0.0;
    double exact_sup = 0.0;
};

// nu = uniform law on X0. The sup bound uses (c + delta)/(1 - delta): on X0,
// nu/pi = 1/(|X0| pi(x)) <= (1 + c)/pi(X0).
inline UniformNuBounds uniform_nu_bounds(const ProbabilityVector& pi, const StateSet& X0) {
    if (X0.empty()) fail(Errc::EmptySet, "X0 is empty");
    const std::size_t n = pi.size();
    auto in = detail::membership(n, X0);
    double mass = 0.0, pmax = 0.0, pmin = INFINITY;
    for (std::size_t x = 0; x < n; ++x) {
        if (!in[x]) continue;
        if (pi[x] <= 0.0) fail(Errc::ZeroPiEntry, "pi vanishes on X0", x);
        mass += pi[x];
        pmax = std::max(pmax, pi[x]);
        pmin = std::min(pmin, pi[x]);
    }
    UniformNuBounds b;
    b.delta = std::max(0.0, 1.0 - mass);
    b.c = pmax / pmin - 1.0;
    b.l1_bound = 2.0 * b.delta + b.c;
    b.sup_bound = b.delta < 1.0 ? std::max(1.0, (b.c + b.delta) / (1.0 - b.delta)) : INFINITY;

    const ProbabilityVector nu = ProbabilityVector::uniform_on(n, X0);
    b.exact_l1 = (nu.weights() - pi.weights()).lpNorm<1>();
    for (std::size_t x = 0; x < n; ++x)
        if (pi[x] > 0.0) b.exact_sup = std::max(b.exact_sup, std::abs(nu[x] / pi[x] - 1.0));
    return b;
}

// Lower estimate of rho for a reversible chain: Rayleigh quotients in the
// pi-inner product over random probes orthogonal to constants, refined by
// power iteration. Works in symmetric coordinates w = sqrt(pi) v.
inline double rayleigh_rho(const StochasticMatrix& P, std::size_t trials, RngStream& rng,
                           std::size_t max_iterations = 20000) {
    const auto report = classify(P);
    if (!report.reversible_vector) fail(Errc::NotReversible, "chain has no reversible vector");
    const Vector& alpha = *report.reversible_vector;
    const auto n = static_cast<Eigen::Index>(P.size());
    if (n < 2) return 0.0;
    for (Eigen::Index x = 0; x < n; ++x)
        if (alpha(x) <= 0.0) fail(Errc::ZeroPiEntry, "reversible vector vanishes", static_cast<std::size_t>(x));
    const Vector s = alpha.cwiseSqrt();
    const Matrix A = s.asDiagonal() * P.matrix() * s.cwiseInverse().asDiagonal();
    const Vector u0 = s / s.norm();

    auto project = [&](Vector& w) { w -= w.dot(u0) * u0; };
    auto score = [&](const Vector& w, const Vector& Aw) {
        const double nn = w.squaredNorm();
        if (nn <= 0.0) return 0.0;
        return std::max(std::abs(w.dot(Aw)) / nn, Aw.norm() / std::sqrt(nn));
    };

    double best = 0.0;
    Vector w_best;
    for (std::size_t t = 0; t < std::max<std::size_t>(trials, 1); ++t) {
        Vector w(n);
        for (Eigen::Index i = 0; i < n; ++i) w(i) = rng.normal();
        project(w);
        if (w.norm() == 0.0) continue;
        w.normalize();
        Vector Aw = A * w;
        project(Aw);
        const double sc = score(w, Aw);
        if (sc >= best || w_best.size() == 0) {
            best = std::max(best, sc);
            w_best = w;
        }
    }
    if (w_best.size() == 0) return best;

    Vector w = w_best;
    double prev = -1.0;
    for (std::size_t it = 0; it < max_iterations; ++it) {
        Vector Aw = A * w;
        project(Aw);
        const double sc = score(w, Aw);
        best = std::max(best, sc);
        const double norm = Aw.norm();
        if (norm == 0.0) break;
        if (std::abs(sc - prev) < 1e-15) break;
        prev = sc;
        w = Aw / norm;
    }
    return best;
}

} // namespace mcmclab
