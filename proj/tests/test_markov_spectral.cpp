#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "mcmclab/mcmclab.hpp"

using namespace mcmclab;

namespace {

StochasticMatrix two_state() {
    Matrix m(2, 2);
    m << 1.0 / 3, 2.0 / 3, 2.0 / 3, 1.0 / 3;
    return StochasticMatrix::validate(m);
}

StochasticMatrix flip() {
    Matrix m(2, 2);
    m << 0, 1, 1, 0;
    return StochasticMatrix::validate(m);
}

StochasticMatrix three_cycle() {
    Matrix m = Matrix::Zero(3, 3);
    m(0, 1) = m(1, 2) = m(2, 0) = 1.0;
    return StochasticMatrix::validate(m);
}

// Random chain with a guaranteed positive diagonal, so it is aperiodic when irreducible.
StochasticMatrix random_chain(std::size_t n, RngStream& rng, double density = 1.0) {
    Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = (i == j || rng.uniform() < density) ? rng.uniform() : 0.0;
        m(i, (i + 1) % m.cols()) += 0.1;
        m.row(i) /= m.row(i).sum();
    }
    return StochasticMatrix::validate(m);
}

double binom_half(int n, int k) {
    return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) - n * std::log(2.0));
}

} // namespace

TEST(Validate, AcceptsFlipAndIdentity) {
    EXPECT_EQ(flip().size(), 2u);
    EXPECT_EQ(StochasticMatrix::validate(Matrix::Identity(3, 3)).size(), 3u);
}

TEST(Validate, RejectsBadRowSum) {
    Matrix m(2, 2);
    m << 0.5, 0.4, 0.5, 0.5;
    try {
        StochasticMatrix::validate(m, 1e-9);
        FAIL() << "expected RowSumOutOfTolerance";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::RowSumOutOfTolerance);
        EXPECT_EQ(e.index(), std::optional<std::size_t>(0));
        ASSERT_TRUE(e.value().has_value());
        EXPECT_NEAR(*e.value(), 0.9, 1e-15);
    }
}

TEST(Validate, RejectsNegativeEntryAndNonSquare) {
    Matrix m(2, 2);
    m << 1.1, -0.1, 0.5, 0.5;
    EXPECT_THROW(StochasticMatrix::validate(m), Error);
    try {
        StochasticMatrix::validate(m);
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::NegativeEntry);
    }
    try {
        StochasticMatrix::validate(Matrix::Constant(2, 3, 1.0 / 3));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::DimensionMismatch);
    }
}

TEST(Validate, RenormalizesNearlyStochasticRowsExactly) {
    Matrix m(2, 2);
    m << 0.3, 0.7 + 4e-10, 0.1, 0.9;
    const auto P = StochasticMatrix::validate(m);
    EXPECT_EQ(P.matrix().row(0).sum(), 1.0);
}

TEST(Validate, ProductOfStochasticMatricesIsStochastic) {
    RngStream rng(11, 0);
    for (int t = 0; t < 20; ++t) {
        const auto P = random_chain(7, rng, 0.5);
        const auto Q = random_chain(7, rng, 0.5);
        EXPECT_NO_THROW(StochasticMatrix::validate(P.matrix() * Q.matrix(), 1e-9));
    }
}

TEST(Evolve, ExamplesFromTwoStateChains) {
    const auto mu = ProbabilityVector::dirac(2, 0);
    const auto a = evolve_measure(mu, flip(), 1);
    EXPECT_DOUBLE_EQ(a[0], 0.0);
    EXPECT_DOUBLE_EQ(a[1], 1.0);
    const auto b = evolve_measure(mu, two_state(), 2);
    EXPECT_NEAR(b[0], 5.0 / 9, 1e-15);
    EXPECT_NEAR(b[1], 4.0 / 9, 1e-15);
    const auto c = evolve_measure(mu, two_state(), 0);
    EXPECT_EQ(c[0], 1.0);
}

TEST(Evolve, SignedMassIsConserved) {
    RngStream rng(3, 1);
    const auto P = random_chain(9, rng);
    Vector w(9);
    for (Eigen::Index i = 0; i < 9; ++i) w(i) = rng.uniform() - 0.5;
    SignedMeasure mu(w);
    const double m0 = mu.mass();
    for (std::size_t n = 1; n <= 20; ++n) {
        mu = evolve_measure(mu, P, 1);
        EXPECT_NEAR(mu.mass(), m0, 1e-12 * static_cast<double>(n));
    }
}

TEST(Evolve, DimensionMismatchRaises) {
    try {
        evolve_measure(ProbabilityVector::dirac(3, 0), two_state(), 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::DimensionMismatch);
    }
}

TEST(ApplyToFunction, ConstantsAndHandProduct) {
    RngStream rng(5, 0);
    const auto P = random_chain(6, rng);
    const Vector one = Vector::Ones(6);
    EXPECT_LT((apply_to_function(P, one, 7) - one).lpNorm<Eigen::Infinity>(), 1e-14);
    Vector f(2);
    f << 1, -1;
    const Vector g = apply_to_function(two_state(), f, 1);
    EXPECT_NEAR(g(0), -1.0 / 3, 1e-15);
    EXPECT_NEAR(g(1), 1.0 / 3, 1e-15);
    EXPECT_EQ(apply_to_function(two_state(), f, 0), f);
}

TEST(Classify, PeriodsAndReversibility) {
    const auto r1 = classify(flip());
    EXPECT_TRUE(r1.irreducible);
    ASSERT_EQ(r1.periods.size(), 1u);
    EXPECT_EQ(r1.periods[0], 2u);
    EXPECT_FALSE(r1.aperiodic);

    const auto r3 = classify(three_cycle());
    EXPECT_TRUE(r3.irreducible);
    EXPECT_EQ(r3.periods[0], 3u);
    EXPECT_FALSE(r3.reversible_vector.has_value());

    const auto r2 = classify(two_state());
    EXPECT_TRUE(r2.irreducible);
    EXPECT_TRUE(r2.aperiodic);
    ASSERT_TRUE(r2.reversible_vector.has_value());
    EXPECT_NEAR((*r2.reversible_vector)(0), 0.5, 1e-15);
    EXPECT_NEAR((*r2.reversible_vector)(1), 0.5, 1e-15);
}

TEST(Classify, ReducibleChainPartition) {
    // 0 -> 1 <-> 2, 3 absorbing
    Matrix m = Matrix::Zero(4, 4);
    m(0, 0) = 0.5;
    m(0, 1) = 0.25;
    m(0, 3) = 0.25;
    m(1, 2) = 1.0;
    m(2, 1) = 1.0;
    m(3, 3) = 1.0;
    const auto r = classify(StochasticMatrix::validate(m));
    EXPECT_FALSE(r.irreducible);
    ASSERT_EQ(r.classes.size(), 3u);
    EXPECT_EQ(r.classes[0], StateSet({0}));
    EXPECT_EQ(r.classes[1], StateSet({1, 2}));
    EXPECT_EQ(r.classes[2], StateSet({3}));
    EXPECT_FALSE(r.closed_flags[0]);
    EXPECT_TRUE(r.closed_flags[1]);
    EXPECT_TRUE(r.closed_flags[2]);
    EXPECT_EQ(r.periods[1], 2u);
    EXPECT_EQ(r.periods[2], 1u);
}

TEST(Classify, ReversedPathIdentity) {
    for (std::size_t N : {4u, 6u}) {
        const auto P = ehrenfest_matrix(N);
        const auto r = classify(P);
        ASSERT_TRUE(r.reversible_vector.has_value());
        const Vector& a = *r.reversible_vector;
        const std::size_t n = P.size();
        // all paths of length 4
        for (std::size_t x0 = 0; x0 < n; ++x0)
            for (std::size_t x1 = 0; x1 < n; ++x1)
                for (std::size_t x2 = 0; x2 < n; ++x2)
                    for (std::size_t x3 = 0; x3 < n; ++x3) {
                        const double fwd = a(static_cast<Eigen::Index>(x0)) * P(x0, x1) * P(x1, x2) * P(x2, x3);
                        const double bwd = a(static_cast<Eigen::Index>(x3)) * P(x3, x2) * P(x2, x1) * P(x1, x0);
                        EXPECT_NEAR(fwd, bwd, 1e-12);
                    }
    }
}

TEST(Invariant, TwoStateEhrenfestKnight) {
    const auto pi2 = invariant_distribution(two_state());
    EXPECT_NEAR(pi2[0], 0.5, 1e-14);

    const auto pe = invariant_distribution(ehrenfest_matrix(10));
    for (int k = 0; k <= 10; ++k) EXPECT_NEAR(pe[static_cast<std::size_t>(k)], binom_half(10, k), 1e-12);

    const auto pk = invariant_distribution(knight_chain());
    const auto counts = knight_move_counts();
    for (std::size_t s = 0; s < 64; ++s) EXPECT_NEAR(pk[s], counts[s] / 336.0, 1e-12);
}

TEST(Invariant, ResidualAndStationarity) {
    RngStream rng(17, 0);
    for (int t = 0; t < 10; ++t) {
        const auto P = random_chain(12, rng, 0.4);
        const auto pi = invariant_distribution(P);
        EXPECT_LE(l1_residual(pi.weights(), P.matrix()), 1e-10);
        const auto pin = evolve_measure(pi, P, 100);
        EXPECT_LT((pin.weights() - pi.weights()).lpNorm<1>(), 1e-8);
    }
}

TEST(Invariant, ReducibleRaises) {
    try {
        invariant_distribution(StochasticMatrix::validate(Matrix::Identity(2, 2)));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::NotIrreducible);
    }
}

TEST(ReturnTimes, ClosedFormsAndFirstStepAgreement) {
    EXPECT_NEAR(mean_return_time(ehrenfest_matrix(10), 10), 1024.0, 1e-9 * 1024);
    EXPECT_NEAR(mean_return_time(knight_chain(), 0), 168.0, 1e-9 * 168);
    EXPECT_NEAR(mean_return_time(two_state(), 1), 2.0, 1e-12);
    RngStream rng(23, 0);
    for (int t = 0; t < 5; ++t) {
        const auto P = random_chain(10, rng, 0.5);
        for (std::size_t x = 0; x < 10; ++x) {
            const double a = mean_return_time(P, x);
            EXPECT_NEAR(mean_return_time_first_step(P, x), a, 1e-8 * a);
        }
    }
    const auto K = knight_chain();
    EXPECT_NEAR(mean_return_time_first_step(K, 0), 168.0, 1e-8 * 168);
}

TEST(Absorption, GamblersRuin) {
    const std::size_t N = 10;
    Matrix m = Matrix::Zero(N + 1, N + 1);
    m(0, 0) = m(N, N) = 1.0;
    for (std::size_t x = 1; x < N; ++x) {
        m(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(x - 1)) = 0.5;
        m(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(x + 1)) = 0.5;
    }
    const auto P = StochasticMatrix::validate(m);
    const Vector h = absorption_probability(P, {0, N}, N);
    for (std::size_t x = 0; x <= N; ++x) EXPECT_NEAR(h(static_cast<Eigen::Index>(x)), double(x) / N, 1e-12);
    try {
        absorption_probability(P, {0, 5}, 0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::NotAbsorbing);
        EXPECT_EQ(e.index(), std::optional<std::size_t>(5));
    }
}

TEST(FirstPassage, HandExamples) {
    const auto a = first_passage_law(flip(), 0, {1}, 5);
    EXPECT_DOUBLE_EQ(a.probabilities[0], 1.0);
    for (std::size_t m = 1; m < 5; ++m) EXPECT_EQ(a.probabilities[m], 0.0);

    const auto b = first_passage_law(two_state(), 0, {0}, 10);
    EXPECT_NEAR(b.probabilities[0], 1.0 / 3, 1e-15);
    EXPECT_NEAR(b.probabilities[1], 4.0 / 9, 1e-15);
    EXPECT_NEAR(b.probabilities[2], 4.0 / 27, 1e-15);

    const auto c = first_passage_law(ehrenfest_matrix(4), 2, {2}, 20);
    double s = c.residual;
    for (double q : c.probabilities) {
        EXPECT_GE(q, 0.0);
        s += q;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);

    EXPECT_THROW(first_passage_law(two_state(), 0, {}, 3), Error);
}

TEST(FirstPassage, RenewalIdentityOnRandomChains) {
    RngStream rng(29, 0);
    for (int t = 0; t < 5; ++t) {
        const auto P = random_chain(3 + static_cast<std::size_t>(t) * 3, rng, 0.5);
        for (std::size_t x = 0; x < P.size(); ++x) {
            const auto law = first_passage_law(P, x, {x}, 50);
            std::vector<double> diag(51);
            Matrix Pn = Matrix::Identity(static_cast<Eigen::Index>(P.size()), static_cast<Eigen::Index>(P.size()));
            for (std::size_t n = 0; n <= 50; ++n) {
                diag[n] = Pn(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(x));
                Pn = Pn * P.matrix();
            }
            for (std::size_t n = 1; n <= 50; ++n) {
                double conv = 0.0;
                for (std::size_t m = 1; m <= n; ++m) conv += law.probabilities[m - 1] * diag[n - m];
                EXPECT_NEAR(diag[n], conv, 1e-10);
            }
        }
    }
}

TEST(Coupling, StationaryStartAndBound) {
    const auto P = two_state();
    const auto pi = invariant_distribution(P);
    const RngStream rng(41, 0);
    const auto same = coupling_diagonal_time(P, pi, pi, 5, 2000, rng);
    for (double e : same.exact_l1) EXPECT_NEAR(e, 0.0, 1e-15);

    const auto r = coupling_diagonal_time(P, ProbabilityVector::dirac(2, 0), pi, 10, 20000, rng);
    ASSERT_EQ(r.tail.size(), 11u);
    for (std::size_t n = 0; n <= 10; ++n) {
        EXPECT_NEAR(r.exact_l1[n], std::pow(1.0 / 3, double(n)), 1e-14);
        EXPECT_LE(r.exact_l1[n], 2.0 * r.tail[n] + 3.0 * 2.0 * r.std_error[n] + 1e-15);
    }
    const auto z = coupling_diagonal_time(P, ProbabilityVector::dirac(2, 0), pi, 0, 100, rng);
    ASSERT_EQ(z.tail.size(), 1u);
    EXPECT_GE(z.tail[0], 0.0);
    EXPECT_LE(z.tail[0], 1.0);
}

TEST(Coupling, ReproducibleAcrossWorkerCounts) {
    const auto P = ehrenfest_matrix(6);
    const auto pi = invariant_distribution(P);
    const RngStream rng(43, 0);
    const auto nu = ProbabilityVector::dirac(7, 0);
    setenv("MCMCLAB_THREADS", "1", 1);
    const auto a = coupling_diagonal_time(P, nu, pi, 20, 5000, rng);
    setenv("MCMCLAB_THREADS", "4", 1);
    const auto b = coupling_diagonal_time(P, nu, pi, 20, 5000, rng);
    unsetenv("MCMCLAB_THREADS");
    EXPECT_EQ(a.tail, b.tail);
}

TEST(Spectrum, TwoStateAndThreeCycle) {
    const auto s = full_spectrum(two_state());
    ASSERT_EQ(s.eigenvalues.size(), 2u);
    EXPECT_NEAR(s.eigenvalues[0].real(), 1.0, 1e-12);
    EXPECT_NEAR(s.eigenvalues[1].real(), -1.0 / 3, 1e-12);
    EXPECT_NEAR(s.rho, 1.0 / 3, 1e-12);
    EXPECT_NEAR(s.gap, 2.0 / 3, 1e-12);

    const auto c = full_spectrum(three_cycle());
    EXPECT_EQ(c.unit_modulus_count, 3u);
    for (const auto& l : c.eigenvalues) EXPECT_NEAR(std::abs(std::pow(l, 3) - 1.0), 0.0, 1e-10);
}

TEST(Spectrum, ProjectorAlgebraAndUnitDisk) {
    RngStream rng(47, 0);
    for (int t = 0; t < 10; ++t) {
        const auto P = random_chain(8, rng, 0.5);
        const auto s = full_spectrum(P);
        for (const auto& l : s.eigenvalues) EXPECT_LE(std::abs(l), 1.0 + 1e-8);
        const Matrix& Pi0 = s.pi0;
        EXPECT_LT((Pi0 * Pi0 - Pi0).cwiseAbs().maxCoeff(), 1e-8);
        EXPECT_LT((P.matrix() * Pi0 - Pi0).cwiseAbs().maxCoeff(), 1e-8);
        EXPECT_LT((Pi0 * P.matrix() - Pi0).cwiseAbs().maxCoeff(), 1e-8);

        const auto proj = spectral_projectors(P);
        for (std::size_t j = 0; j < proj.size(); ++j)
            for (std::size_t k = 0; k < proj.size(); ++k) {
                const ComplexMatrix prod = proj[j].projector * proj[k].projector;
                const ComplexMatrix expect =
                    j == k ? proj[j].projector : ComplexMatrix::Zero(prod.rows(), prod.cols());
                EXPECT_LT((prod - expect).cwiseAbs().maxCoeff(), 1e-7);
            }
    }
}

TEST(Spectrum, ReversibleChainsHaveRealSpectrum) {
    for (std::size_t N : {5u, 8u, 12u}) {
        const auto s = full_spectrum(ehrenfest_matrix(N));
        for (const auto& l : s.eigenvalues) EXPECT_LT(std::abs(l.imag()), 1e-8);
        // Ehrenfest eigenvalues are 1 - 2k/N
        std::vector<double> re;
        for (const auto& l : s.eigenvalues) re.push_back(l.real());
        std::sort(re.begin(), re.end());
        for (std::size_t k = 0; k <= N; ++k) EXPECT_NEAR(re[k], -1.0 + 2.0 * double(k) / double(N), 1e-8);
    }
}

TEST(Spectrum, ReducibleRaises) {
    try {
        full_spectrum(StochasticMatrix::validate(Matrix::Identity(3, 3)));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::NotIrreducible);
    }
}

TEST(Dunford, TwoStateClosedForm) {
    const auto P = two_state();
    Matrix Pi0(2, 2), Pi1(2, 2);
    Pi0 << 0.5, 0.5, 0.5, 0.5;
    Pi1 << 0.5, -0.5, -0.5, 0.5;
    const Matrix expect = Pi0 + std::pow(-1.0 / 3, 3) * Pi1;
    EXPECT_LT((dunford_power(P, 3) - expect).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((dunford_power(P, 0) - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Dunford, KnightAndRandomChainsMatchDirectPowers) {
    const auto K = knight_chain();
    EXPECT_LT((dunford_power(K, 16) - matrix_power(K.matrix(), 16)).cwiseAbs().maxCoeff(), 1e-7);
    RngStream rng(53, 0);
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 2 + rng.index(15);
        const auto P = random_chain(n, rng, 0.6);
        const std::size_t steps = rng.index(33);
        EXPECT_LT((dunford_power(P, steps) - matrix_power(P.matrix(), steps)).cwiseAbs().maxCoeff(), 1e-7);
    }
}

TEST(Dunford, JordanBlockIsReported) {
    // 1 -> 2 -> 3 -> 3 with an absorbing end has a defective zero eigenvalue.
    Matrix m = Matrix::Zero(3, 3);
    m(0, 1) = 1.0;
    m(1, 2) = 1.0;
    m(2, 2) = 1.0;
    try {
        dunford_power(StochasticMatrix::validate(m), 4);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::NonDiagonalizable);
    }
}

TEST(ReversibleBound, Examples) {
    const auto P = two_state();
    Vector f(2);
    f << 1, 0;
    const auto pi = invariant_distribution(P);
    const auto z = reversible_convergence_bound(P, pi, f, 4);
    EXPECT_NEAR(z.bound, 0.0, 1e-14);
    EXPECT_NEAR(z.exact, 0.0, 1e-14);

    const auto r = reversible_convergence_bound(P, ProbabilityVector::dirac(2, 0), f, 1);
    EXPECT_NEAR(r.exact, 1.0 / 6, 1e-14);
    EXPECT_NEAR(r.bound, 1.0 / 3, 1e-12);

    const auto E = ehrenfest_matrix(6);
    Vector g = Vector::Zero(7);
    g(3) = 1.0;
    const auto e = reversible_convergence_bound(E, ProbabilityVector::uniform_on(7, {2, 3, 4}), g, 10);
    EXPECT_LE(e.exact, e.bound + 1e-10);

    try {
        reversible_convergence_bound(three_cycle(), ProbabilityVector::dirac(3, 0), Vector::Ones(3), 1);
        FAIL();
    } catch (const Error& ex) {
        EXPECT_EQ(ex.code(), Errc::NotReversible);
    }
}

TEST(ReversibleBound, HoldsAlongTrajectories) {
    const auto E = ehrenfest_matrix(8);
    // lazy version to keep rho < 1
    const Matrix lazy = 0.5 * (Matrix::Identity(9, 9) + E.matrix());
    const auto P = StochasticMatrix::validate(lazy);
    Vector f = Vector::Zero(9);
    f(4) = 1.0;
    for (std::size_t n = 0; n <= 40; ++n) {
        const auto b = reversible_convergence_bound(P, ProbabilityVector::uniform_on(9, {3, 4, 5}), f, n);
        EXPECT_LE(b.exact, b.bound + 1e-10) << "n=" << n;
    }
}

TEST(UniformNu, Examples) {
    const auto u = uniform_nu_bounds(ProbabilityVector::uniform(5), {0, 1, 2, 3, 4});
    EXPECT_EQ(u.delta, 0.0);
    EXPECT_NEAR(u.c, 0.0, 1e-15);
    EXPECT_NEAR(u.exact_l1, 0.0, 1e-15);
    EXPECT_LE(u.exact_l1, u.l1_bound + 1e-15);

    const auto pe = invariant_distribution(ehrenfest_matrix(8));
    const auto e = uniform_nu_bounds(pe, {3, 4, 5});
    EXPECT_LE(e.exact_l1, e.l1_bound);
    EXPECT_LE(e.exact_sup, e.sup_bound);

    const auto pk = invariant_distribution(knight_chain());
    const auto k = uniform_nu_bounds(pk, {27});
    EXPECT_LE(k.exact_l1, k.l1_bound);
    EXPECT_LE(k.exact_sup, k.sup_bound * (1 + 1e-12));
    // the corrected sup bound is tight here: nu/pi - 1 = 336/8 - 1
    EXPECT_NEAR(k.exact_sup, 41.0, 1e-9);

    EXPECT_THROW(uniform_nu_bounds(pk, {}), Error);
}

TEST(UniformNu, RandomSetsRespectBounds) {
    RngStream rng(59, 0);
    for (int t = 0; t < 50; ++t) {
        const auto P = random_chain(10, rng, 0.5);
        const auto pi = invariant_distribution(P);
        StateSet X0;
        for (std::size_t x = 0; x < 10; ++x)
            if (rng.bernoulli(0.4)) X0.push_back(x);
        if (X0.empty()) X0.push_back(0);
        const auto b = uniform_nu_bounds(pi, X0);
        EXPECT_LE(b.exact_l1, b.l1_bound + 1e-12);
        EXPECT_LE(b.exact_sup, b.sup_bound + 1e-12);
    }
}

TEST(Rayleigh, MatchesSpectralRadius) {
    RngStream rng(61, 0);
    EXPECT_NEAR(rayleigh_rho(two_state(), 8, rng), 1.0 / 3, 1e-8);
    EXPECT_NEAR(rayleigh_rho(cycle_walk(5, 0.5), 8, rng), std::cos(std::numbers::pi / 5), 1e-6);
    const auto E = ehrenfest_matrix(8);
    const double rho = full_spectrum(E).rho;
    const double est = rayleigh_rho(E, 8, rng);
    EXPECT_NEAR(est, rho, 1e-6);
    EXPECT_LE(est, rho + 1e-8);
    EXPECT_THROW(rayleigh_rho(three_cycle(), 4, rng), Error);
}

TEST(Cycle, SpectraOddAndEven) {
    for (std::size_t N : {5u, 7u, 9u}) {
        const auto s = full_spectrum(cycle_walk(N, 0.5));
        std::vector<double> got, want;
        for (const auto& l : s.eigenvalues) {
            EXPECT_LT(std::abs(l.imag()), 1e-8);
            got.push_back(l.real());
        }
        for (std::size_t k = 0; k < N; ++k) want.push_back(std::cos(2 * std::numbers::pi * double(k) / double(N)));
        std::sort(got.begin(), got.end());
        std::sort(want.begin(), want.end());
        for (std::size_t k = 0; k < N; ++k) EXPECT_NEAR(got[k], want[k], 1e-8);
        EXPECT_NEAR(s.rho, std::cos(std::numbers::pi / double(N)), 1e-8);
    }
    for (std::size_t N : {4u, 6u, 8u}) {
        const auto s = full_spectrum(cycle_walk(N, 0.5));
        EXPECT_EQ(s.unit_modulus_count, 2u);
    }
}
